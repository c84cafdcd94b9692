"""Dense math kernels for the recommendation models.

Small linear-algebra ops with hand-written backward passes, Adam, Glorot
initialization, a finite-difference gradient checker, and a binary
checkpoint format. All math runs in float64; models here are small enough
that precision is worth more than speed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

CKPT_MAGIC = b"NCKP"
CKPT_VERSION = 1


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested op."""


class CheckpointError(ValueError):
    """Checkpoint file is malformed."""


def _require(cond: bool, op: str, *shapes) -> None:
    if not cond:
        raise DimensionError(f"{op}: incompatible shapes {' vs '.join(str(s) for s in shapes)}")


# ---------------------------------------------------------------------------
# forward ops
# ---------------------------------------------------------------------------

def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    _require(m.ndim == 2 and v.ndim == 1 and m.shape[1] == v.shape[0], "matvec", m.shape, v.shape)
    return m @ v


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require(a.ndim == 2 and b.ndim == 2 and a.shape[1] == b.shape[0], "matmul", a.shape, b.shape)
    return a @ b


def outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require(a.ndim == 1 and b.ndim == 1, "outer", a.shape, b.shape)
    return np.outer(a, b)


def concat(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require(a.ndim == 1 and b.ndim == 1, "concat", a.shape, b.shape)
    return np.concatenate([a, b])


def softmax(x: np.ndarray) -> np.ndarray:
    """Shift-invariant softmax (max is subtracted before exponentiation)."""
    x = np.asarray(x, dtype=np.float64)
    z = x - x.max()
    e = np.exp(z)
    return e / e.sum()


def sigmoid(x):
    """Numerically stable logistic function, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh(x):
    return np.tanh(np.asarray(x, dtype=np.float64))


def relu(x):
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


# ---------------------------------------------------------------------------
# backward ops: each takes the upstream gradient first
# ---------------------------------------------------------------------------

def matvec_backward(g: np.ndarray, m: np.ndarray, v: np.ndarray):
    """Gradients of matvec(m, v) w.r.t. (m, v)."""
    _require(g.shape == (m.shape[0],), "matvec_backward", g.shape, m.shape)
    return np.outer(g, v), m.T @ g


def matmul_backward(g: np.ndarray, a: np.ndarray, b: np.ndarray):
    _require(g.shape == (a.shape[0], b.shape[1]), "matmul_backward", g.shape, a.shape, b.shape)
    return g @ b.T, a.T @ g


def outer_backward(g: np.ndarray, a: np.ndarray, b: np.ndarray):
    _require(g.shape == (a.shape[0], b.shape[0]), "outer_backward", g.shape, a.shape, b.shape)
    return g @ b, g.T @ a


def concat_backward(g: np.ndarray, n_first: int):
    return g[:n_first], g[n_first:]


def softmax_backward(g: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Backward through softmax given its output y."""
    _require(g.shape == y.shape, "softmax_backward", g.shape, y.shape)
    return y * (g - np.dot(y, g))


def sigmoid_backward(g, y):
    return g * y * (1.0 - y)


def tanh_backward(g, y):
    return g * (1.0 - y * y)


def relu_backward(g, x):
    return g * (x > 0)


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Optimizer state: one pair of moment accumulators per parameter block."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> dict:
    """One bias-corrected Adam update, applied in place. Returns params."""
    state.t += 1
    b1c = 1.0 - state.beta1 ** state.t
    b2c = 1.0 - state.beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise DimensionError(f"adam_step: grad shape {g.shape} != param shape {p.shape} for '{name}'")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"adam_step: non-finite gradient in block '{name}'")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m += (1.0 - state.beta1) * (g - m)
        v += (1.0 - state.beta2) * (g * g - v)
        p -= state.lr * (m / b1c) / (np.sqrt(v / b2c) + state.eps)
    return params


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------

def finite_diff_check(f, params: dict, h: float = 1e-4) -> float:
    """Compare analytic gradients of f against central differences.

    f maps the params dict to (scalar, grads-dict). Every coordinate of
    every block is perturbed by +-h; returns the max over coordinates of
    |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
    """
    _, analytic = f(params)
    worst = 0.0
    for name, p in params.items():
        a_flat = np.asarray(analytic[name], dtype=np.float64).reshape(-1)
        p_flat = p.reshape(-1)
        for i in range(p_flat.size):
            orig = p_flat[i]
            p_flat[i] = orig + h
            f_plus = f(params)[0]
            p_flat[i] = orig - h
            f_minus = f(params)[0]
            p_flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            err = abs(a_flat[i] - numeric) / max(1e-8, abs(a_flat[i]) + abs(numeric))
            worst = max(worst, err)
    return worst


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------

def save_checkpoint(path, params: dict, config_hash: str) -> None:
    """Write all parameter blocks (sorted by name) as little-endian float64."""
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<I", CKPT_VERSION))
        hash_bytes = config_hash.encode("utf-8")
        fh.write(struct.pack("<H", len(hash_bytes)))
        fh.write(hash_bytes)
        fh.write(struct.pack("<I", len(params)))
        for name in sorted(params):
            block = np.asarray(params[name], dtype=np.float64)
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<B", block.ndim))
            for d in block.shape:
                fh.write(struct.pack("<I", d))
            fh.write(block.astype("<f8").tobytes(order="C"))


def load_checkpoint(path):
    """Read a checkpoint; returns (params dict, config hash)."""
    with open(path, "rb") as fh:
        data = fh.read()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(data):
            raise CheckpointError(f"truncated checkpoint at offset {off}")
        chunk = data[off:off + n]
        off += n
        return chunk

    if take(4) != CKPT_MAGIC:
        raise CheckpointError("bad checkpoint magic")
    (version,) = struct.unpack("<I", take(4))
    if version != CKPT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (hash_len,) = struct.unpack("<H", take(2))
    config_hash = take(hash_len).decode("utf-8")
    (n_blocks,) = struct.unpack("<I", take(4))
    params = {}
    for _ in range(n_blocks):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        shape = tuple(struct.unpack("<I", take(4))[0] for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        params[name] = np.frombuffer(take(count * 8), dtype="<f8").reshape(shape).copy()
    return params, config_hash

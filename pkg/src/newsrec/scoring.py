"""Scoring heads mapping (user vector, candidate vector) to a click score.

Four variants of increasing expressiveness:
    inner      s = sigmoid(c . u)
    bilinear   s = sigmoid(c' A u), off-diagonal entries of A couple
               different dimensions of u and c
    nonlinear  s = sigmoid(c . act(A u + b))
    mlp        s = sigmoid(W2 . act(W1 [u || c] + b)), no outer bias by
               default

All forwards return probabilities strictly inside (0, 1); the logit-level
functions used by training expose hand-derived backward passes.
"""

from __future__ import annotations

import numpy as np

from . import numerics as nm

VARIANTS = ("inner", "bilinear", "nonlinear", "mlp")

_ACTIVATIONS = {
    "relu": (nm.relu, nm.relu_backward),
    "tanh": (nm.tanh, lambda g, z: g * (1.0 - np.tanh(z) ** 2)),
}


def _sigmoid_scalar(z: float) -> float:
    return float(nm.sigmoid(np.asarray(z, dtype=np.float64)))


# ---------------------------------------------------------------------------
# probability-level API
# ---------------------------------------------------------------------------

def score_inner(u: np.ndarray, c: np.ndarray) -> float:
    if u.shape != c.shape:
        raise nm.DimensionError(f"score_inner: {u.shape} vs {c.shape}")
    return _sigmoid_scalar(np.dot(c, u))


def score_bilinear(u: np.ndarray, c: np.ndarray, A: np.ndarray) -> float:
    if A.shape != (c.shape[0], u.shape[0]):
        raise nm.DimensionError(f"score_bilinear: A {A.shape} vs c {c.shape}, u {u.shape}")
    return _sigmoid_scalar(np.dot(c, nm.matvec(A, u)))


def score_nonlinear(u: np.ndarray, c: np.ndarray, A: np.ndarray, b: np.ndarray, activation: str = "relu") -> float:
    act, _ = _ACTIVATIONS[activation]
    return _sigmoid_scalar(np.dot(c, act(nm.matvec(A, u) + b)))


def score_mlp(u: np.ndarray, c: np.ndarray, W1: np.ndarray, b: np.ndarray, W2: np.ndarray,
              activation: str = "relu", b_out: float | None = None) -> float:
    act, _ = _ACTIVATIONS[activation]
    hidden = act(nm.matvec(W1, nm.concat(u, c)) + b)
    logit = np.dot(W2, hidden)
    if b_out is not None:
        logit = logit + b_out
    return _sigmoid_scalar(logit)


# ---------------------------------------------------------------------------
# logit-level API with backward, shared by all variants
# ---------------------------------------------------------------------------

def score_logit(u: np.ndarray, c: np.ndarray, params: dict, variant: str, activation: str = "relu"):
    """Pre-sigmoid score; returns (logit, cache) for the backward pass."""
    if variant == "inner":
        return float(np.dot(c, u)), {"v": "inner", "u": u, "c": c}
    if variant == "bilinear":
        Au = nm.matvec(params["score.A"], u)
        return float(np.dot(c, Au)), {"v": "bilinear", "u": u, "c": c, "Au": Au}
    if variant == "nonlinear":
        act, dact = _ACTIVATIONS[activation]
        z = nm.matvec(params["score.A"], u) + params["score.b"]
        y = act(z)
        return float(np.dot(c, y)), {"v": "nonlinear", "u": u, "c": c, "z": z, "y": y, "dact": dact}
    if variant == "mlp":
        act, dact = _ACTIVATIONS[activation]
        x = nm.concat(u, c)
        z = nm.matvec(params["score.W1"], x) + params["score.b"]
        h = act(z)
        logit = float(np.dot(params["score.W2"], h))
        if "score.b_out" in params:
            logit += float(params["score.b_out"][0])
        return logit, {"v": "mlp", "x": x, "z": z, "h": h, "dim_u": u.shape[0], "dact": dact}
    raise ValueError(f"unknown scoring variant {variant!r}")


def score_backward(cache, d_logit: float, params: dict, grads: dict):
    """Accumulate scoring-head gradients; returns (du, dc)."""
    v = cache["v"]
    if v == "inner":
        return d_logit * cache["c"], d_logit * cache["u"]
    if v == "bilinear":
        grads["score.A"] += d_logit * np.outer(cache["c"], cache["u"])
        du = params["score.A"].T @ (d_logit * cache["c"])
        dc = d_logit * cache["Au"]
        return du, dc
    if v == "nonlinear":
        dy = d_logit * cache["c"]
        dz = cache["dact"](dy, cache["z"])
        grads["score.A"] += np.outer(dz, cache["u"])
        grads["score.b"] += dz
        du = params["score.A"].T @ dz
        dc = d_logit * cache["y"]
        return du, dc
    if v == "mlp":
        grads["score.W2"] += d_logit * cache["h"]
        dh = d_logit * params["score.W2"]
        dz = cache["dact"](dh, cache["z"])
        grads["score.W1"] += np.outer(dz, cache["x"])
        grads["score.b"] += dz
        if "score.b_out" in params:
            grads["score.b_out"] += d_logit
        dx = params["score.W1"].T @ dz
        return nm.concat_backward(dx, cache["dim_u"])
    raise ValueError(f"unknown scoring variant {v!r}")

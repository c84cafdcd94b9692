"""Full model assembly: configuration, parameter init, loss and gradients.

A model is a plain dict of named float64 parameter blocks plus a
ModelConfig describing which blocks exist. The forward pass encodes every
history and candidate title, pools the history into a user vector, and
scores each candidate; the backward pass hand-propagates the mean binary
cross-entropy through the whole stack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import encoders, numerics as nm, scoring

LOSS_CLAMP = 1e-12


@dataclass
class ModelConfig:
    dim: int = 256                      # news/user vector width
    news_encoder: str = "attention"     # attention | mean
    user_encoder: str = "attention"     # attention | mean
    history_transform: str = "none"     # none | linear_relu
    scoring: str = "inner"              # inner | bilinear | nonlinear | mlp
    activation: str = "relu"            # nonlinear / mlp activation
    final_relu: bool = True
    att_dim: int = 0                    # 0 means: use dim
    mlp_hidden: int = 0                 # 0 means: use dim // 2
    mlp_out_bias: bool = False

    def validate(self) -> None:
        if self.dim <= 0:
            raise ValueError("model.dim must be positive")
        if self.news_encoder not in ("attention", "mean"):
            raise ValueError(f"model.news_encoder: unknown mode {self.news_encoder!r}")
        if self.user_encoder not in ("attention", "mean"):
            raise ValueError(f"model.user_encoder: unknown mode {self.user_encoder!r}")
        if self.history_transform not in ("none", "linear_relu"):
            raise ValueError(f"model.history_transform: unknown value {self.history_transform!r}")
        if self.scoring not in scoring.VARIANTS:
            raise ValueError(f"model.scoring: unknown variant {self.scoring!r}")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"model.activation: unknown activation {self.activation!r}")

    @property
    def attention_dim(self) -> int:
        return self.att_dim or self.dim

    @property
    def mlp_hidden_dim(self) -> int:
        return self.mlp_hidden or max(1, self.dim // 2)


def block_shapes(cfg: ModelConfig, embed_dim: int) -> dict[str, tuple]:
    """Shapes of every trainable block implied by the configuration."""
    cfg.validate()
    m, a = cfg.dim, cfg.attention_dim
    shapes: dict[str, tuple] = {}
    if cfg.news_encoder == "attention":
        shapes["news_att.W"] = (a, embed_dim)
        shapes["news_att.b"] = (a,)
        shapes["news_att.q"] = (a,)
    shapes["news_l1.W"] = (m, embed_dim)
    shapes["news_l1.b"] = (m,)
    shapes["news_l2.W"] = (m, m)
    shapes["news_l2.b"] = (m,)
    if cfg.history_transform == "linear_relu":
        shapes["user_tr.W"] = (m, m)
        shapes["user_tr.b"] = (m,)
    if cfg.user_encoder == "attention":
        shapes["user_att.W"] = (a, m)
        shapes["user_att.b"] = (a,)
        shapes["user_att.q"] = (a,)
    if cfg.scoring == "bilinear":
        shapes["score.A"] = (m, m)
    elif cfg.scoring == "nonlinear":
        shapes["score.A"] = (m, m)
        shapes["score.b"] = (m,)
    elif cfg.scoring == "mlp":
        hidden = cfg.mlp_hidden_dim
        shapes["score.W1"] = (hidden, 2 * m)
        shapes["score.b"] = (hidden,)
        shapes["score.W2"] = (hidden,)
        if cfg.mlp_out_bias:
            shapes["score.b_out"] = (1,)
    return shapes


def init_params(cfg: ModelConfig, embed_dim: int, seed: int,
                input_std: float = 1.0) -> dict[str, np.ndarray]:
    """Glorot-uniform matrices, zero biases, in fixed block order.

    input_std is the per-coordinate standard deviation of the token
    embeddings; the two blocks that consume raw embeddings are widened by
    1/input_std so their pre-activations start at unit scale regardless of
    the provider. The bilinear interaction matrix starts at the identity,
    the point where that head reduces to the plain inner product; the
    nonlinear head keeps a random matrix so its activation does not start
    exactly on the ReLU kink.
    """
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in block_shapes(cfg, embed_dim).items():
        if name.endswith(".b") or name.endswith(".b_out"):
            params[name] = np.zeros(shape)
        elif name == "score.A" and cfg.scoring == "bilinear":
            params[name] = np.eye(shape[0])
        elif name.endswith(".q") or name.endswith(".W2"):
            # weight vectors: fan out of 1
            params[name] = nm.glorot_uniform(rng, shape[0], 1, shape)
        else:
            fan_out, fan_in = shape
            params[name] = nm.glorot_uniform(rng, fan_in, fan_out, shape)
            if name in ("news_att.W", "news_l1.W") and input_std != 1.0:
                params[name] /= input_std
    return params


def zero_grads(params: dict) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(p) for name, p in params.items()}


# ---------------------------------------------------------------------------
# forward / backward over one sample
# ---------------------------------------------------------------------------

def _encode_all(mats, params, cfg):
    vecs, caches = [], []
    for E in mats:
        n, cache = encoders.encode_news(E, params, mode=cfg.news_encoder, final_relu=cfg.final_relu)
        vecs.append(n)
        caches.append(cache)
    return vecs, caches


def user_vector(params: dict, cfg: ModelConfig, history_mats) -> np.ndarray:
    hvecs, _ = _encode_all(history_mats, params, cfg)
    u, _, _ = encoders.encode_user(
        np.stack(hvecs), params, mode=cfg.user_encoder, transform=cfg.history_transform
    )
    return u


def predict_scores(params: dict, cfg: ModelConfig, history_mats, cand_mats) -> np.ndarray:
    """Click probabilities for every candidate, given a non-empty history."""
    u = user_vector(params, cfg, history_mats)
    cvecs, _ = _encode_all(cand_mats, params, cfg)
    logits = np.array([scoring.score_logit(u, c, params, cfg.scoring, cfg.activation)[0] for c in cvecs])
    return nm.sigmoid(logits)


def bce_from_scores(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy with scores clamped away from {0, 1}."""
    s = np.clip(np.asarray(scores, dtype=np.float64), LOSS_CLAMP, 1.0 - LOSS_CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    return float(np.mean(-(y * np.log(s) + (1.0 - y) * np.log(1.0 - s))))


def loss_and_grads(params: dict, cfg: ModelConfig, history_mats, cand_mats, labels,
                   grads: dict | None = None):
    """Mean BCE over the candidates of one sample, plus parameter gradients.

    Gradients are accumulated into `grads` (allocated if omitted).
    Returns (loss, grads, scores).
    """
    if grads is None:
        grads = zero_grads(params)
    hvecs, hcaches = _encode_all(history_mats, params, cfg)
    H = np.stack(hvecs)
    u, _, ucache = encoders.encode_user(H, params, mode=cfg.user_encoder, transform=cfg.history_transform)
    cvecs, ccaches = _encode_all(cand_mats, params, cfg)

    logits, scaches = [], []
    for c in cvecs:
        z, sc = scoring.score_logit(u, c, params, cfg.scoring, cfg.activation)
        logits.append(z)
        scaches.append(sc)
    scores = nm.sigmoid(np.array(logits))
    y = np.asarray(labels, dtype=np.float64)
    loss = bce_from_scores(scores, y)

    d_logits = (scores - y) / len(cvecs)
    du_total = np.zeros_like(u)
    for sc, dz, ccache in zip(scaches, d_logits, ccaches):
        du, dc = scoring.score_backward(sc, float(dz), params, grads)
        du_total += du
        encoders.encode_news_backward(ccache, dc, params, grads)
    dH = encoders.encode_user_backward(ucache, du_total, params, grads)
    for hcache, dh in zip(hcaches, dH):
        encoders.encode_news_backward(hcache, dh, params, grads)
    return loss, grads, scores

"""News and user encoders.

The news encoder pools a title's token embeddings with additive attention
(or a plain mean) and refines the pooled vector with two ReLU linear
layers. The user encoder pools the encoded history the same way, with an
optional per-item linear+ReLU transform applied before pooling. All
functions are pure given the parameter dict; backward passes accumulate
into a caller-owned gradient dict.

Parameter dict keys used here:
    news_att.W, news_att.b, news_att.q
    news_l1.W, news_l1.b, news_l2.W, news_l2.b
    user_att.W, user_att.b, user_att.q
    user_tr.W, user_tr.b
"""

from __future__ import annotations

import numpy as np

from . import numerics as nm


class EmptyInputError(ValueError):
    """Attention or pooling was asked to run over zero rows."""


# ---------------------------------------------------------------------------
# additive attention: alpha_i = softmax_i(q . tanh(W e_i + b)), pooled = sum
# ---------------------------------------------------------------------------

def additive_attention(E: np.ndarray, W: np.ndarray, b: np.ndarray, q: np.ndarray):
    """Pool rows of E into one vector; returns (pooled, weights, cache)."""
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[0] == 0:
        raise EmptyInputError(f"additive_attention: need a non-empty 2-d input, got shape {E.shape}")
    Z = nm.matmul(E, W.T) + b                      # L x d_att
    T = nm.tanh(Z)
    scores = nm.matvec(T, q)                       # L
    alpha = nm.softmax(scores)
    pooled = E.T @ alpha
    cache = {"E": E, "T": T, "alpha": alpha, "W": W, "q": q}
    return pooled, alpha, cache


def additive_attention_backward(cache, d_pooled: np.ndarray):
    """Gradients of the pooled vector w.r.t. (E, W, b, q)."""
    E, T, alpha, W, q = cache["E"], cache["T"], cache["alpha"], cache["W"], cache["q"]
    d_alpha = nm.matvec(E, d_pooled)
    d_scores = nm.softmax_backward(d_alpha, alpha)
    dq = T.T @ d_scores
    dT = np.outer(d_scores, q)
    dZ = nm.tanh_backward(dT, T)
    dW = dZ.T @ E
    db = dZ.sum(axis=0)
    dE = dZ @ W + np.outer(alpha, d_pooled)
    return dE, dW, db, dq


def mean_pool(E: np.ndarray) -> np.ndarray:
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[0] == 0:
        raise EmptyInputError(f"mean_pool: need a non-empty 2-d input, got shape {E.shape}")
    return E.mean(axis=0)


def mean_pool_backward(d_pooled: np.ndarray, n_rows: int) -> np.ndarray:
    return np.tile(d_pooled / n_rows, (n_rows, 1))


# ---------------------------------------------------------------------------
# news encoder
# ---------------------------------------------------------------------------

def encode_news(E: np.ndarray, params: dict, mode: str = "attention", final_relu: bool = True):
    """Encode one title's token-embedding matrix into a news vector.

    Returns (vector, cache). mode selects attention or mean pooling;
    final_relu controls whether the second linear layer is also rectified.
    """
    if mode == "attention":
        pooled, _, att_cache = additive_attention(E, params["news_att.W"], params["news_att.b"], params["news_att.q"])
    elif mode == "mean":
        pooled, att_cache = mean_pool(E), None
    else:
        raise ValueError(f"unknown news encoder mode {mode!r}")
    z1 = nm.matvec(params["news_l1.W"], pooled) + params["news_l1.b"]
    a1 = nm.relu(z1)
    z2 = nm.matvec(params["news_l2.W"], a1) + params["news_l2.b"]
    n = nm.relu(z2) if final_relu else z2
    cache = {
        "mode": mode, "final_relu": final_relu, "att": att_cache,
        "E_rows": E.shape[0], "pooled": pooled, "z1": z1, "a1": a1, "z2": z2,
    }
    return n, cache


def encode_news_backward(cache, dn: np.ndarray, params: dict, grads: dict) -> np.ndarray:
    """Accumulate encoder gradients for one news item; returns dE."""
    dz2 = nm.relu_backward(dn, cache["z2"]) if cache["final_relu"] else dn
    grads["news_l2.W"] += np.outer(dz2, cache["a1"])
    grads["news_l2.b"] += dz2
    da1 = params["news_l2.W"].T @ dz2
    dz1 = nm.relu_backward(da1, cache["z1"])
    grads["news_l1.W"] += np.outer(dz1, cache["pooled"])
    grads["news_l1.b"] += dz1
    d_pooled = params["news_l1.W"].T @ dz1
    if cache["mode"] == "attention":
        dE, dW, db, dq = additive_attention_backward(cache["att"], d_pooled)
        grads["news_att.W"] += dW
        grads["news_att.b"] += db
        grads["news_att.q"] += dq
    else:
        dE = mean_pool_backward(d_pooled, cache["E_rows"])
    return dE


# ---------------------------------------------------------------------------
# user encoder
# ---------------------------------------------------------------------------

def encode_user(H: np.ndarray, params: dict, mode: str = "attention", transform: str = "none"):
    """Pool encoded history vectors (rows of H) into one user vector.

    transform="linear_relu" first maps each history vector through a shared
    linear+ReLU layer. The pooled output is a convex combination of the
    (transformed) rows, so visit order does not matter.
    """
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] == 0:
        raise EmptyInputError("encode_user: empty history")
    if transform == "linear_relu":
        Zt = nm.matmul(H, params["user_tr.W"].T) + params["user_tr.b"]
        Ht = nm.relu(Zt)
    elif transform == "none":
        Zt, Ht = None, H
    else:
        raise ValueError(f"unknown history transform {transform!r}")
    if mode == "attention":
        u, weights, att_cache = additive_attention(Ht, params["user_att.W"], params["user_att.b"], params["user_att.q"])
    elif mode == "mean":
        u, weights, att_cache = mean_pool(Ht), np.full(Ht.shape[0], 1.0 / Ht.shape[0]), None
    else:
        raise ValueError(f"unknown user encoder mode {mode!r}")
    cache = {"mode": mode, "transform": transform, "H": H, "Zt": Zt, "Ht": Ht, "att": att_cache}
    return u, weights, cache


def encode_user_backward(cache, du: np.ndarray, params: dict, grads: dict) -> np.ndarray:
    """Accumulate user-encoder gradients; returns dH (one row per history item)."""
    if cache["mode"] == "attention":
        dHt, dW, db, dq = additive_attention_backward(cache["att"], du)
        grads["user_att.W"] += dW
        grads["user_att.b"] += db
        grads["user_att.q"] += dq
    else:
        dHt = mean_pool_backward(du, cache["Ht"].shape[0])
    if cache["transform"] == "linear_relu":
        dZt = nm.relu_backward(dHt, cache["Zt"])
        grads["user_tr.W"] += dZt.T @ cache["H"]
        grads["user_tr.b"] += dZt.sum(axis=0)
        dH = dZt @ params["user_tr.W"]
    else:
        dH = dHt
    return dH

"""Per-impression ranking metrics and dev-set evaluation.

Metrics are computed per impression and averaged (as percentages).
Cold-start impressions receive i.i.d. uniform scores from a seeded,
session-keyed generator, so evaluation order never affects results.
Per-impression mean BCE losses are collected as the sample for the
dominance test.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, Session
from .embeddings import hash64
from .model import ModelConfig, bce_from_scores, predict_scores


@dataclass
class ScoredImpression:
    session_id: str
    scores: list[float]
    labels: list[bool]
    loss: float
    cold_start: bool


@dataclass
class MetricsReport:
    auc: float
    mrr: float
    ndcg5: float
    ndcg10: float
    n_impressions: int
    n_cold_start: int
    n_unrankable: int

    def to_dict(self) -> dict:
        return {
            "auc": self.auc, "mrr": self.mrr, "ndcg5": self.ndcg5, "ndcg10": self.ndcg10,
            "n_impressions": self.n_impressions, "n_cold_start": self.n_cold_start,
            "n_unrankable": self.n_unrankable,
        }


# ---------------------------------------------------------------------------
# metrics (all rank-based: invariant under strictly increasing score maps)
# ---------------------------------------------------------------------------

def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """Ascending 1-based ranks with ties sharing their average rank."""
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    i = 0
    while i < len(scores):
        j = i
        while j < len(scores) and scores[order[j]] == scores[order[i]]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0
        i = j
    return ranks


def auc(scores, labels) -> float | None:
    """P(random positive outranks random negative), ties counting 0.5.

    None when the impression has no positive or no negative.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(s)
    return (ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _descending_order(scores: np.ndarray) -> np.ndarray:
    # stable: equal scores keep their original index order
    return np.argsort(-scores, kind="mergesort")


def mrr(scores, labels) -> float:
    """Mean over clicked items of 1/rank in the score-sorted list."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    order = _descending_order(s)
    rr = [1.0 / (pos + 1) for pos, idx in enumerate(order) if y[idx]]
    return sum(rr) / len(rr)


def ndcg(scores, labels, k: int) -> float:
    # sums run sequentially in rank order, exactly as the definition reads
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    order = _descending_order(s)
    dcg = sum(y[idx] / math.log2(pos + 2) for pos, idx in enumerate(order[:k]))
    n_pos = int(np.asarray(labels, dtype=bool).sum())
    ideal = sum(1.0 / math.log2(pos + 2) for pos in range(min(k, n_pos)))
    return dcg / ideal


# ---------------------------------------------------------------------------
# impression scoring
# ---------------------------------------------------------------------------

def score_impression(session: Session, params: dict, cfg: ModelConfig, provider, news_map,
                     rng: np.random.Generator, history_cap: int = 25) -> ScoredImpression:
    """Model scores for one impression; uniform random scores on cold start."""
    labels = [y for _, y in session.shown]
    if not session.history:
        scores = rng.uniform(0.0, 1.0, size=len(session.shown))
        cold = True
    else:
        history = session.history[-history_cap:]
        def mat(news_id):
            if news_id not in news_map:
                raise KeyError(f"session {session.session_id}: unknown news id {news_id!r}")
            return np.asarray(provider.get(news_map[news_id]), dtype=np.float64)
        scores = predict_scores(params, cfg,
                                [mat(nid) for nid in history],
                                [mat(nid) for nid, _ in session.shown])
        cold = False
    return ScoredImpression(
        session_id=session.session_id,
        scores=[float(s) for s in scores],
        labels=labels,
        loss=bce_from_scores(np.asarray(scores), np.asarray(labels, dtype=np.float64)),
        cold_start=cold,
    )


def evaluate(corpus: Corpus, params: dict, cfg: ModelConfig, provider, seed: int,
             history_cap: int = 25) -> tuple[MetricsReport, list[ScoredImpression]]:
    """Score every dev impression and aggregate the ranking metrics.

    Every impression contributes a loss sample (cold starts included);
    impressions lacking a positive or a negative are excluded from the
    metric means and counted as unrankable.
    """
    if not corpus.dev_sessions:
        raise ValueError("evaluate: empty dev set")
    impressions = []
    for sess in corpus.dev_sessions:
        rng = np.random.default_rng([seed, hash64(sess.session_id, seed)])
        impressions.append(
            score_impression(sess, params, cfg, provider, corpus.news, rng, history_cap=history_cap)
        )
    aucs, mrrs, n5s, n10s = [], [], [], []
    n_cold = n_unrankable = 0
    for imp in impressions:
        if imp.cold_start:
            n_cold += 1
        a = auc(imp.scores, imp.labels)
        if a is None:
            n_unrankable += 1
            continue
        aucs.append(a)
        mrrs.append(mrr(imp.scores, imp.labels))
        n5s.append(ndcg(imp.scores, imp.labels, 5))
        n10s.append(ndcg(imp.scores, imp.labels, 10))
    report = MetricsReport(
        auc=100.0 * float(np.mean(aucs)),
        mrr=100.0 * float(np.mean(mrrs)),
        ndcg5=100.0 * float(np.mean(n5s)),
        ndcg10=100.0 * float(np.mean(n10s)),
        n_impressions=len(impressions),
        n_cold_start=n_cold,
        n_unrankable=n_unrankable,
    )
    return report, impressions


# ---------------------------------------------------------------------------
# dump formats
# ---------------------------------------------------------------------------

def dump_impressions(impressions, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for imp in impressions:
            fh.write(json.dumps({
                "session_id": imp.session_id, "scores": imp.scores,
                "labels": [int(y) for y in imp.labels], "loss": imp.loss,
                "cold_start": imp.cold_start,
            }, sort_keys=True) + "\n")


def dump_losses(impressions, path) -> None:
    """One per-impression mean BCE loss per line (dominance-test input)."""
    with open(path, "w", encoding="utf-8") as fh:
        for imp in impressions:
            fh.write(f"{imp.loss!r}\n")


def dump_loss_histogram(impressions, path, bins: int = 40) -> None:
    losses = np.array([imp.loss for imp in impressions])
    counts, edges = np.histogram(losses, bins=bins)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin_lo,bin_hi,count\n")
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            fh.write(f"{lo!r},{hi!r},{int(c)}\n")

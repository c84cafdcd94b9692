"""Negative-sampling click-prediction trainer.

Each clicked item in a session becomes one training sample: the click plus
K negatives drawn from the session's non-clicked impressions (with
replacement only when fewer than K are available). Samples are re-drawn
and re-shuffled every epoch from a seeded stream, so runs are exactly
reproducible.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import model as model_mod
from .corpus import Corpus, Session
from .model import ModelConfig, bce_from_scores, block_shapes, init_params, loss_and_grads, zero_grads
from .numerics import AdamState, adam_step

LOG_EVERY = 100


@dataclass
class TrainConfig:
    k_negatives: int = 4
    batch_size: int = 64
    lr: float = 1e-4
    epochs: int = 5
    history_cap: int = 25
    seed: int = 0

    def validate(self) -> None:
        for name in ("k_negatives", "batch_size", "lr", "epochs", "history_cap"):
            if getattr(self, name) < 0 or (name != "lr" and getattr(self, name) < 1):
                raise ValueError(f"train.{name} must be positive")


@dataclass
class TrainSample:
    history: list[str]              # news ids, capped to the most recent
    candidates: list[str]           # clicked item first, then K negatives
    labels: list[int]


@dataclass
class TrainStats:
    epoch_losses: list[float] = field(default_factory=list)
    n_samples: int = 0
    skipped_sessions: int = 0       # no positives or no negatives
    cold_start_sessions: int = 0    # empty history, excluded from training
    log: list[dict] = field(default_factory=list)


def bce_loss(scores, labels) -> float:
    """Mean binary cross-entropy over one sample's candidates."""
    return bce_from_scores(scores, labels)


def draw_samples(session: Session, k: int, rng: np.random.Generator) -> list[TrainSample]:
    """One sample per clicked item; empty when the session has no negatives."""
    clicked = [nid for nid, y in session.shown if y]
    negatives = [nid for nid, y in session.shown if not y]
    if not clicked or not negatives:
        return []
    samples = []
    for pos in clicked:
        if len(negatives) >= k:
            negs = list(rng.choice(negatives, size=k, replace=False))
        else:
            negs = list(rng.choice(negatives, size=k, replace=True))
        samples.append(TrainSample(
            history=list(session.history),
            candidates=[pos] + negs,
            labels=[1] + [0] * k,
        ))
    return samples


def count_params(cfg: ModelConfig, embed_dim: int) -> tuple[dict[str, int], int]:
    """Exact per-block and total trainable parameter counts."""
    counts = {name: int(np.prod(shape)) for name, shape in block_shapes(cfg, embed_dim).items()}
    return counts, sum(counts.values())


class _MatrixCache:
    """Per-news-id embedding matrices, resolved once per run."""

    def __init__(self, provider, news_map):
        self.provider = provider
        self.news_map = news_map
        self._cache = {}

    def __call__(self, news_id: str) -> np.ndarray:
        mat = self._cache.get(news_id)
        if mat is None:
            mat = np.asarray(self.provider.get(self.news_map[news_id]), dtype=np.float64)
            self._cache[news_id] = mat
        return mat


def train(corpus: Corpus, provider, model_cfg: ModelConfig, train_cfg: TrainConfig,
          log_path=None) -> tuple[dict, TrainStats]:
    """Train on corpus.train_sessions; returns (params, stats).

    Cold-start sessions are excluded (a user vector needs history). The
    JSON-lines log carries {epoch, batch, mean_loss, wall_ms} every
    LOG_EVERY batches and once per epoch end.
    """
    train_cfg.validate()
    params = init_params(model_cfg, provider.dim, seed=train_cfg.seed,
                         input_std=getattr(provider, "row_std", 1.0))
    adam = AdamState(lr=train_cfg.lr)
    mats = _MatrixCache(provider, corpus.news)
    stats = TrainStats()
    t0 = time.monotonic()
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None

    def emit(epoch, batch, mean_loss):
        entry = {"epoch": epoch, "batch": batch, "mean_loss": mean_loss,
                 "wall_ms": int((time.monotonic() - t0) * 1000)}
        stats.log.append(entry)
        if log_fh:
            log_fh.write(json.dumps(entry) + "\n")

    try:
        for epoch in range(train_cfg.epochs):
            rng = np.random.default_rng([train_cfg.seed, 1, epoch])
            samples: list[TrainSample] = []
            for sess in corpus.train_sessions:
                if not sess.history:
                    if epoch == 0:
                        stats.cold_start_sessions += 1
                    continue
                drawn = draw_samples(sess, train_cfg.k_negatives, rng)
                if not drawn:
                    if epoch == 0:
                        stats.skipped_sessions += 1
                    continue
                samples.extend(drawn)
            order = rng.permutation(len(samples))

            epoch_loss, epoch_count = 0.0, 0
            window = []
            for batch_no, start in enumerate(range(0, len(samples), train_cfg.batch_size)):
                batch = [samples[i] for i in order[start:start + train_cfg.batch_size]]
                grads = zero_grads(params)
                batch_loss = 0.0
                for sample in batch:
                    history = sample.history[-train_cfg.history_cap:]
                    loss, _, _ = loss_and_grads(
                        params, model_cfg,
                        [mats(nid) for nid in history],
                        [mats(nid) for nid in sample.candidates],
                        sample.labels, grads=grads,
                    )
                    batch_loss += loss
                if not np.isfinite(batch_loss):
                    raise FloatingPointError(
                        f"non-finite loss in epoch {epoch} batch {batch_no}; sessions "
                        f"{[s.candidates[0] for s in batch][:8]}"
                    )
                for g in grads.values():
                    g /= len(batch)
                adam_step(params, grads, adam)
                mean_loss = batch_loss / len(batch)
                epoch_loss += batch_loss
                epoch_count += len(batch)
                window.append(mean_loss)
                if (batch_no + 1) % LOG_EVERY == 0:
                    emit(epoch, batch_no, float(np.mean(window)))
                    window = []
            stats.n_samples += epoch_count
            epoch_mean = epoch_loss / max(1, epoch_count)
            stats.epoch_losses.append(epoch_mean)
            emit(epoch, -1, epoch_mean)
    finally:
        if log_fh:
            log_fh.close()
    return params, stats

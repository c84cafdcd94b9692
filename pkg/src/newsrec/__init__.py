"""Content-based news recommendation testbed with interchangeable scoring heads."""

from .config import ExperimentConfig, config_hash, load_config
from .corpus import Corpus, NewsItem, Session, SynthConfig, generate_synthetic, parse_behaviors, parse_news
from .dominance import DominanceReport, dominance_test, epsilon_hat
from .embeddings import HashedProvider, open_store, write_store
from .evaluation import MetricsReport, ScoredImpression, auc, evaluate, mrr, ndcg
from .model import ModelConfig, init_params, loss_and_grads, predict_scores
from .numerics import AdamState, adam_step, finite_diff_check, load_checkpoint, save_checkpoint
from .training import TrainConfig, TrainSample, bce_loss, count_params, draw_samples, train

__all__ = [
    "AdamState", "Corpus", "DominanceReport", "ExperimentConfig", "HashedProvider",
    "MetricsReport", "ModelConfig", "NewsItem", "ScoredImpression", "Session",
    "SynthConfig", "TrainConfig", "TrainSample", "adam_step", "auc", "bce_loss",
    "config_hash", "count_params", "dominance_test", "draw_samples", "epsilon_hat",
    "evaluate", "finite_diff_check", "generate_synthetic", "init_params",
    "load_checkpoint", "load_config", "loss_and_grads", "mrr", "ndcg", "open_store",
    "parse_behaviors", "parse_news", "predict_scores", "save_checkpoint", "train",
    "write_store",
]

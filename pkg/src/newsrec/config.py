"""Experiment configuration: flat dotted-key JSON with CLI overrides.

A config file may use nested objects or flat dotted keys; both normalize
to the same flat map, onto which --key=value overrides are applied before
validation. Unknown keys and type errors are reported with their full
field path.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .corpus import SynthConfig
from .model import ModelConfig
from .training import TrainConfig


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ExperimentConfig:
    corpus_source: str = "synth"            # synth | mind
    synth: SynthConfig = field(default_factory=SynthConfig)
    mind_news: str | None = None
    mind_train_behaviors: str | None = None
    mind_dev_behaviors: str | None = None
    emb_source: str = "hashed"              # hashed | nemb
    hashed_dim: int = 64
    hashed_seed: int = 0
    nemb_path: str | None = None
    max_tokens: int = 30
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval_seed: int = 0
    out_dir: str = "runs/out"


# flat key -> (object attribute path, type)
_SCHEMA: dict[str, tuple[str, type]] = {
    "corpus.source": ("corpus_source", str),
    "corpus.synth.n_users": ("synth.n_users", int),
    "corpus.synth.n_news": ("synth.n_news", int),
    "corpus.synth.n_sessions": ("synth.n_sessions", int),
    "corpus.synth.candidates_per_session": ("synth.candidates_per_session", int),
    "corpus.synth.latent_dim": ("synth.latent_dim", int),
    "corpus.synth.interaction": ("synth.interaction", str),
    "corpus.synth.noise_std": ("synth.noise_std", float),
    "corpus.synth.seed": ("synth.seed", int),
    "corpus.mind.news": ("mind_news", str),
    "corpus.mind.train_behaviors": ("mind_train_behaviors", str),
    "corpus.mind.dev_behaviors": ("mind_dev_behaviors", str),
    "embeddings.source": ("emb_source", str),
    "embeddings.hashed.dim": ("hashed_dim", int),
    "embeddings.hashed.seed": ("hashed_seed", int),
    "embeddings.nemb.path": ("nemb_path", str),
    "embeddings.max_tokens": ("max_tokens", int),
    "model.dim": ("model.dim", int),
    "model.news_encoder": ("model.news_encoder", str),
    "model.user_encoder": ("model.user_encoder", str),
    "model.history_transform": ("model.history_transform", str),
    "model.scoring": ("model.scoring", str),
    "model.activation": ("model.activation", str),
    "model.final_relu": ("model.final_relu", bool),
    "model.att_dim": ("model.att_dim", int),
    "model.mlp_hidden": ("model.mlp_hidden", int),
    "model.mlp_out_bias": ("model.mlp_out_bias", bool),
    "train.k_negatives": ("train.k_negatives", int),
    "train.batch_size": ("train.batch_size", int),
    "train.lr": ("train.lr", float),
    "train.epochs": ("train.epochs", int),
    "train.history_cap": ("train.history_cap", int),
    "train.seed": ("train.seed", int),
    "eval.seed": ("eval_seed", int),
    "out_dir": ("out_dir", str),
}


def _flatten(obj, prefix="") -> dict:
    flat = {}
    for key, value in obj.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, prefix=f"{path}."))
        else:
            flat[path] = value
    return flat


def _coerce(path: str, value, want: type):
    if want is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise ConfigError(path, f"expected a boolean, got {value!r}")
    if want is int:
        if isinstance(value, bool) or not isinstance(value, (int, str)):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        try:
            return int(value)
        except ValueError:
            raise ConfigError(path, f"expected an integer, got {value!r}") from None
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        try:
            return float(value)
        except ValueError:
            raise ConfigError(path, f"expected a number, got {value!r}") from None
    return str(value)


def _assign(cfg: ExperimentConfig, attr_path: str, value) -> None:
    obj = cfg
    parts = attr_path.split(".")
    for part in parts[:-1]:
        obj = getattr(obj, part)
    setattr(obj, parts[-1], value)


def build_config(flat: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    for path, value in sorted(flat.items()):
        if path not in _SCHEMA:
            raise ConfigError(path, "unknown configuration key")
        attr_path, want = _SCHEMA[path]
        _assign(cfg, attr_path, _coerce(path, value, want))
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.corpus_source not in ("synth", "mind"):
        raise ConfigError("corpus.source", f"must be 'synth' or 'mind', got {cfg.corpus_source!r}")
    if cfg.corpus_source == "mind":
        for key, value in (("corpus.mind.news", cfg.mind_news),
                           ("corpus.mind.train_behaviors", cfg.mind_train_behaviors),
                           ("corpus.mind.dev_behaviors", cfg.mind_dev_behaviors)):
            if not value:
                raise ConfigError(key, "required when corpus.source is 'mind'")
    if cfg.emb_source not in ("hashed", "nemb"):
        raise ConfigError("embeddings.source", f"must be 'hashed' or 'nemb', got {cfg.emb_source!r}")
    if cfg.emb_source == "nemb" and not cfg.nemb_path:
        raise ConfigError("embeddings.nemb.path", "required when embeddings.source is 'nemb'")
    if cfg.emb_source == "hashed" and cfg.hashed_dim <= 0:
        raise ConfigError("embeddings.hashed.dim", "must be positive")
    try:
        cfg.model.validate()
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from None
    try:
        cfg.train.validate()
    except ValueError as exc:
        raise ConfigError("train", str(exc)) from None
    try:
        cfg.synth.validate()
    except ValueError as exc:
        raise ConfigError("corpus.synth", str(exc)) from None


def parse_override(arg: str) -> tuple[str, object]:
    """Parse one --key=value override; values are JSON when possible."""
    if not arg.startswith("--") or "=" not in arg:
        raise ConfigError(arg, "overrides must look like --key.path=value")
    key, _, raw = arg[2:].partition("=")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def load_config(path=None, overrides=()) -> ExperimentConfig:
    flat = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(str(path), f"invalid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise ConfigError(str(path), "top-level config must be a JSON object")
        flat.update(_flatten(obj))
    for arg in overrides:
        key, value = parse_override(arg)
        flat[key] = value
    return build_config(flat)


def to_flat_dict(cfg: ExperimentConfig) -> dict:
    """Inverse of build_config: the canonical flat representation."""
    flat = {}
    for path, (attr_path, _) in _SCHEMA.items():
        obj = cfg
        for part in attr_path.split("."):
            obj = getattr(obj, part)
        flat[path] = obj
    return {k: v for k, v in sorted(flat.items()) if v is not None}


def config_hash(cfg: ExperimentConfig) -> str:
    """Hash of the semantic configuration (the output directory is not part
    of what a run computes, so artifacts stay portable across out dirs)."""
    flat = {k: v for k, v in to_flat_dict(cfg).items() if k != "out_dir"}
    canon = json.dumps(flat, sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()

"""Experiment runner CLI.

Subcommands: synth, train, eval, compare, count-params, grid. Every
command reads a JSON config (--config) plus --key.path=value overrides and
writes machine-readable artifacts under the configured output directory.
All outputs are byte-reproducible for fixed configs and seeds; wall-clock
times appear only in the training log.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import corpus as corpus_mod, dominance, embeddings, evaluation, scoring, training
from .config import ConfigError, ExperimentConfig, config_hash, load_config, to_flat_dict
from .numerics import load_checkpoint, save_checkpoint


def _load_corpus(cfg: ExperimentConfig) -> corpus_mod.Corpus:
    if cfg.corpus_source == "mind":
        return corpus_mod.load_mind(cfg.mind_news, cfg.mind_train_behaviors, cfg.mind_dev_behaviors)
    return corpus_mod.generate_synthetic(cfg.synth)


def _provider(cfg: ExperimentConfig):
    if cfg.emb_source == "nemb":
        return embeddings.open_store(cfg.nemb_path, max_tokens=cfg.max_tokens)
    return embeddings.HashedProvider(cfg.hashed_dim, cfg.hashed_seed, max_tokens=cfg.max_tokens)


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _prepare_out(cfg: ExperimentConfig) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    _write_json(os.path.join(cfg.out_dir, "resolved_config.json"), to_flat_dict(cfg))
    return cfg.out_dir


def cmd_synth(cfg: ExperimentConfig) -> int:
    out = _prepare_out(cfg)
    corpus, latents = corpus_mod.generate_synthetic_full(cfg.synth)
    corpus_dir = os.path.join(out, "corpus")
    corpus_mod.save_corpus(corpus, corpus_dir)
    corpus_mod.save_latents(latents, os.path.join(corpus_dir, "latents.json"))
    print(f"wrote {len(corpus.news)} news, {len(corpus.train_sessions)} train / "
          f"{len(corpus.dev_sessions)} dev sessions to {corpus_dir}")
    return 0


def cmd_train(cfg: ExperimentConfig) -> int:
    out = _prepare_out(cfg)
    corpus = _load_corpus(cfg)
    provider = _provider(cfg)
    params, stats = training.train(
        corpus, provider, cfg.model, cfg.train, log_path=os.path.join(out, "train_log.jsonl")
    )
    save_checkpoint(os.path.join(out, "checkpoint.bin"), params, config_hash(cfg))
    _write_json(os.path.join(out, "train_stats.json"), {
        "epoch_losses": stats.epoch_losses, "n_samples": stats.n_samples,
        "skipped_sessions": stats.skipped_sessions, "cold_start_sessions": stats.cold_start_sessions,
    })
    print(f"trained {cfg.model.scoring} head for {cfg.train.epochs} epochs; "
          f"final epoch loss {stats.epoch_losses[-1]:.4f}; checkpoint in {out}")
    return 0


def cmd_eval(cfg: ExperimentConfig, checkpoint: str | None) -> int:
    out = _prepare_out(cfg)
    ckpt_path = checkpoint or os.path.join(out, "checkpoint.bin")
    if not os.path.exists(ckpt_path):
        print(f"error: checkpoint not found: {ckpt_path}", file=sys.stderr)
        return 2
    params, stored_hash = load_checkpoint(ckpt_path)
    if stored_hash != config_hash(cfg):
        print("warning: checkpoint was trained under a different config", file=sys.stderr)
    corpus = _load_corpus(cfg)
    provider = _provider(cfg)
    report, impressions = evaluation.evaluate(
        corpus, params, cfg.model, provider, cfg.eval_seed, history_cap=cfg.train.history_cap
    )
    _write_json(os.path.join(out, "metrics.json"), report.to_dict())
    evaluation.dump_impressions(impressions, os.path.join(out, "impressions.jsonl"))
    evaluation.dump_losses(impressions, os.path.join(out, "losses.txt"))
    evaluation.dump_loss_histogram(impressions, os.path.join(out, "loss_hist.csv"))
    print(f"AUC {report.auc:.2f}  MRR {report.mrr:.2f}  NDCG@5 {report.ndcg5:.2f}  "
          f"NDCG@10 {report.ndcg10:.2f}  ({report.n_impressions} impressions, "
          f"{report.n_cold_start} cold start)")
    return 0


def cmd_compare(losses_a: str, losses_b: str, epsilon0: float, alpha: float,
                bootstrap_b: int, seed: int, out_path: str | None) -> int:
    x = dominance.read_losses(losses_a)
    y = dominance.read_losses(losses_b)
    report = dominance.dominance_test(x, y, epsilon0=epsilon0, alpha=alpha,
                                      bootstrap_b=bootstrap_b, seed=seed)
    if out_path:
        _write_json(out_path, report.to_dict())
    print(json.dumps(report.to_dict(), sort_keys=True))
    return 0


def cmd_count_params(cfg: ExperimentConfig) -> int:
    embed_dim = cfg.hashed_dim if cfg.emb_source == "hashed" else embeddings.open_store(cfg.nemb_path).dim
    counts, total = training.count_params(cfg.model, embed_dim)
    out = _prepare_out(cfg)
    _write_json(os.path.join(out, "param_counts.json"),
                {"blocks": counts, "total": total, "embed_dim": embed_dim})
    width = max(len(n) for n in counts)
    for name in sorted(counts):
        print(f"{name:<{width}}  {counts[name]:>10,}")
    print(f"{'total':<{width}}  {total:>10,}")
    return 0


def cmd_grid(cfg: ExperimentConfig, variants: list[str]) -> int:
    for variant in variants:
        if variant not in scoring.VARIANTS:
            raise ConfigError("scoring", f"unknown variant {variant!r}")
    out = _prepare_out(cfg)
    corpus = _load_corpus(cfg)
    provider = _provider(cfg)
    rows = []
    for variant in variants:
        sub = dataclasses.replace(cfg, model=dataclasses.replace(cfg.model, scoring=variant),
                                  out_dir=os.path.join(out, "grid", variant))
        os.makedirs(sub.out_dir, exist_ok=True)
        params, stats = training.train(
            corpus, provider, sub.model, sub.train,
            log_path=os.path.join(sub.out_dir, "train_log.jsonl"),
        )
        save_checkpoint(os.path.join(sub.out_dir, "checkpoint.bin"), params, config_hash(sub))
        report, impressions = evaluation.evaluate(
            corpus, params, sub.model, provider, sub.eval_seed, history_cap=sub.train.history_cap
        )
        _write_json(os.path.join(sub.out_dir, "metrics.json"), report.to_dict())
        evaluation.dump_losses(impressions, os.path.join(sub.out_dir, "losses.txt"))
        _, total = training.count_params(sub.model, provider.dim)
        rows.append({"scoring": variant, "auc": report.auc, "mrr": report.mrr,
                     "ndcg5": report.ndcg5, "ndcg10": report.ndcg10,
                     "params": total, "final_train_loss": stats.epoch_losses[-1]})
    _write_json(os.path.join(out, "grid_summary.json"), {"rows": rows})
    print(f"{'scoring':<10} {'AUC':>7} {'MRR':>7} {'NDCG@5':>7} {'NDCG@10':>8} {'params':>10}")
    for row in rows:
        print(f"{row['scoring']:<10} {row['auc']:>7.2f} {row['mrr']:>7.2f} "
              f"{row['ndcg5']:>7.2f} {row['ndcg10']:>8.2f} {row['params']:>10,}")
    return 0


def _split_overrides(rest: list[str]) -> list[str]:
    for arg in rest:
        if not (arg.startswith("--") and "=" in arg):
            raise ConfigError(arg, "expected an override of the form --key.path=value")
    return rest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="newsrec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_cfg(p):
        p.add_argument("--config", help="JSON config file (flat dotted or nested keys)")

    add_cfg(sub.add_parser("synth", help="generate and dump a synthetic corpus"))
    add_cfg(sub.add_parser("train", help="train a model and write a checkpoint"))
    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on the dev split")
    add_cfg(p_eval)
    p_eval.add_argument("--checkpoint", help="checkpoint path (default: <out_dir>/checkpoint.bin)")
    p_cmp = sub.add_parser("compare", help="dominance test between two loss files")
    p_cmp.add_argument("--a", required=True, help="loss file of model A (one value per line)")
    p_cmp.add_argument("--b", required=True, help="loss file of model B")
    p_cmp.add_argument("--eps0", type=float, default=dominance.DEFAULT_EPSILON0)
    p_cmp.add_argument("--alpha", type=float, default=dominance.DEFAULT_ALPHA)
    p_cmp.add_argument("--bootstrap", type=int, default=dominance.DEFAULT_BOOTSTRAP)
    p_cmp.add_argument("--seed", type=int, default=0)
    p_cmp.add_argument("--out", help="also write the report JSON here")
    add_cfg(sub.add_parser("count-params", help="print per-block parameter counts"))
    p_grid = sub.add_parser("grid", help="train and evaluate several scoring heads")
    add_cfg(p_grid)
    p_grid.add_argument("--scoring", default="inner,bilinear,nonlinear,mlp",
                        help="comma-separated scoring variants")

    args, rest = parser.parse_known_args(argv)
    try:
        overrides = _split_overrides(rest)
        if args.command == "compare":
            if overrides:
                raise ConfigError(overrides[0], "compare takes no config overrides")
            return cmd_compare(args.a, args.b, args.eps0, args.alpha, args.bootstrap,
                               args.seed, args.out)
        cfg = load_config(args.config, overrides)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint)
        if args.command == "count-params":
            return cmd_count_params(cfg)
        if args.command == "grid":
            variants = [v.strip() for v in args.scoring.split(",") if v.strip()]
            return cmd_grid(cfg, variants)
    except (ConfigError, corpus_mod.CorpusError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())

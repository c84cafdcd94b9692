"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to see them as they complete).

The synthetic cross-interaction experiment trains four models and takes a
few minutes; everything else is fast.
"""

import itertools
import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

import newsrec as nr
from newsrec import corpus as corpus_mod, dominance as dom, evaluation as ev
from newsrec.model import ModelConfig, init_params, loss_and_grads, zero_grads
from newsrec.numerics import finite_diff_check


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"[ACCEPTANCE] {name}: PASS")


# ---------------------------------------------------------------------------
# gradient correctness
# ---------------------------------------------------------------------------

class TestGradientCorrectness:
    GRAD_SEED = 53  # margin-vetted: no ReLU pre-activation within the probe radius

    def test_all_variants_and_modes(self):
        start = time.monotonic()
        rng = np.random.default_rng(self.GRAD_SEED + 500)
        hist = [rng.normal(size=(3, 5)), rng.normal(size=(4, 5))]
        cands = [rng.normal(size=(2, 5)), rng.normal(size=(3, 5)), rng.normal(size=(5, 5))]
        labels = [1, 0, 0]
        worst, checked = 0.0, 0
        with criterion("gradient correctness (all scoring variants x encoder modes)"):
            for scoring, news_m, user_m, transform in itertools.product(
                    ("inner", "bilinear", "nonlinear", "mlp"),
                    ("attention", "mean"), ("attention", "mean"), ("none", "linear_relu")):
                activations = ("relu", "tanh") if scoring in ("nonlinear", "mlp") else ("relu",)
                for act in activations:
                    cfg = ModelConfig(dim=4, news_encoder=news_m, user_encoder=user_m,
                                      history_transform=transform, scoring=scoring,
                                      activation=act, att_dim=3)
                    params = init_params(cfg, 5, seed=self.GRAD_SEED)

                    def f(p):
                        loss, grads, _ = loss_and_grads(p, cfg, hist, cands, labels)
                        return loss, grads

                    err = finite_diff_check(f, params, h=1e-4)
                    assert err < 1e-4, f"{scoring}/{news_m}/{user_m}/{transform}/{act}: {err}"
                    worst = max(worst, err)
                    checked += 1
            elapsed = time.monotonic() - start
            assert elapsed < 60.0, f"gradient sweep took {elapsed:.1f}s"
        print(f"  ({checked} configurations, worst relative error {worst:.2e}, {elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# reduction identity
# ---------------------------------------------------------------------------

class TestReductionIdentity:
    def test_bilinear_identity_equals_inner(self):
        from newsrec.scoring import score_bilinear, score_inner

        rng = np.random.default_rng(77)
        eye = np.eye(16)
        with criterion("reduction identity (bilinear at identity == inner, 1000 pairs)"):
            for _ in range(1000):
                u, c = rng.normal(size=16), rng.normal(size=16)
                assert abs(score_bilinear(u, c, eye) - score_inner(u, c)) <= 1e-12


# ---------------------------------------------------------------------------
# metric oracles
# ---------------------------------------------------------------------------

def _brute_auc(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    if not pos or not neg:
        return None
    wins = sum(1.0 if p > n else (0.5 if p == n else 0.0)
               for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def _brute_mrr(scores, labels):
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    rr = [1.0 / (rank + 1) for rank, i in enumerate(order) if labels[i]]
    return sum(rr) / len(rr)


def _brute_ndcg(scores, labels, k):
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    dcg = sum(labels[i] / math.log2(rank + 2) for rank, i in enumerate(order[:k]))
    ideal = sum(1.0 / math.log2(rank + 2) for rank in range(min(k, sum(labels))))
    return dcg / ideal


class TestMetricOracles:
    def test_500_random_impressions(self):
        rng = np.random.default_rng(99)
        with criterion("metric oracles (AUC/MRR/NDCG vs brute force, exact equality)"):
            checked = 0
            while checked < 500:
                n = int(rng.integers(2, 21))
                scores = rng.choice(np.round(rng.random(6), 3), size=n)
                labels = list(rng.random(n) < 0.35)
                expect_auc = _brute_auc(list(scores), labels)
                if expect_auc is None:
                    continue
                assert ev.auc(scores, labels) == expect_auc
                assert ev.mrr(scores, labels) == _brute_mrr(list(scores), labels)
                assert ev.ndcg(scores, labels, 5) == _brute_ndcg(list(scores), labels, 5)
                assert ev.ndcg(scores, labels, 10) == _brute_ndcg(list(scores), labels, 10)
                checked += 1


# ---------------------------------------------------------------------------
# parameter accounting
# ---------------------------------------------------------------------------

class TestParameterAccounting:
    def test_reference_counts(self):
        with criterion("parameter accounting (attention 525,824 / mean 262,656 / +65,536 bilinear)"):
            _, base_inner = nr.count_params(ModelConfig(dim=256, scoring="inner"), 768)
            assert base_inner == 525_824
            mean_cfg = ModelConfig(dim=256, news_encoder="mean", user_encoder="mean")
            _, mean_inner = nr.count_params(mean_cfg, 768)
            assert mean_inner == 262_656
            _, base_bilinear = nr.count_params(ModelConfig(dim=256, scoring="bilinear"), 768)
            assert base_bilinear - base_inner == 65_536
            # the nonlinear head adds its matrix plus bias; this stays the
            # documented count even though it is half the published delta
            _, base_nonlinear = nr.count_params(ModelConfig(dim=256, scoring="nonlinear"), 768)
            assert base_nonlinear - base_inner == 65_792
            _, base_mlp = nr.count_params(ModelConfig(dim=256, scoring="mlp"), 768)
            assert base_mlp - base_inner == 65_792


# ---------------------------------------------------------------------------
# cross-interaction synthetic experiment
# ---------------------------------------------------------------------------

EXPERIMENT_OVERRIDES = [
    "--corpus.synth.n_users=4000", "--corpus.synth.n_news=600",
    "--corpus.synth.n_sessions=2000", "--corpus.synth.candidates_per_session=10",
    "--corpus.synth.latent_dim=8", "--corpus.synth.noise_std=0.15", "--corpus.synth.seed=7",
    "--embeddings.hashed.dim=64", "--embeddings.hashed.seed=11",
    "--model.dim=64", "--model.final_relu=false",
    "--train.epochs=5", "--train.lr=0.005", "--train.batch_size=32",
    "--train.k_negatives=1", "--train.seed=123", "--eval.seed=9",
]


def _grid_aucs(tmp_path, interaction):
    """Train and evaluate inner + bilinear through the grid command."""
    import json
    from newsrec import cli

    out = tmp_path / interaction
    code = cli.main(["grid", *EXPERIMENT_OVERRIDES,
                     f"--corpus.synth.interaction={interaction}",
                     f"--out_dir={out}", "--scoring", "inner,bilinear"])
    assert code == 0
    rows = json.loads((out / "grid_summary.json").read_text())["rows"]
    return {row["scoring"]: row["auc"] for row in rows}


class TestCoreClaim:
    def test_cross_dimension_gap_and_control(self, tmp_path):
        start = time.monotonic()
        with criterion("core claim (bilinear beats inner on cross-dimension corpus; control tied)"):
            perm = _grid_aucs(tmp_path, "permutation")
            print(f"  permutation: inner={perm['inner']:.2f} bilinear={perm['bilinear']:.2f} "
                  f"gap={perm['bilinear'] - perm['inner']:.2f}")
            assert perm["bilinear"] - perm["inner"] >= 10.0
            assert perm["inner"] <= 60.0
            assert perm["bilinear"] >= 70.0

            diag = _grid_aucs(tmp_path, "diagonal")
            print(f"  diagonal control: inner={diag['inner']:.2f} bilinear={diag['bilinear']:.2f}")
            assert abs(diag["inner"] - diag["bilinear"]) <= 3.0

            elapsed = time.monotonic() - start
            assert elapsed < 600.0, f"experiment took {elapsed:.1f}s"
        print(f"  ({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# dominance test sanity
# ---------------------------------------------------------------------------

class TestDominanceSanity:
    def test_tie_shift_and_equal_distributions(self):
        start = time.monotonic()
        with criterion("dominance sanity (tie / unit shift / 50 equal-distribution trials)"):
            x = np.linspace(0.1, 2.0, 500)
            assert dom.dominance_test(x, x.copy(), bootstrap_b=200).decision == "tie"

            rng = np.random.default_rng(1)
            a = rng.normal(size=2000)
            report = dom.dominance_test(a, a + 1.0, bootstrap_b=200, seed=2)
            assert report.decision == "A_dominates"
            assert report.epsilon_hat < 0.01

            no_decision = 0
            for trial in range(50):
                trng = np.random.default_rng(1000 + trial)
                xs = trng.normal(size=2000)
                ys = trng.normal(size=2000)
                if dom.dominance_test(xs, ys, bootstrap_b=200, seed=trial).decision == "no_decision":
                    no_decision += 1
                total = dom.epsilon_hat(xs, ys) + dom.epsilon_hat(ys, xs)
                assert total == pytest.approx(1.0, abs=1e-12)
            assert no_decision >= 48
            elapsed = time.monotonic() - start
            assert elapsed < 60.0, f"dominance sanity took {elapsed:.1f}s"
        print(f"  ({no_decision}/50 no_decision, {elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# training sanity
# ---------------------------------------------------------------------------

class TestTrainingSanity:
    def test_zero_lr_separable_descent_and_log2_floor(self):
        with criterion("training sanity (lr=0 no-op / monotone descent / log 2 floor)"):
            tiny = nr.generate_synthetic(nr.SynthConfig(
                n_users=5, n_news=40, n_sessions=20, candidates_per_session=4,
                latent_dim=3, noise_std=0.3, seed=4))
            provider = nr.HashedProvider(8, seed=1)
            mcfg = ModelConfig(dim=4)
            expected = init_params(mcfg, 8, seed=3, input_std=provider.row_std)
            params, _ = nr.train(tiny, provider, mcfg,
                                 nr.TrainConfig(epochs=1, lr=0.0, batch_size=4, seed=3))
            for name in expected:
                np.testing.assert_array_equal(params[name], expected[name])

            separable = nr.generate_synthetic(nr.SynthConfig(
                n_users=40, n_news=200, n_sessions=300, candidates_per_session=6,
                latent_dim=4, interaction="diagonal", noise_std=0.0, seed=21))
            sep_provider = nr.HashedProvider(32, seed=5)
            sep_cfg = ModelConfig(dim=32, scoring="inner", final_relu=False)
            _, stats = nr.train(separable, sep_provider, sep_cfg,
                                nr.TrainConfig(epochs=5, lr=3e-3, batch_size=16,
                                               k_negatives=1, seed=11))
            assert len(stats.epoch_losses) == 5
            assert all(b < a for a, b in zip(stats.epoch_losses, stats.epoch_losses[1:])), \
                stats.epoch_losses

            # zeroed scoring heads (and, for inner, a zeroed output layer)
            # leave every score at one half
            rng = np.random.default_rng(0)
            hist = [rng.normal(size=(3, 8)) for _ in range(2)]
            cands = [rng.normal(size=(2, 8)) for _ in range(5)]
            labels = [1, 0, 0, 0, 0]
            for scoring in ("bilinear", "nonlinear", "mlp", "inner"):
                cfg = ModelConfig(dim=4, scoring=scoring)
                params = init_params(cfg, 8, seed=6)
                for name in params:
                    if name.startswith("score.") or (scoring == "inner" and name.startswith("news_l2")):
                        params[name][:] = 0.0
                loss, _, scores = loss_and_grads(params, cfg, hist, cands, labels)
                np.testing.assert_array_equal(scores, np.full(5, 0.5))
                assert abs(loss - math.log(2.0)) <= 1e-9


# ---------------------------------------------------------------------------
# command determinism
# ---------------------------------------------------------------------------

class TestCommandDeterminism:
    def test_train_eval_byte_identical(self, tmp_path):
        from newsrec import cli
        args = [
            "--corpus.synth.n_users=6", "--corpus.synth.n_news=50",
            "--corpus.synth.n_sessions=30", "--corpus.synth.candidates_per_session=4",
            "--corpus.synth.latent_dim=3", "--corpus.synth.seed=5",
            "--embeddings.hashed.dim=8", "--model.dim=4", "--model.scoring=bilinear",
            "--train.epochs=2", "--train.batch_size=8", "--train.lr=0.003", "--train.seed=2",
        ]
        with criterion("determinism (train + eval rerun is byte-identical)"):
            outs = [tmp_path / "r1", tmp_path / "r2"]
            for out in outs:
                assert cli.main(["train", *args, f"--out_dir={out}"]) == 0
                assert cli.main(["eval", *args, f"--out_dir={out}"]) == 0
            assert (outs[0] / "checkpoint.bin").read_bytes() == (outs[1] / "checkpoint.bin").read_bytes()
            assert (outs[0] / "metrics.json").read_bytes() == (outs[1] / "metrics.json").read_bytes()
            assert (outs[0] / "losses.txt").read_bytes() == (outs[1] / "losses.txt").read_bytes()


# ---------------------------------------------------------------------------
# exporter round trip (requires the sibling embed_export package)
# ---------------------------------------------------------------------------

class TestExporterRoundTrip:
    def test_store_round_trip_and_bit_identical(self, tmp_path):
        embed_export = pytest.importorskip("embed_export")
        torch = pytest.importorskip("torch")
        from transformers import BertConfig, BertModel, BertTokenizer

        model_dir = tmp_path / "tiny"
        model_dir.mkdir()
        vocab = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "team", "wins", "match", "words"]
        (model_dir / "vocab.txt").write_text("\n".join(vocab) + "\n")
        BertTokenizer(vocab_file=str(model_dir / "vocab.txt")).save_pretrained(model_dir)
        torch.manual_seed(0)
        BertModel(BertConfig(vocab_size=len(vocab), hidden_size=16, num_hidden_layers=1,
                             num_attention_heads=2, intermediate_size=32,
                             max_position_embeddings=40)).save_pretrained(model_dir)

        news = tmp_path / "news.tsv"
        news.write_text("N1\ta\tb\tteam wins match\nN2\ta\tb\twords\n")

        with criterion("exporter round trip (NEMB opens in consumer, bit-identical reruns)"):
            out1, out2 = tmp_path / "s1.nemb", tmp_path / "s2.nemb"
            manifest = embed_export.export(str(news), str(model_dir), 30, out1)
            embed_export.export(str(news), str(model_dir), 30, out2)
            assert out1.read_bytes() == out2.read_bytes()
            store = nr.open_store(out1)
            assert store.dim == manifest.dim
            assert len(store) == manifest.news_count == 2
            assert store.lookup("N1").shape == (3, 16)

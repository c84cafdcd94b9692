import io
import json

import numpy as np
import pytest
from scipy.optimize import minimize

from newsrec import corpus as cp


NEWS_TSV = "N1\tsports\tsoccer\tTeam wins\nN2\tnews\tworld\tA headline\tSome abstract\n"
BEHAVIOR_TSV = (
    "imp1\tu1\t11/11/2019 9:00:00 AM\tN1\tN1-1 N2-0\n"
    "imp2\tu2\t11/11/2019 9:05:00 AM\t\tN1-1 N2-0\n"
)


class TestParseNews:
    def test_field_mapping(self):
        news = cp.parse_news(io.StringIO(NEWS_TSV))
        assert news["N1"] == cp.NewsItem(id="N1", title="Team wins", category="sports")
        assert news["N2"].abstract == "Some abstract"

    def test_empty_stream(self):
        assert cp.parse_news(io.StringIO("")) == {}

    def test_duplicate_id_rejected(self):
        dup = "N1\ta\tb\tt1\nN1\ta\tb\tt2\n"
        with pytest.raises(cp.CorpusError, match="N1"):
            cp.parse_news(io.StringIO(dup))

    def test_malformed_row_reports_line(self):
        with pytest.raises(cp.CorpusError, match="line 2"):
            cp.parse_news(io.StringIO("N1\ta\tb\tt1\nN2\tonly-two\n"))


class TestParseBehaviors:
    def test_cold_start_row(self):
        sessions = cp.parse_behaviors(io.StringIO(BEHAVIOR_TSV))
        assert sessions[1].history == []
        assert sessions[1].shown == [("N1", True), ("N2", False)]

    def test_history_order_preserved(self):
        row = "imp1\tu1\tt\tN3 N4\tN1-0 N2-1\n"
        (sess,) = cp.parse_behaviors(io.StringIO(row))
        assert sess.history == ["N3", "N4"]

    def test_invalid_label_rejected(self):
        row = "imp1\tu1\tt\t\tN1-2\n"
        with pytest.raises(cp.CorpusError, match="N1-2"):
            cp.parse_behaviors(io.StringIO(row))

    def test_ids_with_dashes_parse(self):
        row = "imp1\tu1\tt\t\tN-weird-1 N-x-0\n"
        (sess,) = cp.parse_behaviors(io.StringIO(row))
        assert sess.shown == [("N-weird", True), ("N-x", False)]


def _logistic_fit(features, labels):
    """Maximum-likelihood logistic regression (test oracle)."""
    X = np.column_stack([np.ones(len(labels)), features])
    y = np.asarray(labels, dtype=np.float64)

    def nll_and_grad(beta):
        z = X @ beta
        p = 1.0 / (1.0 + np.exp(-z))
        nll = -np.sum(y * np.log(p + 1e-12) + (1 - y) * np.log(1 - p + 1e-12))
        return nll, X.T @ (p - y)

    res = minimize(nll_and_grad, np.zeros(X.shape[1]), jac=True, method="BFGS")
    return res.x[1:]


def _latent_features(corpus, latents):
    """Per-shown-candidate diagonal and interaction-aligned latent products."""
    diag, cross, labels = [], [], []
    a = latents.matrix
    for sess in corpus.train_sessions + corpus.dev_sessions:
        u = latents.users[sess.user_id]
        for nid, y in sess.shown:
            n = latents.news[nid]
            diag.append(float(u @ n))
            cross.append(float(u @ a @ n))
            labels.append(int(y))
    return np.array(diag), np.array(cross), np.array(labels)


class TestGenerateSynthetic:
    def test_deterministic_in_seed(self, tmp_path):
        cfg = cp.SynthConfig(n_users=10, n_news=80, n_sessions=40, seed=3)
        c1, c2 = cp.generate_synthetic(cfg), cp.generate_synthetic(cfg)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        cp.save_corpus(c1, d1)
        cp.save_corpus(c2, d2)
        for name in ("news.jsonl", "train.jsonl", "dev.jsonl"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_sessions_have_both_labels_and_resolve(self):
        cfg = cp.SynthConfig(n_users=10, n_news=80, n_sessions=40, seed=3)
        corpus = cp.generate_synthetic(cfg)
        cp.validate(corpus)
        for sess in corpus.train_sessions + corpus.dev_sessions:
            labels = [y for _, y in sess.shown]
            assert any(labels) and not all(labels)
            assert len(sess.history) > 0

    def test_split_sizes(self):
        cfg = cp.SynthConfig(n_users=10, n_news=80, n_sessions=40, seed=3)
        corpus = cp.generate_synthetic(cfg)
        assert len(corpus.train_sessions) == 36
        assert len(corpus.dev_sessions) == 4

    def test_diagonal_labels_track_latent_affinity(self):
        cfg = cp.SynthConfig(n_users=30, n_news=300, n_sessions=400, latent_dim=4,
                             interaction="diagonal", noise_std=0.5, seed=5)
        corpus, latents = cp.generate_synthetic_full(cfg)
        diag, _, labels = _latent_features(corpus, latents)
        r = np.corrcoef(diag, labels)[0, 1]
        assert r > 0.3

    def test_permutation_labels_need_cross_terms(self):
        cfg = cp.SynthConfig(n_users=30, n_news=300, n_sessions=500, latent_dim=2,
                             interaction="permutation", noise_std=0.5, seed=5)
        corpus, latents = cp.generate_synthetic_full(cfg)
        diag, cross, labels = _latent_features(corpus, latents)
        # for latent_dim=2 the interaction couples u1*n2 + u2*n1
        np.testing.assert_allclose(latents.matrix, [[0, 1], [1, 0]])
        beta_diag, beta_cross = _logistic_fit(np.column_stack([diag, cross]), labels)
        assert beta_cross > 0.5
        assert abs(beta_diag) < 0.2 * beta_cross

    def test_dense_matrix_is_rotation(self):
        cfg = cp.SynthConfig(n_users=5, n_news=60, n_sessions=10, latent_dim=4,
                             interaction="dense", seed=1)
        _, latents = cp.generate_synthetic_full(cfg)
        a = latents.matrix
        np.testing.assert_allclose(a @ a.T, np.eye(4), atol=1e-12)
        assert np.linalg.det(a) > 0

    def test_config_validation(self):
        with pytest.raises(cp.CorpusError, match="candidates_per_session"):
            cp.generate_synthetic(cp.SynthConfig(candidates_per_session=1))
        with pytest.raises(cp.CorpusError, match="latent_dim"):
            cp.generate_synthetic(cp.SynthConfig(latent_dim=1, interaction="permutation"))
        with pytest.raises(cp.CorpusError, match="interaction"):
            cp.generate_synthetic(cp.SynthConfig(interaction="banana"))

    def test_titles_encode_coordinates(self):
        cfg = cp.SynthConfig(n_users=5, n_news=30, n_sessions=10, latent_dim=3, seed=2)
        corpus, latents = cp.generate_synthetic_full(cfg)
        item = corpus.news["N00000"]
        tokens = item.title.split()
        assert len(tokens) == 3
        vec = latents.news["N00000"]
        for d, tok in enumerate(tokens):
            assert tok.startswith(f"c{d}")
            assert ("p" in tok) == (vec[d] >= 0)


class TestRoundTrip:
    def test_save_load_equal(self, tmp_path):
        cfg = cp.SynthConfig(n_users=8, n_news=60, n_sessions=30, seed=7)
        corpus = cp.generate_synthetic(cfg)
        cp.save_corpus(corpus, tmp_path / "c")
        loaded = cp.load_corpus(tmp_path / "c")
        assert loaded == corpus

    def test_mind_round_trip(self, tmp_path):
        news = cp.parse_news(io.StringIO(NEWS_TSV))
        sessions = cp.parse_behaviors(io.StringIO(BEHAVIOR_TSV))
        corpus = cp.Corpus(news=news, train_sessions=sessions[:1], dev_sessions=sessions[1:])
        cp.save_corpus(corpus, tmp_path / "c")
        assert cp.load_corpus(tmp_path / "c") == corpus

    def test_latents_round_trip(self, tmp_path):
        cfg = cp.SynthConfig(n_users=4, n_news=40, n_sessions=10, seed=1)
        _, latents = cp.generate_synthetic_full(cfg)
        path = tmp_path / "latents.json"
        cp.save_latents(latents, path)
        loaded = cp.load_latents(path)
        assert loaded.interaction == latents.interaction
        np.testing.assert_array_equal(loaded.matrix, latents.matrix)
        for uid in latents.users:
            np.testing.assert_array_equal(loaded.users[uid], latents.users[uid])

    def test_validate_rejects_dangling_ids(self):
        corpus = cp.Corpus(
            news={"N1": cp.NewsItem(id="N1", title="t")},
            train_sessions=[cp.Session("s1", "u1", ["N9"], [("N1", True)])],
            dev_sessions=[],
        )
        with pytest.raises(cp.CorpusError, match="N9"):
            cp.validate(corpus)

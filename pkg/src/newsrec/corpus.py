"""Corpus ingestion and synthetic corpus generation.

Handles two substrates: MIND-style TSV logs (news.tsv / behaviors.tsv) and
synthetic corpora with a controllable latent interaction structure between
users and news. Parsing and generation are single-writer; the resulting
Corpus is treated as immutable and may be shared across readers.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

HISTORY_LEN = 10          # synthetic reading-history length
HISTORY_POOL = 150        # candidate pool from which history is selected
TITLE_BUCKETS = 8         # magnitude buckets per latent coordinate
LABEL_REDRAW_CAP = 1000
DEV_FRACTION = 0.1

INTERACTIONS = ("diagonal", "permutation", "dense")


class CorpusError(ValueError):
    """Malformed input row or violated corpus invariant."""


@dataclass
class NewsItem:
    id: str
    title: str
    category: str | None = None
    abstract: str | None = None


@dataclass
class Session:
    session_id: str
    user_id: str
    history: list[str]                 # news ids, oldest to newest
    shown: list[tuple[str, bool]]      # (news id, clicked)


@dataclass
class Corpus:
    news: dict[str, NewsItem]
    train_sessions: list[Session]
    dev_sessions: list[Session]


@dataclass
class SynthConfig:
    n_users: int = 100
    n_news: int = 500
    n_sessions: int = 1000
    candidates_per_session: int = 6
    latent_dim: int = 8
    interaction: str = "diagonal"
    noise_std: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        for name in ("n_users", "n_news", "n_sessions", "candidates_per_session", "latent_dim"):
            if getattr(self, name) <= 0:
                raise CorpusError(f"SynthConfig.{name} must be positive")
        if self.candidates_per_session < 2:
            raise CorpusError("SynthConfig.candidates_per_session must be >= 2")
        if self.interaction not in INTERACTIONS:
            raise CorpusError(f"SynthConfig.interaction must be one of {INTERACTIONS}")
        if self.interaction != "diagonal" and self.latent_dim < 2:
            raise CorpusError("SynthConfig.latent_dim must be >= 2 for off-diagonal interactions")
        if self.noise_std < 0:
            raise CorpusError("SynthConfig.noise_std must be non-negative")


@dataclass
class SynthLatents:
    """Ground-truth latent factors, kept out of reach of the models.

    Dumped as a sidecar for test oracles only.
    """

    interaction: str
    matrix: np.ndarray                       # latent_dim x latent_dim
    users: dict[str, np.ndarray] = field(default_factory=dict)
    news: dict[str, np.ndarray] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# MIND TSV ingestion
# ---------------------------------------------------------------------------

def parse_news(stream) -> dict[str, NewsItem]:
    """Parse news.tsv rows (id, category, subcategory, title, [abstract, ...]).

    Columns past the abstract (URLs, entity annotations) are ignored.
    """
    news: dict[str, NewsItem] = {}
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) < 4:
            raise CorpusError(f"news line {line_no}: expected >= 4 tab-separated columns, got {len(cols)}")
        news_id, category, _subcategory, title = cols[0], cols[1], cols[2], cols[3]
        if not news_id:
            raise CorpusError(f"news line {line_no}: empty news id")
        if not title:
            raise CorpusError(f"news line {line_no}: empty title for id {news_id!r}")
        if news_id in news:
            raise CorpusError(f"news line {line_no}: duplicate news id {news_id!r}")
        abstract = cols[4] if len(cols) > 4 and cols[4] else None
        news[news_id] = NewsItem(id=news_id, title=title, category=category or None, abstract=abstract)
    return news


def parse_behaviors(stream) -> list[Session]:
    """Parse behaviors.tsv rows (impression id, user id, time, history, impressions).

    An empty history field yields an empty history list (cold start).
    Impression tokens must carry a -0 or -1 click suffix.
    """
    sessions: list[Session] = []
    for line_no, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) != 5:
            raise CorpusError(f"behaviors line {line_no}: expected 5 tab-separated columns, got {len(cols)}")
        imp_id, user_id, _time, history_field, imp_field = cols
        history = history_field.split() if history_field else []
        shown: list[tuple[str, bool]] = []
        for token in imp_field.split():
            news_id, sep, label = token.rpartition("-")
            if not sep or label not in ("0", "1") or not news_id:
                raise CorpusError(f"behaviors line {line_no}: bad impression token {token!r}")
            shown.append((news_id, label == "1"))
        if not shown:
            raise CorpusError(f"behaviors line {line_no}: empty impression list")
        sessions.append(Session(session_id=imp_id, user_id=user_id, history=history, shown=shown))
    return sessions


def load_mind(news_path, train_behaviors_path, dev_behaviors_path) -> Corpus:
    with open(news_path, encoding="utf-8") as fh:
        news = parse_news(fh)
    with open(train_behaviors_path, encoding="utf-8") as fh:
        train = parse_behaviors(fh)
    with open(dev_behaviors_path, encoding="utf-8") as fh:
        dev = parse_behaviors(fh)
    corpus = Corpus(news=news, train_sessions=train, dev_sessions=dev)
    validate(corpus)
    return corpus


def validate(corpus: Corpus) -> None:
    """Check referential integrity and train/dev disjointness."""
    train_ids = {s.session_id for s in corpus.train_sessions}
    dev_ids = {s.session_id for s in corpus.dev_sessions}
    overlap = train_ids & dev_ids
    if overlap:
        raise CorpusError(f"train/dev session ids overlap: {sorted(overlap)[:5]}")
    for sess in list(corpus.train_sessions) + list(corpus.dev_sessions):
        for news_id in list(sess.history) + [n for n, _ in sess.shown]:
            if news_id not in corpus.news:
                raise CorpusError(f"session {sess.session_id}: unknown news id {news_id!r}")


# ---------------------------------------------------------------------------
# synthetic corpora
# ---------------------------------------------------------------------------

def _interaction_matrix(kind: str, dim: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "diagonal":
        return np.eye(dim)
    if kind == "permutation":
        # cyclic shift: couples coordinate d of the user with d+1 of the news,
        # leaving the diagonal empty for dim >= 2
        return np.roll(np.eye(dim), 1, axis=1)
    if kind == "dense":
        q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
        q = q * np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        return q
    raise CorpusError(f"unknown interaction kind {kind!r}")


def _title_for(vec: np.ndarray) -> str:
    """Encode a latent news vector as tokens, one per coordinate.

    Each token names the coordinate, the sign, and one of TITLE_BUCKETS
    magnitude buckets (width 0.5), so content alone exposes the latents.
    """
    tokens = []
    for d, v in enumerate(vec):
        sign = "p" if v >= 0 else "n"
        bucket = min(TITLE_BUCKETS - 1, int(abs(v) / 0.5))
        tokens.append(f"c{d}{sign}{bucket}")
    return " ".join(tokens)


def generate_synthetic_full(cfg: SynthConfig) -> tuple[Corpus, SynthLatents]:
    """Build a synthetic corpus plus its ground-truth latents.

    Users and news get i.i.d. standard-normal latent vectors. A user's
    reading history is the top-HISTORY_LEN news by plain latent affinity
    u.n from a random pool, while click labels are drawn with probability
    sigmoid(u' A n + noise): under an off-diagonal A the click signal is
    invisible to within-dimension matching of history against candidates.
    Deterministic in the config, including the seed.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    user_lat = rng.standard_normal((cfg.n_users, cfg.latent_dim))
    news_lat = rng.standard_normal((cfg.n_news, cfg.latent_dim))
    a_star = _interaction_matrix(cfg.interaction, cfg.latent_dim, rng)

    news_ids = [f"N{j:05d}" for j in range(cfg.n_news)]
    user_ids = [f"u{i:05d}" for i in range(cfg.n_users)]
    news = {
        nid: NewsItem(id=nid, title=_title_for(news_lat[j]), category="synthetic")
        for j, nid in enumerate(news_ids)
    }

    hist_len = min(HISTORY_LEN, cfg.n_news)
    pool_size = min(HISTORY_POOL, cfg.n_news)
    sessions: list[Session] = []
    for s in range(cfg.n_sessions):
        user = int(rng.integers(cfg.n_users))
        pool = rng.choice(cfg.n_news, size=pool_size, replace=False)
        affinity = news_lat[pool] @ user_lat[user]
        top = pool[np.argsort(-affinity, kind="stable")[:hist_len]]
        history = [news_ids[j] for j in top]

        remaining = np.setdiff1d(np.arange(cfg.n_news), top)
        n_cands = min(cfg.candidates_per_session, remaining.size)
        cands = rng.choice(remaining, size=n_cands, replace=False)
        logits = news_lat[cands] @ (a_star.T @ user_lat[user])
        for attempt in range(LABEL_REDRAW_CAP + 1):
            if attempt == LABEL_REDRAW_CAP:
                raise CorpusError(
                    f"session {s}: could not draw both a click and a non-click in {LABEL_REDRAW_CAP} tries"
                )
            noise = rng.normal(0.0, cfg.noise_std, size=n_cands) if cfg.noise_std > 0 else 0.0
            probs = 1.0 / (1.0 + np.exp(-(logits + noise)))
            labels = rng.random(n_cands) < probs
            if labels.any() and not labels.all():
                break
        shown = [(news_ids[int(j)], bool(y)) for j, y in zip(cands, labels)]
        sessions.append(
            Session(session_id=f"s{s:06d}", user_id=user_ids[user], history=history, shown=shown)
        )

    n_dev = max(1, int(round(cfg.n_sessions * DEV_FRACTION)))
    corpus = Corpus(news=news, train_sessions=sessions[:-n_dev], dev_sessions=sessions[-n_dev:])
    latents = SynthLatents(
        interaction=cfg.interaction,
        matrix=a_star,
        users={uid: user_lat[i] for i, uid in enumerate(user_ids)},
        news={nid: news_lat[j] for j, nid in enumerate(news_ids)},
    )
    return corpus, latents


def generate_synthetic(cfg: SynthConfig) -> Corpus:
    return generate_synthetic_full(cfg)[0]


# ---------------------------------------------------------------------------
# serialization (JSON-lines per session, news file, latents sidecar)
# ---------------------------------------------------------------------------

def _session_to_obj(sess: Session) -> dict:
    return {
        "session_id": sess.session_id,
        "user_id": sess.user_id,
        "history": sess.history,
        "shown": [[nid, int(clicked)] for nid, clicked in sess.shown],
    }


def _session_from_obj(obj: dict) -> Session:
    return Session(
        session_id=obj["session_id"],
        user_id=obj["user_id"],
        history=list(obj["history"]),
        shown=[(nid, bool(clicked)) for nid, clicked in obj["shown"]],
    )


def save_corpus(corpus: Corpus, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "news.jsonl"), "w", encoding="utf-8") as fh:
        for nid in sorted(corpus.news):
            item = corpus.news[nid]
            fh.write(json.dumps(
                {"id": item.id, "title": item.title, "category": item.category, "abstract": item.abstract},
                sort_keys=True,
            ) + "\n")
    for name, sessions in (("train.jsonl", corpus.train_sessions), ("dev.jsonl", corpus.dev_sessions)):
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            for sess in sessions:
                fh.write(json.dumps(_session_to_obj(sess), sort_keys=True) + "\n")


def load_corpus(in_dir) -> Corpus:
    news: dict[str, NewsItem] = {}
    with open(os.path.join(in_dir, "news.jsonl"), encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            news[obj["id"]] = NewsItem(
                id=obj["id"], title=obj["title"], category=obj.get("category"), abstract=obj.get("abstract")
            )
    sessions = {}
    for name in ("train.jsonl", "dev.jsonl"):
        with open(os.path.join(in_dir, name), encoding="utf-8") as fh:
            sessions[name] = [_session_from_obj(json.loads(line)) for line in fh]
    corpus = Corpus(news=news, train_sessions=sessions["train.jsonl"], dev_sessions=sessions["dev.jsonl"])
    validate(corpus)
    return corpus


def save_latents(latents: SynthLatents, path) -> None:
    obj = {
        "interaction": latents.interaction,
        "matrix": latents.matrix.tolist(),
        "users": {uid: vec.tolist() for uid, vec in latents.users.items()},
        "news": {nid: vec.tolist() for nid, vec in latents.news.items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True)


def load_latents(path) -> SynthLatents:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    return SynthLatents(
        interaction=obj["interaction"],
        matrix=np.asarray(obj["matrix"]),
        users={uid: np.asarray(v) for uid, v in obj["users"].items()},
        news={nid: np.asarray(v) for nid, v in obj["news"].items()},
    )

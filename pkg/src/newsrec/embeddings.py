"""Frozen per-token embedding providers.

Two sources: a binary NEMB store holding precomputed transformer embeddings,
and a self-contained hashed-random provider for experiments that should not
depend on any pretrained model. Providers are read-only after construction
and safe to share across threads.

NEMB layout (little-endian throughout):
    header: magic b"NEMB" | u32 version=1 | u32 dim | u64 count
    entry:  u16 id-length | id (UTF-8) | u32 token count L | L*dim float32,
            row-major
"""

from __future__ import annotations

import hashlib
import mmap
import re
import struct

import numpy as np

NEMB_MAGIC = b"NEMB"
NEMB_VERSION = 1
HEADER = struct.Struct("<4sIIQ")
DEFAULT_MAX_TOKENS = 30

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class StoreFormatError(ValueError):
    """Header does not describe a valid NEMB store."""


class StoreCorruptionError(ValueError):
    """Store body is inconsistent with its header."""


def tokenize(title: str) -> list[str]:
    """Lowercase and split on non-alphanumeric characters."""
    return _TOKEN_RE.findall(title.lower())


def hash64(text: str, seed: int) -> int:
    """Stable 64-bit hash of text under a 64-bit seed."""
    payload = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little") + text.encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


class HashedProvider:
    """Deterministic random embeddings keyed by token text.

    Each token row is drawn uniformly from [-0.5, 0.5] * dim**-0.5 by a
    counter-based generator keyed with hash64(token, seed), so the same
    token always maps to the same row regardless of context.
    """

    def __init__(self, dim: int, seed: int, max_tokens: int = DEFAULT_MAX_TOKENS):
        if dim <= 0:
            raise ValueError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.seed = seed
        self.max_tokens = max_tokens
        # per-coordinate std of a uniform row of width dim**-0.5
        self.row_std = dim ** -0.5 / np.sqrt(12.0)
        self._rows: dict[str, np.ndarray] = {}

    def row_for_token(self, token: str) -> np.ndarray:
        row = self._rows.get(token)
        if row is None:
            key = hash64(token, self.seed)
            rng = np.random.Generator(np.random.Philox(key=np.array([key, 0], dtype=np.uint64)))
            row = rng.uniform(-0.5, 0.5, size=self.dim) * self.dim ** -0.5
            row.flags.writeable = False
            self._rows[token] = row
        return row

    def matrix_for_title(self, title: str) -> np.ndarray:
        tokens = tokenize(title)[: self.max_tokens]
        if not tokens:
            tokens = ["pad"]
        return np.stack([self.row_for_token(t) for t in tokens])

    def get(self, news) -> np.ndarray:
        return self.matrix_for_title(news.title)


class StoreProvider:
    """Reader over a memory-mapped NEMB file; lookups are by news id."""

    def __init__(self, path, max_tokens: int = DEFAULT_MAX_TOKENS):
        self.path = path
        self.max_tokens = max_tokens
        self._fh = open(path, "rb")
        try:
            self._mm = mmap.mmap(self._fh.fileno(), 0, access=mmap.ACCESS_READ)
        except ValueError:
            self._fh.close()
            raise StoreFormatError(f"{path}: file too short for NEMB header")
        self.dim, self.count, self._index = self._parse()
        self.row_std = self._estimate_row_std()

    def _estimate_row_std(self, sample: int = 64) -> float:
        values = [self.lookup(news_id) for news_id in list(self._index)[:sample]]
        if not values:
            return 1.0
        std = float(np.std(np.concatenate([v.reshape(-1) for v in values])))
        return std if std > 0 else 1.0

    def _parse(self):
        mm = self._mm
        if len(mm) < HEADER.size:
            raise StoreFormatError(f"{self.path}: file too short for NEMB header")
        magic, version, dim, count = HEADER.unpack_from(mm, 0)
        if magic != NEMB_MAGIC:
            raise StoreFormatError(f"{self.path}: bad magic {magic!r}")
        if version != NEMB_VERSION:
            raise StoreFormatError(f"{self.path}: unsupported version {version}")
        if dim <= 0:
            raise StoreFormatError(f"{self.path}: non-positive dim {dim}")
        index = {}
        off = HEADER.size
        for _ in range(count):
            if off + 2 > len(mm):
                raise StoreCorruptionError(f"{self.path}: truncated record at offset {off}")
            (id_len,) = struct.unpack_from("<H", mm, off)
            if off + 2 + id_len + 4 > len(mm):
                raise StoreCorruptionError(f"{self.path}: truncated record at offset {off}")
            news_id = mm[off + 2: off + 2 + id_len].decode("utf-8")
            (n_tokens,) = struct.unpack_from("<I", mm, off + 2 + id_len)
            data_off = off + 2 + id_len + 4
            data_len = n_tokens * dim * 4
            if data_off + data_len > len(mm):
                raise StoreCorruptionError(f"{self.path}: truncated record at offset {off}")
            index[news_id] = (data_off, n_tokens)
            off = data_off + data_len
        if off != len(mm):
            raise StoreCorruptionError(f"{self.path}: {len(mm) - off} trailing bytes at offset {off}")
        return dim, count, index

    def __len__(self) -> int:
        return self.count

    def __contains__(self, news_id: str) -> bool:
        return news_id in self._index

    def lookup(self, news_id: str) -> np.ndarray:
        try:
            off, n_tokens = self._index[news_id]
        except KeyError:
            raise KeyError(f"news id {news_id!r} not present in store {self.path}") from None
        mat = np.frombuffer(self._mm, dtype="<f4", count=n_tokens * self.dim, offset=off)
        return mat.reshape(n_tokens, self.dim)[: self.max_tokens].copy()

    def get(self, news) -> np.ndarray:
        return self.lookup(news.id)

    def close(self) -> None:
        self._mm.close()
        self._fh.close()


def open_store(path, max_tokens: int = DEFAULT_MAX_TOKENS) -> StoreProvider:
    return StoreProvider(path, max_tokens=max_tokens)


def write_store(path, dim: int, entries) -> int:
    """Write an NEMB store from (news_id, L x dim matrix) pairs.

    Returns the number of entries written. `entries` may be a dict or an
    iterable of pairs; matrices are stored as float32.
    """
    items = list(entries.items() if isinstance(entries, dict) else entries)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(NEMB_MAGIC, NEMB_VERSION, dim, len(items)))
        for news_id, mat in items:
            mat = np.ascontiguousarray(mat, dtype="<f4")
            if mat.ndim != 2 or mat.shape[1] != dim:
                raise ValueError(f"entry {news_id!r}: expected (L, {dim}) matrix, got {mat.shape}")
            id_bytes = news_id.encode("utf-8")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(struct.pack("<I", mat.shape[0]))
            fh.write(mat.tobytes(order="C"))
    return len(items)

"""One-shot export of frozen transformer token embeddings to NEMB stores.

Runs a pretrained encoder over news titles in inference mode and writes one
NEMB entry per news id: the final-hidden-layer embedding of every title
token (special begin/end tokens excluded), truncated to max_tokens. The
model is never fine-tuned, so the export is a pure function of (news file,
model revision, max_tokens) and repeated runs are bit-identical.

NEMB layout (little-endian): magic b"NEMB" | u32 version=1 | u32 dim |
u64 count, then per entry u16 id-length | id UTF-8 | u32 token count L |
L*dim float32 row-major.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

NEMB_MAGIC = b"NEMB"
NEMB_VERSION = 1
HEADER = struct.Struct("<4sIIQ")


class ExportError(RuntimeError):
    pass


@dataclass
class ExportManifest:
    model: str
    dim: int
    max_tokens: int
    news_count: int
    input_sha256: str
    special_tokens_included: bool = False

    def to_dict(self) -> dict:
        return {
            "model": self.model, "dim": self.dim, "max_tokens": self.max_tokens,
            "news_count": self.news_count, "input_sha256": self.input_sha256,
            "special_tokens_included": self.special_tokens_included,
        }


def read_news_titles(path, include_abstract: bool = False) -> list[tuple[str, str]]:
    """(id, text) pairs from a tab-separated news file.

    Expects at least 4 columns (id, category, subcategory, title); the
    abstract column is appended to the text only when requested. Empty
    titles are kept so they can fall back to a pad-token entry.
    """
    rows: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) < 4:
                raise ExportError(f"{path}:{line_no}: expected >= 4 tab-separated columns")
            news_id, title = cols[0], cols[3]
            if news_id in seen:
                raise ExportError(f"{path}:{line_no}: duplicate news id {news_id!r}")
            seen.add(news_id)
            text = title
            if include_abstract and len(cols) > 4 and cols[4]:
                text = f"{title} {cols[4]}" if title else cols[4]
            rows.append((news_id, text))
    return rows


def _load_model(model_name: str):
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_name)
        model = AutoModel.from_pretrained(model_name)
    except OSError as exc:
        raise ExportError(f"model {model_name!r} is not available locally or cached: {exc}") from exc
    model.eval()
    return tokenizer, model


def _token_matrices(texts: list[str], tokenizer, model, max_tokens: int,
                    batch_size: int) -> list[np.ndarray]:
    """Final-hidden-layer embeddings per text, special tokens stripped."""
    pad_id = tokenizer.pad_token_id
    if pad_id is None:
        pad_id = tokenizer.eos_token_id
    matrices: list[np.ndarray] = [None] * len(texts)
    with torch.no_grad():
        for start in range(0, len(texts), batch_size):
            chunk = texts[start:start + batch_size]
            enc = tokenizer(chunk, return_tensors="pt", padding=True, truncation=True,
                            max_length=max_tokens + 2, return_special_tokens_mask=True)
            special = enc.pop("special_tokens_mask")
            out = model(**enc).last_hidden_state
            for row in range(len(chunk)):
                keep = (enc["attention_mask"][row] == 1) & (special[row] == 0)
                hidden = out[row][keep][:max_tokens]
                if hidden.shape[0] == 0:
                    # empty title: single pad-token embedding
                    pad_out = model(input_ids=torch.tensor([[pad_id]]),
                                    attention_mask=torch.tensor([[1]])).last_hidden_state
                    hidden = pad_out[0]
                matrices[start + row] = hidden.numpy().astype("<f4")
    return matrices


def write_store(path, dim: int, entries: list[tuple[str, np.ndarray]]) -> None:
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(NEMB_MAGIC, NEMB_VERSION, dim, len(entries)))
        for news_id, mat in entries:
            mat = np.ascontiguousarray(mat, dtype="<f4")
            id_bytes = news_id.encode("utf-8")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(struct.pack("<I", mat.shape[0]))
            fh.write(mat.tobytes(order="C"))


def export(news_path, model_name: str, max_tokens: int, out_path,
           batch_size: int = 32, include_abstract: bool = False) -> ExportManifest:
    """Run the frozen model over every news title and write the NEMB store.

    Returns the manifest, which is also written as JSON next to the store.
    """
    if max_tokens < 1:
        raise ExportError("max_tokens must be >= 1")
    rows = read_news_titles(news_path, include_abstract=include_abstract)
    tokenizer, model = _load_model(model_name)
    torch.manual_seed(0)  # inference only, but keep any lazy init fixed
    matrices = _token_matrices([text for _, text in rows], tokenizer, model,
                               max_tokens, batch_size)
    dim = int(model.config.hidden_size)
    write_store(out_path, dim, list(zip((nid for nid, _ in rows), matrices)))

    with open(news_path, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()
    manifest = ExportManifest(model=model_name, dim=dim, max_tokens=max_tokens,
                              news_count=len(rows), input_sha256=digest)
    with open(str(out_path) + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return manifest

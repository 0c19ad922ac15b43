"""Text embeddings, document chunking, and exact cosine search.

Two embedding providers: a remote HTTP service and a deterministic local
fallback that hashes tokens with 64-bit FNV-1a into a signed bag-of-words
vector. The index is an exact scan, not ANN: desk-scale corpora stay well
under 10^5 chunks and exactness keeps the brute-force oracle trivially
true.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, asdict
from typing import Iterable, Optional, Protocol

import numpy as np

from .corpus import StudyRecord
from .errors import (
    BadWindowParams,
    DegenerateQuery,
    DimsMismatch,
    EmptyIndex,
    ProviderUnavailable,
)

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a; bit-exact across languages."""
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _U64
    return h


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric."""
    return _TOKEN_RE.findall(text.lower())


def normalize(vec: np.ndarray) -> np.ndarray:
    """Unit L2 norm, or the all-zero sentinel for a zero vector."""
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return np.zeros_like(vec, dtype=np.float64)
    return (vec / norm).astype(np.float64)


def hashed_embedding(text: str, dims: int) -> np.ndarray:
    """Deterministic signed-hash embedding of the token bag.

    Per token: h = FNV-1a64(token); index = h mod dims; sign from the top
    bit of h; accumulate and L2-normalize. Order-insensitive by
    construction (pure bag model). Empty text gives the zero sentinel.
    """
    vec = np.zeros(dims, dtype=np.float64)
    for token in tokenize(text):
        h = fnv1a_64(token.encode("utf-8"))
        sign = 1.0 if (h >> 63) == 0 else -1.0
        vec[h % dims] += sign
    return normalize(vec)


class EmbeddingProvider(Protocol):
    dims: int

    def embed(self, text: str) -> np.ndarray: ...


class HashedLocalProvider:
    """Fully deterministic fallback provider; never errors."""

    name = "hashed_local"

    def __init__(self, dims: int = 256) -> None:
        self.dims = dims

    def embed(self, text: str) -> np.ndarray:
        return hashed_embedding(text, self.dims)


class RemoteProvider:
    """HTTP provider speaking the single "embed" endpoint contract:
    POST {"text": ...} -> {"embedding": [floats]}. The service's vector is
    taken verbatim, then normalized."""

    name = "remote"

    def __init__(self, url: str, dims: int, timeout: float = 10.0, client=None) -> None:
        self.url = url
        self.dims = dims
        self.timeout = timeout
        self._client = client

    def embed(self, text: str) -> np.ndarray:
        import httpx

        client = self._client or httpx
        try:
            response = client.post(self.url, json={"text": text}, timeout=self.timeout)
            response.raise_for_status()
            values = response.json()["embedding"]
        except Exception as exc:
            raise ProviderUnavailable(f"embed service at {self.url}: {exc}") from exc
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != (self.dims,):
            raise ProviderUnavailable(
                f"embed service returned {vec.shape}, expected ({self.dims},)"
            )
        return normalize(vec)


def embed_text(text: str, provider: EmbeddingProvider) -> np.ndarray:
    return provider.embed(text)


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    record_id: str
    ordinal: int
    text: str
    start: int  # token span, inclusive
    end: int  # token span, exclusive

    def as_dict(self) -> dict:
        return asdict(self)


def chunk_document(record: StudyRecord, max_tokens: int = 64, overlap: int = 8) -> list[Chunk]:
    """Whitespace-token windows of width max_tokens with the given overlap.

    Windows advance by max_tokens - overlap; the final window may be short
    and generation stops once a window reaches the end of the text.
    Records without an abstract yield a single title-only chunk.
    """
    if not (max_tokens > overlap >= 0):
        raise BadWindowParams(f"need max_tokens > overlap >= 0, got {max_tokens}, {overlap}")
    if record.abstract is None or not record.abstract.strip():
        return [
            Chunk(
                chunk_id=f"{record.id}:0",
                record_id=record.id,
                ordinal=0,
                text=record.title,
                start=0,
                end=len(record.title.split()),
            )
        ]
    tokens = record.text().split()
    stride = max_tokens - overlap
    chunks: list[Chunk] = []
    start = 0
    while True:
        end = min(start + max_tokens, len(tokens))
        chunks.append(
            Chunk(
                chunk_id=f"{record.id}:{len(chunks)}",
                record_id=record.id,
                ordinal=len(chunks),
                text=" ".join(tokens[start:end]),
                start=start,
                end=end,
            )
        )
        if start + max_tokens >= len(tokens):
            break
        start += stride
    return chunks


class VectorIndex:
    """Exact top-k cosine index over unit vectors.

    Additions are serialized behind a lock and searches snapshot the row
    list first, so a search never observes a partially added vector.
    """

    def __init__(self, dims: int) -> None:
        self.dims = dims
        self._ids: list[str] = []
        self._rows: list[np.ndarray] = []
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, chunk_id: str) -> bool:
        return chunk_id in set(self._ids)

    def add(self, chunk_id: str, vector: np.ndarray) -> None:
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dims,):
            raise DimsMismatch(f"vector shape {vec.shape}, index dims {self.dims}")
        with self._lock:
            self._ids.append(chunk_id)
            self._rows.append(normalize(vec))

    def search(self, query: np.ndarray, k: int) -> list[tuple[str, float]]:
        """Exact top-k by cosine, ties broken by ascending chunk id."""
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.dims,):
            raise DimsMismatch(f"query shape {q.shape}, index dims {self.dims}")
        with self._lock:
            ids = list(self._ids)
            rows = list(self._rows)
        if not ids:
            raise EmptyIndex("index holds no vectors")
        if float(np.linalg.norm(q)) == 0.0:
            raise DegenerateQuery("zero-vector query has no defined ranking")
        q = normalize(q)
        scores = np.stack(rows) @ q
        order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
        return [(ids[i], float(scores[i])) for i in order[: max(k, 0)]]

    def clone(self) -> "VectorIndex":
        other = VectorIndex(self.dims)
        with self._lock:
            other._ids = list(self._ids)
            other._rows = list(self._rows)
        return other

    def save_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"dims": self.dims}) + "\n")
            with self._lock:
                pairs = list(zip(self._ids, self._rows))
            for chunk_id, row in pairs:
                fh.write(json.dumps({"id": chunk_id, "values": row.tolist()}) + "\n")

    @classmethod
    def load_jsonl(cls, path: str) -> "VectorIndex":
        with open(path, "r", encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            index = cls(dims=int(header["dims"]))
            for line in fh:
                if not line.strip():
                    continue
                row = json.loads(line)
                index.add(row["id"], np.asarray(row["values"], dtype=np.float64))
        return index


def index_record(
    index: VectorIndex,
    record: StudyRecord,
    provider: EmbeddingProvider,
    max_tokens: int = 64,
    overlap: int = 8,
) -> list[Chunk]:
    """Chunk a record and add each chunk's embedding to the index."""
    chunks = chunk_document(record, max_tokens=max_tokens, overlap=overlap)
    for chunk in chunks:
        index.add(chunk.chunk_id, provider.embed(chunk.text))
    return chunks

"""Flat exact vector index with cosine scoring, plus embedder ports.

The index is an exact scan by default; anything approximate would have to be
opt-in and oracle-verified, so nothing approximate ships. A deterministic
hash-3-gram fallback embedder lets the whole test suite run with no model
weights and no network.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol

import httpx
import numpy as np

from .errors import BackendError, DataError

INDEX_FORMAT_VERSION = 1


class DimensionMismatch(BackendError):
    pass


class EmbedderUnavailable(BackendError):
    pass


class CorruptIndexFile(DataError):
    pass


class VersionMismatch(DataError):
    pass


class EmbedderPort(Protocol):
    dim: int
    model_id: str

    def embed_text(self, text: str) -> np.ndarray: ...


def normalize_for_embedding(text: str) -> str:
    """NFC, lowercase, whitespace-collapse: the embedder's notion of identity."""
    return re.sub(r"\s+", " ", unicodedata.normalize("NFC", text).lower()).strip()


class HashEmbedder:
    """Deterministic fallback embedder: character 3-grams of the normalized
    text hashed into buckets, L2-normalized. No weights, no network."""

    def __init__(self, dim: int = 256, model_id: str = "hash-3gram-256-v1"):
        self.dim = dim
        self.model_id = model_id

    def embed_text(self, text: str) -> np.ndarray:
        norm = normalize_for_embedding(text)
        if not norm:
            raise ValueError("cannot embed empty text")
        grams = [norm[i : i + 3] for i in range(len(norm) - 2)] if len(norm) >= 3 else [norm]
        vec = np.zeros(self.dim, dtype=np.float64)
        for gram in grams:
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
            vec[int.from_bytes(digest, "big") % self.dim] += 1.0
        return vec / np.linalg.norm(vec)


class HttpEmbedder:
    """Embedder over the de-facto embeddings wire shape:
    request {model, input: [text]}, response {data: [{embedding: [...]}]}."""

    def __init__(
        self,
        url: str,
        model_id: str,
        dim: int,
        token: str = "",
        client: httpx.Client | None = None,
        max_attempts: int = 3,
    ):
        self.url = url
        self.model_id = model_id
        self.dim = dim
        self._token = token
        self._client = client or httpx.Client(timeout=30.0)
        self._max_attempts = max_attempts

    def embed_text(self, text: str) -> np.ndarray:
        if not text.strip():
            raise ValueError("cannot embed empty text")
        headers = {"Authorization": f"Bearer {self._token}"} if self._token else {}
        last_error: Exception | None = None
        for _ in range(self._max_attempts):
            try:
                resp = self._client.post(
                    self.url,
                    json={"model": self.model_id, "input": [text]},
                    headers=headers,
                )
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if resp.status_code >= 500:
                last_error = EmbedderUnavailable(f"embedder returned {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise EmbedderUnavailable(f"embedder rejected request: {resp.status_code}")
            values = resp.json()["data"][0]["embedding"]
            vec = np.asarray(values, dtype=np.float64)
            if vec.shape != (self.dim,):
                raise DimensionMismatch(
                    f"embedder returned dim {vec.shape}, declared {self.dim}"
                )
            return vec
        raise EmbedderUnavailable(f"embedder unreachable after {self._max_attempts} attempts: {last_error}")


def embed(text: str, port: EmbedderPort) -> np.ndarray:
    """Embed text through a port, enforcing the declared dimension."""
    if not text or not text.strip():
        raise ValueError("cannot embed empty text")
    vec = np.asarray(port.embed_text(text), dtype=np.float64)
    if vec.shape != (port.dim,):
        raise DimensionMismatch(f"embedder produced dim {vec.shape}, declared {port.dim}")
    if not np.all(np.isfinite(vec)):
        raise DimensionMismatch("embedder produced non-finite values")
    return vec


@dataclass(frozen=True)
class IndexedChunk:
    chunk_id: str
    doc_id: str
    text: str
    vector: np.ndarray

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("chunk text must be non-empty")


@dataclass(frozen=True)
class SearchHit:
    chunk_id: str
    score: float


class VectorIndex:
    """Exact flat cosine index. Many concurrent readers, single writer;
    a chunk becomes visible to readers only once fully written."""

    def __init__(self, dim: int):
        self.dim = dim
        self._chunks: dict[str, IndexedChunk] = {}
        self._norms: dict[str, float] = {}
        self._write_lock = threading.Lock()
        self._matrix: list[tuple[str, np.ndarray, float]] | None = None
        self._ids: list[str] = []

    def __len__(self) -> int:
        return len(self._chunks)

    def upsert(self, chunk: IndexedChunk) -> None:
        vec = np.asarray(chunk.vector, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DimensionMismatch(
                f"chunk {chunk.chunk_id!r} has dim {vec.shape}, index dim {self.dim}"
            )
        if not np.all(np.isfinite(vec)):
            raise DimensionMismatch(f"chunk {chunk.chunk_id!r} has non-finite values")
        stored = IndexedChunk(chunk.chunk_id, chunk.doc_id, chunk.text, vec.copy())
        with self._write_lock:
            self._chunks[stored.chunk_id] = stored
            self._norms[stored.chunk_id] = math.sqrt(float(np.dot(vec, vec)))
            self._matrix = None

    def get(self, chunk_id: str) -> IndexedChunk | None:
        return self._chunks.get(chunk_id)

    def chunks(self) -> list[IndexedChunk]:
        return [self._chunks[cid] for cid in sorted(self._chunks)]

    def _snapshot(self) -> list[tuple[str, np.ndarray, float]]:
        with self._write_lock:
            if self._matrix is None:
                self._ids = sorted(self._chunks)
                self._matrix = [
                    (cid, self._chunks[cid].vector, self._norms[cid]) for cid in self._ids
                ]
            return self._matrix

    def search_topk(self, query: np.ndarray, k: int) -> list[SearchHit]:
        """Top-k by exact cosine similarity, ties broken by chunk_id ascending.

        Scores use the canonical per-pair formulation
        dot(v, q) / (sqrt(dot(v, v)) * sqrt(dot(q, q))) so the ranking is
        bit-identical to a brute-force scorer (a blocked matrix product
        rounds differently and can flip near-ties). An empty index yields an
        empty hit list; zero exemplars is the RAG layer's call, not an index
        failure.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.dim,):
            raise DimensionMismatch(f"query dim {query.shape}, index dim {self.dim}")
        entries = self._snapshot()
        if not entries:
            return []
        qnorm = math.sqrt(float(np.dot(query, query)))
        if qnorm == 0.0:
            raise ValueError("query vector must be non-zero")
        scored = []
        for chunk_id, vec, vnorm in entries:
            score = float(np.dot(vec, query)) / (vnorm * qnorm)
            scored.append((chunk_id, min(1.0, max(-1.0, score))))
        scored.sort(key=lambda pair: (-pair[1], pair[0]))
        return [SearchHit(chunk_id, score) for chunk_id, score in scored[: min(k, len(entries))]]


def persist(index: VectorIndex, destination: str | Path) -> None:
    """Write a self-validating index file: one header line, one chunk per line,
    checksum over the chunk payload."""
    lines = []
    for chunk in index.chunks():
        lines.append(
            json.dumps(
                {
                    "chunk_id": chunk.chunk_id,
                    "doc_id": chunk.doc_id,
                    "text": chunk.text,
                    "vector": chunk.vector.tolist(),
                },
                sort_keys=True,
                ensure_ascii=False,
                separators=(",", ":"),
            )
        )
    payload = "".join(line + "\n" for line in lines)
    header = json.dumps(
        {
            "format_version": INDEX_FORMAT_VERSION,
            "dim": index.dim,
            "count": len(index),
            "checksum": hashlib.sha256(payload.encode("utf-8")).hexdigest(),
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    Path(destination).write_text(header + "\n" + payload, encoding="utf-8")


def load(source: str | Path) -> VectorIndex:
    raw = Path(source).read_text(encoding="utf-8")
    newline = raw.find("\n")
    if newline < 0:
        raise CorruptIndexFile(f"{source}: missing header line")
    try:
        header = json.loads(raw[:newline])
    except json.JSONDecodeError as exc:
        raise CorruptIndexFile(f"{source}: unreadable header: {exc}") from exc
    if header.get("format_version") != INDEX_FORMAT_VERSION:
        raise VersionMismatch(
            f"{source}: format_version {header.get('format_version')!r}, "
            f"expected {INDEX_FORMAT_VERSION}"
        )
    payload = raw[newline + 1 :]
    if hashlib.sha256(payload.encode("utf-8")).hexdigest() != header.get("checksum"):
        raise CorruptIndexFile(f"{source}: checksum mismatch")
    lines = [line for line in payload.split("\n") if line]
    if len(lines) != header.get("count"):
        raise CorruptIndexFile(f"{source}: expected {header.get('count')} chunks, found {len(lines)}")
    index = VectorIndex(dim=int(header["dim"]))
    for line in lines:
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorruptIndexFile(f"{source}: unreadable chunk line: {exc}") from exc
        index.upsert(
            IndexedChunk(
                chunk_id=data["chunk_id"],
                doc_id=data["doc_id"],
                text=data["text"],
                vector=np.asarray(data["vector"], dtype=np.float64),
            )
        )
    return index


def build_chunks(
    docs: Iterable,
    embedder: EmbedderPort,
    process_texts: dict[str, str] | None = None,
) -> list[IndexedChunk]:
    """One chunk per document: title + abstract + expert process description."""
    chunks = []
    for doc in docs:
        meta = doc.meta
        parts = [meta.title, meta.abstract]
        if process_texts and doc.doc_id in process_texts:
            parts.append(process_texts[doc.doc_id])
        text = " ".join(p for p in parts if p).strip()
        if not text:
            continue
        chunks.append(
            IndexedChunk(
                chunk_id=doc.doc_id,
                doc_id=doc.doc_id,
                text=text,
                vector=embed(text, embedder),
            )
        )
    return chunks

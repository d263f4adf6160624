"""Chunked document embedding, mean+max pooling, exact cosine top-k search.

Long token sequences are split into overlapping windows, each window is
embedded by a pluggable provider, and the chunk vectors are combined by
averaging the componentwise mean and componentwise max. Search is exact
brute-force cosine over the whole embedding set.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    EmptyChunkList,
    EmptyTokens,
    TruncatedFile,
    ZeroVector,
)
from .textproc import AnalyzerConfig, analyze, compose_document_text

EMB_MAGIC = b"EMB1"
EMB_VERSION = 1


@dataclass(frozen=True)
class ChunkingConfig:
    chunk_size: int = 510
    overlap: int = 50

    def __post_init__(self):
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        if not 0 <= self.overlap < self.chunk_size:
            raise ValueError("overlap must satisfy 0 <= overlap < chunk_size")

    @property
    def stride(self) -> int:
        return self.chunk_size - self.overlap


@dataclass
class EmbeddingSet:
    dim: int
    entries: dict = field(default_factory=dict)  # id -> np.ndarray(dim,)

    def add(self, key: str, vector) -> None:
        vector = np.asarray(vector, dtype=np.float32)
        if vector.shape != (self.dim,):
            raise DimensionMismatch(
                f"vector for {key!r} has shape {vector.shape}, expected ({self.dim},)"
            )
        if not np.all(np.isfinite(vector)):
            raise ValueError(f"vector for {key!r} has non-finite components")
        self.entries[key] = vector

    def __len__(self):
        return len(self.entries)


def chunk(tokens, config: ChunkingConfig) -> list[list[str]]:
    """Overlapping token windows at chunk_size - overlap stride.

    Generation stops once a window reaches the final token, so an input of
    at most chunk_size tokens yields exactly one chunk.
    """
    tokens = list(tokens)
    if not tokens:
        raise EmptyTokens("cannot chunk an empty token sequence")
    chunks = []
    start = 0
    while True:
        end = min(start + config.chunk_size, len(tokens))
        chunks.append(tokens[start:end])
        if end >= len(tokens):
            return chunks
        start += config.stride


def pool_document(chunk_vectors) -> np.ndarray:
    """Combine chunk vectors: (componentwise mean + componentwise max) / 2."""
    vectors = [np.asarray(v, dtype=np.float64) for v in chunk_vectors]
    if not vectors:
        raise EmptyChunkList("pooling requires at least one chunk vector")
    dims = {v.shape for v in vectors}
    if len(dims) != 1 or vectors[0].ndim != 1:
        raise DimensionMismatch(f"inconsistent chunk vector shapes: {dims}")
    stacked = np.stack(vectors)
    return 0.5 * (stacked.mean(axis=0) + stacked.max(axis=0))


def embed_text(text: str, analyzer: AnalyzerConfig, provider, chunking: ChunkingConfig):
    """Chunk + encode + pool a raw text. Queries and documents share this path."""
    tokens = analyze(text, analyzer)
    return pool_document([provider(c) for c in chunk(tokens, chunking)])


def embed_document(doc, fields, analyzer, provider, chunking: ChunkingConfig):
    """Compose the document's selected fields, then chunk, encode and pool."""
    return embed_text(compose_document_text(doc, fields), analyzer, provider, chunking)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"shapes {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector("cosine undefined for a zero vector")
    return float(np.dot(u, v) / (nu * nv))


def search(doc_embeddings: EmbeddingSet, query_vector, k: int = 100):
    """Exact top-k by cosine similarity, ties broken by ascending doc_id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    query = np.asarray(query_vector, dtype=np.float64)
    if query.shape != (doc_embeddings.dim,):
        raise DimensionMismatch(
            f"query dim {query.shape} vs set dim ({doc_embeddings.dim},)"
        )
    qnorm = float(np.linalg.norm(query))
    if qnorm == 0.0:
        raise ZeroVector("cannot search with a zero query vector")
    scored = []
    for doc_id, vec in doc_embeddings.entries.items():
        scored.append((doc_id, cosine(query, vec)))
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


def write_embeddings(embedding_set: EmbeddingSet, path) -> None:
    """Binary little-endian format: magic, version, dim, count, records.

    Each record is [id_len u16, id UTF-8 bytes, dim x f32]. Ids are written
    in ascending byte order so identical sets produce identical files.
    """
    with open(path, "wb") as fh:
        fh.write(EMB_MAGIC)
        fh.write(struct.pack("<B", EMB_VERSION))
        fh.write(struct.pack("<I", embedding_set.dim))
        fh.write(struct.pack("<Q", len(embedding_set.entries)))
        for key in sorted(embedding_set.entries, key=lambda s: s.encode("utf-8")):
            raw = key.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(
                np.asarray(embedding_set.entries[key], dtype="<f4").tobytes()
            )


def read_embeddings(path) -> EmbeddingSet:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != EMB_MAGIC:
        raise BadMagic(f"{path}: expected magic {EMB_MAGIC!r}, got {data[:4]!r}")
    offset = 4
    try:
        version, = struct.unpack_from("<B", data, offset)
        offset += 1
        if version != EMB_VERSION:
            raise BadMagic(f"{path}: unsupported version {version}")
        dim, = struct.unpack_from("<I", data, offset)
        offset += 4
        count, = struct.unpack_from("<Q", data, offset)
        offset += 8
        result = EmbeddingSet(dim=dim)
        for _ in range(count):
            id_len, = struct.unpack_from("<H", data, offset)
            offset += 2
            key = data[offset : offset + id_len].decode("utf-8")
            offset += id_len
            nbytes = 4 * dim
            if offset + nbytes > len(data):
                raise TruncatedFile(f"{path}: vector for {key!r} is truncated")
            vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset)
            offset += nbytes
            result.add(key, vec)
    except struct.error as exc:
        raise TruncatedFile(f"{path}: header truncated: {exc}") from exc
    return result


class HashProjectionProvider:
    """Deterministic test provider: hashed bag-of-tokens, fixed random projection.

    CRC32 bucketing plus a seeded Gaussian projection, so the same chunk
    always maps to the same vector with no trained state.
    """

    def __init__(self, dim: int = 16, buckets: int = 64, seed: int = 0):
        self.dim = dim
        self.buckets = buckets
        rng = np.random.default_rng(seed)
        self.projection = rng.standard_normal((dim, buckets))

    def __call__(self, tokens) -> np.ndarray:
        counts = np.zeros(self.buckets, dtype=np.float64)
        for t in tokens:
            counts[zlib.crc32(t.encode("utf-8")) % self.buckets] += 1.0
        return self.projection @ counts

"""Toy dual-encoder training with in-batch negatives and hard negatives.

The encoder is a linear map over hashed bag-of-token features with an L2
normalization on the output, so dot products equal cosine similarities. The
training loss is the scaled in-batch softmax cross-entropy, optionally with
extra hard-negative candidate columns in the denominator. Optimization is
plain gradient descent with linear learning-rate warm-up.
"""

from __future__ import annotations

import csv
import math
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    EmptyText,
    EmptyTrainingSet,
    KLessThanN,
    NonFiniteInput,
    NonSquareMatrix,
    TruncatedFile,
    ZeroVector,
)

TOY_MAGIC = b"TOY1"
TOY_VERSION = 1


@dataclass
class ToyEncoderParams:
    """Linear projection weights; feature space is hashed token buckets."""

    weight: np.ndarray  # (dim_out, dim_feat)

    @property
    def dim_out(self) -> int:
        return self.weight.shape[0]

    @property
    def dim_feat(self) -> int:
        return self.weight.shape[1]


def init_params(dim_out: int, dim_feat: int, seed: int = 0) -> ToyEncoderParams:
    rng = np.random.default_rng(seed)
    weight = rng.standard_normal((dim_out, dim_feat)) / math.sqrt(dim_feat)
    return ToyEncoderParams(weight=weight)


@dataclass(frozen=True)
class TrainExample:
    query_id: str
    positive_doc_id: str
    hard_negative_doc_ids: tuple = ()

    def __post_init__(self):
        object.__setattr__(
            self, "hard_negative_doc_ids", tuple(self.hard_negative_doc_ids)
        )
        if self.positive_doc_id in self.hard_negative_doc_ids:
            raise ValueError(
                f"example {self.query_id!r}: positive listed as hard negative"
            )


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    scale: float = 20.0
    epochs: int = 2
    learning_rate: float = 0.1
    warmup_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if not 0.0 <= self.warmup_fraction <= 1.0:
            raise ValueError("warmup_fraction must lie in [0, 1]")


def hashed_features(text: str, n_buckets: int) -> np.ndarray:
    """L2-normalized hashed bag-of-tokens counts."""
    tokens = text.split()
    if not tokens:
        raise EmptyText("cannot featurize empty text")
    counts = np.zeros(n_buckets, dtype=np.float64)
    for t in tokens:
        counts[zlib.crc32(t.encode("utf-8")) % n_buckets] += 1.0
    return counts / np.linalg.norm(counts)


def encode(text: str, params: ToyEncoderParams) -> np.ndarray:
    """Unit-norm embedding of a text; doubles as a dense EmbeddingProvider."""
    u = hashed_features(text, params.dim_feat)
    z = params.weight @ u
    norm = np.linalg.norm(z)
    if norm == 0.0:
        raise ZeroVector("encoder produced a zero vector")
    return z / norm


def encode_tokens(tokens, params: ToyEncoderParams) -> np.ndarray:
    """Token-chunk entry point matching the dense module's provider interface."""
    return encode(" ".join(tokens), params)


def _row_losses(sim: np.ndarray, scale: float) -> np.ndarray:
    """Stable per-row -log softmax(diagonal) with max subtraction."""
    logits = scale * sim
    m = logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(logits - m).sum(axis=1)) + m[:, 0]
    diag = np.diagonal(logits)
    return lse - diag


def mnrl_loss(sim_matrix, scale: float = 20.0) -> float:
    """In-batch negatives loss over an N x N similarity matrix."""
    sim = np.asarray(sim_matrix, dtype=np.float64)
    if sim.ndim != 2 or sim.shape[0] != sim.shape[1]:
        raise NonSquareMatrix(f"expected a square matrix, got shape {sim.shape}")
    if not np.all(np.isfinite(sim)):
        raise NonFiniteInput("similarity matrix contains non-finite values")
    return float(_row_losses(sim, scale).mean())


def mnrl_loss_hn(sim_matrix, scale: float = 20.0) -> float:
    """Hard-negative variant over an N x K matrix with K >= N candidates.

    Columns 0..N-1 are the in-batch positives (row i's own positive on the
    diagonal); extra columns are hard-negative candidates.
    """
    sim = np.asarray(sim_matrix, dtype=np.float64)
    if sim.ndim != 2:
        raise NonSquareMatrix(f"expected a matrix, got shape {sim.shape}")
    n, k = sim.shape
    if k < n:
        raise KLessThanN(f"need K >= N candidate columns, got N={n}, K={k}")
    if not np.all(np.isfinite(sim)):
        raise NonFiniteInput("similarity matrix contains non-finite values")
    return float(_row_losses(sim, scale).mean())


@dataclass
class PreparedBatch:
    """Featurized batch: query rows and candidate rows (positives first)."""

    query_feats: np.ndarray  # (N, F)
    cand_feats: np.ndarray  # (K, F), first N rows are in-batch positives


def prepare_batch(
    examples, query_texts: dict, doc_texts: dict, n_buckets: int, regime: str
) -> PreparedBatch:
    if regime not in ("in_batch", "in_batch_plus_hn"):
        raise ValueError(f"unknown regime {regime!r}")
    queries = [hashed_features(query_texts[e.query_id], n_buckets) for e in examples]
    cands = [hashed_features(doc_texts[e.positive_doc_id], n_buckets) for e in examples]
    if regime == "in_batch_plus_hn":
        for e in examples:
            for did in e.hard_negative_doc_ids:
                cands.append(hashed_features(doc_texts[did], n_buckets))
    return PreparedBatch(
        query_feats=np.stack(queries), cand_feats=np.stack(cands)
    )


def loss_and_gradient(batch: PreparedBatch, params: ToyEncoderParams, scale: float):
    """Loss value and analytic gradient w.r.t. the weight matrix."""
    w = params.weight
    u = batch.query_feats  # (N, F)
    v = batch.cand_feats  # (K, F)
    n = u.shape[0]

    x = u @ w.T  # (N, out)
    y = v @ w.T  # (K, out)
    nx = np.linalg.norm(x, axis=1, keepdims=True)
    ny = np.linalg.norm(y, axis=1, keepdims=True)
    if np.any(nx == 0.0) or np.any(ny == 0.0):
        raise ZeroVector("encoder produced a zero vector inside a batch")
    a = x / nx
    b = y / ny
    sim = a @ b.T  # (N, K)

    logits = scale * sim
    m = logits.max(axis=1, keepdims=True)
    exp = np.exp(logits - m)
    probs = exp / exp.sum(axis=1, keepdims=True)
    loss = float((np.log(exp.sum(axis=1)) + m[:, 0] - np.diagonal(logits)).mean())

    g = probs.copy()
    g[np.arange(n), np.arange(n)] -= 1.0
    g *= scale / n  # dLoss/dSim

    da = g @ b  # (N, out)
    db = g.T @ a  # (K, out)
    dx = (da - (da * a).sum(axis=1, keepdims=True) * a) / nx
    dy = (db - (db * b).sum(axis=1, keepdims=True) * b) / ny
    grad = dx.T @ u + dy.T @ v
    return loss, grad


def loss_gradient(
    examples,
    query_texts: dict,
    doc_texts: dict,
    params: ToyEncoderParams,
    regime: str,
    scale: float = 20.0,
):
    """Analytic gradient of the selected loss regime for one batch."""
    batch = prepare_batch(examples, query_texts, doc_texts, params.dim_feat, regime)
    return loss_and_gradient(batch, params, scale)


def learning_rate_at(step: int, total_steps: int, config: TrainConfig) -> float:
    """Linear warm-up: lr(s) = lr * min(1, s / ceil(warmup_fraction * T))."""
    warmup_steps = math.ceil(config.warmup_fraction * total_steps)
    if warmup_steps == 0:
        return config.learning_rate
    return config.learning_rate * min(1.0, step / warmup_steps)


@dataclass
class TraceEntry:
    epoch: int
    step: int
    lr: float
    loss: float


def train(
    examples,
    query_texts: dict,
    doc_texts: dict,
    config: TrainConfig,
    regime: str = "in_batch",
    init: ToyEncoderParams | None = None,
    dim_out: int = 32,
    dim_feat: int = 256,
):
    """Gradient descent over shuffled batches; deterministic given the seed.

    Returns the final parameters and the per-step loss trace.
    """
    examples = list(examples)
    if not examples:
        raise EmptyTrainingSet("no training examples")
    params = init if init is not None else init_params(dim_out, dim_feat, config.seed)
    weight = params.weight.copy()
    rng = np.random.default_rng(config.seed)

    n_batches = math.ceil(len(examples) / config.batch_size)
    total_steps = config.epochs * n_batches
    trace: list[TraceEntry] = []
    step = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(examples))
        for start in range(0, len(examples), config.batch_size):
            step += 1
            batch_examples = [examples[i] for i in order[start : start + config.batch_size]]
            batch = prepare_batch(
                batch_examples, query_texts, doc_texts, weight.shape[1], regime
            )
            loss, grad = loss_and_gradient(
                batch, ToyEncoderParams(weight=weight), config.scale
            )
            lr = learning_rate_at(step, total_steps, config)
            weight -= lr * grad
            trace.append(TraceEntry(epoch=epoch, step=step, lr=lr, loss=loss))
    return ToyEncoderParams(weight=weight), trace


def write_trace(trace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "step", "lr", "loss"])
        for entry in trace:
            writer.writerow(
                [entry.epoch, entry.step, f"{entry.lr:.12g}", f"{entry.loss:.12g}"]
            )


def save_params(params: ToyEncoderParams, path) -> None:
    """Checkpoint: magic, version, dims, row-major float64 weights."""
    with open(path, "wb") as fh:
        fh.write(TOY_MAGIC)
        fh.write(struct.pack("<B", TOY_VERSION))
        fh.write(struct.pack("<II", params.dim_out, params.dim_feat))
        fh.write(np.ascontiguousarray(params.weight, dtype="<f8").tobytes())


def load_params(path) -> ToyEncoderParams:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != TOY_MAGIC:
        raise BadMagic(f"{path}: expected magic {TOY_MAGIC!r}, got {data[:4]!r}")
    try:
        version, = struct.unpack_from("<B", data, 4)
        if version != TOY_VERSION:
            raise BadMagic(f"{path}: unsupported version {version}")
        dim_out, dim_feat = struct.unpack_from("<II", data, 5)
    except struct.error as exc:
        raise TruncatedFile(f"{path}: header truncated") from exc
    expected = 13 + 8 * dim_out * dim_feat
    if len(data) < expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, got {len(data)}")
    weight = np.frombuffer(
        data, dtype="<f8", count=dim_out * dim_feat, offset=13
    ).reshape(dim_out, dim_feat)
    return ToyEncoderParams(weight=weight.copy())

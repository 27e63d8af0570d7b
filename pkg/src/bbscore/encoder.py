"""Trainable bridge-encoder head.

An MLP ``f`` maps per-sentence hidden states into a low-dimensional latent
space where coherent documents should trace Brownian-bridge-like paths.  It
is trained on random sentence triplets ``(i1 < i2 < i3)`` with a contrastive
objective: the encoded middle sentence should sit near the time-interpolation
of the encoded outer sentences,

    d(t) = -|| f(x_{i2}) - (1-delta) f(x_{i1}) - delta f(x_{i3}) ||^2 / (2 sigma^2)

with ``delta = (i2-i1)/(i3-i1)`` and ``sigma^2 = (i2-i1)(i3-i2)/(i3-i1)``
(the bridge's conditional mean and variance weights).  Each anchor competes
against the encoded midpoints of the whole batch via a softmax over ``d``.

Gradients are analytic (shared backprop machinery in ``_mlp``); the
optimizer is plain SGD with classical momentum.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import _mlp
from .bridge import LatentSequence
from .errors import DataError, NumericError


@dataclass
class HiddenStateSequence:
    """Per-sentence hidden states for one document: ``rows`` is ``(T, d)``."""

    doc_id: str
    rows: np.ndarray

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise DataError(
                f"doc {self.doc_id!r}: hidden states must be (T, d) with T, d >= 1, "
                f"got shape {rows.shape}")
        if not np.isfinite(rows).all():
            raise DataError(f"doc {self.doc_id!r}: non-finite hidden states")
        self.rows = rows

    @property
    def length(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass
class MlpEncoder:
    """Two-layer perceptron ``d -> hidden -> out`` (ReLU hidden, linear out)."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64)
        if self.activation != "relu":
            raise DataError(f"unsupported activation {self.activation!r}")
        if (self.w1.ndim != 2 or self.w2.ndim != 2
                or self.b1.shape != (self.w1.shape[1],)
                or self.b2.shape != (self.w2.shape[1],)
                or self.w2.shape[0] != self.w1.shape[1]):
            raise DataError(
                f"inconsistent encoder shapes: w1 {self.w1.shape}, b1 {self.b1.shape}, "
                f"w2 {self.w2.shape}, b2 {self.b2.shape}")
        for name, arr in (("w1", self.w1), ("b1", self.b1),
                          ("w2", self.w2), ("b2", self.b2)):
            if not np.isfinite(arr).all():
                raise DataError(f"non-finite encoder parameter {name}")

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int = 128, output_dim: int = 8,
             seed: int = 0) -> "MlpEncoder":
        """Fresh encoder with uniform +-1/sqrt(fan_in) weights and biases."""
        rng = np.random.default_rng(seed)
        (w1, b1), (w2, b2) = _mlp.init_layers([input_dim, hidden_dim, output_dim], rng)
        return cls(w1=w1, b1=b1, w2=w2, b2=b2)

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def output_dim(self) -> int:
        return self.w2.shape[1]

    @property
    def layers(self) -> List[_mlp.Layer]:
        return [(self.w1, self.b1), (self.w2, self.b2)]


@dataclass
class Triplet:
    """Three hidden-state rows from one document at positions ``i1 < i2 < i3``.

    Indices are 0-based row positions; only index differences enter the
    bridge weights, so the base does not matter.
    """

    doc_id: str
    i1: int
    i2: int
    i3: int
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray

    def __post_init__(self):
        if not self.i1 < self.i2 < self.i3:
            raise DataError(
                f"triplet indices must be strictly increasing, got "
                f"({self.i1}, {self.i2}, {self.i3})")
        self.x1 = np.asarray(self.x1, dtype=np.float64)
        self.x2 = np.asarray(self.x2, dtype=np.float64)
        self.x3 = np.asarray(self.x3, dtype=np.float64)
        if not (self.x1.shape == self.x2.shape == self.x3.shape) or self.x1.ndim != 1:
            raise DataError("triplet rows must be 1-D vectors of equal length")

    @property
    def delta(self) -> float:
        return (self.i2 - self.i1) / (self.i3 - self.i1)

    @property
    def sigma_sq(self) -> float:
        return (self.i2 - self.i1) * (self.i3 - self.i2) / (self.i3 - self.i1)


@dataclass
class TrainConfig:
    """Hyperparameters for :func:`train_encoder`."""

    epochs: int
    seed: int = 0
    learning_rate: float = 1e-4
    momentum: float = 0.9
    batch_size: int = 32
    hidden_dim: int = 128
    output_dim: int = 8
    negatives: str = "in_batch"  # or "cross_doc_only"

    def __post_init__(self):
        if self.learning_rate < 0:
            raise DataError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise DataError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.batch_size < 1:
            raise DataError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise DataError(f"epochs must be >= 0, got {self.epochs}")
        if self.negatives not in ("in_batch", "cross_doc_only"):
            raise DataError(f"unknown negatives mode {self.negatives!r}")


def encode(enc: MlpEncoder, h: HiddenStateSequence) -> LatentSequence:
    """Row-wise application of the encoder; order preserved."""
    if h.dim != enc.input_dim:
        raise DataError(
            f"encoder/input dim mismatch: doc {h.doc_id!r} has dim {h.dim}, "
            f"encoder expects {enc.input_dim}")
    out, _ = _mlp.forward(enc.layers, h.rows)
    return LatentSequence(doc_id=h.doc_id, rows=out)


def bridge_distance(t: Triplet, enc: MlpEncoder) -> float:
    """Negative scaled squared residual of the interpolation; always <= 0."""
    batch = _batch_arrays([t], enc)
    f1, _ = _mlp.forward(enc.layers, batch.x1)
    f2, _ = _mlp.forward(enc.layers, batch.x2)
    f3, _ = _mlp.forward(enc.layers, batch.x3)
    resid = f2[0] - (1.0 - batch.delta[0]) * f1[0] - batch.delta[0] * f3[0]
    return float(-(resid @ resid) / (2.0 * batch.sigma_sq[0]))


@dataclass
class _BatchArrays:
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    delta: np.ndarray
    sigma_sq: np.ndarray
    doc_ids: list


def _batch_arrays(batch: Sequence[Triplet], enc: MlpEncoder) -> _BatchArrays:
    if not batch:
        raise DataError("empty triplet batch")
    d = batch[0].x1.shape[0]
    if d != enc.input_dim:
        raise DataError(
            f"encoder/input dim mismatch: triplets have dim {d}, "
            f"encoder expects {enc.input_dim}")
    for t in batch:
        if t.x1.shape[0] != d:
            raise DataError("triplets in one batch must share a feature dimension")
    return _BatchArrays(
        x1=np.stack([t.x1 for t in batch]),
        x2=np.stack([t.x2 for t in batch]),
        x3=np.stack([t.x3 for t in batch]),
        delta=np.array([t.delta for t in batch]),
        sigma_sq=np.array([t.sigma_sq for t in batch]),
        doc_ids=[t.doc_id for t in batch],
    )


def _candidate_mask(doc_ids, negatives: str) -> np.ndarray:
    """``mask[k, j]`` is True when batch midpoint ``j`` competes against
    anchor ``k``.  The anchor's own midpoint is always a candidate."""
    B = len(doc_ids)
    if negatives == "in_batch":
        return np.ones((B, B), dtype=bool)
    if negatives == "cross_doc_only":
        ids = np.array(doc_ids, dtype=object)
        mask = ids[:, None] != ids[None, :]
        np.fill_diagonal(mask, True)
        return mask
    raise DataError(f"unknown negatives mode {negatives!r}")


def _loss_core(enc: MlpEncoder, arrays: _BatchArrays, negatives: str,
               anchor_weights: Optional[np.ndarray], want_grads: bool):
    layers = enc.layers
    f1, c1 = _mlp.forward(layers, arrays.x1)
    f2, c2 = _mlp.forward(layers, arrays.x2)
    f3, c3 = _mlp.forward(layers, arrays.x3)
    B = f1.shape[0]
    weights = (np.full(B, 1.0 / B) if anchor_weights is None
               else np.asarray(anchor_weights, dtype=np.float64))

    interp = (1.0 - arrays.delta)[:, None] * f1 + arrays.delta[:, None] * f3
    resid = f2[None, :, :] - interp[:, None, :]          # (anchor k, candidate j, out)
    dist = -(resid ** 2).sum(axis=2) / (2.0 * arrays.sigma_sq)[:, None]
    mask = _candidate_mask(arrays.doc_ids, negatives)
    logits = np.where(mask, dist, -np.inf)
    peak = logits.max(axis=1, keepdims=True)
    expd = np.where(mask, np.exp(logits - peak), 0.0)
    denom = expd.sum(axis=1)
    lse = peak[:, 0] + np.log(denom)
    per_anchor = lse - np.diagonal(dist)
    loss = float(weights @ per_anchor)
    if not math.isfinite(loss):
        raise NumericError("non-finite contrastive loss")
    if not want_grads:
        return loss, None

    softmax = expd / denom[:, None]
    d_dist = weights[:, None] * softmax
    d_dist[np.arange(B), np.arange(B)] -= weights
    d_resid = (d_dist / arrays.sigma_sq[:, None])[:, :, None] * (-resid)
    d_f2 = d_resid.sum(axis=0)
    d_interp = -d_resid.sum(axis=1)
    d_f1 = (1.0 - arrays.delta)[:, None] * d_interp
    d_f3 = arrays.delta[:, None] * d_interp

    g1, _ = _mlp.backward(layers, c1, d_f1)
    g2, _ = _mlp.backward(layers, c2, d_f2)
    g3, _ = _mlp.backward(layers, c3, d_f3)
    grads = [(gw1 + gw2 + gw3, gb1 + gb2 + gb3)
             for (gw1, gb1), (gw2, gb2), (gw3, gb3) in zip(g1, g2, g3)]
    return loss, grads


def contrastive_loss(batch: Sequence[Triplet], enc: MlpEncoder,
                     negatives: str = "in_batch") -> float:
    """Mean over anchors of ``-log softmax`` of the anchor's own midpoint
    against all batch midpoints (own included), each scored with the anchor's
    interpolation target and variance.  Always >= 0; exactly 0 for a batch
    of one.
    """
    loss, _ = _loss_core(enc, _batch_arrays(batch, enc), negatives, None, False)
    return loss


def loss_gradients(batch: Sequence[Triplet], enc: MlpEncoder,
                   negatives: str = "in_batch",
                   anchor_weights: Optional[np.ndarray] = None):
    """Loss and its analytic gradients, as ``(loss, [(dW1, db1), (dW2, db2)])``.

    ``anchor_weights`` reweights the per-anchor loss terms (default uniform
    ``1/B``); a one-hot weight isolates a single anchor's contribution.
    """
    return _loss_core(enc, _batch_arrays(batch, enc), negatives,
                      anchor_weights, True)


def sample_triplets(doc: HiddenStateSequence, count: int,
                    rng: np.random.Generator) -> List[Triplet]:
    """``count`` triplets with indices uniform over all C(T, 3) combinations
    (independent draws, so repeats across triplets are possible)."""
    T = doc.length
    if T < 3:
        raise DataError(
            f"doc {doc.doc_id!r}: document too short to sample triplets (T={T})")
    out = []
    for _ in range(int(count)):
        i1, i2, i3 = np.sort(rng.choice(T, size=3, replace=False))
        out.append(Triplet(doc_id=doc.doc_id, i1=int(i1), i2=int(i2), i3=int(i3),
                           x1=doc.rows[i1], x2=doc.rows[i2], x3=doc.rows[i3]))
    return out


def train_encoder(corpus: Sequence[HiddenStateSequence],
                  cfg: TrainConfig) -> Tuple[MlpEncoder, List[float]]:
    """Train a fresh encoder on the corpus; returns it with the per-epoch
    mean loss trace.

    Each epoch samples ``ceil(T/3)`` fresh triplets from every document with
    ``T >= 3`` (shorter documents are skipped), shuffles them into batches of
    ``cfg.batch_size``, and takes one SGD-with-momentum step per batch.
    Deterministic in ``cfg.seed``.
    """
    corpus = list(corpus)
    if not corpus:
        raise DataError("empty corpus: nothing to train on")
    usable = [doc for doc in corpus if doc.length >= 3]
    if not usable:
        raise DataError("corpus has no document with T >= 3; cannot form triplets")
    dim = usable[0].dim
    for doc in usable:
        if doc.dim != dim:
            raise DataError(
                f"doc {doc.doc_id!r}: dimension {doc.dim} != corpus dimension {dim}")

    rng = np.random.default_rng(cfg.seed)
    enc = MlpEncoder.init(dim, cfg.hidden_dim, cfg.output_dim,
                          seed=int(rng.integers(2 ** 31)))
    layers = enc.layers
    velocity = _mlp.zero_velocity(layers)
    trace: List[float] = []
    for _ in range(cfg.epochs):
        pool: List[Triplet] = []
        for doc in usable:
            pool.extend(sample_triplets(doc, math.ceil(doc.length / 3), rng))
        order = rng.permutation(len(pool))
        total, seen = 0.0, 0
        for lo in range(0, len(pool), cfg.batch_size):
            batch = [pool[k] for k in order[lo:lo + cfg.batch_size]]
            loss, grads = _loss_core(enc, _batch_arrays(batch, enc),
                                     cfg.negatives, None, True)
            _mlp.sgd_momentum_step(layers, grads, velocity,
                                   cfg.learning_rate, cfg.momentum)
            total += loss * len(batch)
            seen += len(batch)
        trace.append(total / seen)
    return enc, trace

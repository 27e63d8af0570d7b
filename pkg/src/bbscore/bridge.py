"""Brownian-bridge likelihood, scoring, diffusion estimation, simulation.

A document is a sequence of latent rows ``s_1 .. s_T`` in ``R^n``.  Under the
bridge model the interior rows fluctuate around the straight line between the
endpoints, with per-position variance governed by a single diffusion
coefficient ``sigma_sq``.  The coherence score of a document is the magnitude
of its average interior negative log-likelihood:

    B(s | sigma_sq) = | sum_i [ log(alpha_i * sigma_sq) + beta_i / sigma_sq ] | / (T - 2)

with ``alpha_i`` and ``beta_i`` as computed in :mod:`bbscore._kernels`.  Lower
scores mean the trajectory looks more like a bridge at that diffusion level.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .errors import DataError, NumericError

#: Floor substituted for degenerate (zero) diffusion estimates before scoring.
SIGMA_FLOOR = 1e-12


@dataclass
class LatentSequence:
    """A document's latent trajectory: ``rows`` has shape ``(T, dim)``."""

    doc_id: str
    rows: np.ndarray

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise DataError(
                f"doc {self.doc_id!r}: rows must be 2-D (T, dim), got shape {rows.shape}")
        if rows.shape[0] < 1 or rows.shape[1] < 1:
            raise DataError(f"doc {self.doc_id!r}: empty trajectory {rows.shape}")
        if not np.isfinite(rows).all():
            raise DataError(f"doc {self.doc_id!r}: non-finite values in rows")
        self.rows = rows

    @property
    def length(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass
class DiffusionEstimate:
    """Maximum-likelihood diffusion coefficient for a corpus.

    ``sigma_sq`` is the arithmetic mean of the ``per_doc`` values (pairs of
    ``(doc_id, per-document estimate)``).  ``degenerate`` marks an all-flat
    corpus whose estimate collapsed to zero.
    """

    sigma_sq: float
    per_doc: list
    n_docs: int
    dim: int
    degenerate: bool = False

    @property
    def scoring_sigma_sq(self) -> float:
        """The estimate with the degeneracy floor applied (safe to score with)."""
        return max(self.sigma_sq, SIGMA_FLOOR)


@dataclass
class BridgeSimConfig:
    """Parameters for simulating one pinned bridge trajectory."""

    length: int
    dim: int
    sigma_sq: float
    seed: int
    start: Optional[np.ndarray] = None
    end: Optional[np.ndarray] = None


RowsLike = Union[LatentSequence, np.ndarray]


def _rows_of(seq: RowsLike, min_length: int = 3) -> np.ndarray:
    if isinstance(seq, LatentSequence):
        rows = seq.rows
        name = repr(seq.doc_id)
    else:
        rows = np.ascontiguousarray(seq, dtype=np.float64)
        name = "<array>"
        if rows.ndim != 2:
            raise DataError(f"doc {name}: rows must be 2-D (T, dim), got shape {rows.shape}")
        if not np.isfinite(rows).all():
            raise DataError(f"doc {name}: non-finite values in rows")
    if rows.shape[0] < min_length:
        raise DataError(
            f"doc {name}: sequence too short (T={rows.shape[0]}, need T >= {min_length})")
    return rows


def _check_sigma(sigma_sq: float) -> float:
    sigma_sq = float(sigma_sq)
    if not np.isfinite(sigma_sq) or sigma_sq <= 0.0:
        raise DataError(f"diffusion coefficient must be positive and finite, got {sigma_sq}")
    return sigma_sq


def bridge_mean(seq: RowsLike, i: int) -> np.ndarray:
    """Expected interior position under the bridge: the point on the straight
    line between the endpoints at 1-based position ``i``,

        mu_i = s_1 + ((i-1)/(T-1)) * (s_T - s_1),

    for ``2 <= i <= T-1`` (positions are 1-based to match the likelihood
    subscripts used throughout this module).
    """
    rows = _rows_of(seq)
    T = rows.shape[0]
    i = int(i)
    if not 2 <= i <= T - 1:
        raise DataError(f"interior index i={i} out of range [2, {T - 1}]")
    return rows[0] + ((i - 1) / (T - 1)) * (rows[-1] - rows[0])


def beta_terms(seq: RowsLike) -> np.ndarray:
    """Normalized squared deviations of the interior rows, shape ``(T-2,)``.

    ``beta_i = (T-1) * ||s_i - mu_i||^2 / (2 * (i-1) * (T-i))`` for
    ``i = 2 .. T-1``, where ``mu_i`` is :func:`bridge_mean` at position ``i``.
    """
    rows = _rows_of(seq)
    T = rows.shape[0]
    j = np.arange(1, T - 1, dtype=np.float64)
    span = float(T - 1)
    mu = rows[0] + (j / span)[:, None] * (rows[-1] - rows[0])
    sq = ((rows[1:-1] - mu) ** 2).sum(axis=1)
    return span * sq / (2.0 * j * (span - j))


def log_likelihood(seq: RowsLike, sigma_sq: float) -> float:
    """Bridge log-likelihood of the interior rows given ``sigma_sq``.

    ``LL = -sum_i [ log(alpha_i * sigma_sq) + beta_i / sigma_sq ]`` over the
    interior positions ``i = 2 .. T-1``.
    """
    rows = _rows_of(seq)
    sigma_sq = _check_sigma(sigma_sq)
    sum_log_alpha, sum_beta = _kernels.bridge_parts(rows)
    T = rows.shape[0]
    ll = -(sum_log_alpha + (T - 2) * np.log(sigma_sq) + sum_beta / sigma_sq)
    if not np.isfinite(ll):
        raise NumericError(f"non-finite log-likelihood at sigma_sq={sigma_sq}")
    return float(ll)


def bbscore(seq: RowsLike, sigma_sq: float) -> float:
    """Coherence score: ``|log_likelihood| / (T - 2)``.  Lower is more coherent."""
    rows = _rows_of(seq)
    sigma_sq = _check_sigma(sigma_sq)
    sum_log_alpha, sum_beta = _kernels.bridge_parts(rows)
    T = rows.shape[0]
    total = sum_log_alpha + (T - 2) * np.log(sigma_sq) + sum_beta / sigma_sq
    if not np.isfinite(total):
        raise NumericError(f"non-finite score at sigma_sq={sigma_sq}")
    return float(abs(total) / (T - 2))


def bbscore_windowed(seq: RowsLike, sigma_sq: float, w: int) -> float:
    """Windowed score with half-width ``w``: each interior row is judged
    against the local chord from ``s_{i-w}`` to ``s_{i+w}`` instead of the
    global endpoint line.

    ``B_w = | sum_i [ log(alpha_w * sigma_sq) + beta_{i,w} / sigma_sq ] | / (T - 2w)``
    over centers ``i = w+1 .. T-w``, with the constant
    ``alpha_w = 2*pi*w*(w+1)/(2w+1)``.  Requires ``T >= 2w + 1``.

    Unlike the global score this one is not invariant under reversing the
    document: the chord weights the right neighbor by ``(w+1)/(2w+1)``.
    """
    w = int(w)
    if w < 1:
        raise DataError(f"window half-width must be >= 1, got {w}")
    rows = _rows_of(seq, min_length=2 * w + 1)
    sigma_sq = _check_sigma(sigma_sq)
    T = rows.shape[0]
    count = T - 2 * w
    alpha_w = 2.0 * np.pi * w * (w + 1.0) / (2.0 * w + 1.0)
    sum_beta = _kernels.windowed_beta_sum(rows, w)
    total = count * np.log(alpha_w * sigma_sq) + sum_beta / sigma_sq
    if not np.isfinite(total):
        raise NumericError(f"non-finite windowed score at sigma_sq={sigma_sq}")
    return float(abs(total) / count)


def estimate_sigma_sq_doc(seq: RowsLike) -> float:
    """Per-document MLE of the diffusion coefficient.

    ``sigma_hat_sq = sum_i beta_i / ((T - 2) * n)``: the average interior
    deviation, averaged again over the ``n`` dimensions.  Zero exactly when
    every interior row lies on the endpoint line.
    """
    rows = _rows_of(seq)
    _, sum_beta = _kernels.bridge_parts(rows)
    T, n = rows.shape
    return float(sum_beta / ((T - 2) * n))


def estimate_sigma_sq_corpus(corpus: Sequence[LatentSequence]) -> DiffusionEstimate:
    """Corpus-level diffusion estimate: mean of the per-document MLEs.

    Every document must have ``T >= 3`` and all documents must share one
    dimension; violations raise :class:`DataError` naming the offending
    document.  An all-flat corpus yields ``sigma_sq == 0.0`` with
    ``degenerate=True``; use :attr:`DiffusionEstimate.scoring_sigma_sq`
    when feeding such an estimate back into the scorers.
    """
    corpus = list(corpus)
    if not corpus:
        raise DataError("empty corpus: nothing to estimate from")
    dim = corpus[0].dim
    for doc in corpus:
        if doc.dim != dim:
            raise DataError(
                f"doc {doc.doc_id!r}: dimension {doc.dim} != corpus dimension {dim}")
        if doc.length < 3:
            raise DataError(
                f"doc {doc.doc_id!r}: sequence too short (T={doc.length}, need T >= 3)")
    flat, offsets = _kernels.pack_ragged([doc.rows for doc in corpus])
    _, sum_beta = _kernels.bridge_parts_many(flat, offsets)
    lengths = np.diff(offsets)
    per_doc = sum_beta / ((lengths - 2) * dim)
    sigma_sq = float(per_doc.mean())
    return DiffusionEstimate(sigma_sq=sigma_sq,
                             per_doc=[(doc.doc_id, float(v))
                                      for doc, v in zip(corpus, per_doc)],
                             n_docs=len(corpus), dim=dim,
                             degenerate=(sigma_sq < SIGMA_FLOOR))


def score_corpus(corpus: Sequence[LatentSequence], sigma_sq: float) -> np.ndarray:
    """Vector of :func:`bbscore` values for a corpus (single kernel pass)."""
    corpus = list(corpus)
    sigma_sq = _check_sigma(sigma_sq)
    if not corpus:
        return np.zeros(0, dtype=np.float64)
    for doc in corpus:
        if doc.length < 3:
            raise DataError(
                f"doc {doc.doc_id!r}: sequence too short (T={doc.length}, need T >= 3)")
    flat, offsets = _kernels.pack_ragged([doc.rows for doc in corpus])
    sum_log_alpha, sum_beta = _kernels.bridge_parts_many(flat, offsets)
    lengths = np.diff(offsets)
    interior = lengths - 2
    total = sum_log_alpha + interior * np.log(sigma_sq) + sum_beta / sigma_sq
    if not np.isfinite(total).all():
        bad = corpus[int(np.flatnonzero(~np.isfinite(total))[0])].doc_id
        raise NumericError(f"non-finite score for doc {bad!r} at sigma_sq={sigma_sq}")
    return np.abs(total) / interior


def simulate_bridge(cfg: BridgeSimConfig) -> LatentSequence:
    """Draw one pinned bridge trajectory of ``cfg.length`` rows.

    With ``T' = T - 1`` and a standard Gaussian walk ``W_0 = 0``,
    ``W_t = Z_1 + .. + Z_t``, row ``t = 0 .. T'`` is

        S_t = a + (t / T') * (b - a) + sigma_m * (W_t - (t / T') * W_{T'})

    where ``sigma_m = sqrt(cfg.sigma_sq)`` and ``a``/``b`` are the requested
    endpoints (zero vectors by default).  The first and last rows equal ``a``
    and ``b`` exactly; the interior marginal variance is
    ``t * (T' - t) / T' * sigma_sq`` per dimension.
    """
    T, n = int(cfg.length), int(cfg.dim)
    if T < 2:
        raise DataError(f"simulated bridge needs length >= 2, got {T}")
    if n < 1:
        raise DataError(f"simulated bridge needs dim >= 1, got {n}")
    sigma_m = np.sqrt(_check_sigma(cfg.sigma_sq))
    a = np.zeros(n) if cfg.start is None else np.asarray(cfg.start, dtype=np.float64)
    b = np.zeros(n) if cfg.end is None else np.asarray(cfg.end, dtype=np.float64)
    if a.shape != (n,) or b.shape != (n,):
        raise DataError(f"endpoints must have shape ({n},), got {a.shape} and {b.shape}")
    rng = np.random.default_rng(cfg.seed)
    walk = np.zeros((T, n))
    walk[1:] = np.cumsum(rng.standard_normal((T - 1, n)), axis=0)
    frac = (np.arange(T, dtype=np.float64) / (T - 1))[:, None]
    rows = a + frac * (b - a) + sigma_m * (walk - frac * walk[-1])
    return LatentSequence(doc_id=f"sim-{cfg.seed}", rows=rows)


def simulate_corpus(n_docs: int,
                    length,
                    dim: int,
                    sigma_sq: float,
                    seed: int,
                    endpoints: str = "zero",
                    endpoint_scale: float = 1.0,
                    noise_std: float = 0.0):
    """Simulate a corpus of bridges with optional observation noise.

    ``length`` is either a fixed ``int`` or a ``(lo, hi)`` pair sampled
    uniformly (inclusive).  ``endpoints`` is ``"zero"`` (pin at the origin)
    or ``"gauss"`` (endpoints drawn N(0, endpoint_scale^2) per dimension).
    ``noise_std > 0`` adds i.i.d. isotropic Gaussian noise to the *interior*
    rows only, leaving the pinned endpoints untouched.  Fully deterministic
    in ``seed``.
    """
    if n_docs < 1:
        raise DataError(f"need at least one document, got {n_docs}")
    if endpoints not in ("zero", "gauss"):
        raise DataError(f"unknown endpoint mode {endpoints!r}")
    master = np.random.default_rng(np.random.SeedSequence(seed))
    if isinstance(length, (tuple, list)):
        lo, hi = int(length[0]), int(length[1])
        if lo < 2 or hi < lo:
            raise DataError(f"bad length range ({lo}, {hi})")
        lengths = master.integers(lo, hi + 1, size=n_docs)
    else:
        lengths = np.full(n_docs, int(length))
    child_seeds = master.integers(0, 2 ** 63 - 1, size=n_docs)
    docs = []
    for k in range(n_docs):
        if endpoints == "gauss":
            ab = master.standard_normal((2, dim)) * endpoint_scale
            start, end = ab[0], ab[1]
        else:
            start = end = None
        doc = simulate_bridge(BridgeSimConfig(
            length=int(lengths[k]), dim=dim, sigma_sq=sigma_sq,
            seed=int(child_seeds[k]), start=start, end=end))
        rows = doc.rows
        if noise_std > 0.0 and rows.shape[0] > 2:
            rows = rows.copy()
            rows[1:-1] += noise_std * master.standard_normal((rows.shape[0] - 2, dim))
        docs.append(LatentSequence(doc_id=f"sim-{seed}-{k:04d}", rows=rows))
    return docs

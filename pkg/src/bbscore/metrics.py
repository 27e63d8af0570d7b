"""Task metrics and analyses: AUC, pairwise accuracy, 1-D Wasserstein
distance, min-max normalization, diffusion-coefficient sensitivity sweeps,
and latent trajectory profiling."""

import csv
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .bridge import LatentSequence, estimate_sigma_sq_corpus
from .errors import DataError
from .shuffles import ShuffleDataset


def _avg_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned their average rank."""
    uniq, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts)
    avg = upper - (counts - 1) / 2.0
    return avg[inverse]


def auc(incoherent_scores, coherent_scores) -> float:
    """Mann-Whitney AUC: probability a random incoherent score exceeds a
    random coherent one, ties credited 0.5.  1.0 means perfect separation
    with incoherent scores higher."""
    inc = np.asarray(incoherent_scores, dtype=np.float64).ravel()
    coh = np.asarray(coherent_scores, dtype=np.float64).ravel()
    if inc.size == 0 or coh.size == 0:
        raise DataError("empty score set")
    ranks = _avg_ranks(np.concatenate([inc, coh]))
    r_inc = ranks[:inc.size].sum()
    u = r_inc - inc.size * (inc.size + 1) / 2.0
    return float(u / (inc.size * coh.size))


def pairwise_accuracy(pairs) -> float:
    """Fraction of (original, altered) pairs with the original score
    strictly lower; ties count as failures."""
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.size == 0:
        raise DataError("no pairs")
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DataError(f"expected (N, 2) pairs, got shape {arr.shape}")
    return float(np.mean(arr[:, 0] < arr[:, 1]))


def wasserstein1(p, q) -> float:
    """1-D empirical W1 distance via quantile-function integration.

    Equals the mean absolute difference of sorted samples when the sizes
    match; for unequal sizes the piecewise-constant CDF difference is
    integrated exactly.
    """
    p = np.sort(np.asarray(p, dtype=np.float64).ravel())
    q = np.sort(np.asarray(q, dtype=np.float64).ravel())
    if p.size == 0 or q.size == 0:
        raise DataError("empty distribution")
    xs = np.sort(np.concatenate([p, q]))
    if xs[0] == xs[-1]:
        return 0.0
    cuts = xs[:-1]
    cdf_p = np.searchsorted(p, cuts, side="right") / p.size
    cdf_q = np.searchsorted(q, cuts, side="right") / q.size
    return float(np.sum(np.abs(cdf_p - cdf_q) * np.diff(xs)))


def normalize_1_2(column) -> np.ndarray:
    """Min-max rescale onto [1, 2]; an all-equal column maps to all ones."""
    col = np.asarray(column, dtype=np.float64).ravel()
    if col.size == 0:
        raise DataError("empty column")
    lo, hi = col.min(), col.max()
    if hi == lo:
        return np.ones_like(col)
    return 1.0 + (col - lo) / (hi - lo)


@dataclass
class ScoreReport:
    """Per-document scores plus the aggregates recomputable from them."""

    task: str
    per_doc: List[Tuple[str, float]]
    aggregates: dict = field(default_factory=dict)
    matrix: Optional[dict] = None
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "task": self.task,
            "per_doc": [[doc_id, score] for doc_id, score in self.per_doc],
            "aggregates": self.aggregates,
            "config": self.config,
        }
        if self.matrix is not None:
            out["matrix"] = self.matrix
        return out


@dataclass
class SigmaSweepResult:
    """AUC of the shuffle test re-scored across a sigma_sq grid."""

    points: List[Tuple[float, float]]   # (sigma_sq, auc)
    sigma_hat: float                    # corpus estimate from the originals
    nearest_index: int                  # grid point closest to sigma_hat

    def to_dict(self) -> dict:
        return {
            "points": [[s, a] for s, a in self.points],
            "sigma_hat": self.sigma_hat,
            "nearest_index": self.nearest_index,
            "nearest_sigma_sq": self.points[self.nearest_index][0],
        }


def _score_parts(docs: Sequence[LatentSequence]):
    """One kernel pass; scores at any sigma_sq are then a closed form."""
    for doc in docs:
        if doc.length < 3:
            raise DataError(
                f"doc {doc.doc_id!r}: sequence too short (T={doc.length}, need T >= 3)")
    flat, offsets = _kernels.pack_ragged([d.rows for d in docs])
    sla, sb = _kernels.bridge_parts_many(flat, offsets)
    interior = np.diff(offsets) - 2
    return sla, sb, interior


def _scores_at(parts, sigma_sq: float) -> np.ndarray:
    sla, sb, interior = parts
    return np.abs(sla + interior * np.log(sigma_sq) + sb / sigma_sq) / interior


def sigma_sweep(corpus: Sequence[LatentSequence], dataset: ShuffleDataset,
                sigma_grid) -> SigmaSweepResult:
    """Shuffle-test AUC at every grid value of the diffusion coefficient.

    Originals (the corpus documents represented in ``dataset``) form the
    coherent set and the dataset's shuffles the incoherent set; both are
    re-scored at each grid point from a single likelihood-parts pass.  The
    result marks the grid point nearest the corpus estimate computed from
    the originals, so the sweep can be read as "how much does scoring at
    the estimated coefficient matter".
    """
    grid = [float(s) for s in sigma_grid]
    if not grid:
        raise DataError("empty sigma_sq grid")
    for s in grid:
        if not s > 0:
            raise DataError(f"grid values must be positive, got {s}")
    represented = {p.doc_id for p in dataset.pairs}
    originals = [doc for doc in corpus if doc.doc_id in represented]
    if not originals:
        raise DataError("no corpus document is represented in the shuffle dataset")
    sigma_hat = estimate_sigma_sq_corpus(originals).sigma_sq
    parts_orig = _score_parts(originals)
    parts_shuf = _score_parts([p.shuffled for p in dataset.pairs])
    points = []
    for s in grid:
        points.append((s, auc(_scores_at(parts_shuf, s), _scores_at(parts_orig, s))))
    nearest = int(np.argmin(np.abs(np.asarray(grid) - sigma_hat)))
    return SigmaSweepResult(points=points, sigma_hat=sigma_hat, nearest_index=nearest)


@dataclass
class TrajectoryProfile:
    """Mean and variance of latent trajectories resampled to a common length."""

    length: int
    mean: np.ndarray        # (L, dim)
    var: np.ndarray         # (L, dim), population variance
    n_docs: int

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "n_docs": self.n_docs,
            "mean": self.mean.tolist(),
            "var": self.var.tolist(),
        }


def trajectory_profile(corpus: Sequence[LatentSequence], L: int) -> TrajectoryProfile:
    """Linearly interpolate every trajectory onto ``L`` uniform positions
    (anchored at the first and last rows inclusive: fractional source index
    ``(k-1)*(T-1)/(L-1)`` for target position ``k``) and average across
    documents at each position.  Documents with ``T=1`` are skipped with a
    warning.
    """
    L = int(L)
    if L < 2:
        raise DataError(f"profile length must be >= 2, got {L}")
    usable = []
    for doc in corpus:
        if doc.length < 2:
            warnings.warn(
                f"doc {doc.doc_id!r} has a single row; skipped in trajectory profile")
            continue
        usable.append(doc)
    if not usable:
        raise DataError("no document with T >= 2 to profile")
    dim = usable[0].dim
    for doc in usable:
        if doc.dim != dim:
            raise DataError(
                f"doc {doc.doc_id!r}: dimension {doc.dim} != corpus dimension {dim}")
    target = np.arange(L, dtype=np.float64) / (L - 1)
    stacked = np.empty((len(usable), L, dim))
    for k, doc in enumerate(usable):
        src = np.arange(doc.length, dtype=np.float64)
        pos = target * (doc.length - 1)
        for d in range(dim):
            stacked[k, :, d] = np.interp(pos, src, doc.rows[:, d])
    return TrajectoryProfile(length=L,
                             mean=stacked.mean(axis=0),
                             var=stacked.var(axis=0),
                             n_docs=len(usable))


def sweep_to_csv(result: SigmaSweepResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma", "auc"])
        for s, a in result.points:
            writer.writerow([repr(s), repr(a)])


def profile_to_csv(profile: TrajectoryProfile, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pos", "dim", "mean", "var"])
        for pos in range(profile.length):
            for d in range(profile.mean.shape[1]):
                writer.writerow([pos, d,
                                 repr(float(profile.mean[pos, d])),
                                 repr(float(profile.var[pos, d]))])

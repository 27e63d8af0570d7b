"""Score-based discrimination and detection protocols.

Three consumers of the bridge scores live here:

* :func:`extract_features` turns a latent trajectory into the 5-vector
  ``[B_global, B_w1, B_w2, B_w4, B_w8]`` of global and windowed scores;
* :class:`Mlp3` + :func:`train_mlp3` is a small softmax classifier over
  those features (pairwise original-vs-altered discrimination, general
  multi-class discrimination);
* :func:`llm_detect` matches a test corpus's per-document diffusion
  estimates against per-source training profiles by Wasserstein-1 distance.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import _mlp
from .bridge import (LatentSequence, bbscore, bbscore_windowed,
                     estimate_sigma_sq_corpus)
from .errors import DataError, NumericError
from .metrics import normalize_1_2, wasserstein1

#: Window half-widths of the windowed score features, in feature order.
FEATURE_WINDOWS = (1, 2, 4, 8)


@dataclass
class FeatureVector:
    """``values = [B_global, B_w1, B_w2, B_w4, B_w8]``; ``imputed[k]`` marks
    windowed entries copied from the largest computable window because the
    document was too short for that half-width."""

    doc_id: str
    values: np.ndarray
    imputed: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.imputed = np.asarray(self.imputed, dtype=bool)
        if self.values.shape != (5,) or self.imputed.shape != (5,):
            raise DataError(
                f"feature vector must have 5 entries, got {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise DataError(f"doc {self.doc_id!r}: non-finite feature values")


def extract_features(s: LatentSequence, sigma_sq: float) -> FeatureVector:
    """The five scores; windowed entries require ``T >= 2w+1`` and are
    otherwise imputed from the largest window that fits (flagged)."""
    if s.length < 3:
        raise DataError(
            f"doc {s.doc_id!r}: too short for any BBScore (T={s.length})")
    values = np.empty(5)
    imputed = np.zeros(5, dtype=bool)
    values[0] = bbscore(s, sigma_sq)
    last_computable = None
    for k, w in enumerate(FEATURE_WINDOWS, start=1):
        if s.length >= 2 * w + 1:
            values[k] = bbscore_windowed(s, sigma_sq, w)
            last_computable = values[k]
        else:
            values[k] = last_computable  # w=1 always fits when T >= 3
            imputed[k] = True
    return FeatureVector(doc_id=s.doc_id, values=values, imputed=imputed)


@dataclass
class Mlp3:
    """Three-layer perceptron ``5 -> h1 -> h2 -> classes`` with ReLU hidden
    layers; outputs are softmax logits.  ``labels[c]`` names class ``c``."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    labels: List[str]
    activation: str = "relu"

    def __post_init__(self):
        for name in ("w1", "b1", "w2", "b2", "w3", "b3"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
            if not np.isfinite(getattr(self, name)).all():
                raise DataError(f"non-finite classifier parameter {name}")
        if self.activation != "relu":
            raise DataError(f"unsupported activation {self.activation!r}")
        dims_ok = (self.w1.ndim == self.w2.ndim == self.w3.ndim == 2
                   and self.b1.shape == (self.w1.shape[1],)
                   and self.b2.shape == (self.w2.shape[1],)
                   and self.b3.shape == (self.w3.shape[1],)
                   and self.w2.shape[0] == self.w1.shape[1]
                   and self.w3.shape[0] == self.w2.shape[1])
        if not dims_ok:
            raise DataError("inconsistent classifier layer shapes")
        if len(self.labels) != self.w3.shape[1]:
            raise DataError(
                f"{len(self.labels)} labels for {self.w3.shape[1]} output classes")

    @classmethod
    def init(cls, labels: Sequence[str], input_dim: int = 5,
             hidden: Tuple[int, int] = (32, 32), seed: int = 0) -> "Mlp3":
        rng = np.random.default_rng(seed)
        dims = [input_dim, hidden[0], hidden[1], len(labels)]
        (w1, b1), (w2, b2), (w3, b3) = _mlp.init_layers(dims, rng)
        return cls(w1=w1, b1=b1, w2=w2, b2=b2, w3=w3, b3=b3, labels=list(labels))

    @property
    def layers(self) -> List[_mlp.Layer]:
        return [(self.w1, self.b1), (self.w2, self.b2), (self.w3, self.b3)]

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]


@dataclass
class Mlp3Config:
    """Training hyperparameters for :func:`train_mlp3` (full-batch SGD with
    classical momentum on the softmax cross-entropy)."""

    epochs: int = 500
    learning_rate: float = 1e-3
    momentum: float = 0.9
    seed: int = 0
    hidden: Tuple[int, int] = (32, 32)

    def __post_init__(self):
        if self.learning_rate < 0:
            raise DataError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise DataError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.epochs < 0:
            raise DataError(f"epochs must be >= 0, got {self.epochs}")


FeatureLike = Union[FeatureVector, np.ndarray]


def _feature_values(f: FeatureLike) -> np.ndarray:
    vals = f.values if isinstance(f, FeatureVector) else np.asarray(f, dtype=np.float64)
    if vals.ndim != 1:
        raise DataError(f"feature values must be a vector, got shape {vals.shape}")
    return vals


def _softmax(logits: np.ndarray) -> np.ndarray:
    peak = logits.max(axis=-1, keepdims=True)
    expd = np.exp(logits - peak)
    return expd / expd.sum(axis=-1, keepdims=True)


def softmax_xent_gradients(model: Mlp3, x: np.ndarray, class_idx: np.ndarray):
    """Mean cross-entropy loss and its gradients over a design matrix."""
    logits, caches = _mlp.forward(model.layers, x)
    probs = _softmax(logits)
    n = x.shape[0]
    picked = probs[np.arange(n), class_idx]
    loss = float(-np.log(np.maximum(picked, 1e-300)).mean())
    if not math.isfinite(loss):
        raise NumericError("non-finite classifier loss")
    d_logits = probs.copy()
    d_logits[np.arange(n), class_idx] -= 1.0
    d_logits /= n
    grads, _ = _mlp.backward(model.layers, caches, d_logits)
    return loss, grads


def train_mlp3(labeled: Sequence[Tuple[FeatureLike, str]],
               cfg: Optional[Mlp3Config] = None) -> Tuple[Mlp3, List[float]]:
    """Train on ``(features, label)`` pairs; returns the model and the
    per-epoch loss trace.  Labels are sorted to fix class order; at least
    two distinct labels are required."""
    cfg = cfg or Mlp3Config()
    labeled = list(labeled)
    if not labeled:
        raise DataError("no training examples")
    x = np.stack([_feature_values(f) for f, _ in labeled])
    names = sorted({lab for _, lab in labeled})
    if len(names) < 2:
        raise DataError(f"degenerate labels: need >= 2 classes, got {names}")
    class_of = {lab: k for k, lab in enumerate(names)}
    y = np.array([class_of[lab] for _, lab in labeled])
    model = Mlp3.init(names, input_dim=x.shape[1], hidden=cfg.hidden, seed=cfg.seed)
    layers = model.layers
    velocity = _mlp.zero_velocity(layers)
    trace = []
    for _ in range(cfg.epochs):
        loss, grads = softmax_xent_gradients(model, x, y)
        _mlp.sgd_momentum_step(layers, grads, velocity,
                               cfg.learning_rate, cfg.momentum)
        trace.append(loss)
    return model, trace


def predict(model: Mlp3, f: FeatureLike) -> np.ndarray:
    """Class probabilities (softmax of the forward pass); sums to 1."""
    vals = _feature_values(f)
    if vals.shape[0] != model.input_dim:
        raise DataError(
            f"feature dim {vals.shape[0]} != model input dim {model.input_dim}")
    logits, _ = _mlp.forward(model.layers, vals[None, :])
    return _softmax(logits)[0]


def pairwise_training_set(pairs: Sequence[Tuple[FeatureLike, FeatureLike]]):
    """Difference-vector training set for the pairwise classifier, with the
    order-swap augmentation: each (original, altered) pair contributes
    ``(orig - alt, "first")`` and ``(alt - orig, "second")``."""
    out = []
    for orig, alt in pairs:
        a, b = _feature_values(orig), _feature_values(alt)
        out.append((a - b, "first"))
        out.append((b - a, "second"))
    return out


def pairwise_discriminate(a: FeatureLike, b: FeatureLike, mode: str = "raw",
                          model: Optional[Mlp3] = None) -> str:
    """Pick which of two documents is the original: ``"first"``,
    ``"second"``, or ``"undecided"`` (exact ties, counted as failures).

    ``raw`` mode compares the global scores (lower wins).  ``clf`` mode
    feeds the difference vector ``a - b`` to a 2-class model trained on
    :func:`pairwise_training_set` output.
    """
    va, vb = _feature_values(a), _feature_values(b)
    if mode == "raw":
        if va[0] < vb[0]:
            return "first"
        if va[0] > vb[0]:
            return "second"
        return "undecided"
    if mode == "clf":
        if model is None:
            raise DataError("missing model in clf mode")
        probs = predict(model, va - vb)
        p_first = float(probs[model.labels.index("first")])
        if p_first > 0.5:
            return "first"
        if p_first < 0.5:
            return "second"
        return "undecided"
    raise DataError(f"unknown mode {mode!r}; expected 'raw' or 'clf'")


@dataclass
class SigmaProfile:
    """A source's signature: per-document diffusion estimates on its corpus."""

    label: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.values.size == 0:
            raise DataError(f"profile {self.label!r}: no documents")
        if not np.isfinite(self.values).all() or (self.values < 0).any():
            raise DataError(f"profile {self.label!r}: estimates must be finite and >= 0")

    @classmethod
    def from_corpus(cls, label: str, corpus: Sequence[LatentSequence]) -> "SigmaProfile":
        est = estimate_sigma_sq_corpus(corpus)
        return cls(label=label, values=np.array([v for _, v in est.per_doc]))


@dataclass
class DetectionReport:
    """Wasserstein distances between test corpora and source profiles."""

    source_labels: List[str]
    test_labels: List[str]
    raw: np.ndarray          # (sources, tests)
    normalized: np.ndarray   # per-test column scaled onto [1, 2]
    rankings: dict           # test label -> source labels, closest first
    hits: dict               # test label -> true source within top_k?
    top_k: int
    per_document: bool = False

    def to_dict(self) -> dict:
        return {
            "source_labels": self.source_labels,
            "test_labels": self.test_labels,
            "raw": self.raw.tolist(),
            "normalized": self.normalized.tolist(),
            "rankings": self.rankings,
            "hits": self.hits,
            "top_k": self.top_k,
            "per_document": self.per_document,
        }


def llm_detect(train_profiles: Sequence[SigmaProfile],
               test_corpora: Sequence[Tuple[str, Sequence[LatentSequence]]],
               top_k: int = 2,
               per_document: bool = False) -> DetectionReport:
    """Match each test corpus to candidate sources by the W1 distance
    between per-document diffusion estimates.

    Distances form a (source x test) matrix; each test column is rescaled
    onto [1, 2] (rank-preserving).  A test corpus "hits" when the profile
    sharing its label ranks within ``top_k``.  With ``per_document=True``
    the column entries are instead the mean over test documents of the W1
    distance between that document's singleton estimate and the profile.
    """
    profiles = list(train_profiles)
    tests = list(test_corpora)
    if len(profiles) < 2:
        raise DataError(f"need >= 2 training profiles, got {len(profiles)}")
    if not tests:
        raise DataError("no test corpora")
    source_labels = [p.label for p in profiles]
    if len(set(source_labels)) != len(source_labels):
        raise DataError(f"duplicate profile labels: {source_labels}")
    test_labels = [label for label, _ in tests]
    raw = np.empty((len(profiles), len(tests)))
    for j, (label, corpus) in enumerate(tests):
        est = estimate_sigma_sq_corpus(list(corpus))
        doc_vals = np.array([v for _, v in est.per_doc])
        for i, prof in enumerate(profiles):
            if per_document:
                raw[i, j] = float(np.mean(
                    [wasserstein1([v], prof.values) for v in doc_vals]))
            else:
                raw[i, j] = wasserstein1(doc_vals, prof.values)
    normalized = np.column_stack([normalize_1_2(raw[:, j])
                                  for j in range(raw.shape[1])])
    rankings, hits = {}, {}
    for j, label in enumerate(test_labels):
        order = np.argsort(raw[:, j], kind="stable")
        ranked = [source_labels[i] for i in order]
        rankings[label] = ranked
        hits[label] = label in ranked[:top_k]
    return DetectionReport(source_labels=source_labels, test_labels=test_labels,
                           raw=raw, normalized=normalized, rankings=rankings,
                           hits=hits, top_k=int(top_k), per_document=per_document)


def detect_to_csv(report: DetectionReport, path) -> None:
    """Normalized distance matrix as CSV: one row per source."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source"] + report.test_labels)
        for i, src in enumerate(report.source_labels):
            writer.writerow([src] + [repr(float(v)) for v in report.normalized[i]])

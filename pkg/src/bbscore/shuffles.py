"""Shuffle-test dataset construction.

Coherence metrics are evaluated by comparing each document against row
permutations of itself: *global block* shuffles (permute consecutive blocks
of ``b`` rows, order within blocks preserved) and *local window* shuffles
(permute rows only inside a few disjoint windows).  Because latent rows are
produced per sentence, permuting sentences of the source text is exactly a
row permutation of the latent trajectory, so the whole harness operates on
latents and never needs the upstream language model.

Permutations are 0-based numpy index arrays in memory; dataset manifests
serialize them 1-based (JSONL, one pair per line).
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .bridge import LatentSequence
from .errors import DataError

#: Resample attempts before giving up on a fresh (non-identity, non-duplicate)
#: permutation.
RETRY_CAP = 100

KINDS = ("global_block", "local_window")


def check_permutation(perm: np.ndarray, T: int) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (T,) or not np.array_equal(np.sort(perm), np.arange(T)):
        raise DataError(f"not a permutation of 0..{T - 1}: {perm.tolist()}")
    return perm


def apply_permutation(doc: LatentSequence, perm: np.ndarray,
                      suffix: str = "") -> LatentSequence:
    """Reorder the document's rows; the multiset of rows is preserved."""
    perm = check_permutation(perm, doc.length)
    return LatentSequence(doc_id=doc.doc_id + suffix, rows=doc.rows[perm])


def block_shuffle(T: int, b: int, rng: np.random.Generator) -> np.ndarray:
    """Non-identity permutation of consecutive blocks of size ``b``.

    Rows are partitioned into blocks ``[0..b), [b..2b), ...`` (the final
    block may be shorter and participates like any other); the block order
    is drawn uniformly, order within blocks is untouched.  Identity draws
    are resampled up to :data:`RETRY_CAP` times.  ``b=1`` degenerates to a
    uniform non-identity row permutation.
    """
    if T < 2:
        raise DataError(f"cannot shuffle a document with T={T}")
    if b < 1:
        raise DataError(f"block size must be >= 1, got {b}")
    if T <= b:
        raise DataError(f"unshufflable document: T={T} fits in a single block of {b}")
    starts = np.arange(0, T, b)
    n_blocks = len(starts)
    for _ in range(RETRY_CAP):
        order = rng.permutation(n_blocks)
        if np.array_equal(order, np.arange(n_blocks)):
            continue
        return np.concatenate(
            [np.arange(starts[k], min(starts[k] + b, T)) for k in order])
    raise DataError(
        f"no non-identity block order found in {RETRY_CAP} draws (T={T}, b={b})")


def _window_starts(T: int, n_windows: int, window_size: int,
                   rng: np.random.Generator) -> np.ndarray:
    """Uniform draw over all placements of ``n_windows`` disjoint windows.

    A placement is a sorted start tuple with gaps >= window_size.  Subtracting
    ``k * (window_size - 1)`` from the k-th start maps placements bijectively
    onto plain ``n_windows``-subsets of ``{0 .. T - n_windows*(window_size-1) - 1}``,
    so one sorted ``choice`` without replacement is exactly uniform — no
    rejection loop, even for tight packings.
    """
    slots = T - n_windows * (window_size - 1)
    combo = np.sort(rng.choice(slots, size=n_windows, replace=False))
    return combo + np.arange(n_windows) * (window_size - 1)


def local_shuffle(T: int, n_windows: int, window_size: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Non-identity permutation that reorders rows only inside ``n_windows``
    disjoint windows of ``window_size`` consecutive rows; everything outside
    the windows is a fixed point.  Window placement is uniform over valid
    non-overlapping placements; each window's interior order is uniform.
    """
    if n_windows < 1:
        raise DataError(f"need at least one window, got {n_windows}")
    if window_size < 2:
        raise DataError(
            f"window size {window_size} cannot produce a non-identity permutation")
    if T < n_windows * window_size:
        raise DataError(
            f"document too short for requested windows: T={T}, "
            f"need >= {n_windows * window_size}")
    for _ in range(RETRY_CAP):
        perm = np.arange(T)
        for start in _window_starts(T, n_windows, window_size, rng):
            inner = rng.permutation(window_size)
            perm[start:start + window_size] = start + inner
        if not np.array_equal(perm, np.arange(T)):
            return perm
    raise DataError(
        f"no non-identity window shuffle found in {RETRY_CAP} draws "
        f"(T={T}, n_windows={n_windows}, window_size={window_size})")


@dataclass
class ShufflePair:
    """One (original, shuffled) pair; ``doc_id`` names the original."""

    doc_id: str
    shuffled: LatentSequence
    perm: np.ndarray


@dataclass
class ShuffleDataset:
    """All shuffle pairs for one corpus under one shuffle setting."""

    kind: str                     # "global_block" | "local_window"
    param: int                    # block size b, or window count
    n_shuffles_requested: int
    pairs: List[ShufflePair] = field(default_factory=list)
    skipped: List[Tuple[str, str]] = field(default_factory=list)
    window_size: int = 3          # only meaningful for local_window

    @property
    def n_pairs_kept(self) -> int:
        return len(self.pairs)

    def stats(self) -> dict:
        """Dataset bookkeeping in one table row."""
        docs = {p.doc_id for p in self.pairs}
        return {
            "kind": self.kind,
            "param": self.param,
            "n_docs": len(docs),
            "n_docs_skipped": len(self.skipped),
            "n_shuffles_requested": self.n_shuffles_requested,
            "n_pairs_kept": self.n_pairs_kept,
        }


def _doc_stream(seed: int, doc_id: str) -> np.random.Generator:
    """Per-document rng derived from (seed, doc_id): document order and
    worker scheduling cannot change any document's draws."""
    digest = hashlib.blake2b(doc_id.encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), int.from_bytes(digest, "little")]))


def make_shuffle_dataset(corpus: Sequence[LatentSequence], kind: str, param: int,
                         n_shuffles: int = 20, seed: int = 0,
                         window_size: int = 3) -> ShuffleDataset:
    """Up to ``n_shuffles`` distinct non-identity shuffles of every document.

    Duplicate permutations are resampled (cap :data:`RETRY_CAP`) and then
    dropped, so tiny documents contribute fewer pairs (a document with
    ``T=3``, ``b=1`` has only ``3! - 1 = 5`` distinct shuffles).  Documents
    that cannot be shuffled at all are recorded in ``skipped`` rather than
    failing the run.  Deterministic in ``seed``, per document.
    """
    corpus = list(corpus)
    if not corpus:
        raise DataError("empty corpus: nothing to shuffle")
    if kind not in KINDS:
        raise DataError(f"unknown shuffle kind {kind!r}; expected one of {KINDS}")
    if n_shuffles < 1:
        raise DataError(f"n_shuffles must be >= 1, got {n_shuffles}")
    ds = ShuffleDataset(kind=kind, param=int(param),
                        n_shuffles_requested=int(n_shuffles),
                        window_size=int(window_size))
    for doc in corpus:
        rng = _doc_stream(seed, doc.doc_id)
        seen = set()
        try:
            for slot in range(n_shuffles):
                for _ in range(RETRY_CAP):
                    if kind == "global_block":
                        perm = block_shuffle(doc.length, param, rng)
                    else:
                        perm = local_shuffle(doc.length, param, window_size, rng)
                    key = perm.tobytes()
                    if key not in seen:
                        seen.add(key)
                        ds.pairs.append(ShufflePair(
                            doc_id=doc.doc_id,
                            shuffled=apply_permutation(doc, perm, f"#shuf{slot}"),
                            perm=perm))
                        break
                # retry cap exhausted: the distinct pool is (nearly) used up;
                # drop this slot and let later slots try their own luck
        except DataError as exc:
            ds.skipped.append((doc.doc_id, str(exc)))
    return ds


def write_manifest(ds: ShuffleDataset, path) -> None:
    """One JSONL line per pair: {"doc_id", "kind", "param", "perm"} with the
    permutation 1-based.  Latent rows are never duplicated on disk."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in ds.pairs:
            fh.write(json.dumps({
                "doc_id": p.doc_id,
                "kind": ds.kind,
                "param": ds.param,
                "perm": (p.perm + 1).tolist(),
            }) + "\n")


def read_manifest(path, corpus: Sequence[LatentSequence]) -> ShuffleDataset:
    """Rebuild a dataset by re-applying manifest permutations to ``corpus``.

    The original latents must be supplied; ``n_shuffles_requested`` is
    reconstructed as the largest per-document pair count (the manifest does
    not store the original request).
    """
    by_id = {doc.doc_id: doc for doc in corpus}
    pairs: List[ShufflePair] = []
    kinds, params = set(), set()
    per_doc_counts: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                doc_id, kind = rec["doc_id"], rec["kind"]
                param, perm = rec["param"], rec["perm"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise DataError(f"{path}: bad manifest line {lineno}: {exc}") from exc
            if doc_id not in by_id:
                raise DataError(
                    f"{path}: line {lineno}: doc {doc_id!r} not in the supplied corpus")
            doc = by_id[doc_id]
            perm0 = np.asarray(perm, dtype=np.int64) - 1
            slot = per_doc_counts.get(doc_id, 0)
            per_doc_counts[doc_id] = slot + 1
            pairs.append(ShufflePair(
                doc_id=doc_id,
                shuffled=apply_permutation(doc, perm0, f"#shuf{slot}"),
                perm=perm0))
            kinds.add(kind)
            params.add(param)
    if not pairs:
        raise DataError(f"{path}: empty manifest")
    if len(kinds) > 1 or len(params) > 1:
        raise DataError(f"{path}: mixed shuffle settings in one manifest")
    return ShuffleDataset(kind=kinds.pop(), param=int(params.pop()),
                          n_shuffles_requested=max(per_doc_counts.values()),
                          pairs=pairs)

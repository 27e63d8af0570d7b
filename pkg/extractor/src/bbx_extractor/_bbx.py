"""Minimal writer/reader for the BBX hidden-state container.

Layout (all integers little-endian uint32):

    magic b"BBX1" | dim | doc_count |
    per document:  id_len | id (UTF-8 bytes) | T | T*dim little-endian float32

This is an independent implementation of the shared on-disk format: the
scoring package ships its own reader and writer, and compatibility between
the two is held in place by round-trip tests rather than shared code.
"""

import struct
from typing import List, Tuple

import numpy as np

MAGIC = b"BBX1"

Doc = Tuple[str, np.ndarray]  # (doc_id, rows of shape (T, dim))


class BbxError(ValueError):
    """Raised for malformed BBX data, on read or write."""


def _u32(value: int) -> bytes:
    return struct.pack("<I", value)


def write_bbx(path, docs: List[Doc]) -> None:
    """Serialize (doc_id, rows) pairs to *path*.

    Rows are stored as float32; values that do not survive the cast
    (overflow to inf) are rejected rather than silently degraded.
    """
    if not docs:
        raise BbxError("refusing to write an empty corpus")
    dim = int(np.asarray(docs[0][1]).shape[1]) if np.asarray(docs[0][1]).ndim == 2 else 0
    if dim < 1:
        raise BbxError("rows must be a 2-D array with at least one column")

    chunks = [MAGIC, _u32(dim), _u32(len(docs))]
    for doc_id, rows in docs:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != dim:
            raise BbxError(
                f"doc {doc_id!r}: expected shape (T, {dim}), got {rows.shape}")
        if rows.shape[0] < 1:
            raise BbxError(f"doc {doc_id!r} has no rows")
        with np.errstate(over="ignore"):
            f32 = rows.astype("<f4")
        if not np.all(np.isfinite(f32)):
            raise BbxError(
                f"doc {doc_id!r} contains values not representable as float32")
        raw_id = str(doc_id).encode("utf-8")
        chunks += [_u32(len(raw_id)), raw_id, _u32(rows.shape[0]), f32.tobytes()]

    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def read_bbx(path) -> List[Doc]:
    """Read *path* back into (doc_id, float64 rows) pairs."""
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0

    def take(count, what):
        nonlocal pos
        if pos + count > len(data):
            raise BbxError(f"truncated file: ran out of bytes reading {what}")
        out = data[pos:pos + count]
        pos += count
        return out

    def u32(what):
        return struct.unpack("<I", take(4, what))[0]

    if take(4, "magic") != MAGIC:
        raise BbxError("bad magic: not a BBX file")
    dim = u32("dim")
    if dim < 1:
        raise BbxError("declared dim must be at least 1")
    docs = []
    for k in range(u32("doc count")):
        doc_id = take(u32(f"id length of doc {k}"), f"id of doc {k}").decode("utf-8")
        t = u32(f"row count of doc {doc_id!r}")
        flat = np.frombuffer(take(4 * t * dim, f"rows of doc {doc_id!r}"), dtype="<f4")
        docs.append((doc_id, flat.astype(np.float64).reshape(t, dim)))
    if pos != len(data):
        raise BbxError(f"{len(data) - pos} trailing bytes after last document")
    return docs

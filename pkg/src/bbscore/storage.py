"""On-disk formats: the BBX tensor container, its JSONL mirror, and model
persistence.

BBX layout (all integers little-endian unsigned 32-bit):

    magic b"BBX1" | dim | doc_count |
    per document:  id_len | id (UTF-8) | T | T*dim little-endian float32,
                   row-major

Floats are stored 32-bit and widened to 64-bit on load; every decode error
names the byte offset at which the file stopped making sense.  The JSONL
mirror holds one document per line, {"doc_id", "dim", "rows"}, and keeps
full float64 precision (useful for debugging; BBX is the interchange
format).
"""

import hashlib
import json
import struct
from typing import List, Sequence, Union

import numpy as np

from .bridge import LatentSequence
from .classify import Mlp3
from .encoder import HiddenStateSequence, MlpEncoder
from .errors import StorageError

MAGIC = b"BBX1"

Doc = Union[LatentSequence, HiddenStateSequence]


def _wrap(doc_id: str, rows: np.ndarray, as_hidden: bool) -> Doc:
    cls = HiddenStateSequence if as_hidden else LatentSequence
    return cls(doc_id=doc_id, rows=rows)


def write_bbx(docs: Sequence[Doc], path) -> None:
    """Canonical BBX encoding; byte-identical for identical input."""
    docs = list(docs)
    if not docs:
        raise StorageError("refusing to write an empty BBX file")
    dim = docs[0].dim
    chunks = [MAGIC, struct.pack("<II", dim, len(docs))]
    for doc in docs:
        if doc.dim != dim:
            raise StorageError(
                f"doc {doc.doc_id!r}: dim {doc.dim} != file dim {dim}")
        with np.errstate(over="ignore"):
            payload = np.ascontiguousarray(doc.rows, dtype="<f4")
        if not np.isfinite(payload).all():
            raise StorageError(
                f"doc {doc.doc_id!r}: values not representable as finite "
                f"32-bit floats")
        ident = doc.doc_id.encode("utf-8")
        chunks.append(struct.pack("<I", len(ident)))
        chunks.append(ident)
        chunks.append(struct.pack("<I", doc.rows.shape[0]))
        chunks.append(payload.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


class _Cursor:
    """Sequential reader that reports byte offsets in its error messages."""

    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, count: int, what: str) -> bytes:
        if self.pos + count > len(self.data):
            raise StorageError(
                f"{self.path}: truncated payload at byte {len(self.data)}: "
                f"needed {self.pos + count - len(self.data)} more bytes for {what}")
        out = self.data[self.pos:self.pos + count]
        self.pos += count
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def read_bbx(path, as_hidden: bool = False) -> List[Doc]:
    """Exact decode of a BBX file, in document order.

    Returns :class:`HiddenStateSequence` objects when ``as_hidden`` is set
    (e.g. extractor output destined for the encoder), otherwise
    :class:`LatentSequence`.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    cur = _Cursor(data, path)
    magic = cur.take(4, "magic") if len(data) >= 4 else data
    if magic != MAGIC:
        raise StorageError(
            f"{path}: bad magic at byte 0: expected {MAGIC!r}, got {bytes(magic)!r}")
    dim = cur.u32("dim")
    if dim < 1:
        raise StorageError(f"{path}: dim must be >= 1, got {dim} at byte 4")
    doc_count = cur.u32("doc count")
    docs: List[Doc] = []
    for k in range(doc_count):
        id_len = cur.u32(f"id length of doc {k}")
        id_start = cur.pos
        raw_id = cur.take(id_len, f"id of doc {k}")
        try:
            doc_id = raw_id.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise StorageError(
                f"{path}: invalid UTF-8 doc id at byte {id_start}") from exc
        T = cur.u32(f"row count of doc {doc_id!r}")
        payload_start = cur.pos
        payload = cur.take(4 * T * dim, f"rows of doc {doc_id!r}")
        rows = np.frombuffer(payload, dtype="<f4").reshape(T, dim).astype(np.float64)
        finite = np.isfinite(rows.ravel())
        if not finite.all():
            bad = int(np.argmin(finite))
            raise StorageError(
                f"{path}: non-finite value at byte {payload_start + 4 * bad} "
                f"in doc {doc_id!r}")
        docs.append(_wrap(doc_id, rows, as_hidden))
    if cur.pos != len(data):
        raise StorageError(
            f"{path}: trailing data at byte {cur.pos}: file claims "
            f"{doc_count} documents but {len(data) - cur.pos} bytes remain")
    return docs


def write_jsonl(docs: Sequence[Doc], path) -> None:
    docs = list(docs)
    if not docs:
        raise StorageError("refusing to write an empty JSONL corpus")
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps({
                "doc_id": doc.doc_id,
                "dim": doc.dim,
                "rows": doc.rows.tolist(),
            }) + "\n")


def read_jsonl(path, as_hidden: bool = False) -> List[Doc]:
    docs: List[Doc] = []
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                doc_id, rec_dim, rows = rec["doc_id"], rec["dim"], rec["rows"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise StorageError(f"{path}: bad JSONL at line {lineno}: {exc}") from exc
            arr = np.asarray(rows, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[1] != rec_dim:
                raise StorageError(
                    f"{path}: line {lineno}: rows shape {arr.shape} does not match "
                    f"declared dim {rec_dim}")
            if dim is None:
                dim = rec_dim
            elif rec_dim != dim:
                raise StorageError(
                    f"{path}: line {lineno}: dim {rec_dim} != corpus dim {dim}")
            if not np.isfinite(arr).all():
                raise StorageError(f"{path}: line {lineno}: non-finite values")
            docs.append(_wrap(doc_id, arr, as_hidden))
    if not docs:
        raise StorageError(f"{path}: empty corpus")
    return docs


def read_corpus(path, fmt: str = "bbx", as_hidden: bool = False) -> List[Doc]:
    if fmt == "bbx":
        return read_bbx(path, as_hidden=as_hidden)
    if fmt == "jsonl":
        return read_jsonl(path, as_hidden=as_hidden)
    raise StorageError(f"unknown corpus format {fmt!r}; expected 'bbx' or 'jsonl'")


def write_corpus(docs: Sequence[Doc], path, fmt: str = "bbx") -> None:
    if fmt == "bbx":
        write_bbx(docs, path)
    elif fmt == "jsonl":
        write_jsonl(docs, path)
    else:
        raise StorageError(f"unknown corpus format {fmt!r}; expected 'bbx' or 'jsonl'")


# ---------------------------------------------------------------------------
# model persistence
# ---------------------------------------------------------------------------

def save_encoder(enc: MlpEncoder, path) -> None:
    doc = {
        "input_dim": enc.input_dim,
        "hidden_dim": enc.hidden_dim,
        "output_dim": enc.output_dim,
        "activation": enc.activation,
        "w1": enc.w1.tolist(),
        "b1": enc.b1.tolist(),
        "w2": enc.w2.tolist(),
        "b2": enc.b2.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def save_mlp3(model: Mlp3, path) -> None:
    doc = {
        "kind": "mlp3",
        "activation": model.activation,
        "labels": model.labels,
        "dims": [model.w1.shape[0], model.w1.shape[1],
                 model.w2.shape[1], model.w3.shape[1]],
        "w1": model.w1.tolist(), "b1": model.b1.tolist(),
        "w2": model.w2.tolist(), "b2": model.b2.tolist(),
        "w3": model.w3.tolist(), "b3": model.b3.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _model_doc(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise StorageError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise StorageError(f"{path}: expected a JSON object")
    return doc


def load_encoder(path) -> MlpEncoder:
    doc = _model_doc(path)
    kind = doc.get("kind", "mlp_encoder")
    if kind != "mlp_encoder":
        raise StorageError(f"{path}: not an encoder file (kind={kind!r})")
    try:
        enc = MlpEncoder(w1=doc["w1"], b1=doc["b1"], w2=doc["w2"], b2=doc["b2"],
                         activation=doc.get("activation", "relu"))
    except KeyError as exc:
        raise StorageError(f"{path}: missing encoder field {exc}") from exc
    for name in ("input_dim", "hidden_dim", "output_dim"):
        declared = doc.get(name)
        if declared is not None and declared != getattr(enc, name):
            raise StorageError(
                f"{path}: declared {name}={declared} but weights imply "
                f"{getattr(enc, name)}")
    return enc


def load_mlp3(path) -> Mlp3:
    doc = _model_doc(path)
    if doc.get("kind") != "mlp3":
        raise StorageError(f"{path}: not an mlp3 file (kind={doc.get('kind')!r})")
    try:
        return Mlp3(w1=doc["w1"], b1=doc["b1"], w2=doc["w2"], b2=doc["b2"],
                    w3=doc["w3"], b3=doc["b3"], labels=list(doc["labels"]),
                    activation=doc.get("activation", "relu"))
    except KeyError as exc:
        raise StorageError(f"{path}: missing classifier field {exc}") from exc


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_report(obj: dict, path) -> None:
    """Canonical JSON (sorted keys, fixed layout): identical content gives
    byte-identical files."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")

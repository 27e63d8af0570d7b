"""Corpus records -> BBX extraction pipeline.

A record is a mapping with a "doc_id" and either pre-split "sentences"
(a list of strings) or raw "text" to be segmented here.  Each sentence
becomes one hidden-state row; a document's rows are stacked in sentence
order and written to a BBX container.
"""

import re
from dataclasses import dataclass
from typing import Iterable, List, Mapping, Optional, Tuple

import numpy as np

from ._bbx import write_bbx
from .embedder import (POOLING_RULES, HashedEmbedder, ModelLoadError,
                       TransformerEmbedder)
from .splitter import SPLIT_RULES, split_sentences


class ExtractionError(ValueError):
    """Raised for malformed records or unusable configuration."""


# "hashed" or "hashed-<dim>"; anything else is treated as a pretrained model name
_HASHED = re.compile(r"hashed(?:-(\d+))?$")

_DEFAULT_HASHED_DIM = 32


@dataclass
class ExtractorConfig:
    model: str = "hashed-32"
    device: str = "cpu"
    splitter: str = "regex"
    pooling: str = "last_token_final_layer"
    max_tokens: int = 128

    def __post_init__(self):
        if self.pooling not in POOLING_RULES:
            raise ExtractionError(
                f"unknown pooling rule {self.pooling!r} (choose from {POOLING_RULES})")
        if self.splitter not in SPLIT_RULES:
            raise ExtractionError(
                f"unknown splitter rule {self.splitter!r} (choose from {SPLIT_RULES})")
        if self.max_tokens < 1:
            raise ExtractionError("max_tokens must be at least 1")


@dataclass
class ExtractionSummary:
    path: str
    n_docs: int
    n_sentences: int
    dim: int
    model: str


def make_embedder(cfg: ExtractorConfig):
    """Build the embedder named by cfg.model.

    "hashed" / "hashed-<dim>" select the offline hash-seeded embedder;
    any other name is handed to the transformers adapter.
    """
    m = _HASHED.match(cfg.model)
    if m:
        dim = int(m.group(1)) if m.group(1) else _DEFAULT_HASHED_DIM
        if dim < 1:
            raise ExtractionError(f"bad hashed model dim in {cfg.model!r}")
        # salt on the canonical name so "hashed" and "hashed-32" coincide
        return HashedEmbedder(dim=dim, salt=f"hashed-{dim}")
    return TransformerEmbedder(cfg.model, device=cfg.device)


def _record_sentences(record: Mapping, cfg: ExtractorConfig, k: int) -> Tuple[str, List[str]]:
    if "doc_id" not in record:
        raise ExtractionError(f"record {k} has no 'doc_id'")
    doc_id = str(record["doc_id"])
    if "sentences" in record:
        sentences = [" ".join(str(s).split()) for s in record["sentences"]]
        if any(not s for s in sentences):
            raise ExtractionError(
                f"doc {doc_id!r}: pre-split sentence lists must not contain "
                "empty entries")
    elif "text" in record:
        try:
            sentences = split_sentences(str(record["text"]), cfg.splitter)
        except ValueError as exc:
            raise ExtractionError(f"doc {doc_id!r}: {exc}")
    else:
        raise ExtractionError(f"doc {doc_id!r} has neither 'sentences' nor 'text'")
    if not sentences:
        raise ExtractionError(f"doc {doc_id!r} produced no sentences")
    return doc_id, sentences


def extract_records(records: Iterable[Mapping],
                    cfg: Optional[ExtractorConfig] = None):
    """Embed every record, returning (doc_id, rows) pairs."""
    cfg = cfg if cfg is not None else ExtractorConfig()
    embedder = make_embedder(cfg)
    docs, seen = [], set()
    for k, record in enumerate(records):
        doc_id, sentences = _record_sentences(record, cfg, k)
        if doc_id in seen:
            raise ExtractionError(f"duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        rows = np.stack([embedder.embed(s, cfg.pooling, cfg.max_tokens)
                         for s in sentences])
        docs.append((doc_id, rows))
    if not docs:
        raise ExtractionError("no records to extract")
    return docs


def extract_to_bbx(records: Iterable[Mapping], out_path,
                   cfg: Optional[ExtractorConfig] = None) -> ExtractionSummary:
    """Extract *records* and write them to *out_path* as BBX."""
    cfg = cfg if cfg is not None else ExtractorConfig()
    docs = extract_records(records, cfg)
    write_bbx(out_path, docs)
    return ExtractionSummary(path=str(out_path),
                             n_docs=len(docs),
                             n_sentences=sum(r.shape[0] for _, r in docs),
                             dim=docs[0][1].shape[1],
                             model=cfg.model)

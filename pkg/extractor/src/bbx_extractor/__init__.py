"""Text corpora -> BBX hidden-state files.

Segments documents into sentences, embeds each sentence independently with
a frozen model (offline hash-seeded by default, transformers optionally),
and writes the stacked per-document state sequences to the BBX container
consumed by the scoring package.
"""

from ._bbx import BbxError, read_bbx, write_bbx
from .embedder import (POOLING_RULES, HashedEmbedder, ModelLoadError,
                       TransformerEmbedder, tokenize)
from .extract import (ExtractionError, ExtractionSummary, ExtractorConfig,
                      extract_records, extract_to_bbx, make_embedder)
from .splitter import SPLIT_RULES, split_sentences

__version__ = "0.1.0"

__all__ = [
    "BbxError", "ExtractionError", "ExtractionSummary", "ExtractorConfig",
    "HashedEmbedder", "ModelLoadError", "POOLING_RULES", "SPLIT_RULES",
    "TransformerEmbedder", "extract_records", "extract_to_bbx",
    "make_embedder", "read_bbx", "split_sentences", "tokenize", "write_bbx",
]

"""Rule-based sentence segmentation.

Deliberately simple: the goal is a deterministic, order-preserving split
with no empty output sentences, not linguistic perfection.  Abbreviation
handling and quote-aware boundaries are out of scope.
"""

import re
from typing import List

SPLIT_RULES = ("regex", "lines")

# a boundary is whitespace that directly follows terminal punctuation
_BOUNDARY = re.compile(r"(?<=[.!?])\s+")


def split_sentences(text: str, rule: str = "regex") -> List[str]:
    """Split *text* into sentences using *rule*.

    "regex" breaks after terminal punctuation (., !, ?) followed by
    whitespace; "lines" treats every non-blank line as one sentence.
    Internal whitespace runs are collapsed to single spaces.
    """
    if not text or not text.strip():
        raise ValueError("cannot split empty text")
    if rule == "regex":
        pieces = _BOUNDARY.split(text)
    elif rule == "lines":
        pieces = text.splitlines()
    else:
        raise ValueError(f"unknown splitter rule {rule!r} (choose from {SPLIT_RULES})")
    out = [" ".join(p.split()) for p in pieces]
    return [p for p in out if p]

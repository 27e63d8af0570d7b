"""Exception taxonomy shared across the package.

Two broad families matter for callers (and for the CLI exit codes):

* :class:`DataError` -- malformed or out-of-contract input: bad file bytes,
  sequences that are too short, ragged dimensions, invalid parameters.
* :class:`NumericError` -- the data was well-formed but a computation could
  not produce a finite, meaningful result (overflow, non-finite values
  appearing mid-pipeline, divergent training).
"""


class BbscoreError(Exception):
    """Base class for all errors raised by this package."""


class DataError(BbscoreError):
    """Malformed input data or invalid argument values."""


class StorageError(DataError):
    """Unreadable or corrupt on-disk artifact (BBX, JSONL, model JSON)."""


class NumericError(BbscoreError):
    """A computation produced non-finite or otherwise unusable numbers."""

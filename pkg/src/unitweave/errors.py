"""Exception taxonomy shared across the pipeline.

The CLI maps these onto exit codes: ConfigError -> 2, DataError (and
subclasses) -> 3, CorpusError (checksum / layout-hash integrity) -> 4.
"""


class UnitweaveError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(UnitweaveError):
    """Invalid configuration: bad sizes, unknown rule ids, flag conflicts."""


class DataError(UnitweaveError):
    """Invalid input data."""


class ParseError(DataError):
    """Malformed input file; message carries line context where possible."""


class AlignmentError(DataError):
    """Word/unit alignment cannot be built (e.g. fewer frames than words)."""


class DomainError(DataError):
    """Argument outside an operation's domain (out-of-range id, dim mismatch)."""


class FitError(DataError):
    """Quantizer fitting failed (n < k, degenerate data)."""


class TemplateError(DataError):
    """Template construction failed (empty response, degenerate split)."""


class PackError(DataError):
    """Packing failed; carries the offending sample ids (no silent truncation)."""

    def __init__(self, message, sample_ids=None):
        super().__init__(message)
        self.sample_ids = list(sample_ids or [])


class CorpusError(UnitweaveError):
    """Corpus file integrity failure."""


class ChecksumError(CorpusError):
    """Stored checksum does not match the file contents."""


class LayoutHashError(CorpusError):
    """Corpus was built under a different vocabulary layout."""

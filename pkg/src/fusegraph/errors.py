"""Exception taxonomy shared across the package.

Every error raised by fusegraph derives from :class:`FusegraphError`, and the
CLI maps each class to a distinct process exit code (see ``EXIT_CODES``).
"""

from __future__ import annotations


class FusegraphError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FusegraphError):
    """Invalid or inconsistent pipeline configuration."""


class ParseError(FusegraphError):
    """A data file could not be parsed; the message names the offending line."""


class DuplicateIdError(ParseError):
    """The same sample id occurred more than once in one table."""


class FormatError(FusegraphError):
    """A persisted artifact is truncated or carries the wrong format version."""


class DomainError(FusegraphError):
    """Input outside the mathematical domain of an operation."""


class DegenerateInputError(DomainError):
    """Input is technically well-typed but degenerate (e.g. a constant vector)."""


class StratificationError(FusegraphError):
    """A class is too small to be split or folded as requested."""


class IncompleteModalityError(FusegraphError):
    """A sample is missing its feature row for some descriptor."""


class IncompleteStoreError(FusegraphError):
    """A rank store lacks the ranks of a referenced response sample."""


class UnknownSampleError(FusegraphError):
    """A graph vertex label does not exist in the embedding vocabulary."""


class ShapeError(FusegraphError):
    """Dimension mismatch between vectors, estimators, or tables."""


class DegenerateLabelsError(FusegraphError):
    """Training data with fewer than two distinct classes."""


class CutoffError(FusegraphError):
    """A metric cutoff exceeds the ranked list length."""


class ArityError(FusegraphError):
    """Wrong number of inputs (e.g. an even predictor count for voting)."""


class AlignmentError(FusegraphError):
    """Tables that must share a sample id set do not."""


class CompatibilityError(FusegraphError):
    """Persisted artifacts do not match the current configuration digest."""


# CLI exit codes, one per error class. Order matters only for readability.
EXIT_CODES: dict[type[FusegraphError], int] = {
    ConfigError: 2,
    ParseError: 3,
    FormatError: 4,
    DomainError: 5,
    StratificationError: 6,
    IncompleteModalityError: 7,
    IncompleteStoreError: 8,
    UnknownSampleError: 9,
    ShapeError: 10,
    DegenerateLabelsError: 11,
    CutoffError: 12,
    ArityError: 13,
    AlignmentError: 14,
    CompatibilityError: 15,
}
GENERIC_ERROR_EXIT = 1


def exit_code_for(exc: BaseException) -> int:
    """Return the CLI exit code for an exception instance."""
    for klass in type(exc).__mro__:
        if klass in EXIT_CODES:
            return EXIT_CODES[klass]  # nearest registered ancestor wins
    return GENERIC_ERROR_EXIT

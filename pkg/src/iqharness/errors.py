"""Exception types shared across the toolkit.

Every error raised by this package derives from :class:`IqhError` so callers
can catch one base class at integration boundaries (the CLI does exactly
that).  Names mirror the failure they signal; messages carry the offending
path, field, or value.
"""
from __future__ import annotations


class IqhError(Exception):
    """Base class for all toolkit errors."""


# --- dataset layout / parsing -------------------------------------------------

class NoImagesDir(IqhError):
    """Dataset folder has no usable images subdirectory."""


class AmbiguousAnnotations(IqhError):
    """More than one annotation file of the same kind; lists all candidates."""

    def __init__(self, message: str, candidates: list[str] | None = None):
        super().__init__(message)
        self.candidates = candidates or []


class InvalidModifierName(IqhError):
    """Modifier name is empty or contains path separators."""


class ParseError(IqhError):
    """File is not syntactically valid JSON; carries the byte offset."""

    def __init__(self, message: str, *, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class SchemaError(IqhError):
    """JSON parsed but a required field or structure is missing or mistyped."""


class ValidationError(IqhError):
    """Well-formed input violates a value-level constraint."""


# --- sanity / stats -----------------------------------------------------------

class EmptyResult(IqhError):
    """An operation removed every row or image it was given."""


class NoImages(IqhError):
    """Statistics requested over a dataset with zero images."""


class DegenerateGeometry(IqhError):
    """Polygon has fewer than three distinct points or zero area."""


# --- modifiers ----------------------------------------------------------------

class DestinationExists(IqhError):
    """Derived dataset folder already exists and overwrite was not requested."""


class DuplicateKind(IqhError):
    """A modifier kind with this name is already registered."""


class UnsupportedChannelCount(IqhError):
    """Image has a channel layout the requested transform cannot encode."""


# --- quality metrics ----------------------------------------------------------

class ShapeMismatch(IqhError):
    """Reference and test images differ in shape or dtype."""


class TooSmall(IqhError):
    """Image is smaller than the analysis window requires."""


class MissingReference(IqhError):
    """Full-reference metric requested without a reference dataset."""


class EmptyDataset(IqhError):
    """Dataset-level metric invoked over zero images."""


class NoEdgesFound(IqhError):
    """No usable slanted edge detected in any direction."""


# --- detection evaluation -----------------------------------------------------

class EmptyGroundTruth(IqhError):
    """Ground truth contains no evaluable annotations."""


# --- experiment orchestration ---------------------------------------------------

class EmptyGrid(IqhError):
    """Experiment plan expands to zero runs."""


class MalformedResults(IqhError):
    """results.json value is neither a scalar nor a numeric array."""


# --- run store ------------------------------------------------------------------

class StoreError(IqhError):
    """Run store root is unreadable or structurally broken."""


class DuplicateRunId(IqhError):
    """A record with this run id already exists in the experiment."""


class UnknownExperiment(IqhError):
    """No experiment with this name exists in the store."""


class UnknownField(IqhError):
    """Query or table referenced a field absent from every record."""


class NonNumericField(IqhError):
    """A field expected to hold numbers has non-numeric values."""


class NonNumericY(NonNumericField):
    """Plot asked for a y series whose values are not numeric."""


class MetricError(IqhError):
    """A per-run metric computation failed."""

"""Typed error hierarchy.

Every failure that can be triggered by user input derives from ``VpsError``.
The class name doubles as the stable error name surfaced in CLI error reports
and carried through to scripting bindings.
"""

from __future__ import annotations

from dataclasses import dataclass


class VpsError(Exception):
    """Base class for all input-level failures raised by this package."""

    @property
    def error_name(self) -> str:
        return type(self).__name__


class ShapeError(VpsError):
    """Array or matrix dimensions disagree."""


class LabelFormatError(VpsError):
    """A label map carries an id that violates the taxonomy conventions."""


class FormatError(VpsError):
    """A file does not conform to its declared format."""


class UnknownEncodingError(FormatError):
    """Requested label encoding is not one of the supported names."""


class UnknownSegmentIdError(FormatError):
    """A COCO-RGB pixel id has no entry in the manifest segment table."""


class EncodingOverflowError(FormatError):
    """A value cannot be represented in the target encoding."""


class TruncatedFileError(FormatError):
    """A file payload ended before the size promised by its header."""

    def __init__(self, path, expected: int | None = None, actual: int | None = None,
                 detail: str = ""):
        if expected is not None and actual is not None:
            msg = f"{path}: truncated payload, expected {expected} bytes, got {actual}"
        else:
            msg = f"{path}: truncated or unreadable file"
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)
        self.expected = expected
        self.actual = actual


class BadMagicError(FormatError):
    """A binary file does not start with the expected magic tag."""


class ManifestError(FormatError):
    """A dataset manifest violates the documented schema."""


class MissingInputError(VpsError):
    """A required input (file, embedding, matrix) is absent."""


class IncompleteWindowError(VpsError):
    """A snippet window references an annotated frame that was not supplied."""


class EmptyDatasetError(VpsError):
    """No class has a single tube anywhere in the dataset."""


@dataclass(frozen=True)
class ValidationIssue:
    """One dataset integrity problem found before evaluation."""

    code: str
    message: str
    video: str | None = None
    frame: int | None = None

    def as_dict(self) -> dict:
        out: dict = {"code": self.code, "message": self.message}
        if self.video is not None:
            out["video"] = self.video
        if self.frame is not None:
            out["frame"] = self.frame
        return out


class DatasetValidationError(VpsError):
    """Carries the exhaustive list of integrity issues for a dataset pair."""

    def __init__(self, issues):
        self.issues: tuple[ValidationIssue, ...] = tuple(issues)
        lines = "; ".join(i.message for i in self.issues[:8])
        more = "" if len(self.issues) <= 8 else f" (+{len(self.issues) - 8} more)"
        super().__init__(f"{len(self.issues)} dataset issue(s): {lines}{more}")


class SceneSpecError(VpsError):
    """A synthetic scene specification is degenerate or inconsistent."""


class PerturbationError(VpsError):
    """A perturbation references a frame or segment that does not exist."""

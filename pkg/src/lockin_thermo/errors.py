"""Exception hierarchy.

Everything raised on purpose by the library derives from :class:`LockInError`.
Input-format problems derive from :class:`FormatError`; the CLI maps those to
exit code 2 and every other :class:`LockInError` (a failed precondition) to 3.
"""

from __future__ import annotations


class LockInError(ValueError):
    """Base class for library errors."""


class InvalidSequenceError(LockInError):
    pass


class InvalidTraceError(LockInError):
    pass


class InvalidConfigError(LockInError):
    """Raised with every offending field listed, not just the first."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration: " + "; ".join(self.problems))


class NeighborhoodError(LockInError):
    def __init__(self, pixel, height, width):
        self.pixel = tuple(pixel)
        super().__init__(
            f"pixel {self.pixel} has no full 3x3 neighborhood in a "
            f"{height}x{width} frame (border pixels are rejected)"
        )


class TraceTooShortError(LockInError):
    pass


class SampleRateError(LockInError):
    pass


class InsufficientPeaksError(LockInError):
    pass


class WarpDomainError(LockInError):
    pass


class WindowUnderpopulatedError(LockInError):
    def __init__(self, found, required, window_start):
        self.found = found
        self.required = required
        self.window_start = window_start
        super().__init__(
            f"window starting at {window_start:g} s holds {found} complete "
            f"cycle(s); at least {required} required"
        )


class DegenerateWindowError(LockInError):
    pass


class SequenceTooShortError(LockInError):
    pass


class SpanTooShortError(LockInError):
    pass


class FormatError(LockInError):
    """Malformed input file."""


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class TrailingDataError(FormatError):
    pass


class NonMonotonicTimestampsError(FormatError):
    pass


class RaggedCsvError(FormatError):
    pass


class CsvHeaderError(FormatError):
    pass


class NonUniformSamplingError(FormatError):
    pass

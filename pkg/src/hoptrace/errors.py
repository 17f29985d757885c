"""Exception hierarchy. Every rejection the toolkit produces is a named error."""


class HoptraceError(Exception):
    """Base class for all errors raised by this package."""


class InvalidCoordinateError(HoptraceError):
    """Latitude or longitude outside its valid range."""


class BeforeStartError(HoptraceError):
    """Timestamp precedes the experiment start."""


class EmptyTrackError(HoptraceError):
    """A GPS track with no usable fixes."""


class NoPositionError(HoptraceError):
    """Position query outside the track's tolerated time span."""


class UnsupportedFormatError(HoptraceError):
    """Input file does not match any supported format."""


class TruncatedCaptureError(HoptraceError):
    """Capture file ends mid-record. Carries the successfully parsed prefix."""

    def __init__(self, message, partial, records_parsed):
        super().__init__(message)
        self.partial = partial
        self.records_parsed = records_parsed


class MalformedFrameError(HoptraceError):
    """Frame shorter than its link-layer header."""


class SentenceFormatError(HoptraceError):
    """Text line is not a framed NMEA sentence."""


class ChecksumError(HoptraceError):
    """NMEA sentence checksum does not match its body."""


class UnrecognizedLogError(HoptraceError):
    """Traffic-generator log in no recognized format."""


class InternalConsistencyError(HoptraceError):
    """An invariant the pipeline must maintain was violated."""


class ReportSchemaError(HoptraceError):
    """Report JSON violates the schema. Carries the offending JSON path."""

    def __init__(self, message, path):
        super().__init__(f"{path}: {message}")
        self.path = path


class UnknownMetricError(HoptraceError):
    """Requested plot metric does not exist. Lists available ones."""


class ScenarioSpecError(HoptraceError):
    """Synthetic scenario specification is invalid. Carries the JSON path."""

    def __init__(self, message, path):
        super().__init__(f"{path}: {message}")
        self.path = path

"""Exception taxonomy shared across the package."""


class LuscanError(Exception):
    """Base class for all package errors."""


class ConfigError(LuscanError):
    """Bad or inconsistent configuration document."""


class DomainError(LuscanError, ValueError):
    """Input outside the mathematical domain of an operation."""


class ReachError(LuscanError):
    """Requested pose cannot be reached within joint limits."""


class ProtocolError(LuscanError):
    """Workflow or message-sequence rule violated."""


class InputError(LuscanError, ValueError):
    """Operator input outside its allowed range."""


class GeometryError(LuscanError, ValueError):
    """Region-of-interest geometry invalid for the target image."""


class SampleError(LuscanError, ValueError):
    """Statistical sample too small or degenerate."""


class NoImageError(LuscanError):
    """Frame requested while the probe is not coupled to the surface."""


class CodecError(LuscanError):
    """Wire-frame encode/decode failure."""


class MalformedFrameError(CodecError):
    """Frame is not a parsable JSON object."""


class UnknownTypeError(CodecError):
    """Message type is not part of the protocol."""


class MissingFieldError(CodecError):
    """Required message field absent or of the wrong kind."""


class StateError(LuscanError):
    """Operation called in the wrong lifecycle state."""


class ReplayError(LuscanError):
    """Session log cannot be replayed."""


class ReportError(LuscanError):
    """Comparison report inputs incomplete."""

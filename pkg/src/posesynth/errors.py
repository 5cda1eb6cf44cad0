"""Exception types shared across the package."""


class PoseSynthError(Exception):
    """Base class for all package errors."""


class LoadError(PoseSynthError):
    """A container or checkpoint file is missing, malformed, or invalid."""


class ShapeError(PoseSynthError):
    """Array dimensions do not match the declared model dimensions."""


class ValidationError(PoseSynthError):
    """An invariant on a domain object is violated."""


class AlignmentError(PoseSynthError):
    """Point configuration too degenerate for Procrustes alignment."""


class ProtocolError(PoseSynthError):
    """A backend response does not conform to the wire protocol."""


class BackendError(PoseSynthError):
    """A backend request failed after exhausting the retry policy."""

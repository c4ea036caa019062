"""Exception hierarchy shared across the toolkit."""


class FruitGridError(Exception):
    """Base class for all toolkit errors."""


class InsufficientCorrespondences(FruitGridError):
    """Fewer point correspondences than the solver needs (minimum 4)."""


class DegenerateConfiguration(FruitGridError):
    """Point configuration does not constrain a unique homography
    (collinear or coincident points)."""


class PointAtInfinity(FruitGridError):
    """Perspective division impossible: homogeneous scale is (near) zero."""


class EmptyInput(FruitGridError):
    """An aggregate was requested over zero elements."""


class NoMatches(FruitGridError):
    """Localisation statistics requested but no detection matched any
    ground-truth fruit."""


class GridTooSmall(FruitGridError):
    """The calibration grid cannot host the requested fruit pattern."""


class BackendError(FruitGridError):
    """Base class for external-detector protocol failures."""


class BackendTimeout(BackendError):
    """No response line arrived within the configured timeout."""


class ProtocolViolation(BackendError):
    """The backend wrote a line that does not satisfy the wire protocol."""


class BackendExited(BackendError):
    """The backend process terminated mid-stream."""


class ScriptExhausted(BackendError):
    """A scripted stub backend received more requests than it has canned
    responses for."""

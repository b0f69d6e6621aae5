"""Exception hierarchy shared by all moldkit modules."""


class MoldkitError(Exception):
    """Base class for all moldkit errors."""


class DomainError(MoldkitError, ValueError):
    """An input value lies outside the operation's mathematical domain."""


class ShapeError(MoldkitError, ValueError):
    """Array dimensions or camera intrinsics of two operands do not match."""


class FrustumError(DomainError):
    """A 3D point or projected pixel falls outside the camera viewing frustum."""


class PreconditionError(MoldkitError, ValueError):
    """A documented caller-side precondition was violated."""


class InfeasibleError(MoldkitError, ValueError):
    """No solution exists for the requested configuration (e.g. a box too
    large to keep in frame at any position)."""


class RenderError(MoldkitError, RuntimeError):
    """Point-set rendering failed (occlusion or out-of-frustum geometry)."""


class ConfigError(MoldkitError, ValueError):
    """Bad run configuration: missing files, unknown names, invalid flags."""


class PredictorUnavailableError(MoldkitError, RuntimeError):
    """An external patch predictor did not answer or reported an error."""

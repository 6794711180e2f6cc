"""Exception types shared across the package."""


class McBridgeError(Exception):
    """Base class for all package errors."""


class NonIntegerSpan(McBridgeError):
    """Time span is not an integer multiple of the requested step."""


class NonFiniteState(McBridgeError):
    """A simulated state left the representable range (drift blow-up or step too large)."""


class DegenerateWeight(McBridgeError):
    """All Monte Carlo path weights underflowed to zero."""


class ZeroMass(McBridgeError):
    """Density has no mass on the given grid."""


class EmptyEnsemble(McBridgeError):
    """An estimator was asked to average over zero paths."""


class HorizonTooShort(McBridgeError):
    """Gradient estimation needs at least two time steps to the horizon."""


class DegenerateHorizon(McBridgeError):
    """Variational field requested on a zero-length interval."""


class Unsupported(McBridgeError):
    """Requested capability is not implemented for this configuration."""


class ZeroDivisionOnGrid(McBridgeError):
    """A factor function vanished where a boundary ratio is required."""


class IllConditionedFit(McBridgeError):
    """Polynomial least-squares system is rank deficient."""


class DivergedTraining(McBridgeError):
    """Training loss grew far beyond its initial value."""


class ConfigError(McBridgeError):
    """Invalid or missing run configuration key."""

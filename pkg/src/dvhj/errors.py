"""Exception types raised across the package."""


class ParameterDomainError(ValueError):
    """An exponent, dimension or other numeric input is outside its admissible range."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature or root polishing could not reach the requested tolerance."""


class TabulationRangeError(ValueError):
    """A query falls outside a tabulated range."""


class CFLViolationError(ValueError):
    """A time step exceeds the explicit stability bound."""


class NumericalInstabilityError(RuntimeError):
    """A non-finite value appeared during time stepping."""


class ConfigError(ValueError):
    """An experiment configuration file could not be parsed."""

"""Exception types shared across the package."""


class CRSphereError(Exception):
    """Base class for all package errors."""


class SouthPoleError(CRSphereError):
    """Inverse Cayley transform evaluated at the excluded south pole."""


class NonPositiveDeltaError(CRSphereError):
    """Dilation parameter must be strictly positive."""


class ResolutionTooLowError(CRSphereError):
    """Quadrature resolution cannot certify the requested exactness degree."""


class QuadratureInsufficientError(CRSphereError):
    """Quadrature rule too weak for the requested basis cutoff."""


class CutoffExceededError(CRSphereError):
    """Operation would produce coefficients beyond the basis cutoff."""


class OrderOutOfRangeError(CRSphereError):
    """Operator order k outside the admissible range 1 <= k < n+1."""


class NoConvergenceError(CRSphereError):
    """Iteration failed to reach tolerance; carries the final residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NegativeDensityError(CRSphereError):
    """Density values must be nonnegative."""


class NotBalancedError(CRSphereError):
    """Function fails the vanishing first-moment precondition."""


class InfeasibleError(CRSphereError):
    """No admissible measure found at the given support size."""


class HomogeneityViolationError(CRSphereError):
    """Cone exponents failed to cancel on restriction to the sphere."""


class ZeroFunctionError(CRSphereError):
    """Quotient undefined for the zero function."""


class ConfigError(CRSphereError):
    """Invalid experiment configuration."""


class SuiteFailureError(CRSphereError):
    """One or more suite checks failed; carries per-check detail."""

    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = failures or []

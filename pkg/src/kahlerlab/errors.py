"""Exception hierarchy shared by all modules."""


class KahlerLabError(Exception):
    """Base class for every error raised by the package."""


class InvalidDomainError(KahlerLabError, ValueError):
    """Raised for a domain with non-positive radius or wrong dimension."""


class InvalidParameterError(KahlerLabError, ValueError):
    """Raised for numeric parameters outside their admissible range."""


class EvaluationError(KahlerLabError, ArithmeticError):
    """Raised when a sampled function returns a non-finite value."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ConditioningError(KahlerLabError, ArithmeticError):
    """Raised when a Gram matrix is not numerically positive definite.

    Attributes
    ----------
    min_eigenvalue : float
        Smallest eigenvalue of the equilibrated Gram matrix.
    condition : float
        Condition number of the equilibrated Gram matrix.
    """

    def __init__(self, message, min_eigenvalue=float("nan"), condition=float("inf")):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.condition = condition


class GridError(KahlerLabError, ArithmeticError):
    """Raised when a quadrature grid under-resolves a Gram matrix."""


class NotPlurisubharmonicError(KahlerLabError, ValueError):
    """Raised when a weight claiming plurisubharmonicity fails the check."""

    def __init__(self, message, node=None, eigenvalue=float("nan")):
        super().__init__(message)
        self.node = node
        self.eigenvalue = eigenvalue


class UnderresolvedAnsatzError(KahlerLabError, ArithmeticError):
    """Raised when the gamma ansatz cannot meet the constraint tolerance."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class InvalidPotentialError(KahlerLabError, ValueError):
    """Raised for a symplectic potential that is not strictly convex."""


class DegenerateFiberError(KahlerLabError, ArithmeticError):
    """Raised when a volume-form ratio is not positive."""


class GapPreconditionError(KahlerLabError, ValueError):
    """Raised when a grid function takes values strictly inside (0, 1)."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class DomainExceededError(KahlerLabError, ValueError):
    """Raised when a rescaled grid leaves the domain fiber."""


class ConfigError(KahlerLabError, ValueError):
    """Raised for malformed or unknown experiment configuration."""

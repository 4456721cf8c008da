"""Exception hierarchy shared by all modules."""


class CpflowError(Exception):
    """Base class for library errors."""


class NonSpdError(CpflowError, ValueError):
    """A tensor required to be symmetric positive definite is not."""


class SingularError(CpflowError, ValueError):
    """Inverse or cofactor requested for a singular tensor."""


class NonFiniteEnergyError(CpflowError):
    """No competitor with finite energy was found."""


class IntegrationFailure(CpflowError):
    """The matrix flow left the positive-definite cone."""


class MaxTimeExceeded(CpflowError):
    """The flow did not reach the target norm within the time budget."""


class ElementInversion(CpflowError):
    """A Gauss point reached det(grad y) <= 0."""


class NoDecrease(CpflowError):
    """Alternating minimization stalled without meeting its tolerance."""


class SolverDivergence(CpflowError):
    """An iterative linear or fixed-point solve failed to converge."""


class ConfigError(CpflowError, ValueError):
    """Invalid scenario configuration."""

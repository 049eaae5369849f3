"""Exception types raised by the solver and its kernels."""


class TrsqpError(Exception):
    """Base class for all package errors."""


class RankDeficient(TrsqpError):
    """Constraint Jacobian failed the full-row-rank tolerance check."""


class NonFiniteInput(TrsqpError):
    """An input array contains NaN or infinity."""


class ZeroHessianNorm(TrsqpError):
    """Residual rescaling received a Hessian approximation with zero norm."""


class DegenerateResiduals(TrsqpError):
    """Radius splitting received an all-zero residual after resampling."""


class SubsolverFailure(TrsqpError):
    """A trust-region subsolver missed its fraction-of-Cauchy guarantee."""


class NotNegativeCurvature(TrsqpError):
    """An eigen step was requested without negative curvature."""


class MeritLoopDiverged(TrsqpError):
    """The merit-parameter loop hit its iteration cap."""


class MissingNoiselessOracle(TrsqpError):
    """An operation needs exact objective oracles the problem does not have."""


class EmptyDataset(TrsqpError):
    """A finite-sum problem was built from zero records."""


class DatasetGenerationFailed(TrsqpError):
    """Synthetic dataset generation could not produce a full-rank constraint matrix."""

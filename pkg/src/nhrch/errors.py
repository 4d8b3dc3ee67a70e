"""Exception types shared across the package."""


class NHRCHError(Exception):
    """Base class for all package errors."""


class SingularMatrixError(NHRCHError):
    """A linear solve met a numerically rank-deficient matrix."""


class RankError(NHRCHError):
    """A pointwise subspace came out with an unexpected dimension."""


class OffManifoldError(NHRCHError):
    """A phase point violated the constraint-membership precondition."""


class StepOffManifoldError(NHRCHError):
    """Integration drifted off the constraint set beyond the abort threshold."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class EmptyLevelSetError(NHRCHError):
    """No feasible point exists on the requested momentum level of the constraint set."""


class UnsupportedGroupError(NHRCHError):
    """The requested symmetry group is outside the implemented (Abelian translation) class."""


class InvarianceError(NHRCHError):
    """Data that must be invariant under the group action measurably is not."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class PreconditionError(NHRCHError):
    """A Hamilton-Jacobi hypothesis failed; carries the measured residuals."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class ConfigError(NHRCHError):
    """A scenario configuration did not validate."""

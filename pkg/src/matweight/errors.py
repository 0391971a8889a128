"""Exception types shared across the package."""


class WeightError(ValueError):
    """Base class for all package errors."""


class AsymmetryError(WeightError):
    """A matrix expected to be symmetric is not, beyond tolerance."""

    def __init__(self, magnitude, tol):
        self.magnitude = float(magnitude)
        self.tol = float(tol)
        super().__init__(
            f"matrix is not symmetric: relative asymmetry {self.magnitude:.3e} exceeds {self.tol:.1e}"
        )


class SingularWeightError(WeightError):
    """A weight sample has a non-positive eigenvalue or value."""


class ExponentError(WeightError):
    """An exponent lies outside the admissible range."""


class EmptyRegionError(WeightError):
    """A region contains no cell centers of the grid."""


class GridMismatchError(WeightError):
    """Two fields that must share a grid do not."""


class UnderResolvedError(WeightError):
    """A kernel or ball is too small for the working resolution."""


class DisjointnessError(WeightError):
    """Cubes that must be pairwise disjoint overlap."""


class DimensionError(WeightError):
    """An operation was called with an unsupported dimension."""


class HypothesisError(WeightError):
    """The hypotheses of a check are not met by the data."""


class FamilyError(WeightError):
    """Unknown family name or a parameter outside its documented range."""


class InvalidConstantError(WeightError):
    """A characteristic constant is outside its possible range."""

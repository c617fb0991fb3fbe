"""Exception types shared across the package."""


class SlabDomainError(ValueError):
    """An input lies outside the domain of an operation."""


class ConvergenceError(ArithmeticError):
    """A numerical scheme failed to meet its tolerance."""


class CapacityError(MemoryError):
    """A requested grid would exceed the configured memory bound."""


class MatrixCheckError(RuntimeError):
    """Matrix-product and scalar-composition results disagree."""


class IncompatibleStatsError(ValueError):
    """Attempt to merge statistics gathered for different (tau1, N)."""


class SeriesGapError(ValueError):
    """A series of N values is not consecutive."""

"""Exception types raised across the package."""


class HyperSmmlError(Exception):
    """Base class for all package errors."""


class DomainError(HyperSmmlError, ValueError):
    """An argument lies outside the domain of the operation."""


class RankError(HyperSmmlError, ValueError):
    """A design matrix is (numerically) rank deficient."""


class UnsupportedError(HyperSmmlError, ValueError):
    """The requested combination of dimensions is not supported."""


class DimensionError(HyperSmmlError, ValueError):
    """Array shapes do not conform."""


class DegenerateGeodesicError(HyperSmmlError, ValueError):
    pass


class EmptyPlaneError(HyperSmmlError, ValueError):
    """An affine functional has no zero inside the expectation space."""


class EmptyCellError(HyperSmmlError, RuntimeError):
    """A cell of an SMML partition received no quadrature mass."""

    def __init__(self, cells):
        self.cells = list(cells)
        super().__init__(f"empty cells: {self.cells}")


class ExpansionError(HyperSmmlError, ValueError):
    """A small-radius expansion was used outside its range of validity."""

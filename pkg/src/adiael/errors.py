"""Exception types raised across the package."""


class AdiaelError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(AdiaelError, ValueError):
    """Malformed input: wrong shape, non-finite entries, invalid physics."""


class NumericalError(AdiaelError, ArithmeticError):
    """A numerical routine could not deliver its accuracy contract."""


class SingularSylvesterError(NumericalError):
    """The Sylvester operator is (numerically) singular.

    Attributes
    ----------
    pair : tuple of complex
        Eigenvalue of ``A`` and eigenvalue of ``B`` whose sum is closest to zero.
    gap : float
        ``abs(pair[0] + pair[1])``.
    """

    def __init__(self, pair, gap, threshold):
        self.pair = pair
        self.gap = gap
        self.threshold = threshold
        super().__init__(
            f"spectra of A and -B overlap: eig(A)={pair[0]:.6g}, eig(B)={pair[1]:.6g}, "
            f"|sum|={gap:.3g} <= {threshold:.3g}"
        )


class DivergentIntegralError(NumericalError):
    """The integrand of an improper integral does not decay."""


class QuadratureError(NumericalError):
    """Adaptive quadrature exhausted its panel budget."""


class DegenerateSteadyStateError(NumericalError):
    """The generator kernel is not one-dimensional."""

    def __init__(self, count):
        self.count = count
        super().__init__(f"expected a one-dimensional kernel, found {count} null directions")


class NoSeparationError(NumericalError):
    """Slow and fast parts of a spectrum are not separated."""

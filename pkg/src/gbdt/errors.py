"""Exception hierarchy shared by all gbdt modules."""


class GbdtError(Exception):
    """Base class for every error raised by the toolkit."""


class ShapeError(GbdtError, ValueError):
    """Matrix shapes are inconsistent or an entry is not finite."""


class SpectralGapError(GbdtError):
    """Two spectra (or a point and a spectrum) are closer than the gap threshold."""

    def __init__(self, message, distance=None):
        super().__init__(message)
        self.distance = distance


class NotHermitianError(GbdtError):
    def __init__(self, message, asymmetry=None):
        super().__init__(message)
        self.asymmetry = asymmetry


class InvalidTripleError(GbdtError):
    """The determining data of the transformation violates a required condition.

    ``condition`` is a short machine-readable name, one of ``"identity"``,
    ``"hermitian"``, ``"spectrum"``, ``"distinct"``, ``"orthonormal"``,
    ``"dimension"``.
    """

    def __init__(self, condition, message):
        super().__init__(f"[{condition}] {message}")
        self.condition = condition


class IdentityDriftError(GbdtError):
    """The identity ``A S - S A^* = i Pi Pi^*`` drifted beyond tolerance during evolution."""

    def __init__(self, t, residual, tolerance):
        super().__init__(
            f"identity residual {residual:.3e} exceeds {tolerance:.3e} at t={t:.6g}"
        )
        self.t = t
        self.residual = residual
        self.tolerance = tolerance


class SingularSError(GbdtError):
    """S(t) is numerically singular at the requested time."""

    def __init__(self, t, condition):
        super().__init__(f"S(t) is near-singular at t={t:.6g} (cond={condition:.3e})")
        self.t = t
        self.condition = condition


class ScenarioError(GbdtError):
    """A scenario file could not be parsed or is internally inconsistent."""

"""Exception types shared across the package."""


class EdgeflowError(Exception):
    """Base class for all package-specific errors."""


class NotCoprime(EdgeflowError):
    """Edge direction integers share a common factor."""


class WidthTooLarge(EdgeflowError):
    """Bump support does not fit inside one unit cell."""


class GridNotSymmetric(EdgeflowError):
    """Grid resolution is incompatible with the symmetry checks (N must be even)."""


class SingularDeformation(EdgeflowError):
    """Deformation matrix is not invertible."""


class GapClosedOnGrid(EdgeflowError):
    """A band gap required by a topological computation closes on the sampling grid."""


class DomainTooSmall(EdgeflowError):
    """Bound-state tails reach the artificial boundary of the 1D domain."""


class NoBandGap(EdgeflowError):
    """The essential spectrum has no gap at the requested parameters."""


# Some callers refer to the gapless condition under this shorter name.
NoGap = NoBandGap


class WallTooWide(EdgeflowError):
    """Domain wall fails to saturate inside the strip."""


class NoDegeneracyFound(EdgeflowError):
    """No band pair meets the degeneracy tolerance at the searched momenta."""


class NotInversionSymmetric(EdgeflowError):
    """Refined conical points violate the inversion pairing about M."""


class ConvergenceFailure(EdgeflowError):
    """Iterative eigensolver did not converge or residuals are too large."""


class SymmetryViolation(EdgeflowError):
    """Eigenspace does not carry the expected symmetry representation."""


class IllConditioned(EdgeflowError):
    """A linear solve came back with a residual above tolerance."""


class ContinuationAmbiguous(EdgeflowError):
    """Eigenvector-overlap continuation could not match states across kappa."""


class UnsupportedParameters(EdgeflowError):
    """Closed-form oracle requested outside its solvable parameter family."""


class WindowMismatch(EdgeflowError):
    """Momentum windows of two spectra to be compared do not overlap."""


class ConfigError(EdgeflowError):
    """Run configuration is malformed or inconsistent."""

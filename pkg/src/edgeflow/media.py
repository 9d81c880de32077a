"""Material data: potentials, magnetic profiles, domain walls, deformations.

All quantities are in lattice units on the unit cell [-1/2, 1/2]^2. Potentials
and magnetic profiles are Z^2-periodic; domain walls are slowly varying 1D
profiles applied along the direction transverse to an edge.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GridNotSymmetric,
    SingularDeformation,
    WidthTooLarge,
)

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class PotentialSpec:
    """Scalar periodic potential, either a periodized bump or a cosine series."""

    kind: str = "periodized_bump"
    amplitude: float = -150.0
    width: float = 0.25
    coefficients: tuple = ()

    def __post_init__(self):
        if self.kind not in ("periodized_bump", "fourier_series"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "periodized_bump" and not self.width < 0.5:
            raise WidthTooLarge(f"bump width {self.width} must be < 1/2")


@dataclass(frozen=True)
class MagneticSpec:
    """Real cosine series sum_n amp * cos(2 pi n.x) over integer frequencies."""

    coefficients: tuple = (((1, 0), 5.0), ((0, 1), 5.0), ((1, 1), 5.0), ((1, -1), 5.0))


@dataclass(frozen=True)
class DomainWall:
    """Transition profile chi(X) between the two asymptotic media.

    Kinds:
      tanh_scaled       tanh(steepness * X)
      sign              sgn(X) (0 at X = 0)
      shifted_bump_sum  tanh(steepness * X) + offset + sum of Gaussian bumps
                        (amplitude, center); steepness = 0 drops the tanh ramp
      multi_even        tanh(X - L) + 1 - tanh(X + L)   (limits +1 / +1)
      multi_odd         tanh(X - L) - tanh(X) + tanh(X + L)
      custom_table      linear interpolation of (X, chi) samples, clamped tails
    """

    kind: str = "tanh_scaled"
    steepness: float = 1.0
    L: float = 0.0
    offset: float = 0.0
    bumps: tuple = ()
    table: tuple = None

    def __post_init__(self):
        kinds = ("tanh_scaled", "sign", "shifted_bump_sum", "multi_even",
                 "multi_odd", "custom_table")
        if self.kind not in kinds:
            raise ValueError(f"unknown wall kind {self.kind!r}")
        if self.kind == "custom_table":
            if self.table is None:
                raise ValueError("custom_table wall needs a (X, chi) table")
            xs, vals = self.table
            xs = np.asarray(xs, float)
            vals = np.asarray(vals, float)
            if xs.ndim != 1 or xs.shape != vals.shape or xs.size < 2:
                raise ValueError("wall table must be two equal-length 1D arrays")
            if np.any(np.diff(xs) <= 0):
                raise ValueError("wall table abscissae must increase")
            object.__setattr__(self, "table", (xs, vals))
        if self.bumps:
            object.__setattr__(
                self, "bumps", tuple((float(a), float(c)) for a, c in self.bumps))


def eval_domain_wall(wall, X):
    """Evaluate chi(X); accepts scalars or arrays."""
    X = np.asarray(X, dtype=float)
    if wall.kind == "tanh_scaled":
        out = np.tanh(wall.steepness * X)
    elif wall.kind == "sign":
        out = np.sign(X)
    elif wall.kind == "shifted_bump_sum":
        out = np.full_like(X, wall.offset)
        if wall.steepness != 0.0:
            out = out + np.tanh(wall.steepness * X)
        for amp, center in wall.bumps:
            out = out + amp * np.exp(-((X - center) ** 2))
    elif wall.kind == "multi_even":
        out = np.tanh(X - wall.L) + 1.0 - np.tanh(X + wall.L)
    elif wall.kind == "multi_odd":
        out = np.tanh(X - wall.L) - np.tanh(X) + np.tanh(X + wall.L)
    elif wall.kind == "custom_table":
        xs, vals = wall.table
        out = np.interp(X, xs, vals)
    else:  # pragma: no cover
        raise ValueError(wall.kind)
    return out if out.ndim else float(out)


def wall_limits(wall):
    """(chi(-inf), chi(+inf)) estimated far beyond the transition region."""
    scale = abs(wall.steepness) if wall.steepness else 1.0
    X = abs(wall.L) + 50.0 / scale
    if wall.kind == "custom_table":
        X = max(X, abs(wall.table[0][0]), abs(wall.table[0][-1]))
    return float(eval_domain_wall(wall, -X)), float(eval_domain_wall(wall, X))


def is_sign_changing(wall):
    """True when chi connects values of opposite sign (a genuine domain wall)."""
    lo, hi = wall_limits(wall)
    return lo * hi < 0


def is_odd_wall(wall, X_max=50.0, num=401):
    """True when chi(-X) = -chi(X) to near machine precision."""
    X = np.linspace(0.0, X_max, num)
    return np.max(np.abs(eval_domain_wall(wall, X) + eval_domain_wall(wall, -X))) < 1e-12


@dataclass(frozen=True)
class Deformation:
    """Linear change of variables y = T^-1 x with cached pullback data."""

    T: np.ndarray
    metric: np.ndarray
    detTinv: float

    def __post_init__(self):
        object.__setattr__(self, "T", np.asarray(self.T, float))
        object.__setattr__(self, "metric", np.asarray(self.metric, float))
        if abs(np.linalg.det(self.T)) <= 1e-14:
            raise SingularDeformation("det(T) = 0")
        if not np.allclose(self.metric @ (self.T.T @ self.T), np.eye(2), atol=1e-12):
            raise ValueError("metric is not (T^T T)^-1")

    @classmethod
    def from_matrix(cls, T):
        T = np.asarray(T, float)
        det = np.linalg.det(T)
        if abs(det) <= 1e-14:
            raise SingularDeformation("det(T) = 0")
        metric = np.linalg.inv(T.T @ T)
        return cls(T, metric, 1.0 / det)

    @classmethod
    def identity(cls):
        return cls.from_matrix(np.eye(2))

    @classmethod
    def tilt(cls, phi):
        """Symmetric shear-like tilt [[cos phi, -sin phi], [-sin phi, cos phi]]."""
        c, s = np.cos(phi), np.sin(phi)
        return cls.from_matrix(np.array([[c, -s], [-s, c]]))

    def is_volumetric(self, tol=1e-12):
        """True for T = c * identity (no direction is distinguished)."""
        c = self.T[0, 0]
        return np.allclose(self.T, c * np.eye(2), atol=tol)


def pullback_coefficients(d):
    """Coefficients ((T^T T)^-1, det T^-1) of the pulled-back operator."""
    if abs(np.linalg.det(d.T)) <= 1e-14:
        raise SingularDeformation("det(T) = 0")
    return d.metric, d.detTinv


@dataclass(frozen=True)
class MediumSpec:
    """Complete description of one medium: V, A, T, chi, delta, and scaling r.

    r = 2 goes with an undeformed (or volumetric) lattice, where the central
    band degeneracy is quadratic; r = 1 goes with a genuine deformation, where
    it splits into a conical pair.
    """

    potential: PotentialSpec = field(default_factory=PotentialSpec)
    magnetic: MagneticSpec = field(default_factory=MagneticSpec)
    deformation: Deformation = field(default_factory=Deformation.identity)
    wall: DomainWall = field(default_factory=DomainWall)
    delta: float = 0.1
    r: int = 2

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.r not in (1, 2):
            raise ValueError("r must be 1 or 2")
        volumetric = self.deformation.is_volumetric()
        if volumetric and self.r != 2:
            raise ValueError("undeformed medium requires r = 2")
        if not volumetric and self.r != 1:
            raise ValueError("deformed medium requires r = 1")


def _bump(rho, amplitude, width):
    """Compactly supported mollifier, = amplitude at rho = 0, 0 for rho >= width."""
    rho = np.asarray(rho, float)
    out = np.zeros_like(rho)
    inside = rho < width
    t = (rho[inside] / width) ** 2
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - t))
    return out


def cell_grid(N):
    """Coordinates of the N x N periodic grid on [-1/2, 1/2)^2, spacing 1/N."""
    x = -0.5 + np.arange(N) / N
    return np.meshgrid(x, x, indexing="ij")


def sample_potential(spec, N):
    """Sample the potential on the N x N unit-cell grid."""
    if N < 4:
        raise ValueError("need N >= 4")
    X1, X2 = cell_grid(N)
    if spec.kind == "periodized_bump":
        if not spec.width < 0.5:
            raise WidthTooLarge(f"bump width {spec.width} must be < 1/2")
        V = np.zeros((N, N))
        for s1 in (-1, 0, 1):
            for s2 in (-1, 0, 1):
                rho = np.hypot(X1 - s1, X2 - s2)
                V += _bump(rho, spec.amplitude, spec.width)
        return V
    V = np.zeros((N, N))
    for (n1, n2), amp in spec.coefficients:
        V += amp * np.cos(2 * np.pi * (n1 * X1 + n2 * X2))
    return V


def sample_magnetic(spec, N):
    """Sample the magnetic profile A on the N x N unit-cell grid."""
    X1, X2 = cell_grid(N)
    A = np.zeros((N, N))
    for (n1, n2), amp in spec.coefficients:
        A += amp * np.cos(2 * np.pi * (n1 * X1 + n2 * X2))
    return A


@dataclass(frozen=True)
class SymmetryReport:
    """Pointwise deviations of a sampled field under the square symmetries."""

    inversion: float
    realness: float
    rotation: float
    reflection: float
    tol: float = 1e-10

    @property
    def passes(self):
        return max(self.inversion, self.realness,
                   self.rotation, self.reflection) < self.tol


def validate_square_symmetry(field_, tol=1e-10):
    """Deviations under inversion, conjugation, quarter rotation, reflection.

    The grid x_i = -1/2 + i/N represents each map exactly when N is even:
    -x is the index map i -> (N - i) mod N and the quarter rotation
    (x1, x2) -> (x2, -x1) permutes indices.
    """
    F = np.asarray(field_)
    N = F.shape[0]
    if F.shape != (N, N):
        raise ValueError("field must be square")
    if N % 2:
        raise GridNotSymmetric("symmetry checks need an even grid")
    rev = (N - np.arange(N)) % N
    inv = np.max(np.abs(F - F[np.ix_(rev, rev)]))
    realness = float(np.max(np.abs(F.imag))) if np.iscomplexobj(F) else 0.0
    Freal = F.real if np.iscomplexobj(F) else F
    # field(R x) with R x = (-x2, x1): index (i, j) -> (rev[j], i)
    rot = np.max(np.abs(Freal - Freal[np.ix_(rev, np.arange(N))].T))
    refl = np.max(np.abs(Freal - Freal.T))
    return SymmetryReport(float(inv), realness, float(rot), float(refl), tol)

"""Lattice geometry and rational edge directions.

Quasimomenta live in the Brillouin zone [-pi, pi]^2 of the square lattice, with
plane waves e^{2 pi i n.x} and the duality convention k_j . v_k = delta_jk.
A rational edge direction (m1, n1) (coprime) is completed to a lattice basis by
a Bezout companion (m2, n2) with m1 n2 - m2 n1 = 1; the companion is unique up
to adding integer multiples of (m1, n1), and we fix a canonical representative.
"""

from dataclasses import dataclass, field
from math import gcd

import numpy as np

from .errors import NotCoprime


@dataclass(frozen=True)
class Lattice2D:
    """Primitive basis {v1, v2} together with its dual basis {k1, k2}."""

    v1: np.ndarray
    v2: np.ndarray
    k1: np.ndarray
    k2: np.ndarray

    def __post_init__(self):
        for name in ("v1", "v2", "k1", "k2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        V = np.column_stack([self.v1, self.v2])
        if abs(np.linalg.det(V)) <= 1e-12:
            raise ValueError("lattice basis vectors are linearly dependent")
        K = np.column_stack([self.k1, self.k2])
        if not np.allclose(K.T @ V, np.eye(2), atol=1e-12):
            raise ValueError("dual basis does not satisfy k_j . v_k = delta_jk")

    @classmethod
    def from_basis(cls, v1, v2):
        V = np.column_stack([np.asarray(v1, float), np.asarray(v2, float)])
        if abs(np.linalg.det(V)) <= 1e-12:
            raise ValueError("lattice basis vectors are linearly dependent")
        K = np.linalg.inv(V).T
        return cls(V[:, 0], V[:, 1], K[:, 0], K[:, 1])


def square_lattice():
    """The integer square lattice with its (identical) dual basis."""
    e1 = np.array([1.0, 0.0])
    e2 = np.array([0.0, 1.0])
    return Lattice2D(e1, e2, e1, e2)


@dataclass(frozen=True)
class RationalEdge:
    """Edge direction m1 v1 + n1 v2 with Bezout companion and dual vectors.

    fv2 = m2 v1 + n2 v2 completes fv1 to a lattice basis; fK1 = n2 k1 - m2 k2
    and fK2 = -n1 k1 + m1 k2 are the dual vectors, so fK2 is orthogonal to the
    edge direction and fK2 . x measures transverse position.
    """

    m1: int
    n1: int
    m2: int
    n2: int
    fv1: np.ndarray
    fv2: np.ndarray
    fK1: np.ndarray
    fK2: np.ndarray

    def __post_init__(self):
        for name in ("fv1", "fv2", "fK1", "fK2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if gcd(abs(self.m1), abs(self.n1)) != 1:
            raise NotCoprime(f"({self.m1}, {self.n1}) is not a coprime direction")
        if self.m1 * self.n2 - self.m2 * self.n1 != 1:
            raise ValueError("Bezout identity m1 n2 - m2 n1 = 1 violated")
        G = np.array([[self.fK1 @ self.fv1, self.fK1 @ self.fv2],
                      [self.fK2 @ self.fv1, self.fK2 @ self.fv2]])
        if not np.allclose(G, np.eye(2), atol=1e-12):
            raise ValueError("dual pairing fK_j . fv_k = delta_jk violated")

    def parallel_momentum(self, k):
        """Component of quasimomentum k along the edge, wrapped to [-pi, pi)."""
        kp = float(np.asarray(k, float) @ self.fv1)
        return (kp + np.pi) % (2 * np.pi) - np.pi


def _bezout_companion(m1, n1):
    """Canonical (m2, n2) with m1 n2 - m2 n1 = 1: |m2| minimal, ties by n2."""
    if m1 == 0:
        # n1 = +-1; the identity pins m2 = -n1 while n2 is free, so take n2 = 0.
        return -n1, 0
    if n1 == 0:
        # m1 = +-1; n2 = m1 is pinned and m2 is free.
        return 0, m1
    # Particular solution from the extended Euclid identity a m1 + b n1 = 1,
    # rewritten for m1 n2 - m2 n1 = 1 as n2 = a, m2 = -b.
    a, b = _xgcd(m1, n1)
    m2, n2 = -b, a
    # The solution family is (m2 + j m1, n2 + j n1); minimize |m2| over j.
    j0 = round(-m2 / m1)
    cands = []
    for j in (j0 - 1, j0, j0 + 1):
        cands.append((m2 + j * m1, n2 + j * n1))
    best = min(abs(c[0]) for c in cands)
    cands = [c for c in cands if abs(c[0]) == best]
    # Two candidates can tie with opposite-sign m2; prefer nonnegative, then
    # larger, second component.
    return max(cands, key=lambda c: (c[1] >= 0, c[1]))


def _xgcd(p, q):
    """Coefficients (a, b) with a p + b q = gcd(p, q) = 1."""
    a0, b0, a1, b1 = 1, 0, 0, 1
    while q != 0:
        t, r = divmod(p, q)
        p, q = q, r
        a0, a1 = a1, a0 - t * a1
        b0, b1 = b1, b0 - t * b1
    if p < 0:
        a0, b0 = -a0, -b0
    return a0, b0


def make_rational_edge(m1, n1, lattice=None):
    """Build the canonical RationalEdge for direction m1 v1 + n1 v2."""
    m1, n1 = int(m1), int(n1)
    if (m1, n1) == (0, 0):
        raise NotCoprime("(0, 0) is not a direction")
    if gcd(abs(m1), abs(n1)) != 1:
        raise NotCoprime(f"({m1}, {n1}) is not coprime")
    if lattice is None:
        lattice = square_lattice()
    m2, n2 = _bezout_companion(m1, n1)
    fv1 = m1 * lattice.v1 + n1 * lattice.v2
    fv2 = m2 * lattice.v1 + n2 * lattice.v2
    fK1 = n2 * lattice.k1 - m2 * lattice.k2
    fK2 = -n1 * lattice.k1 + m1 * lattice.k2
    return RationalEdge(m1, n1, m2, n2, fv1, fv2, fK1, fK2)


def reparameterize_edge(edge, j):
    """Shift the Bezout companion by j copies of the edge direction.

    The edge direction and fK2 are invariant; fK1 picks up -j fK2.
    """
    j = int(j)
    return RationalEdge(
        edge.m1, edge.n1,
        edge.m2 + j * edge.m1, edge.n2 + j * edge.n1,
        edge.fv1, edge.fv2 + j * edge.fv1,
        edge.fK1 - j * edge.fK2, edge.fK2,
    )


@dataclass(frozen=True)
class QuasimomentumSlice:
    """Line k = k_par fK1 + q fK2 through the Brillouin zone."""

    k_par: float
    samples: np.ndarray
    qs: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, float))
        if self.qs is not None:
            object.__setattr__(self, "qs", np.asarray(self.qs, float))


def momentum_slice(edge, k_par, num_q=201, q_range=(-np.pi, np.pi)):
    """Sample the transverse momentum line at fixed parallel momentum."""
    qs = np.linspace(q_range[0], q_range[1], num_q)
    samples = k_par * edge.fK1[None, :] + qs[:, None] * edge.fK2[None, :]
    return QuasimomentumSlice(float(k_par), samples, qs)

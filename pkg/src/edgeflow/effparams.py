"""Effective Hamiltonian coefficients from a degenerate Bloch eigenspace.

At a two-fold band crossing the local dispersion and the response to the
time-reversal-breaking perturbation are governed by a handful of inner
products of the two degenerate eigenfunctions. This module selects a
canonical basis of the crossing eigenspace using the lattice symmetries
(discrete rotation at the corner momentum, conjugation-inversion at a
conical point), solves the deflated resolvent equations, and assembles the
quadratic coefficients (alpha0, alpha1, alpha2), the conical ones
(gamma0, gamma1, gamma2) and the gap-opening coefficient theta.

All fields are periodic-cell grids raveled in C order, matching bulkfb.
"""
import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._linalg import bordered_solve
from .bulkfb import _twisted_gradients, assemble_bloch_operator, solve_bloch_bands
from .errors import (
    GridNotSymmetric,
    IllConditioned,
    NoDegeneracyFound,
    SymmetryViolation,
)


@dataclass(frozen=True)
class DegenerateBasis:
    """Canonical orthonormal pair spanning a two-fold crossing eigenspace.

    kind is "rotation_eigenbasis" at the corner momentum (Phi1 has discrete
    rotation eigenvalue +i) or "pc_symmetrized" at a conical point. In both
    cases Phi2 is the conjugation-inversion image of Phi1.
    """

    kind: str
    Phi1: np.ndarray
    Phi2: np.ndarray
    k_star: np.ndarray
    E_star: float
    gauge_info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EffectiveParams:
    """Homogenized coefficients of the local two-band model.

    kind "quadratic" carries (alpha0, alpha1, alpha2, theta); kind "dirac"
    carries the real 2-vectors (gamma0, gamma1, gamma2) and theta. residues
    records the imaginary parts discarded from nominally real outputs and
    the first-order overlaps that must vanish at the corner momentum.
    """

    kind: str
    theta: float
    alpha0: float = None
    alpha1: float = None
    alpha2: float = None
    gamma0: np.ndarray = None
    gamma1: np.ndarray = None
    gamma2: np.ndarray = None
    residues: dict = field(default_factory=dict)
    gauge_info: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"kind": self.kind, "theta": self.theta,
               "residues": dict(self.residues),
               "gauge_info": dict(self.gauge_info)}
        if self.kind == "quadratic":
            out["alpha"] = [self.alpha0, self.alpha1, self.alpha2]
        else:
            out["gamma"] = [list(map(float, g)) for g in
                            (self.gamma0, self.gamma1, self.gamma2)]
        return out


def _reversed_indices(N):
    return (-np.arange(N)) % N


def apply_conjugation_inversion(field_flat, N):
    """u(x) -> conj(u(-x)) on the periodic cell; an involution on any fiber."""
    u = np.asarray(field_flat).reshape(N, N)
    rev = _reversed_indices(N)
    return np.conj(u[np.ix_(rev, rev)]).ravel()


def apply_parity(field_flat, N):
    """u(x) -> e^{-2 pi i (x1+x2)} u(-x), mapping fiber k to fiber 2M - k.

    The phase is the discrete gauge that shifts quasimomentum by a dual
    lattice vector, so eigenvectors at one conical point map to eigenvectors
    at its inversion partner.
    """
    u = np.asarray(field_flat).reshape(N, N)
    rev = _reversed_indices(N)
    g = -0.5 + np.arange(N) / N
    phase = np.exp(-2j * np.pi * (g[:, None] + g[None, :]))
    return (phase * u[np.ix_(rev, rev)]).ravel()


def apply_corner_rotation(field_flat, N):
    """Quarter-turn x -> (-x2, x1) on periodic parts at the corner momentum.

    The compensating phase e^{-2 pi i x2} keeps the image in the same
    fiber; applying the map twice reproduces apply_parity and four times
    the identity, mirroring the continuum relations.
    """
    u = np.asarray(field_flat).reshape(N, N)
    rev = _reversed_indices(N)
    g = -0.5 + np.arange(N) / N
    out = u.T[:, rev] * np.exp(-2j * np.pi * g)[None, :]
    return out.ravel()


def apply_coordinate_swap(field_flat, N):
    """u(x1, x2) -> u(x2, x1); phase-free at the corner momentum."""
    return np.asarray(field_flat).reshape(N, N).T.ravel()


def _centered_gradients(N, k):
    """Centered first differences with the fiber twist, one per axis."""
    D1, D2 = _twisted_gradients(N, k)
    return 0.5 * (D1 - D1.conj().T), 0.5 * (D2 - D2.conj().T)


def _degenerate_pair(medium, k, bands, N, E_ref):
    op = assemble_bloch_operator(medium, k, 0, N)
    b0, b1 = bands
    vals, vecs = solve_bloch_bands(op, b1 + 1)
    if vals[b1] - vals[b0] > 1e-6 * (1.0 + abs(E_ref)):
        raise NoDegeneracyFound(
            f"bands {bands} split by {vals[b1] - vals[b0]:.3e} at the "
            "requested momentum")
    return vecs[:, [b0, b1]], 0.5 * (vals[b0] + vals[b1])


def _rotation_basis(psi, N):
    """Phi1 with discrete rotation eigenvalue +i, phased by the mirror."""
    Rpsi = np.column_stack([apply_corner_rotation(psi[:, j], N)
                            for j in range(2)])
    Rmat = psi.conj().T @ Rpsi
    if np.linalg.norm(Rpsi - psi @ Rmat) > 1e-6:
        raise SymmetryViolation(
            "quarter-turn rotation does not preserve the crossing eigenspace")
    evals, evecs = np.linalg.eig(Rmat)
    order = np.argsort(-evals.imag)
    evals, evecs = evals[order], evecs[:, order]
    if abs(evals[0] - 1j) > 1e-6 or abs(evals[1] + 1j) > 1e-6:
        raise SymmetryViolation(
            f"rotation eigenvalues {evals} deviate from +i, -i")
    Phi1 = psi @ evecs[:, 0]
    Phi1 /= np.linalg.norm(Phi1)
    # Mirror gauge: align the coordinate-swap image of Phi1 with its
    # conjugation-inversion image. This is the phase in which the
    # second-order coefficients below come out real.
    omega = np.vdot(apply_conjugation_inversion(Phi1, N),
                    apply_coordinate_swap(Phi1, N))
    if abs(abs(omega) - 1.0) > 1e-6:
        raise SymmetryViolation(
            "coordinate swap does not map the rotation eigenvectors onto "
            "each other")
    Phi1 = Phi1 * np.exp(-0.5j * np.angle(omega))
    pin = int(np.argmax(np.abs(Phi1)))
    if Phi1[pin].real < 0:
        Phi1 = -Phi1
    return Phi1, {"gauge": "mirror_aligned", "sign_pin_index": pin,
                  "rotation_eigenvalue": "+i"}


def _pc_symmetric_basis(psi, N, k, metric):
    """Phi1 = (f + i g)/sqrt(2) from an orthonormal conjugation-fixed pair."""
    Jpsi = np.column_stack([apply_conjugation_inversion(psi[:, j], N)
                            for j in range(2)])
    S = psi.conj().T @ Jpsi
    if np.linalg.norm(Jpsi - psi @ S) > 1e-6:
        raise SymmetryViolation(
            "conjugation-inversion does not preserve the crossing eigenspace")
    if np.linalg.norm(S @ S.conj() - np.eye(2)) > 1e-6:
        raise SymmetryViolation(
            "conjugation-inversion squared deviates from the identity on "
            "the eigenspace")
    # Fixed vectors of the antilinear map c -> S conj(c) span a real plane;
    # c0 + S conj(c0) lands in it for any seed c0.
    frame = []
    for c0 in (np.array([1.0, 0.0], complex), np.array([1j, 0.0], complex),
               np.array([0.0, 1.0], complex), np.array([0.0, 1j], complex)):
        v = c0 + S @ np.conj(c0)
        for e in frame:
            v = v - e * (e.conj() @ v)
        if np.linalg.norm(v) > 1e-3:
            frame.append(v / np.linalg.norm(v))
        if len(frame) == 2:
            break
    if len(frame) < 2:
        raise SymmetryViolation(
            "could not build two independent conjugation-fixed vectors")
    Phi1 = psi @ ((frame[0] + 1j * frame[1]) / np.sqrt(2.0))
    Phi1 /= np.linalg.norm(Phi1)
    pin = int(np.argmax(np.abs(Phi1)))
    Phi1 = Phi1 * (np.abs(Phi1[pin]) / Phi1[pin])
    # The conjugation-fixed frame is determined only up to a reflection
    # that swaps Phi1 with its partner and reverses the cone orientation
    # (flipping the signs of the sigma2 velocity and of theta). Pin the
    # orientation through the first-order velocity matrix: its determinant
    # must come out negative, the convention the frozen coefficients and
    # the bulk invariant calibration use.
    Dc1, Dc2 = _centered_gradients(N, k)
    Phi2 = apply_conjugation_inversion(Phi1, N)
    z = metric @ np.array([np.vdot(Phi1, -2j * (Dc1 @ Phi2)),
                           np.vdot(Phi1, -2j * (Dc2 @ Phi2))])
    chir = z.real[0] * (-z.imag[1]) - z.real[1] * (-z.imag[0])
    if abs(chir) < 1e-10 * (1.0 + np.abs(z).max()) ** 2:
        raise SymmetryViolation(
            "conical velocity matrix is singular, cannot orient the basis")
    if chir > 0:
        Phi1 = Phi2
        pin = int(np.argmax(np.abs(Phi1)))
    return Phi1, {"gauge": "largest_entry_real", "sign_pin_index": pin,
                  "orientation": "negative_velocity_determinant"}


def _validate_basis(basis, N):
    Phi1, Phi2 = basis.Phi1, basis.Phi2
    gram = np.array([[np.vdot(Phi1, Phi1), np.vdot(Phi1, Phi2)],
                     [np.vdot(Phi2, Phi1), np.vdot(Phi2, Phi2)]])
    if np.abs(gram - np.eye(2)).max() > 1e-10:
        raise SymmetryViolation("selected basis is not orthonormal")
    if np.linalg.norm(Phi2 - apply_conjugation_inversion(Phi1, N)) > 1e-8:
        raise SymmetryViolation(
            "Phi2 is not the conjugation-inversion image of Phi1")
    if basis.kind == "rotation_eigenbasis":
        r1 = np.linalg.norm(apply_corner_rotation(Phi1, N) - 1j * Phi1)
        r2 = np.linalg.norm(apply_corner_rotation(Phi2, N) + 1j * Phi2)
        if max(r1, r2) > 1e-8:
            raise SymmetryViolation(
                f"rotation eigenvector residuals {r1:.2e}, {r2:.2e} "
                "exceed 1e-8")


def select_degenerate_basis(medium, deg, which, N):
    """Canonical basis of the two-fold crossing eigenspace at k_star.

    which = "M" diagonalizes the discrete quarter-turn rotation on the
    eigenspace at the corner momentum and picks the +i eigenvector;
    which = "D+" / "D-" symmetrizes with respect to conjugation-inversion
    at a conical point, the "D-" basis being the parity image of the "D+"
    one so that downstream coefficient identities hold exactly.

    The eigenvectors come from the unperturbed operator, so the medium's
    delta plays no role here.
    """
    if N % 2:
        raise GridNotSymmetric("need even N for the symmetry operations")
    if which == "M":
        if deg.kind != "quadratic":
            raise ValueError(f"which='M' expects a quadratic crossing, "
                             f"got {deg.kind}")
        k = np.asarray(deg.k_star, float)
        psi, E = _degenerate_pair(medium, k, deg.band_indices, N, deg.E_star)
        Phi1, info = _rotation_basis(psi, N)
        kind = "rotation_eigenbasis"
    elif which in ("D+", "D-"):
        if deg.kind != "dirac_pair":
            raise ValueError(f"which='{which}' expects a conical pair, "
                             f"got {deg.kind}")
        ks = np.asarray(deg.k_star, float).reshape(-1, 2)
        psi, E = _degenerate_pair(medium, ks[0], deg.band_indices, N,
                                  deg.E_star)
        Phi1, info = _pc_symmetric_basis(psi, N, ks[0],
                                         medium.deformation.metric)
        kind = "pc_symmetrized"
        k = ks[0]
        if which == "D-":
            Phi1 = apply_parity(Phi1, N)
            info = dict(info, parity_image=True)
            k = ks[1]
    else:
        raise ValueError(f"which must be 'M', 'D+' or 'D-', got {which!r}")
    Phi2 = apply_conjugation_inversion(Phi1, N)
    basis = DegenerateBasis(kind, Phi1, Phi2, k, float(E), info)
    _validate_basis(basis, N)
    return basis


def deflated_resolvent_solve(op, E_star, basis, f):
    """Solve (H(k_star) - E_star) u = f with u, f orthogonal to the pair.

    Implemented as a bordered system with Phi1, Phi2 as constraint columns,
    which stays nonsingular although E_star is an eigenvalue. f must
    already be orthogonal to the pair within 1e-8 of its norm.
    """
    f = np.asarray(f, complex)
    nf = np.linalg.norm(f)
    if nf == 0.0:
        return np.zeros_like(f)
    for phi in (basis.Phi1, basis.Phi2):
        if abs(np.vdot(phi, f)) > 1e-8 * nf:
            raise ValueError(
                "right-hand side has a component along the degenerate pair")
    proj = f - basis.Phi1 * np.vdot(basis.Phi1, f) \
             - basis.Phi2 * np.vdot(basis.Phi2, f)
    A = (op.entries - E_star * sp.identity(op.entries.shape[0],
                                           dtype=complex)).tocsc()
    u = bordered_solve(A, [basis.Phi1, basis.Phi2], proj)
    resid = np.linalg.norm(A @ u - proj)
    if resid > 1e-10 * nf:
        raise IllConditioned(
            f"deflated solve residual {resid:.3e} exceeds 1e-10 |f|")
    return u


def _perturbation_matrix(medium, k, N):
    """The gap-opening operator at unit strength, deformation factor included."""
    base = assemble_bloch_operator(medium, k, 0, N).entries
    bumped = assemble_bloch_operator(
        dataclasses.replace(medium, delta=1.0), k, +1, N).entries
    return (bumped - base).tocsr()


def compute_effective_params(medium, deg, basis, N):
    """Inner products of the canonical basis defining the local two-band model.

    For a corner crossing ("quadratic") the three second-order coefficients
    are resolvent inner products of first derivatives of the basis; for a
    conical point ("dirac") the three velocity 2-vectors come from first
    derivatives contracted with the inverse deformation metric. In both
    cases theta is the diagonal matrix element of the unit-strength
    gap-opening operator, which sets the gap 2 delta^r |theta| to leading
    order.
    """
    k = np.asarray(basis.k_star, float)
    op = assemble_bloch_operator(medium, k, 0, N)
    Dc1, Dc2 = _centered_gradients(N, k)
    Phi1, Phi2 = basis.Phi1, basis.Phi2
    W = _perturbation_matrix(medium, k, N)
    theta_raw = np.vdot(Phi1, W @ Phi1)
    residues = {"theta_imag": abs(float(theta_raw.imag))}
    theta = float(theta_raw.real)
    if residues["theta_imag"] > 1e-10 * (1.0 + abs(theta)):
        raise SymmetryViolation(
            f"theta has imaginary residue {residues['theta_imag']:.3e}")

    if basis.kind == "rotation_eigenbasis":
        fields = {(m, j): -2j * (D @ phi)
                  for m, D in ((1, Dc1), (2, Dc2))
                  for j, phi in ((1, Phi1), (2, Phi2))}
        overlap = max(abs(np.vdot(phi, g))
                      for g in fields.values() for phi in (Phi1, Phi2))
        residues["first_order_overlap"] = float(overlap)
        sols = {}
        for key in ((1, 1), (2, 2), (1, 2)):
            g = fields[key]
            g = g - Phi1 * np.vdot(Phi1, g) - Phi2 * np.vdot(Phi2, g)
            sols[key] = deflated_resolvent_solve(op, basis.E_star, basis, g)
        a0 = np.vdot(fields[(1, 1)], sols[(1, 1)])
        a1 = np.vdot(fields[(1, 1)], sols[(2, 2)])
        # the cross channel is carried by the antisymmetric Pauli matrix, so
        # the raw inner product is i times the real coefficient
        a2 = 1j * np.vdot(fields[(1, 1)], sols[(1, 2)])
        residues["alpha_imag"] = float(max(abs(a0.imag), abs(a1.imag),
                                           abs(a2.imag)))
        if residues["alpha_imag"] > 1e-8 * (1.0 + abs(a0)):
            raise SymmetryViolation(
                f"quadratic coefficients have imaginary residue "
                f"{residues['alpha_imag']:.3e}")
        alpha = [float(a.real) for a in (a0, a1, a2)]
        floor = 1e-8 * (1.0 + abs(alpha[0]))
        if abs(alpha[1]) < floor or abs(alpha[2]) < floor:
            raise SymmetryViolation(
                "degenerate quadratic form: alpha1 and alpha2 must be "
                "nonzero")
        return EffectiveParams(
            kind="quadratic", theta=theta, alpha0=alpha[0], alpha1=alpha[1],
            alpha2=alpha[2], residues=residues,
            gauge_info=dict(basis.gauge_info))

    if basis.kind != "pc_symmetrized":
        raise ValueError(f"unknown basis kind {basis.kind!r}")
    G = medium.deformation.metric
    v11 = np.array([np.vdot(Phi1, -2j * (Dc1 @ Phi1)),
                    np.vdot(Phi1, -2j * (Dc2 @ Phi1))])
    v12 = np.array([np.vdot(Phi1, -2j * (Dc1 @ Phi2)),
                    np.vdot(Phi1, -2j * (Dc2 @ Phi2))])
    g0 = G @ v11
    z = G @ v12
    residues["gamma0_imag"] = float(np.abs(g0.imag).max())
    if residues["gamma0_imag"] > 1e-8 * (1.0 + np.abs(g0).max()):
        raise SymmetryViolation(
            f"drift vector has imaginary residue "
            f"{residues['gamma0_imag']:.3e}")
    gamma0 = g0.real.copy()
    gamma1 = z.real.copy()
    gamma2 = -z.imag.copy()
    scale = 1.0 + max(np.linalg.norm(gamma1), np.linalg.norm(gamma2))
    if min(np.linalg.norm(gamma1), np.linalg.norm(gamma2)) < 1e-8 * scale:
        raise SymmetryViolation(
            "degenerate conical form: gamma1 and gamma2 must be nonzero")
    return EffectiveParams(
        kind="dirac", theta=theta, gamma0=gamma0, gamma1=gamma1,
        gamma2=gamma2, residues=residues, gauge_info=dict(basis.gauge_info))


def edge_project_params(params, edge):
    """Project the conical coefficients onto an edge direction.

    Returns (a, b, c): a_l and b_l are the components of gamma_l along the
    transverse and parallel dual vectors of the edge, and c = theta. These
    are the inputs of the effective 1D edge operators.
    """
    if params.kind != "dirac":
        raise ValueError("edge projection requires dirac-kind parameters")
    gams = (params.gamma0, params.gamma1, params.gamma2)
    a = np.array([float(g @ edge.fK2) for g in gams])
    b = np.array([float(g @ edge.fK1) for g in gams])
    return a, b, float(params.theta)

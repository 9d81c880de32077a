"""Edge Hamiltonians on a truncated strip: assembly, spectra, diagrams.

The strip is [-W/2, W/2] x [0, 1] with spacing 1/N, hard (Dirichlet)
truncation in x1 and Bloch-periodic x2 carrying the parallel quasimomentum
k. The magnetic term is modulated by the domain wall evaluated at
delta * K2 . x, so the medium interpolates between the two signed bulk
operators far from the wall. Assembly reuses the bulk forward/backward
difference stencils; a wall-free strip therefore reproduces bulk band
slices up to truncation error, and the per-k spectra assemble into edge
state diagrams with classified states, continued curves and a spectral
flow count.
"""
import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bulkfb import (
    _dense_bands,
    _forward_diff_1d,
    find_quadratic_degeneracy,
    locate_dirac_points,
)
from .errors import (
    ConvergenceFailure,
    NoBandGap,
    UnsupportedParameters,
    WallTooWide,
    WindowMismatch,
)
from .media import eval_domain_wall, sample_magnetic, sample_potential


@dataclass(frozen=True)
class StripOperator:
    k_par: float
    width_cells: int
    N: int
    entries: object  # sparse Hermitian, dimension (W N - 1) N
    medium: object
    edge: object


@dataclass(frozen=True)
class StripState:
    """One classified eigenpair of a strip fiber."""

    energy: float
    label: str               # edge | bulk | spurious
    wall_mass: float
    boundary_mass: float
    vector: object = None


@dataclass(frozen=True)
class StripCurve:
    """One continued edge-state branch k -> E(k) of a diagram."""

    points: np.ndarray       # (m, 2) columns k, E
    state_refs: tuple        # ((k_index, state_index), ...)
    flow_contribution: int


@dataclass(frozen=True)
class EdgeDiagram:
    k_grid: np.ndarray
    ess_bands: tuple         # per k: array (B, 2) of band (min, max) over q
    gap_bounds: tuple        # per k: (upper edge of lower band, lower edge of upper band)
    states: tuple            # per k: tuple of StripState, ascending energy
    curves: tuple
    flow: int
    E_reference: float
    window: tuple


def strip_coordinates(W, N):
    """Interior x1 nodes and periodic x2 nodes of the strip grid."""
    x1 = -0.5 * W + np.arange(1, W * N) / N
    x2 = np.arange(N) / N
    return x1, x2


def _dirichlet_forward_diff(n, h):
    """Forward difference with zero boundary values beyond both ends."""
    D = sp.diags([-np.ones(n), np.ones(n - 1)], [0, 1], format="csr")
    return D / h


def _auto_width(medium):
    steep = abs(medium.wall.steepness) or 1.0
    if medium.delta <= 0.0:
        return 60
    W = max(60, int(np.ceil(24.0 / (steep * medium.delta))))
    W = min(W, 240)
    return W + (W % 2)


def assemble_strip_operator(medium, edge, k_par, W=None, N=20,
                            saturation_floor=0.05):
    """Strip fiber operator at parallel quasimomentum k_par.

    Only the vertical edge is assembled here; W = None picks
    max(60, 24/(steepness delta)) cells, capped at 240. The wall must have
    saturated at both strip ends (|chi| >= saturation_floor), otherwise the
    asymptotic media are not reached inside the domain and WallTooWide is
    raised. The unit-cell samples of V and A are reused exactly, so the
    interior stencil coincides with the bulk one.
    """
    if (edge.m1, edge.n1) != (0, 1):
        raise UnsupportedParameters(
            "strip assembly supports the vertical edge (0, 1) only")
    if N % 2 or N < 8:
        raise ValueError("need even N >= 8")
    if W is None:
        W = _auto_width(medium)
    W = int(W)
    if W < 4 or W % 2:
        raise ValueError("W must be an even cell count >= 4")
    k_par = float(k_par)

    if medium.delta > 0.0:
        ends = medium.delta * (edge.fK2[0] * np.array([-0.5 * W, 0.5 * W]))
        chi_ends = np.abs(eval_domain_wall(medium.wall, ends))
        if chi_ends.min() < saturation_floor:
            raise WallTooWide(
                f"wall reaches only |chi| = {chi_ends.min():.3f} at the strip "
                f"ends; widen the strip or steepen the wall")

    n1 = W * N - 1
    h = 1.0 / N
    x1, x2 = strip_coordinates(W, N)

    # exact unit-cell sample reuse: x = i h - W/2 sits at cell index
    # (i + N/2) mod N for even W, likewise x2 = j h
    row_idx = (np.arange(1, W * N) + N // 2) % N
    col_idx = (np.arange(N) + N // 2) % N
    Vcell = sample_potential(medium.potential, N)
    Acell = sample_magnetic(medium.magnetic, N)
    V = Vcell[np.ix_(row_idx, col_idx)]
    A = Acell[np.ix_(row_idx, col_idx)]
    X = medium.delta * (edge.fK2[0] * x1[:, None] + edge.fK2[1] * x2[None, :])
    chi = eval_domain_wall(medium.wall, X)

    d1 = _dirichlet_forward_diff(n1, h)
    d2 = _forward_diff_1d(N, h, np.exp(1j * k_par * h))
    Dp = (sp.kron(d1, sp.identity(N), format="csr"),
          sp.kron(sp.identity(n1), d2, format="csr"))
    Dm = tuple(-D.conj().T.tocsr() for D in Dp)

    metric = medium.deformation.metric
    H = sp.diags(V.ravel()).tocsr()
    for mu in range(2):
        for nu in range(2):
            m = metric[mu, nu]
            if m == 0.0:
                continue
            H = H + 0.5 * m * (Dp[mu].conj().T @ Dp[nu]
                               + Dm[mu].conj().T @ Dm[nu])
    coef = medium.delta ** medium.r * medium.deformation.detTinv
    if coef != 0.0:
        a = sp.diags(coef * (chi * A).ravel())
        for D1, D2 in (Dp, Dm):
            H = H + 0.5 * (1j * D1.conj().T @ a @ D2
                           - 1j * D2.conj().T @ a @ D1)
    H = H.tocsr()
    herm = abs(H - H.conj().T).max()
    if herm > 1e-12:
        raise ConvergenceFailure(f"strip operator not Hermitian ({herm:.2e})")
    return StripOperator(k_par, W, int(N), H, medium, edge)


def _classify_one(dens, x1, W, delta, wall_window, mass_threshold,
                  boundary_frac):
    half = 0.5 * W
    bzone = (x1 <= -half + boundary_frac * W) | (x1 >= half - boundary_frac * W)
    boundary_mass = float(dens[bzone].sum())
    wall_mass = float(dens[np.abs(x1) <= wall_window].sum())
    if boundary_mass >= mass_threshold:
        label = "spurious"
    elif wall_mass >= mass_threshold:
        label = "edge"
    else:
        label = "bulk"
    return label, wall_mass, boundary_mass


def _split_boundary_clusters(vals, vecs, bdof, width):
    """Rotate near-degenerate clusters to separate boundary-localized states.

    A wall state and a truncation-boundary state can be nearly degenerate;
    the raw eigenbasis then mixes them. Diagonalizing the boundary-mass
    quadratic form within each cluster undoes the mixing without leaving
    the eigenspace.
    """
    ctol = 1e-6 * width + 1e-10
    vals = vals.copy()
    vecs = vecs.copy()
    start = 0
    while start < vals.size:
        stop = start + 1
        while stop < vals.size and vals[stop] - vals[stop - 1] < ctol:
            stop += 1
        if stop - start > 1:
            V = vecs[:, start:stop]
            Mb = V[bdof].conj().T @ V[bdof]
            _, R = np.linalg.eigh(Mb)
            vecs[:, start:stop] = V @ R
        start = stop
    return vals, vecs


def edge_spectrum(op, window, max_states=12, wall_window=None,
                  mass_threshold=0.5, boundary_frac=0.05,
                  want_vectors=False):
    """Eigenpairs of the strip fiber near the gap center, classified.

    Shift-invert solve at the window midpoint; returns the max_states
    eigenvalues nearest the midpoint that fall inside the window, each
    tagged edge / bulk / spurious by its transverse mass distribution.
    Spurious states (majority mass in the outer boundary_frac of the strip
    at each end) are artifacts of the hard truncation; they stay in the
    output but are skipped by the curve tracer.
    """
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError("window must satisfy lo < hi")
    H = op.entries
    n = H.shape[0]
    sigma = 0.5 * (lo + hi)
    k_int = min(max(2 * max_states, 8), n - 2)
    try:
        vals, vecs = spla.eigsh(H.tocsc(), k=k_int, sigma=sigma, which="LM")
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceFailure(
            f"strip eigensolve failed at k_par={op.k_par}: {exc}") from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    inside = (vals > lo) & (vals < hi)
    vals, vecs = vals[inside], vecs[:, inside]
    if vals.size > max_states:
        keep = np.argsort(np.abs(vals - sigma))[:max_states]
        keep.sort()
        vals, vecs = vals[keep], vecs[:, keep]

    W, N = op.width_cells, op.N
    x1, _ = strip_coordinates(W, N)
    n1 = x1.size
    half = 0.5 * W
    bnodes = (x1 <= -half + boundary_frac * W) | (x1 >= half - boundary_frac * W)
    bdof = np.repeat(bnodes, N)
    if vals.size:
        vals, vecs = _split_boundary_clusters(vals, vecs, bdof, hi - lo)
    if wall_window is None:
        span = 0.2 * W
        wall_window = min(3.0 / op.medium.delta, span) \
            if op.medium.delta > 0 else span
    states = []
    for j in range(vals.size):
        v = vecs[:, j]
        dens = np.abs(v.reshape(n1, N)) ** 2
        dens = dens.sum(axis=1)
        dens /= dens.sum()
        label, wm, bm = _classify_one(dens, x1, W, op.medium.delta,
                                      wall_window, mass_threshold,
                                      boundary_frac)
        states.append(StripState(float(vals[j]), label, wm, bm,
                                 v.copy() if want_vectors else None))
    return tuple(states)


def bulk_slice_bands(medium, k_par, q_grid, B, N, sign):
    """Bulk band values on the fiber line k = (q, k_par), one row per q."""
    rows = [_dense_bands(medium, np.array([q, k_par]), sign, N, B - 1)
            for q in q_grid]
    return np.array(rows)


def essential_band_intervals(medium, k_par, B=4, N=20, q_points=33):
    """Per-band (min, max) of both signed bulk media over the transverse q.

    The essential spectrum of the strip fiber at k_par is the union of the
    two asymptotic bulk spectra over all transverse quasimomenta; the band
    intervals bound it and the gap between consecutive intervals bounds
    the in-gap window.
    """
    qs = np.linspace(-np.pi, np.pi, q_points)
    stack = np.vstack([bulk_slice_bands(medium, k_par, qs, B, N, s)
                       for s in (+1, -1)])
    return np.column_stack([stack.min(axis=0), stack.max(axis=0)])


def _match_states(prev_states, prev_vecs, cur_states, cur_vecs, threshold):
    """Overlap-maximal pairing between consecutive fibers (edge states only)."""
    from scipy.optimize import linear_sum_assignment
    na, nb = len(prev_states), len(cur_states)
    if na == 0 or nb == 0:
        return []
    O = np.zeros((na, nb))
    for i in range(na):
        for j in range(nb):
            O[i, j] = abs(np.vdot(prev_vecs[i], cur_vecs[j]))
    rows, cols = linear_sum_assignment(-O)
    return [(i, j) for i, j in zip(rows, cols) if O[i, j] > threshold]


def edge_diagram(medium, edge, k_grid, deg=None, W=None, N=20, q_points=33,
                 max_states=12, ess_band_count=4, overlap_threshold=0.5,
                 keep_vectors=False):
    """Edge state diagram over a grid of parallel quasimomenta.

    Per k: essential-band intervals from bulk q-sweeps of both signed
    media, then a classified strip eigensolve in a window of +-5 gap
    widths about the degeneracy energy. Edge-classified states are
    continued across k by eigenvector overlap; the flow is the signed
    count of curve crossings of the degeneracy energy, upward crossings
    counting +1.

    deg may carry a precomputed DegeneracyPoint of the delta = 0 medium;
    otherwise it is located here (the dominant cost for deformed media).
    """
    k_grid = np.atleast_1d(np.asarray(k_grid, float))
    if medium.delta <= 0.0:
        raise NoBandGap("delta = 0 medium opens no gap for a diagram")
    if deg is None:
        med0 = dataclasses.replace(medium, delta=0.0)
        if medium.r == 2:
            deg = find_quadratic_degeneracy(med0, 2, N)
        else:
            deg = locate_dirac_points(med0, N)
    pair = deg.band_indices
    E_star = deg.E_star

    ess = []
    gaps = []
    for k in k_grid:
        iv = essential_band_intervals(medium, k, ess_band_count, N, q_points)
        ess.append(iv)
        gaps.append((float(iv[pair[0], 1]), float(iv[pair[1], 0])))
    g_ref = max(hi - lo for lo, hi in gaps)
    if g_ref <= 1e-10:
        raise NoBandGap("local gap is closed on the whole momentum grid")
    window = (E_star - 5.0 * g_ref, E_star + 5.0 * g_ref)

    per_k = []
    vecs_k = []
    for k in k_grid:
        op = assemble_strip_operator(medium, edge, k, W, N)
        states = edge_spectrum(op, window, max_states, want_vectors=True)
        per_k.append(states)
        vecs_k.append([s.vector for s in states])

    # continue edge-classified states across the grid
    curves_raw = []
    active = {}
    for ki in range(k_grid.size):
        idx = [j for j, s in enumerate(per_k[ki]) if s.label == "edge"]
        if ki == 0 or not active:
            nxt = {}
            for j in idx:
                nxt[j] = [(ki, j)]
            prev_edges = idx
        else:
            pstates = [per_k[ki - 1][j] for j in prev_edges]
            pvecs = [vecs_k[ki - 1][j] for j in prev_edges]
            cstates = [per_k[ki][j] for j in idx]
            cvecs = [vecs_k[ki][j] for j in idx]
            pairs = _match_states(pstates, pvecs, cstates, cvecs,
                                  overlap_threshold)
            nxt = {}
            taken = set()
            for pi, cj in pairs:
                jprev = prev_edges[pi]
                jcur = idx[cj]
                if jprev in active:
                    chain = active.pop(jprev)
                    chain.append((ki, jcur))
                    nxt[jcur] = chain
                    taken.add(jcur)
            curves_raw.extend(active.values())
            for j in idx:
                if j not in taken:
                    nxt[j] = [(ki, j)]
            prev_edges = idx
        active = nxt
    curves_raw.extend(active.values())

    curves = []
    total = 0
    for chain in curves_raw:
        pts = np.array([[k_grid[ki], per_k[ki][j].energy]
                        for ki, j in chain])
        rel = pts[:, 1] - E_star
        flow = 0
        for a, b in zip(rel[:-1], rel[1:]):
            if a < 0.0 <= b:
                flow += 1
            elif a >= 0.0 > b:
                flow -= 1
        curves.append(StripCurve(pts, tuple(chain), flow))
        total += flow

    if not keep_vectors:
        per_k = [tuple(dataclasses.replace(s, vector=None) for s in states)
                 for states in per_k]
    return EdgeDiagram(k_grid, tuple(ess), tuple(gaps),
                       tuple(tuple(s) for s in per_k), tuple(curves),
                       int(total), float(E_star),
                       (float(window[0]), float(window[1])))


def _parallel_momentum_candidates(deg, k_grid):
    if deg.kind == "quadratic":
        base = [float(np.asarray(deg.k_star, float)[1])]
    else:
        ks = np.asarray(deg.k_star, float).reshape(-1, 2)
        base = [float(k[1]) for k in ks]
    center = float(np.mean(k_grid))
    cands = [b + s for b in base for s in (-2 * np.pi, 0.0, 2 * np.pi)]
    return sorted(cands, key=lambda c: abs(c - center))


def compare_with_effective(diagram, effcurves, deg, delta):
    """Residuals of strip edge energies against the effective 1D curves.

    The diagram must sample momenta k = k_star + delta kappa with kappa
    inside the traced effective curves' range; each edge-classified energy
    is compared against the nearest effective branch,
    residual = |E - E_star - delta^r Omega(kappa)|. Reports the pointwise
    residuals, their max, and the max scaled by delta^(r+1), the expected
    leading-order size.
    """
    r = 2 if deg.kind == "quadratic" else 1
    E_star = deg.E_star
    spans = [(c.points[:, 0].min(), c.points[:, 0].max()) for c in effcurves]
    if not spans:
        raise WindowMismatch("no effective curves to compare against")
    kap_lo = min(s[0] for s in spans)
    kap_hi = max(s[1] for s in spans)

    best = None
    for k_star_par in _parallel_momentum_candidates(deg, diagram.k_grid):
        kaps = (diagram.k_grid - k_star_par) / delta
        inside = (kaps >= kap_lo - 1e-9) & (kaps <= kap_hi + 1e-9)
        if inside.sum() and (best is None or inside.sum() > best[2]):
            best = (k_star_par, inside, int(inside.sum()))
    if best is None:
        raise WindowMismatch(
            "diagram momenta do not overlap the effective kappa window "
            f"[{kap_lo:g}, {kap_hi:g}] for any cone")
    k_star_par, inside, _ = best

    kaps_out = []
    energies = []
    residuals = []
    for ki in np.flatnonzero(inside):
        kap = (diagram.k_grid[ki] - k_star_par) / delta
        for s in diagram.states[ki]:
            if s.label != "edge":
                continue
            r_best = np.inf
            for c in effcurves:
                pts = c.points
                if not pts[0, 0] <= kap <= pts[-1, 0]:
                    continue
                om = np.interp(kap, pts[:, 0], pts[:, 1])
                r_best = min(r_best,
                             abs(s.energy - E_star - delta ** r * om))
            if np.isfinite(r_best):
                kaps_out.append(float(kap))
                energies.append(float(s.energy))
                residuals.append(float(r_best))
    if not residuals:
        raise WindowMismatch(
            "no edge states inside the overlapping momentum window")
    mx = max(residuals)
    return {
        "delta": float(delta),
        "r": r,
        "k_star_par": float(k_star_par),
        "kappa": kaps_out,
        "energies": energies,
        "residuals": residuals,
        "max_residual": mx,
        "normalized": mx / delta ** (r + 1),
        "count": len(residuals),
    }


def correspondence_order(report_a, report_b):
    """Empirical order p of the residual from two deltas: res ~ delta^p."""
    ra, rb = report_a["max_residual"], report_b["max_residual"]
    da, db = report_a["delta"], report_b["delta"]
    if min(ra, rb) <= 0.0 or da == db:
        raise ValueError("need two distinct deltas with nonzero residuals")
    return float(np.log(ra / rb) / np.log(da / db))


def edge_diagram_csv_rows(diagram):
    """Rows (k, value, class, curve_id) for tabular export."""
    owner = {}
    for cid, c in enumerate(diagram.curves):
        for ref in c.state_refs:
            owner[ref] = cid
    rows = []
    for ki, k in enumerate(diagram.k_grid):
        for j, s in enumerate(diagram.states[ki]):
            rows.append((float(k), float(s.energy), s.label,
                         owner.get((ki, j), -1)))
    return rows


def write_eigenvector_grid(path, vectors, n1, n2):
    """Dump complex grid fields: int64 header (count, n1, n2), then each
    field as row-major float64 pairs (re, im)."""
    vectors = [np.asarray(v, complex).reshape(n1 * n2) for v in vectors]
    with open(path, "wb") as fh:
        np.array([len(vectors), n1, n2], dtype=np.int64).tofile(fh)
        for v in vectors:
            v.astype(np.complex128).view(np.float64).tofile(fh)

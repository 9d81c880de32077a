import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import eigh

from edgeflow.bulkfb import (DegeneracyPoint, assemble_bloch_operator,
                             find_quadratic_degeneracy)
from edgeflow.edgestrip import (EdgeDiagram, StripState, _auto_width,
                                assemble_strip_operator, bulk_slice_bands,
                                compare_with_effective, correspondence_order,
                                edge_diagram, edge_diagram_csv_rows,
                                edge_spectrum, essential_band_intervals,
                                strip_coordinates, write_eigenvector_grid)
from edgeflow.effedge import EigenvalueCurve
from edgeflow.errors import (NoBandGap, UnsupportedParameters, WallTooWide,
                             WindowMismatch)
from edgeflow.lattice import make_rational_edge
from edgeflow.media import Deformation, DomainWall, MediumSpec

VEDGE = make_rational_edge(0, 1)
CHI_ONE = DomainWall("custom_table",
                     table=(np.array([-1.0, 1.0]), np.array([1.0, 1.0])))
STEEP = DomainWall(steepness=10.0)

# conical pair of the pi/100 tilt at N = 16, pinned elsewhere by the bulk
# degeneracy tests
D_PLUS_16 = np.array([3.67825271, 3.67825271])
E_CONE_16 = 12.178397137752


@pytest.fixture(scope="module")
def und_setup():
    med = MediumSpec(wall=STEEP, delta=0.1, r=2)
    deg = find_quadratic_degeneracy(dataclasses.replace(med, delta=0.0), 2, 12)
    return med, deg


@pytest.fixture(scope="module")
def und_diagram(und_setup):
    med, deg = und_setup
    ks = np.pi + np.linspace(-1.2, 1.2, 13)
    return edge_diagram(med, VEDGE, ks, deg=deg, W=30, N=12)


@pytest.fixture(scope="module")
def dfm_setup():
    med = MediumSpec(deformation=Deformation.tilt(np.pi / 100), wall=STEEP,
                     delta=0.01, r=1)
    deg = DegeneracyPoint("dirac_pair", E_CONE_16,
                          (D_PLUS_16, 2 * np.pi - D_PLUS_16), (1, 2), {})
    return med, deg


class TestAssembly:
    def test_interior_action_matches_bulk_bloch(self):
        # a bulk Bloch eigenvector, rephased onto the strip grid, must be
        # annihilated by (H - E) on every row the truncation cannot reach;
        # this pins the sampling maps, the twist, the metric cross terms
        # and the wall-modulated magnetic stencil all at once
        med = MediumSpec(deformation=Deformation.tilt(np.pi / 100),
                         wall=CHI_ONE, delta=0.1, r=1)
        N, W = 12, 4
        q, k_par = 0.7, 1.3
        op = assemble_bloch_operator(med, (q, k_par), +1, N)
        vals, vecs = eigh(op.entries.toarray())
        E, phi = vals[3], vecs[:, 3].reshape(N, N)
        sop = assemble_strip_operator(med, VEDGE, k_par, W, N)
        x1, _ = strip_coordinates(W, N)
        n1 = x1.size
        i = np.arange(1, W * N)
        j = np.arange(N)
        v = np.exp(1j * q * x1)[:, None] * phi[np.ix_((i + N // 2) % N,
                                                      (j + N // 2) % N)]
        res = (sop.entries @ v.ravel() - E * v.ravel()).reshape(n1, N)
        assert np.abs(res[2:-2]).max() < 1e-9

    def test_hermitian_complex_and_sized(self):
        med = MediumSpec(deformation=Deformation.tilt(np.pi / 100),
                         wall=STEEP, delta=0.1, r=1)
        sop = assemble_strip_operator(med, VEDGE, 0.3, 6, 8)
        H = sop.entries
        assert H.shape == ((6 * 8 - 1) * 8,) * 2
        assert abs(H - H.conj().T).max() < 1e-12

    def test_vertical_edge_only(self):
        med = MediumSpec(wall=STEEP)
        with pytest.raises(UnsupportedParameters):
            assemble_strip_operator(med, make_rational_edge(1, 1), 0.0, 8, 8)

    def test_width_validation(self):
        med = MediumSpec(wall=STEEP)
        with pytest.raises(ValueError):
            assemble_strip_operator(med, VEDGE, 0.0, 7, 8)
        with pytest.raises(ValueError):
            assemble_strip_operator(med, VEDGE, 0.0, 8, 9)

    def test_wall_too_wide(self):
        med = MediumSpec(wall=STEEP, delta=0.001, r=2)
        with pytest.raises(WallTooWide):
            assemble_strip_operator(med, VEDGE, 0.0, 8, 8)

    def test_auto_width(self):
        assert _auto_width(MediumSpec(wall=STEEP, delta=0.1)) == 60
        assert _auto_width(MediumSpec(wall=STEEP, delta=0.004)) == 240

    @settings(max_examples=8, deadline=None)
    @given(st.floats(-np.pi, np.pi))
    def test_hermitian_at_any_momentum(self, k_par):
        med = MediumSpec(wall=STEEP, delta=0.1, r=2)
        H = assemble_strip_operator(med, VEDGE, k_par, 4, 8).entries
        assert abs(H - H.conj().T).max() < 1e-12


class TestWallFreeReduction:
    def test_delta_zero_spectrum_inside_bulk_union(self):
        # with no gap-opening term the strip is a hard truncation of the
        # unperturbed medium: every extended state must sit inside the
        # union over q of the bulk band slices
        med = MediumSpec(delta=0.0)
        N, W, k_par = 12, 60, 1.3
        qs = np.linspace(-np.pi, np.pi, 257)
        bands = bulk_slice_bands(med, k_par, qs, 3, N, 0)
        iv = np.column_stack([bands.min(axis=0), bands.max(axis=0)])
        sop = assemble_strip_operator(med, VEDGE, k_par, W, N)
        window = (iv[0, 0] + 0.05, iv[1, 1] - 0.05)
        states = edge_spectrum(sop, window, max_states=16)
        assert len(states) > 0
        for s in states:
            if s.label == "spurious":
                continue
            ok = any(lo - 1e-3 <= s.energy <= hi + 1e-3 for lo, hi in iv)
            assert ok, f"stray non-spurious eigenvalue {s.energy}"

    def test_chi_plus_one_has_no_edge_states(self, dfm_setup):
        med, deg = dfm_setup
        med1 = dataclasses.replace(med, wall=CHI_ONE)
        sop = assemble_strip_operator(med1, VEDGE, D_PLUS_16[1], 60, 16)
        states = edge_spectrum(sop, (E_CONE_16 - 1.2, E_CONE_16 + 1.2),
                               max_states=12)
        assert all(s.label != "edge" for s in states)


class TestGapStates:
    def test_two_gap_states_at_pi(self, und_setup):
        med, deg = und_setup
        iv = essential_band_intervals(med, np.pi, 4, 12)
        gap = (iv[1, 1], iv[2, 0])
        assert gap[0] < deg.E_star < gap[1]
        sop = assemble_strip_operator(med, VEDGE, np.pi, 30, 12)
        states = edge_spectrum(sop, gap, max_states=12)
        kept = [s for s in states if s.label != "spurious"]
        assert len(kept) == 2
        assert all(s.label == "edge" and s.wall_mass > 0.9 for s in kept)

    def test_single_central_gap_state_at_cone(self, dfm_setup):
        # several wall-bound branches live in the conical gap, but only
        # the chiral one passes through the middle of it
        med, deg = dfm_setup
        iv = essential_band_intervals(med, D_PLUS_16[1], 4, 16)
        half = (iv[2, 0] - iv[1, 1]) / 2.0
        assert half > 1.0
        sop = assemble_strip_operator(med, VEDGE, D_PLUS_16[1], 60, 16)
        states = edge_spectrum(sop, (E_CONE_16 - half / 3, E_CONE_16 + half / 3),
                               max_states=12)
        kept = [s for s in states if s.label == "edge"]
        assert len(kept) == 1
        assert abs(kept[0].energy - E_CONE_16) < 0.2

    def test_classification_stable_under_widening(self, und_setup):
        med, deg = und_setup
        iv = essential_band_intervals(med, np.pi, 4, 12)
        gap = (iv[1, 1], iv[2, 0])
        ref = [s for s in edge_spectrum(
            assemble_strip_operator(med, VEDGE, np.pi, 30, 12), gap)
            if s.label == "edge"]
        wide = [s for s in edge_spectrum(
            assemble_strip_operator(med, VEDGE, np.pi, 44, 12), gap)
            if s.label == "edge"]
        assert len(ref) == len(wide)
        for a, b in zip(ref, wide):
            assert abs(a.energy - b.energy) < 1e-3


class TestDiagrams:
    def test_undeformed_flow_and_curves(self, und_diagram, und_setup):
        _, deg = und_setup
        diag = und_diagram
        assert diag.flow == -2
        crossing = [c for c in diag.curves if c.flow_contribution != 0]
        assert len(crossing) == 2
        assert all(c.flow_contribution == -1 for c in crossing)
        assert diag.E_reference == deg.E_star
        assert all(len(c.points) >= 5 for c in crossing)

    def test_deformed_flow_and_curves(self, dfm_setup):
        med, deg = dfm_setup
        ks = np.linspace(2.45, 3.85, 13)
        diag = edge_diagram(med, VEDGE, ks, deg=deg, W=60, N=16)
        assert diag.flow == -2
        crossing = [c for c in diag.curves if c.flow_contribution != 0]
        assert len(crossing) == 2
        # one crossing near each cone
        where = sorted(
            c.points[np.argmin(np.abs(c.points[:, 1] - deg.E_star)), 0]
            for c in crossing)
        assert abs(where[0] - (2 * np.pi - D_PLUS_16[1])) < 0.35
        assert abs(where[1] - D_PLUS_16[1]) < 0.35

    def test_rejects_gapless_medium(self):
        with pytest.raises(NoBandGap):
            edge_diagram(MediumSpec(delta=0.0), VEDGE, [np.pi], N=8)

    def test_csv_rows_cover_all_states(self, und_diagram):
        diag = und_diagram
        rows = edge_diagram_csv_rows(diag)
        assert len(rows) == sum(len(s) for s in diag.states)
        tagged = sum(1 for r in rows if r[3] >= 0)
        assert tagged == sum(len(c.state_refs) for c in diag.curves)
        assert all(r[2] in ("edge", "bulk", "spurious") for r in rows)

    def test_eigenvector_dump_roundtrip(self, tmp_path):
        rng = np.random.default_rng(3)
        vecs = [rng.standard_normal(12) + 1j * rng.standard_normal(12)
                for _ in range(3)]
        path = tmp_path / "grid.bin"
        write_eigenvector_grid(path, vecs, 4, 3)
        raw = np.fromfile(path, dtype=np.float64)
        head = raw[:3].view(np.int64)
        assert list(head) == [3, 4, 3]
        body = raw[3:].view(np.complex128).reshape(3, 12)
        for a, b in zip(vecs, body):
            assert np.abs(a - b).max() == 0.0


def _fake_diagram(k_values, energies):
    states = tuple(tuple(StripState(e, "edge", 0.9, 0.0) for e in row)
                   for row in energies)
    k = np.asarray(k_values, float)
    return EdgeDiagram(k, (), (), states, (), 0, 0.0, (0.0, 0.0))


class TestCompare:
    def test_residual_arithmetic(self):
        deg = DegeneracyPoint("quadratic", 10.0, np.array([np.pi, 2.0]),
                              (1, 2), {})
        curve = EigenvalueCurve(np.array([[-1.0, 0.0], [1.0, 2.0]]), 0)
        delta = 0.05
        diag = _fake_diagram([2.0 + delta * 0.5],
                             [[10.0 + delta ** 2 * 1.5 + 1e-5]])
        rep = compare_with_effective(diag, [curve], deg, delta)
        assert rep["r"] == 2
        assert rep["count"] == 1
        assert abs(rep["max_residual"] - 1e-5) < 1e-12
        assert abs(rep["normalized"] - 1e-5 / delta ** 3) < 1e-6

    def test_folded_cone_candidate(self):
        # a diagram sampled below the first cone image must snap to the
        # 2 pi shifted copy
        dp = np.array([3.7, 3.7])
        deg = DegeneracyPoint("dirac_pair", 5.0, (dp, 2 * np.pi - dp),
                              (1, 2), {})
        curve = EigenvalueCurve(np.array([[-2.0, -1.0], [2.0, 1.0]]), 0)
        delta = 0.01
        k = 3.7 - 2 * np.pi + delta * 1.0
        diag = _fake_diagram([k], [[5.0 + delta * 0.5]])
        rep = compare_with_effective(diag, [curve], deg, delta)
        assert abs(rep["k_star_par"] - (3.7 - 2 * np.pi)) < 1e-12
        assert abs(rep["kappa"][0] - 1.0) < 1e-9

    def test_window_mismatch(self):
        deg = DegeneracyPoint("quadratic", 10.0, np.array([np.pi, 2.0]),
                              (1, 2), {})
        curve = EigenvalueCurve(np.array([[-1.0, 0.0], [1.0, 2.0]]), 0)
        diag = _fake_diagram([2.0 + 0.5], [[10.0]])
        with pytest.raises(WindowMismatch):
            compare_with_effective(diag, [curve], deg, 0.05)

    def test_order_fit(self):
        rep_a = {"max_residual": 8.0, "delta": 0.2}
        rep_b = {"max_residual": 1.0, "delta": 0.1}
        assert abs(correspondence_order(rep_a, rep_b) - 3.0) < 1e-12

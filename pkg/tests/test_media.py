import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgeflow.errors import (
    GridNotSymmetric,
    SingularDeformation,
    WidthTooLarge,
)
from edgeflow.media import (
    Deformation,
    DomainWall,
    MagneticSpec,
    MediumSpec,
    PotentialSpec,
    eval_domain_wall,
    is_odd_wall,
    is_sign_changing,
    pullback_coefficients,
    sample_magnetic,
    sample_potential,
    validate_square_symmetry,
    wall_limits,
)

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])


def test_zero_amplitude_bump_is_zero():
    V = sample_potential(PotentialSpec(amplitude=0.0, width=0.25), 12)
    assert np.all(V == 0.0)


def test_bump_minimum_at_cell_center():
    V = sample_potential(PotentialSpec(amplitude=-150.0, width=0.25), 20)
    i0 = 10  # x = 0 on the grid -1/2 + i/20
    assert V[i0, i0] == pytest.approx(-150.0, abs=1e-12)
    assert V.min() == V[i0, i0]


def test_bump_support_is_compact():
    V = sample_potential(PotentialSpec(amplitude=-150.0, width=0.25), 40)
    x = -0.5 + np.arange(40) / 40.0
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    outside = np.hypot(X1, X2) >= 0.25 + 1e-12
    assert np.all(V[outside] == 0.0)


def test_wide_bump_rejected():
    with pytest.raises(WidthTooLarge):
        PotentialSpec(amplitude=-1.0, width=0.6)


def test_single_fourier_mode():
    spec = PotentialSpec(kind="fourier_series", coefficients=(((1, 0), 1.0),))
    V = sample_potential(spec, 16)
    x = -0.5 + np.arange(16) / 16.0
    assert np.allclose(V, np.cos(2 * np.pi * x)[:, None], atol=1e-14)
    assert V.max() == pytest.approx(1.0)


def test_default_magnetic_profile_value():
    # 5 (cos 2pi x1 + cos 2pi x2 + cos 2pi (x1+x2) + cos 2pi (x1-x2)) at 0
    A = sample_magnetic(MagneticSpec(), 20)
    assert A[10, 10] == pytest.approx(20.0, abs=1e-12)
    assert np.all(np.abs(A.imag) == 0) if np.iscomplexobj(A) else True


def test_bump_has_square_symmetry():
    V = sample_potential(PotentialSpec(), 20)
    rep = validate_square_symmetry(V)
    assert rep.passes
    assert max(rep.inversion, rep.rotation, rep.reflection) < 1e-10


def test_magnetic_series_has_square_symmetry():
    A = sample_magnetic(MagneticSpec(), 16)
    assert validate_square_symmetry(A).passes


def test_single_cosine_breaks_rotation():
    spec = PotentialSpec(kind="fourier_series", coefficients=(((1, 0), 1.0),))
    rep = validate_square_symmetry(sample_potential(spec, 16))
    assert rep.rotation > 1e-10
    assert not rep.passes


def test_odd_grid_rejected():
    with pytest.raises(GridNotSymmetric):
        validate_square_symmetry(np.zeros((9, 9)))


@given(st.integers(min_value=2, max_value=14))
@settings(max_examples=10, deadline=None)
def test_bump_symmetric_for_every_even_grid(half):
    V = sample_potential(PotentialSpec(), 2 * half)
    assert validate_square_symmetry(V).passes


def test_wall_values():
    assert eval_domain_wall(DomainWall("tanh_scaled", steepness=10.0), 0.0) == 0.0
    assert eval_domain_wall(DomainWall("sign"), -3.0) == -1.0
    assert eval_domain_wall(DomainWall("sign"), 0.0) == 0.0
    w = DomainWall("multi_even", L=20.0)
    expect = np.tanh(-20.0) + 1.0 - np.tanh(20.0)
    assert eval_domain_wall(w, 0.0) == pytest.approx(expect, abs=1e-16)
    assert expect == pytest.approx(-1.0, abs=1e-15)


def test_multi_odd_matches_piecewise_form():
    w = DomainWall("multi_odd", L=20.0)
    X = np.linspace(-60, 60, 301)
    direct = np.tanh(X - 20.0) - (1.0 + np.tanh(X)) + (1.0 + np.tanh(X + 20.0))
    assert np.allclose(eval_domain_wall(w, X), direct, atol=1e-15)


def test_wall_limit_signs():
    assert wall_limits(DomainWall("tanh_scaled", steepness=10.0)) == (-1.0, 1.0)
    lo, hi = wall_limits(DomainWall("multi_even", L=20.0))
    assert lo * hi > 0
    lo, hi = wall_limits(DomainWall("multi_odd", L=20.0))
    assert lo * hi < 0
    assert is_sign_changing(DomainWall("multi_odd", L=20.0))
    assert not is_sign_changing(DomainWall("multi_even", L=20.0))


def test_tanh_limits_reached_quickly():
    w = DomainWall("tanh_scaled", steepness=10.0)
    X = 50.0 / 10.0
    assert abs(eval_domain_wall(w, X) - 1.0) < 1e-8
    assert abs(eval_domain_wall(w, -X) + 1.0) < 1e-8


def test_shifted_bump_sum_walls():
    # tanh ramp plus one large centered bump
    w = DomainWall("shifted_bump_sum", steepness=1.0, bumps=((50.0, 0.0),))
    assert eval_domain_wall(w, 0.0) == pytest.approx(50.0)
    assert eval_domain_wall(w, 40.0) == pytest.approx(1.0, abs=1e-8)
    assert is_sign_changing(w)
    # 1 - exp(-X^2): equal limits, not sign changing
    trivial = DomainWall("shifted_bump_sum", steepness=0.0, offset=1.0,
                         bumps=((-1.0, 0.0),))
    assert eval_domain_wall(trivial, 0.0) == 0.0
    X = np.linspace(-5, 5, 41)
    assert np.allclose(eval_domain_wall(trivial, X), 1.0 - np.exp(-X ** 2))
    assert not is_sign_changing(trivial)


def test_odd_wall_detection():
    assert is_odd_wall(DomainWall("tanh_scaled", steepness=3.0))
    assert is_odd_wall(DomainWall("sign"))
    assert is_odd_wall(DomainWall("multi_odd", L=5.0))
    assert not is_odd_wall(DomainWall("multi_even", L=5.0))
    assert not is_odd_wall(
        DomainWall("shifted_bump_sum", steepness=1.0, bumps=((50.0, 0.0),)))


def test_custom_table_wall():
    xs = np.linspace(-30, 30, 601)
    w = DomainWall("custom_table", table=(xs, np.tanh(xs)))
    assert eval_domain_wall(w, 0.0) == pytest.approx(0.0, abs=1e-14)
    assert eval_domain_wall(w, 100.0) == pytest.approx(np.tanh(30.0))
    with pytest.raises(ValueError):
        DomainWall("custom_table")
    with pytest.raises(ValueError):
        DomainWall("custom_table", table=([0.0, 0.0], [1.0, 1.0]))


def test_identity_pullback():
    metric, detTinv = pullback_coefficients(Deformation.identity())
    assert np.allclose(metric, np.eye(2))
    assert detTinv == pytest.approx(1.0)


def test_tilt_pullback_closed_form():
    phi = np.pi / 100
    d = Deformation.tilt(phi)
    sec2 = 1.0 / np.cos(2 * phi)
    expected = sec2 ** 2 * np.eye(2) + sec2 * np.tan(2 * phi) * SIGMA1
    metric, detTinv = pullback_coefficients(d)
    assert np.allclose(metric, expected, atol=1e-14)
    assert detTinv == pytest.approx(sec2, abs=1e-14)


def test_volumetric_pullback():
    metric, detTinv = pullback_coefficients(Deformation.from_matrix(2.0 * np.eye(2)))
    assert np.allclose(metric, np.eye(2) / 4.0)
    assert detTinv == pytest.approx(0.25)


def test_singular_deformation_rejected():
    with pytest.raises(SingularDeformation):
        Deformation.from_matrix([[1.0, 1.0], [1.0, 1.0]])


@given(st.floats(min_value=-np.pi / 8 + 1e-3, max_value=np.pi / 8 - 1e-3))
@settings(max_examples=25, deadline=None)
def test_tilt_metric_inverts_gram(phi):
    d = Deformation.tilt(phi)
    assert np.allclose(d.metric @ (d.T.T @ d.T), np.eye(2), atol=1e-12)


def test_medium_scaling_consistency():
    MediumSpec(r=2)  # identity deformation, fine
    with pytest.raises(ValueError):
        MediumSpec(r=1)
    tilted = Deformation.tilt(np.pi / 100)
    MediumSpec(deformation=tilted, r=1)
    with pytest.raises(ValueError):
        MediumSpec(deformation=tilted, r=2)
    with pytest.raises(ValueError):
        MediumSpec(delta=-0.1)

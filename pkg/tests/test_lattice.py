import numpy as np
import pytest
from hypothesis import given, strategies as st
from math import gcd

from edgeflow.errors import NotCoprime
from edgeflow.lattice import (
    Lattice2D,
    make_rational_edge,
    momentum_slice,
    reparameterize_edge,
    square_lattice,
)


def test_square_lattice_duality():
    lat = square_lattice()
    V = np.column_stack([lat.v1, lat.v2])
    K = np.column_stack([lat.k1, lat.k2])
    assert np.allclose(K.T @ V, np.eye(2), atol=1e-15)


def test_from_basis_builds_dual():
    lat = Lattice2D.from_basis([1.0, 0.2], [-0.1, 1.3])
    V = np.column_stack([lat.v1, lat.v2])
    K = np.column_stack([lat.k1, lat.k2])
    assert np.allclose(K.T @ V, np.eye(2), atol=1e-12)


def test_degenerate_basis_rejected():
    with pytest.raises(ValueError):
        Lattice2D.from_basis([1.0, 2.0], [2.0, 4.0])


def test_vertical_edge_canonical():
    e = make_rational_edge(0, 1)
    assert (e.m2, e.n2) == (-1, 0)
    assert np.array_equal(e.fv1, [0.0, 1.0])
    assert np.array_equal(e.fv2, [-1.0, 0.0])
    assert np.array_equal(e.fK1, [0.0, 1.0])
    assert np.array_equal(e.fK2, [-1.0, 0.0])


def test_horizontal_edge_canonical():
    e = make_rational_edge(1, 0)
    assert (e.m2, e.n2) == (0, 1)
    assert np.array_equal(e.fv2, [0.0, 1.0])


def test_2_1_edge_canonical():
    e = make_rational_edge(2, 1)
    assert (e.m2, e.n2) == (1, 1)
    assert e.m1 * e.n2 - e.m2 * e.n1 == 1


def test_not_coprime_rejected():
    with pytest.raises(NotCoprime):
        make_rational_edge(2, 4)
    with pytest.raises(NotCoprime):
        make_rational_edge(0, 0)


def test_reparameterize_examples():
    e = make_rational_edge(0, 1)
    assert (reparameterize_edge(e, 0).m2, reparameterize_edge(e, 0).n2) == (-1, 0)
    r = reparameterize_edge(e, 1)
    assert (r.m2, r.n2) == (-1, 1)
    e21 = make_rational_edge(2, 1)
    r21 = reparameterize_edge(e21, -1)
    assert (r21.m2, r21.n2) == (-1, 0)
    assert r21.m1 * r21.n2 - r21.m2 * r21.n1 == 1


def test_reparameterize_shifts_fK1_only():
    e = make_rational_edge(2, 1)
    for j in (-3, -1, 1, 4):
        r = reparameterize_edge(e, j)
        assert np.allclose(r.fK1, e.fK1 - j * e.fK2)
        assert np.array_equal(r.fK2, e.fK2)
        assert np.array_equal(r.fv1, e.fv1)


coprime_pairs = st.tuples(
    st.integers(min_value=-30, max_value=30),
    st.integers(min_value=-30, max_value=30),
).filter(lambda p: p != (0, 0) and gcd(abs(p[0]), abs(p[1])) == 1)


@given(coprime_pairs)
def test_bezout_identity_exact(pair):
    e = make_rational_edge(*pair)
    assert e.m1 * e.n2 - e.m2 * e.n1 == 1
    # change of basis from {v1, v2} to {fv1, fv2} is unimodular
    B = np.array([[e.m1, e.m2], [e.n1, e.n2]])
    assert round(np.linalg.det(B)) == 1


@given(coprime_pairs)
def test_duality_and_orthogonality(pair):
    e = make_rational_edge(*pair)
    G = np.array([[e.fK1 @ e.fv1, e.fK1 @ e.fv2],
                  [e.fK2 @ e.fv1, e.fK2 @ e.fv2]])
    assert np.allclose(G, np.eye(2), atol=1e-12)
    assert abs(e.fK2 @ e.fv1) == 0.0


@given(coprime_pairs)
def test_companion_minimizes_m2(pair):
    e = make_rational_edge(*pair)
    for j in (-1, 1):
        assert abs(e.m2 + j * e.m1) >= abs(e.m2)


@given(coprime_pairs, st.integers(min_value=-5, max_value=5))
def test_reparameterize_round_trip(pair, j):
    e = make_rational_edge(*pair)
    r = reparameterize_edge(reparameterize_edge(e, j), -j)
    assert (r.m1, r.n1, r.m2, r.n2) == (e.m1, e.n1, e.m2, e.n2)
    assert np.allclose(r.fK1, e.fK1)


def test_momentum_slice_stays_on_line():
    e = make_rational_edge(2, 1)
    sl = momentum_slice(e, 0.7, num_q=31)
    for k, q in zip(sl.samples, sl.qs):
        resid = k - sl.k_par * e.fK1 - q * e.fK2
        assert np.linalg.norm(resid) < 1e-12
        # transverse part is parallel to fK2
        d = k - sl.k_par * e.fK1
        assert abs(d[0] * e.fK2[1] - d[1] * e.fK2[0]) < 1e-12


def test_parallel_momentum_wraps():
    e = make_rational_edge(0, 1)
    assert abs(e.parallel_momentum([0.3, 2.0]) - 2.0) < 1e-15
    wrapped = e.parallel_momentum([0.0, 2 * np.pi + 0.25])
    assert abs(wrapped - 0.25) < 1e-12

"""Finite-difference building blocks for the 1D edge solvers.

Grids on [-L, L] use M subintervals of width h = 2L/M and carry the M-1
interior nodes with Dirichlet ends; X = 0 is a grid node whenever M is even,
which the sign-wall convention (chi(0) = 0 at the on-wall node) relies on.
"""

import numpy as np
import scipy.sparse as sp


def grid_1d(domain, M):
    """Interior nodes and spacing of the Dirichlet grid with M subintervals."""
    lo, hi = float(domain[0]), float(domain[1])
    if not hi > lo:
        raise ValueError("empty domain")
    h = (hi - lo) / M
    X = lo + h * np.arange(1, M)
    return X, h


def minus_d2_5pt(n, h):
    """-d^2/dX^2, fourth-order five-point stencil, Dirichlet truncation."""
    main = np.full(n, 30.0)
    off1 = np.full(n - 1, -16.0)
    off2 = np.full(n - 2, 1.0)
    A = sp.diags([off2, off1, main, off1, off2], [-2, -1, 0, 1, 2], format="csr")
    return A / (12.0 * h * h)


def d1_centered(n, h):
    """d/dX, second-order centered stencil (antisymmetric)."""
    off = np.full(n - 1, 0.5 / h)
    return sp.diags([-off, off], [-1, 1], format="csr")


def slac_derivative(n, h):
    """Dense nonlocal derivative with exactly linear grid symbol.

    Entries D_jk = (-1)^(j-k) / (h (j-k)), zero diagonal. Antisymmetric, odd
    under grid reflection, and free of the short-wavelength doubler that any
    local antisymmetric stencil has; -i D has symbol theta/h across the whole
    grid Brillouin zone, which keeps first-order spectra clean.
    """
    idx = np.arange(n)
    diff = idx[:, None] - idx[None, :]
    with np.errstate(divide="ignore"):
        D = np.where(diff == 0, 0.0, ((-1.0) ** diff) / (h * diff))
    return D

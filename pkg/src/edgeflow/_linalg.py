"""Small shared linear-algebra helpers: Pauli matrices and deflated solves."""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

SIGMA0 = np.eye(2)
SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]])
SIGMA2 = np.array([[0.0, -1.0j], [1.0j, 0.0]])
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]])
PAULI = (SIGMA0, SIGMA1, SIGMA2, SIGMA3)


def bordered_solve(A, vectors, rhs):
    """Solve A x = rhs restricted to the orthogonal complement of `vectors`.

    Uses the bordered system [[A, V], [V^H, 0]] [x; mu] = [rhs; 0], which is
    nonsingular when A is singular only across span(V). Returns x with
    V^H x = 0. A may be dense or sparse; `vectors` is a list of 1D arrays.
    """
    V = np.column_stack([np.asarray(v, complex) for v in vectors])
    n, m = V.shape
    f = np.concatenate([np.asarray(rhs, complex), np.zeros(m)])
    if sp.issparse(A):
        B = sp.bmat([[A.astype(complex), sp.csc_matrix(V)],
                     [sp.csc_matrix(V.conj().T), None]], format="csc")
        sol = spla.splu(B).solve(f)
    else:
        B = np.zeros((n + m, n + m), complex)
        B[:n, :n] = A
        B[:n, n:] = V
        B[n:, :n] = V.conj().T
        sol = sla.solve(B, f)
    return sol[:n]

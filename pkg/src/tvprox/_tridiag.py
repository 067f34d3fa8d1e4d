"""Symmetric tridiagonal Cholesky factorization and solves.

A matrix is given by its diagonal ``a`` (length m) and off-diagonal ``b``
(length m - 1).  The factor ``R`` is upper bidiagonal with diagonal ``d`` and
superdiagonal ``e`` so that ``R^T R`` equals the input matrix.
"""
import numba as nb
import numpy as np


@nb.njit(cache=True, nogil=True)
def tridiag_cholesky(a, b):
    m = a.size
    d = np.empty(m)
    e = np.empty(max(m - 1, 0))
    piv = a[0]
    if not piv > 0.0:
        raise ValueError("matrix is not positive definite")
    d[0] = np.sqrt(piv)
    for i in range(m - 1):
        e[i] = b[i] / d[i]
        piv = a[i + 1] - e[i] * e[i]
        if not piv > 0.0:
            raise ValueError("matrix is not positive definite")
        d[i + 1] = np.sqrt(piv)
    return d, e


@nb.njit(cache=True, nogil=True)
def solve_lower(d, e, rhs):
    """Solve ``R^T v = rhs``."""
    m = d.size
    v = np.empty(m)
    v[0] = rhs[0] / d[0]
    for i in range(1, m):
        v[i] = (rhs[i] - e[i - 1] * v[i - 1]) / d[i]
    return v


@nb.njit(cache=True, nogil=True)
def solve_upper(d, e, v):
    """Solve ``R z = v``."""
    m = d.size
    z = np.empty(m)
    z[m - 1] = v[m - 1] / d[m - 1]
    for i in range(m - 2, -1, -1):
        z[i] = (v[i] - e[i] * z[i + 1]) / d[i]
    return z


@nb.njit(cache=True, nogil=True)
def tridiag_solve(a, b, rhs):
    d, e = tridiag_cholesky(a, b)
    return solve_upper(d, e, solve_lower(d, e, rhs))


@nb.njit(cache=True, nogil=True)
def ddt_shifted_solve(m, alpha, rhs):
    """Solve ``(D D^T + alpha I) u = rhs`` for the ``m x m`` second-difference matrix.

    Returns ``(u, q)`` where ``q`` solves ``R^T q = u`` for the Cholesky factor.
    """
    a = np.full(m, 2.0 + alpha)
    b = np.full(max(m - 1, 0), -1.0)
    d, e = tridiag_cholesky(a, b)
    u = solve_upper(d, e, solve_lower(d, e, rhs))
    q = solve_lower(d, e, u)
    return u, q


@nb.njit(cache=True, nogil=True)
def ddt_apply(u):
    """``D D^T u`` for an edge vector ``u``."""
    m = u.size
    out = np.empty(m)
    for i in range(m):
        s = 2.0 * u[i]
        if i > 0:
            s -= u[i - 1]
        if i < m - 1:
            s -= u[i + 1]
        out[i] = s
    return out


def ddt_solve(rhs):
    """Solve ``D D^T u = rhs``."""
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    if rhs.size == 0:
        return rhs.copy()
    return ddt_shifted_solve(rhs.size, 0.0, rhs)[0]

"""TV-L2 proximity: ``min_x 0.5 ||x - y||^2 + lam * ||D x||_2``.

The dual ``min_u 0.5 ||D^T u||^2 - u^T D y`` s.t. ``||u||_2 <= lam`` is a
trust-region subproblem.  Three solvers are provided:

* ``msn`` - Newton on the secular equation ``1/lam - 1/||u_a|| = 0`` with
  ``u_a = (D D^T + a I)^{-1} D y`` (Moré-Sorensen style),
* ``gp`` - projected gradient with the fixed stepsize 1/4,
* ``hybrid`` - GP for small ``lam`` with a 50 iteration budget, MSN otherwise.
"""
from __future__ import annotations

import numba as nb
import numpy as np

from ._tridiag import ddt_apply, ddt_shifted_solve
from .core import (
    SolverOptions,
    SolverReport,
    Timer,
    as_signal,
    diff_apply,
    diff_transpose_apply,
    dual_gap_ball,
    in_dual_ball,
    tv_objective,
)

__all__ = [
    "project_l2_ball",
    "prox_tv1d_l2_msn",
    "prox_tv1d_l2_gp",
    "prox_tv1d_l2_hybrid",
    "HYBRID_GP_BUDGET",
]

HYBRID_GP_BUDGET = 50
_EPS = float(np.finfo(np.float64).eps)


def project_l2_ball(v, lam):
    """Radial projection onto ``{u : ||u||_2 <= lam}``."""
    v = np.asarray(v, dtype=np.float64)
    nrm = float(np.linalg.norm(v))
    if nrm <= lam:
        return v.copy()
    return v * (lam / nrm)


def _check_lam(lam):
    lam = float(lam)
    if not (lam >= 0 and np.isfinite(lam)):
        raise ValueError("lam must be finite and nonnegative")
    return lam


def _finish(report, x, y, lam, u, t, gap, tol):
    report.duality_gap = gap
    report.converged = bool(report.converged and gap <= tol)
    report.objective = tv_objective(x, y, lam, 2.0)
    report.wall_time = t.elapsed
    report.extra.setdefault("dual", u)
    return x, report


def _trivial(y, solver):
    return y.copy(), SolverReport(solver=solver, objective=0.0)


def prox_tv1d_l2_msn(y, lam, opts=None):
    """TV-L2 prox by Newton iterations on the trust-region multiplier.

    Parameters
    ----------
    y : array_like
    lam : float
    opts : SolverOptions, optional
        Uses ``gap_tol``, ``boundary_tol`` and ``max_iter``.

    Returns
    -------
    x : ndarray
    report : SolverReport
        ``extra`` holds the final multiplier ``alpha``, the iterates
        ``alphas`` with matching secular values ``h = 1/||u_a|| - 1/lam``
        (increasing in ``a``, root at the solution), and an operation count
        ``ops``.
    """
    opts = opts or SolverOptions()
    y = as_signal(y)
    lam = _check_lam(lam)
    n = y.size
    if n == 1 or lam == 0:
        return _trivial(y, "msn")
    report = SolverReport(solver="msn")
    dy = diff_apply(y)
    m = n - 1
    hist_alpha = []
    hist_h = []
    ops = 0
    with Timer() as t:
        alpha = 0.0
        u, q = ddt_shifted_solve(m, 0.0, dy)
        ops += 4 * m
        nu = float(np.linalg.norm(u))
        it = 0
        interior = in_dual_ball(nu, lam, n)
        if interior:
            # constant-mean answer; its differences vanish, so the gap is 0
            gap = 0.0
            report.extra["interior"] = True
        else:
            report.extra["interior"] = False
            while True:
                hist_alpha.append(alpha)
                hist_h.append(1.0 / nu - 1.0 / lam)
                uf = u if nu <= lam else u * (lam / nu)
                gap = dual_gap_ball(uf, y, lam, 2.0)
                near = abs(nu - lam) <= opts.boundary_tol * lam
                if (near and gap <= opts.gap_tol) or it >= opts.max_iter:
                    u = uf
                    break
                nq2 = float(np.dot(q, q))
                alpha = max(alpha + (nu * nu / nq2) * (nu / lam - 1.0), 0.0)
                u, q = ddt_shifted_solve(m, alpha, dy)
                nu = float(np.linalg.norm(u))
                ops += 6 * m
                it += 1
            report.converged = it < opts.max_iter or gap <= opts.gap_tol
        x = np.full(n, y.mean()) if interior else y - diff_transpose_apply(u, n)
    report.iterations = it
    report.extra.update(alpha=alpha, alphas=hist_alpha, h=hist_h, ops=ops)
    return _finish(report, x, y, lam, u, t, gap, opts.gap_tol)


def _gp_loop(y, lam, u, max_iter, tol):
    n = y.size
    dy = diff_apply(y)
    it = 0
    gap = dual_gap_ball(u, y, lam, 2.0)
    while gap > tol and it < max_iter:
        u = project_l2_ball(u - 0.25 * (ddt_apply(u) - dy), lam)
        gap = dual_gap_ball(u, y, lam, 2.0)
        it += 1
    return u, gap, it


def prox_tv1d_l2_gp(y, lam, opts=None):
    """TV-L2 prox by projected gradient on the dual, stepsize 1/4, from ``u = 0``.

    Slow when ``lam`` is large relative to the signal; the report is then
    flagged as not converged once ``opts.max_iter`` is reached.
    """
    opts = opts or SolverOptions()
    y = as_signal(y)
    lam = _check_lam(lam)
    n = y.size
    if n == 1 or lam == 0:
        return _trivial(y, "gp")
    report = SolverReport(solver="gp")
    with Timer() as t:
        u, gap, it = _gp_loop(y, lam, np.zeros(n - 1), opts.max_iter, opts.gap_tol)
        x = y - diff_transpose_apply(u, n)
    report.iterations = it
    return _finish(report, x, y, lam, u, t, gap, opts.gap_tol)


def prox_tv1d_l2_hybrid(y, lam, opts=None):
    """Use GP when ``lam < ||y||_2`` (at most 50 iterations), else MSN.

    If the GP attempt fails to reach ``gap_tol`` the problem is re-solved with
    MSN.  ``report.solver`` is ``"gp"``, ``"msn"`` or ``"gp+msn"``.  When the
    unconstrained dual solution already lies in the ball the answer is the
    constant mean, which MSN returns exactly, so GP is skipped.
    """
    opts = opts or SolverOptions()
    y = as_signal(y)
    lam = _check_lam(lam)
    if y.size == 1 or lam == 0:
        return _trivial(y, "hybrid")
    u0, _ = ddt_shifted_solve(y.size - 1, 0.0, diff_apply(y))
    if lam < float(np.linalg.norm(y)) and not in_dual_ball(float(np.linalg.norm(u0)), lam, y.size):
        gp_opts = SolverOptions(gap_tol=opts.gap_tol, max_iter=HYBRID_GP_BUDGET)
        x, rep = prox_tv1d_l2_gp(y, lam, gp_opts)
        if rep.converged:
            return x, rep
        x, rep2 = prox_tv1d_l2_msn(y, lam, opts)
        rep2.solver = "gp+msn"
        rep2.iterations += rep.iterations
        rep2.wall_time += rep.wall_time
        return x, rep2
    return prox_tv1d_l2_msn(y, lam, opts)


# ---------------------------------------------------------------------------
# compiled hybrid for the fiber sweeps of the multidimensional solvers


@nb.njit(cache=True, nogil=True)
def _ball_gap(y, u, lam, x):
    # fills x = y - D^T u and returns lam ||D x||_2 - u . D x
    n = y.size
    for i in range(n):
        s = y[i]
        if i < n - 1:
            s += u[i]
        if i > 0:
            s -= u[i - 1]
        x[i] = s
    nz = 0.0
    uz = 0.0
    for i in range(n - 1):
        z = x[i + 1] - x[i]
        nz += z * z
        uz += u[i] * z
    return lam * np.sqrt(nz) - uz


@nb.njit(cache=True, nogil=True)
def l2_hybrid_kernel(y, lam, x, gap_tol, boundary_tol, max_iter):
    """Same steps as :func:`prox_tv1d_l2_hybrid`; writes ``x``, returns the gap.

    The caller compares the returned gap with ``gap_tol`` to decide convergence.
    """
    n = y.size
    if n == 1 or lam == 0.0:
        x[:] = y
        return 0.0
    m = n - 1
    dy = np.empty(m)
    for i in range(m):
        dy[i] = y[i + 1] - y[i]
    u0, q0 = ddt_shifted_solve(m, 0.0, dy)
    nu0 = np.sqrt(np.dot(u0, u0))
    # same slack as core.in_dual_ball
    if nu0 <= lam * (1.0 + 4.0 * n * _EPS):
        x[:] = np.mean(y)
        return 0.0
    if lam < np.sqrt(np.dot(y, y)):
        u = np.zeros(m)
        gap = _ball_gap(y, u, lam, x)
        it = 0
        while gap > gap_tol and it < HYBRID_GP_BUDGET:
            g = ddt_apply(u)
            for i in range(m):
                u[i] -= 0.25 * (g[i] - dy[i])
            nu = np.sqrt(np.dot(u, u))
            if nu > lam:
                u *= lam / nu
            gap = _ball_gap(y, u, lam, x)
            it += 1
        if gap <= gap_tol:
            return gap
    alpha = 0.0
    u, q, nu = u0, q0, nu0
    it = 0
    while True:
        uf = u if nu <= lam else u * (lam / nu)
        gap = _ball_gap(y, uf, lam, x)
        near = abs(nu - lam) <= boundary_tol * lam
        if (near and gap <= gap_tol) or it >= max_iter:
            return gap
        alpha = max(alpha + (nu * nu / np.dot(q, q)) * (nu / lam - 1.0), 0.0)
        u, q = ddt_shifted_solve(m, alpha, dy)
        nu = np.sqrt(np.dot(u, u))
        it += 1

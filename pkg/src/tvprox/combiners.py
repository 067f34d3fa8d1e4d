"""Prox of a sum of regularizers built from the individual prox operators.

A *prox operator* here is any callable ``op(v, step=1.0)`` returning

    argmin_x 0.5 ||x - v||^2 + step * r(x)

for some convex ``r``.  An operator may also carry a ``value`` attribute,
a callable returning ``r(x)``; :func:`combine_dr` uses it to certify its
answer with a duality gap.  Four combiners are provided:

* :func:`combine_pd` - proximal Dykstra for two terms,
* :func:`combine_ppd` - parallel proximal Dykstra for ``m`` terms,
* :func:`combine_dr` - Douglas-Rachford on alternating reflections, two
  positively homogeneous terms (TV, l1), no tuning parameter,
* :func:`combine_admm` - consensus ADMM for ``m`` terms.

All of them stop when the infinity-norm change of the primal iterate drops
below ``opts.stop_tol`` or ``opts.max_iter`` is reached.  Because TV prox
maps are piecewise linear, the primal iterate can stand still for a few
iterations while the method is still far from the fixed point, so each
test also requires a companion quantity to settle: the spread between the
individual prox outputs and ``x`` (PD, PPD, ADMM), or the changes of the
projected point and of the drift of the auxiliary point (DR).  ``combine_ppd`` and
``combine_admm`` evaluate their ``m`` prox calls on a thread pool of
``opts.workers`` threads and reduce the results in a fixed order, so the
output does not depend on the number of workers.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np

from .core import SolverOptions, SolverReport, Timer, as_signal

__all__ = [
    "zero_prox",
    "l1_prox",
    "tv1d_prox",
    "combine_pd",
    "combine_ppd",
    "combine_dr",
    "combine_admm",
    "combine",
    "COMBINERS",
]


def zero_prox(v, step=1.0):
    """Prox of the zero regularizer (the identity)."""
    return np.array(v, dtype=np.float64, copy=True)


zero_prox.value = lambda x: 0.0


def l1_prox(lam):
    """Soft-thresholding, the prox of ``lam * ||x||_1``."""
    lam = float(lam)
    if lam < 0:
        raise ValueError("lam must be nonnegative")

    def op(v, step=1.0):
        v = np.asarray(v, dtype=np.float64)
        t = lam * step
        return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)

    op.value = lambda x: lam * float(np.sum(np.abs(x)))
    return op


def tv1d_prox(lam, p=1.0, opts=None):
    """Prox operator of ``lam * ||D x||_p`` on a 1D signal."""
    from .core import tv_penalty
    from .tvnd import FIBER_OPTIONS, prox_tv1d

    lam = float(lam)

    def op(v, step=1.0):
        return prox_tv1d(v, lam * step, p, opts)

    op.value = lambda x: tv_penalty(np.asarray(x, dtype=np.float64), lam, p)
    op.gap_floor = 0.0 if float(p) == 1 else (opts or FIBER_OPTIONS).gap_tol
    return op


@contextmanager
def _pool(workers, tasks):
    if workers > 1 and tasks > 1:
        with ThreadPoolExecutor(max_workers=min(workers, tasks)) as ex:
            yield ex
    else:
        yield None


def _map(ex, fn, items):
    # executor.map keeps input order, which fixes the reduction order
    if ex is None:
        return [fn(it) for it in items]
    return list(ex.map(fn, items))


def _change(a, b):
    return float(np.max(np.abs(a - b))) if a.size else 0.0


def _report(name, it, converged, hist, t):
    rep = SolverReport(solver=name, iterations=it, converged=converged)
    rep.duality_gap = float("nan")
    rep.wall_time = t.elapsed
    rep.extra["changes"] = hist
    return rep


def combine_pd(y, r1, r2, opts=None):
    """Proximal Dykstra for ``prox_{r1 + r2}(y)``.

    Starts from ``x = y`` with both correction vectors at zero; each sweep
    applies ``r2`` then ``r1``.

    Returns
    -------
    x : ndarray
    report : SolverReport
        ``extra['changes']`` holds the stopping measure of every iteration.
    """
    opts = opts or SolverOptions()
    y = as_signal(y)
    x = y.copy()
    p = np.zeros_like(y)
    q = np.zeros_like(y)
    hist = []
    converged = False
    it = 0
    with Timer() as t:
        while it < opts.max_iter:
            z = r2(x + p)
            p = x + p - z
            xn = r1(z + q)
            q = z + q - xn
            it += 1
            d = max(_change(xn, x), _change(z, xn))
            hist.append(d)
            x = xn
            if d <= opts.stop_tol:
                converged = True
                break
    return x, _report("pd", it, converged, hist, t)


def combine_ppd(y, ops, opts=None):
    """Parallel proximal Dykstra for ``prox_{r_1 + ... + r_m}(y)``.

    Each term enters with equal weight ``1/m``, so its prox is taken with
    step ``m``; the auxiliary points start at ``y``.
    """
    opts = opts or SolverOptions()
    y = as_signal(y)
    ops = list(ops)
    m = len(ops)
    if m == 0:
        raise ValueError("need at least one prox operator")
    x = y.copy()
    zs = [y.copy() for _ in range(m)]
    hist = []
    converged = False
    it = 0
    with Timer() as t, _pool(opts.workers, m) as ex:
        while it < opts.max_iter:
            ps = _map(ex, lambda iz: ops[iz[0]](iz[1], float(m)), list(enumerate(zs)))
            acc = np.zeros_like(y)
            for pi in ps:
                acc += pi
            xn = acc / m
            zs = [xn + z - pi for z, pi in zip(zs, ps)]
            it += 1
            d = max([_change(xn, x)] + [_change(pi, xn) for pi in ps])
            hist.append(d)
            x = xn
            if d <= opts.stop_tol:
                converged = True
                break
    return x, _report("ppd", it, converged, hist, t)


def combine_dr(y, r1, r2, opts=None):
    """Douglas-Rachford on alternating reflections for ``prox_{r1 + r2}(y)``.

    Valid for positively homogeneous convex ``r1``, ``r2`` (norms of linear
    maps such as TV or l1), whose prox determines the projection onto the
    set of subgradients at zero: ``P(z) = z - prox_r(z)``.  The auxiliary
    point starts at ``y`` and may drift without bound, so the stopping test
    watches the projected point ``b = P_2(z)``, the recovered primal point
    ``x = prox_{r1}(y - b)`` and the change of the step ``z_{t+1} - z_t``.

    These can all stand still for a while away from the solution.  When both
    operators expose ``value``, the pair ``(y - b - x, b)`` is dual feasible
    and the test additionally requires the duality gap
    ``r1(x) + r2(x) - (y - x) . x`` to be at most ``0.5 n stop_tol^2`` (the
    squared norm of a vector with every entry at ``stop_tol``), up to a
    rounding allowance plus the ``gap_floor`` attributes of the operators
    (the gap their own inexact solves may leave).  The last gap is reported
    in ``duality_gap``.
    """
    opts = opts or SolverOptions()
    y = as_signal(y)
    z = y.copy()
    x = None
    b_old = None
    step_old = None
    step = None
    certified = hasattr(r1, "value") and hasattr(r2, "value")
    gap = float("nan")
    hist = []
    converged = False
    it = 0
    with Timer() as t:
        while True:
            b = z - r2(z)
            xn = r1(y - b)
            if x is not None:
                d = max(_change(xn, x), _change(b, b_old))
                # z drifts when the two sets do not meet; its step must settle too
                d = max(d, _change(step, step_old) if step_old is not None else np.inf)
                hist.append(d)
                if d <= opts.stop_tol and certified:
                    gap = r1.value(xn) + r2.value(xn) - float(np.dot(y - xn, xn))
                    floor = 64 * np.finfo(float).eps * (
                        r1.value(xn) + r2.value(xn) + float(np.dot(xn, xn)) + abs(float(np.dot(y, xn)))
                    ) + getattr(r1, "gap_floor", 0.0) + getattr(r2, "gap_floor", 0.0)
                    if gap > 0.5 * y.size * opts.stop_tol**2 + floor:
                        d = np.inf
                if d <= opts.stop_tol:
                    x = xn
                    converged = True
                    break
            x = xn
            b_old = b
            if it >= opts.max_iter:
                break
            rz = 2.0 * b - z
            a = rz + r1(y - rz)
            zn = 0.5 * ((2.0 * a - rz) + z)
            step_old, step = step, zn - z
            z = zn
            it += 1
    rep = _report("dr", it, converged, hist, t)
    rep.duality_gap = gap
    return x, rep


def combine_admm(y, ops, rho=1.0, opts=None):
    """Consensus ADMM for ``prox_{r_1 + ... + r_m}(y)``.

    Order per iteration: the averaged ``x`` update, then every local
    ``z_i = prox_{r_i / rho}(x - u_i / rho)``, then the multiplier steps
    ``u_i += rho (z_i - x)``.  Starts from ``x = z_i = y`` and ``u_i = 0``.
    """
    opts = opts or SolverOptions()
    rho = float(rho)
    if not rho > 0:
        raise ValueError("rho must be positive")
    y = as_signal(y)
    ops = list(ops)
    m = len(ops)
    if m == 0:
        raise ValueError("need at least one prox operator")
    x = y.copy()
    zs = [y.copy() for _ in range(m)]
    us = [np.zeros_like(y) for _ in range(m)]
    hist = []
    converged = False
    it = 0
    with Timer() as t, _pool(opts.workers, m) as ex:
        while it < opts.max_iter:
            acc = y.copy()
            for z, u in zip(zs, us):
                acc += u + rho * z
            xn = acc / (1.0 + m * rho)
            zs = _map(ex, lambda i: ops[i](xn - us[i] / rho, 1.0 / rho), range(m))
            us = [u + rho * (z - xn) for u, z in zip(us, zs)]
            it += 1
            d = max([_change(xn, x)] + [_change(z, xn) for z in zs])
            hist.append(d)
            x = xn
            if d <= opts.stop_tol:
                converged = True
                break
    rep = _report("admm", it, converged, hist, t)
    rep.extra["rho"] = rho
    return x, rep


COMBINERS = ("pd", "ppd", "dr", "admm")


def combine(y, ops, method="dr", opts=None, rho=1.0):
    """Dispatch on the combiner name; ``pd`` and ``dr`` need exactly two operators."""
    ops = list(ops)
    if method in ("pd", "dr"):
        if len(ops) != 2:
            raise ValueError(f"{method} combines exactly two operators, got {len(ops)}")
        fn = combine_pd if method == "pd" else combine_dr
        return fn(y, ops[0], ops[1], opts)
    if method == "ppd":
        return combine_ppd(y, ops, opts)
    if method == "admm":
        return combine_admm(y, ops, rho, opts)
    raise ValueError(f"unknown combiner {method!r}; choose from {COMBINERS}")

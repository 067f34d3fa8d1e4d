"""TV-Lp proximity for ``1 < p <= inf``.

The dual of ``min_x 0.5 ||x - y||^2 + lam * ||D x||_p`` is

    min_u 0.5 ||D^T u||^2 - u^T D y   s.t.  ||u||_q <= lam,   1/p + 1/q = 1.

Projection onto the lq ball is obtained from the prox of the lp norm through
the Moreau split ``P(u) = u - prox_{lam ||.||_p}(u)``; that prox is computed by
projected Newton, where the Hessian is diagonal plus rank one so every
Newton step is linear in ``n``.  For ``p = inf`` the dual ball is an l1 ball.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

from ._tridiag import ddt_apply, ddt_solve, tridiag_solve
from .core import (
    SolverOptions,
    SolverReport,
    Timer,
    _lp_norm,
    as_signal,
    diff_apply,
    diff_transpose_apply,
    dual_exponent,
    dual_gap_ball,
    in_dual_ball,
    tv_objective,
)

__all__ = [
    "LpProxHessian",
    "prox_lp_norm_pn",
    "prox_lp_norm",
    "project_lq_ball",
    "project_l1_ball",
    "fw_direction",
    "fw_stepsize",
    "prox_tv1d_lp_gp",
    "prox_tv1d_lp_fw",
    "prox_tv1d_lp_hybrid",
    "prox_tv1d_linf",
]

PROJ_TOL = 1e-12
NEWTON_MIN_STEP = 1e-3
POLISH_STEPS = 60


# ---------------------------------------------------------------------------
# prox of lam * ||w||_p on the nonnegative orthant


class LpProxHessian:
    """Hessian of ``0.5 ||w - u||^2 + lam ||w||_p`` at a positive ``w``.

    It equals ``diag(1/v) + c * wbar wbar^T`` with ``c = lam (1 - p) / ||w||_p``,
    ``wbar = (w / ||w||_p)^(p-1)`` and ``v = 1 / (1 - c (w / ||w||_p)^(p-2))``.
    :meth:`solve` applies its inverse by Sherman-Morrison.
    """

    def __init__(self, w, lam, p):
        w = np.asarray(w, dtype=np.float64)
        self.norm = _lp_norm(w, p)
        self.c = lam * (1.0 - p) / self.norm
        what = w / self.norm
        self.what = what
        self.wbar = what ** (p - 1.0)
        self.wpow = what ** p
        with np.errstate(divide="ignore", over="ignore"):
            self.v = 1.0 / (1.0 - self.c * what ** (p - 2.0))

    def matrix(self):
        return np.diag(1.0 / self.v) + self.c * np.outer(self.wbar, self.wbar)

    def matvec(self, x):
        return x / self.v + self.c * self.wbar * float(np.dot(self.wbar, x))

    def solve(self, g):
        vg = self.v * g
        vw = self.v * self.wbar
        # 1 + c wbar.v.wbar rewritten with sum(what^p) = 1 as a positive sum,
        # which avoids cancellation when c is large and negative
        denom = float(np.dot(self.wpow, self.v))
        return vg - self.c * vw * (float(np.dot(self.wbar, vg)) / denom)


def _lp_prox_objective(w, u, lam, p):
    r = w - u
    return 0.5 * float(np.dot(r, r)) + lam * _lp_norm(w, p)


def _lp_prox_gap(w, u, lam, p, q):
    """Gap between the prox objective at ``w`` and the dual at ``u - w`` (scaled in)."""
    pi = u - w
    nq = _lp_norm(pi, q)
    if nq > lam:
        pi = pi * (lam / nq)
    r = u - pi
    dual = 0.5 * float(np.dot(u, u)) - 0.5 * float(np.dot(r, r))
    return _lp_prox_objective(w, u, lam, p) - dual


def prox_lp_norm_pn(u, lam, p, tol=PROJ_TOL, max_iter=200):
    """Prox of ``lam * ||.||_p`` at a nonnegative point by projected Newton.

    Parameters
    ----------
    u : array_like
        Nonnegative input; callers strip and restore signs.
    lam : float
    p : float
        ``1 < p < inf``.
    tol : float
        Stop once the prox duality gap is below ``tol * max(1, ||u||^2)``;
        further unsafeguarded Newton steps then polish the point for as long
        as the gradient keeps shrinking.

    Returns
    -------
    ndarray
        The minimizer of ``0.5 ||w - u||^2 + lam ||w||_p`` over ``w >= 0``.
        Zero coordinates of ``u`` stay at zero.
    """
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    if np.any(u < 0):
        raise ValueError("u must be nonnegative")
    if not (1 < p < math.inf):
        raise ValueError("p must lie in (1, inf)")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if lam == 0:
        return u.copy()
    q = dual_exponent(p)
    nq = _lp_norm(u, q)
    out = np.zeros_like(u)
    if nq <= lam:
        return out
    support = u > 0
    us = u[support]
    if p == 2:
        out[support] = us * (1.0 - lam / nq)
        return out
    # start on the ray s = u^(q-1), along which the objective decreases from
    # w = 0 (Hoelder is tight there), at the best point of that ray
    s = (us / us.max()) ** (q - 1.0)
    coef = (float(np.dot(us, s)) - lam * _lp_norm(s, p)) / float(np.dot(s, s))
    if not coef > 0:
        # ||u||_q exceeds lam only by rounding: the prox is 0
        return out
    w = s * coef
    scale = max(1.0, float(np.dot(us, us)))
    f = _lp_prox_objective(w, us, lam, p)
    umax = float(us.max())
    polish = 0
    g_last = math.inf
    for _ in range(max_iter):
        hess = LpProxHessian(w, lam, p)
        g = w - us + lam * hess.wbar
        d = hess.solve(g)
        slope = float(np.dot(g, d))
        if not slope > 0:
            break
        alpha = 1.0
        pos = d > 0
        if np.any(pos):
            with np.errstate(over="ignore"):
                # a subnormal d gives inf, which correctly imposes no bound
                amax = float(np.min(w[pos] / d[pos]))
            if amax <= 1.0:
                alpha = 0.99 * amax
        if _lp_prox_gap(w, us, lam, p, q) <= tol * scale:
            # the gap is quadratic in the error: finish with a few plain
            # Newton steps, where function values are too flat for Armijo
            # (coordinates pressed against 0 need more of them when p < 2)
            gn = float(np.max(np.abs(g)))
            if np.max(np.abs(d)) <= 1e-13 * umax or polish >= POLISH_STEPS or gn >= g_last:
                break
            g_last = gn
            polish += 1
            w = w - alpha * d
            f = _lp_prox_objective(w, us, lam, p)
            continue
        while True:
            wn = w - alpha * d
            fn = _lp_prox_objective(wn, us, lam, p)
            if fn <= f - 1e-4 * alpha * slope:
                break
            alpha *= 0.5
            if alpha < 1e-20:
                wn = None
                break
        if wn is None:
            break
        w, f = wn, fn
    out[support] = w
    return out


def prox_lp_norm(u, lam, p):
    """Signed prox of ``lam * ||.||_p``."""
    u = np.asarray(u, dtype=np.float64)
    return np.sign(u) * prox_lp_norm_pn(np.abs(u), lam, p)


def project_lq_ball(u, lam, q):
    """Euclidean projection onto ``{w : ||w||_q <= lam}`` for ``1 < q < inf``.

    Points already inside are returned unchanged; the sign pattern of ``u``
    is preserved.
    """
    u = np.asarray(u, dtype=np.float64)
    if not (1 < q < math.inf):
        raise ValueError("q must lie in (1, inf)")
    if not lam > 0:
        raise ValueError("lam must be positive")
    nq = _lp_norm(u, q)
    if nq <= lam:
        return u.copy()
    if q == 2:
        return u * (lam / nq)
    p = dual_exponent(q)
    a = np.abs(u)
    w = a - prox_lp_norm_pn(a, lam, p)
    w = _into_ball(w, lam, q)
    if q > 2:
        # p < 2: the prox solve can leave coordinates pinned near zero.  The
        # polished point wins unless it is clearly farther from u, which
        # would mean the refinement went astray.
        wp = _into_ball(_polish_projection(a, w, lam, q), lam, q)
        d0 = float(np.dot(a - w, a - w))
        d1 = float(np.dot(a - wp, a - wp))
        if np.all(np.isfinite(wp)) and d1 <= d0 * (1 + 1e-9):
            w = wp
    return np.sign(u) * w


def _into_ball(w, lam, q):
    nw = _lp_norm(w, q)
    return w * (lam / nw) if nw > lam else w


def _coord_roots(a, mu, q, t):
    """Solve ``t + mu t^(q-1) = a`` per coordinate by bracketed Newton from ``t``."""
    lo = np.zeros_like(a)
    hi = a.copy()
    t = np.clip(t, lo, hi)
    for _ in range(200):
        f = t + mu * t ** (q - 1.0) - a
        hi = np.where(f > 0, t, hi)
        lo = np.where(f <= 0, t, lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            fp = 1.0 + mu * (q - 1.0) * t ** (q - 2.0)
            tn = t - f / fp
        bad = ~np.isfinite(tn) | (tn <= lo) | (tn >= hi)
        tn = np.where(bad, 0.5 * (lo + hi), tn)
        done = np.abs(tn - t) <= 4 * np.finfo(float).eps * np.maximum(a, 1e-300)
        t = tn
        if done.all():
            break
    return t


def _polish_projection(a, w, lam, q, rounds=100):
    """Refine an approximate projection of ``a >= 0`` onto the q-ball.

    The optimality conditions read ``a_i - w_i = mu w_i^(q-1)`` with
    ``||w||_q = lam``.  Each round solves the scalar equations for the
    current ``mu`` and updates ``mu`` by a Newton step on the norm condition,
    kept inside a bracket (bisection or doubling otherwise).  This fixes
    coordinates near zero, where the projected Newton solve of the prox is
    only accurate to its gap tolerance, and recovers from a poor start.
    Used for ``q > 2`` only: for ``q < 2`` the scalar roots are too flat in
    ``mu`` for this to beat the Newton solve.
    """
    target = lam**q
    g = w ** (q - 1.0)
    gg = float(np.dot(g, g))
    mu = float(np.dot(a - w, g)) / gg if gg > 0 else 0.0
    if not (mu > 0 and math.isfinite(mu)):
        mu = 1.0
    lo, hi = 0.0, math.inf
    t = w
    for _ in range(rounds):
        t = _coord_roots(a, mu, q, t)
        res = float(np.sum(t**q)) - target
        if abs(res) <= 1e-15 * target:
            break
        # the norm of t(mu) decreases in mu
        if res > 0:
            lo = mu
        else:
            hi = mu
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dt = -(t ** (q - 1.0)) / (1.0 + mu * (q - 1.0) * t ** (q - 2.0))
        dt = np.where(np.isfinite(dt), dt, 0.0)
        slope = float(np.dot(q * t ** (q - 1.0), dt))
        nxt = mu - res / slope if slope < 0 else math.nan
        if not lo < nxt < hi:
            nxt = 2.0 * mu if math.isinf(hi) else 0.5 * (lo + hi)
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
        mu = nxt
    return t


# ---------------------------------------------------------------------------
# l1 ball


@nb.njit(cache=True, nogil=True)
def _l1_threshold(a, lam):
    n = a.size
    idx = np.arange(n)
    lo = 0
    hi = n
    s = 0.0
    rho = 0
    state = np.uint64(88172645463325252)
    while lo < hi:
        # xorshift pivot choice keeps the expected cost linear and the result
        # deterministic
        state ^= state << np.uint64(13)
        state ^= state >> np.uint64(7)
        state ^= state << np.uint64(17)
        k = lo + np.int64(state % np.uint64(hi - lo))
        piv = a[idx[k]]
        i = lo
        ds = 0.0
        kpos = -1
        for j in range(lo, hi):
            e = idx[j]
            if a[e] >= piv:
                idx[j] = idx[i]
                idx[i] = e
                if a[e] == piv and kpos < 0:
                    kpos = i
                ds += a[e]
                i += 1
        if kpos < 0:
            kpos = lo
        if (s + ds) - (rho + (i - lo)) * piv < lam:
            s += ds
            rho += i - lo
            lo = i
        else:
            e = idx[kpos]
            idx[kpos] = idx[i - 1]
            idx[i - 1] = e
            hi = i - 1
    return (s - lam) / rho


def project_l1_ball(v, lam):
    """Euclidean projection onto ``{u : ||u||_1 <= lam}`` in expected linear time."""
    v = np.asarray(v, dtype=np.float64)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    a = np.abs(v)
    if a.sum() <= lam:
        return v.copy()
    if lam == 0:
        return np.zeros_like(v)
    theta = _l1_threshold(np.ascontiguousarray(a), float(lam))
    return np.sign(v) * np.maximum(a - theta, 0.0)


# ---------------------------------------------------------------------------
# dual solvers


def _ball_projector(lam, p):
    if math.isinf(p):
        return lambda v: project_l1_ball(v, lam)
    q = dual_exponent(p)
    return lambda v: project_lq_ball(v, lam, q)


def _dual_obj(u, dy, n):
    t = diff_transpose_apply(u, n)
    return 0.5 * float(np.dot(t, t)) - float(np.dot(u, dy))


def fw_direction(z, lam, p):
    """Minimizer of ``s . z`` over ``||s||_q <= lam``.

    ``s = -lam * sign(z) |z|^(p-1) / ||z||_p^(p-1)``; zero when ``z = 0``.
    """
    z = np.asarray(z, dtype=np.float64)
    nz = _lp_norm(z, p)
    if nz == 0:
        return np.zeros_like(z)
    return -lam * np.sign(z) * (np.abs(z) / nz) ** (p - 1.0)


def fw_stepsize(d, grad, n):
    """Exact line search along ``d`` for the dual quadratic, clamped to ``[0, 1]``."""
    dd = diff_transpose_apply(d, n)
    curv = float(np.dot(dd, dd))
    slope = float(np.dot(d, grad))
    if curv <= 0:
        return 1.0 if slope < 0 else 0.0
    return min(max(-slope / curv, 0.0), 1.0)


def _gp_step(u, dy, proj):
    return proj(u - 0.25 * (ddt_apply(u) - dy))


def _fw_step(u, dy, n, lam, p):
    """One Frank-Wolfe step.  Returns the new point and the surrogate gap.

    For a feasible ``u`` the surrogate ``(u - s) . grad`` coincides with the
    true duality gap ``lam ||Dx||_p - u . Dx``.
    """
    g = ddt_apply(u) - dy
    s = fw_direction(g, lam, p)
    d = s - u
    surrogate = -float(np.dot(d, g))
    if surrogate <= 0:
        return u, surrogate
    return u + fw_stepsize(d, g, n) * d, surrogate


def _kkt_newton_step(u, dy, lam, q):
    """Newton point for the optimality system with the ball constraint active.

    Solves ``(D D^T + mu H) du + s dmu = -(r + mu s)``, ``s . du = lam - ||u||_q``
    where ``s`` is the gradient and ``H`` the Hessian of ``||u||_q``, ``r`` the
    dual gradient and ``mu >= 0`` the least-squares multiplier at ``u``.  ``H``
    is diagonal minus a multiple of ``s s^T``; the rank one part folds into
    the bordering, leaving two tridiagonal solves.  Returns ``None`` when the
    system is singular or the multiplier is zero.
    """
    f = _lp_norm(u, q)
    if f == 0:
        return None
    a = np.abs(u)
    s = np.sign(u) * (a / f) ** (q - 1.0)
    r = ddt_apply(u) - dy
    ss = float(np.dot(s, s))
    mu = -float(np.dot(s, r)) / ss
    if not mu > 0:
        return None
    with np.errstate(divide="ignore"):
        dh = (q - 1.0) / f * (a / f) ** (q - 2.0)
    # entries at zero with q < 2 have unbounded curvature; pin them
    dh = np.minimum(dh, 1e12 * (q - 1.0) / f)
    diag = 2.0 + mu * dh
    off = np.full(u.size - 1, -1.0)
    try:
        z1 = tridiag_solve(diag, off, r + mu * s)
        z2 = tridiag_solve(diag, off, s)
    except (ValueError, ZeroDivisionError, FloatingPointError):
        return None
    den = float(np.dot(s, z2))
    if not den > 0:
        return None
    r2 = f - lam
    gamma = (r2 - float(np.dot(s, z1))) / den
    du = -z1 - gamma * z2
    if not np.all(np.isfinite(du)):
        return None
    return u + du


def _check_args(y, lam, p, allow_inf=False):
    y = as_signal(y)
    if np.ndim(lam) != 0:
        raise ValueError("per-edge weights are supported for p = 1 only")
    lam = float(lam)
    if not (lam >= 0 and math.isfinite(lam)):
        raise ValueError("lam must be finite and nonnegative")
    if not (p > 1 and (allow_inf or math.isfinite(p))):
        raise ValueError("p must lie in (1, inf)")
    return y, lam


def _trivial(y, solver):
    return y.copy(), SolverReport(solver=solver, objective=0.0)


def _finish(report, u, y, lam, p, gap, tol, t, x=None):
    n = y.size
    if x is None:
        x = y - diff_transpose_apply(u, n)
    report.duality_gap = gap
    report.converged = gap <= tol
    report.objective = tv_objective(x, y, lam, p)
    report.wall_time = t.elapsed
    report.extra["dual"] = u
    return x, report


def prox_tv1d_lp_gp(y, lam, p, opts=None):
    """TV-Lp prox by projected gradient (stepsize 1/4) on the dual, from ``u = 0``."""
    opts = opts or SolverOptions()
    y, lam = _check_args(y, lam, p)
    n = y.size
    if n == 1 or lam == 0:
        return _trivial(y, "gp")
    proj = _ball_projector(lam, p)
    report = SolverReport(solver="gp")
    with Timer() as t:
        dy = diff_apply(y)
        u = np.zeros(n - 1)
        gap = dual_gap_ball(u, y, lam, p)
        it = 0
        while gap > opts.gap_tol and it < opts.max_iter:
            u = _gp_step(u, dy, proj)
            gap = dual_gap_ball(u, y, lam, p)
            it += 1
    report.iterations = it
    return _finish(report, u, y, lam, p, gap, opts.gap_tol, t)


def prox_tv1d_lp_fw(y, lam, p, opts=None):
    """TV-Lp prox by Frank-Wolfe on the dual, from ``u = 0``.

    Stops when the Frank-Wolfe surrogate gap and the true duality gap are
    both below ``opts.gap_tol``.
    """
    opts = opts or SolverOptions()
    y, lam = _check_args(y, lam, p)
    n = y.size
    if n == 1 or lam == 0:
        return _trivial(y, "fw")
    report = SolverReport(solver="fw")
    with Timer() as t:
        dy = diff_apply(y)
        u = np.zeros(n - 1)
        it = 0
        gap = dual_gap_ball(u, y, lam, p)
        while it < opts.max_iter:
            un, surrogate = _fw_step(u, dy, n, lam, p)
            if surrogate <= opts.gap_tol:
                gap = dual_gap_ball(u, y, lam, p)
                if gap <= opts.gap_tol:
                    break
            u = un
            it += 1
        gap = dual_gap_ball(u, y, lam, p)
    report.iterations = it
    return _finish(report, u, y, lam, p, gap, opts.gap_tol, t)


def prox_tv1d_lp_hybrid(y, lam, p, opts=None):
    """TV-Lp prox alternating ``opts.fw_gp_ratio`` Frank-Wolfe steps with one GP step.

    Starts from the projection of the unconstrained dual optimum (returned
    directly when already inside the ball).  The GP steps use stepsize 1/4
    from a point extrapolated along the displacement since the previous GP
    step; whenever the extrapolated step would not decrease the dual
    objective, momentum is reset and a plain step from the current iterate
    is taken instead, so every step is monotone.  Before each GP step a
    Newton step on the optimality system with the constraint active is tried
    (backtracking along the projected arc); it replaces the GP step whenever
    it lowers the dual objective, which removes the slow tail when ``lam``
    sits just below the interior threshold.  ``report.extra`` counts the
    steps of each kind, the momentum restarts and any increase of the dual
    objective (``monotone_violations``, expected to stay 0).
    """
    opts = opts or SolverOptions()
    y, lam = _check_args(y, lam, p)
    n = y.size
    if n == 1 or lam == 0:
        return _trivial(y, "hybrid")
    q = dual_exponent(p)
    proj = _ball_projector(lam, p)
    report = SolverReport(solver="hybrid")
    fw_steps = gp_steps = restarts = violations = newton_steps = 0
    finite = not math.isinf(p)
    with Timer() as t:
        dy = diff_apply(y)
        v = ddt_solve(dy)
        it = 0
        x = None
        if in_dual_ball(_lp_norm(v, q), lam, n):
            # the unconstrained dual is feasible: the answer is the constant mean,
            # whose differences vanish exactly, so the gap is 0
            u = v
            x = np.full(n, y.mean())
            gap = 0.0
            report.extra["interior"] = True
        else:
            u = proj(v)
            gap = dual_gap_ball(u, y, lam, p)
            obj = _dual_obj(u, dy, n)
            prev = u
            tk = 1.0
            while gap > opts.gap_tol and it < opts.max_iter:
                if (it + 1) % (opts.fw_gp_ratio + 1) == 0:
                    nt = _kkt_newton_step(u, dy, lam, q) if finite else None
                    fn = math.inf
                    if nt is not None:
                        # backtrack along the projected Newton arc
                        du = nt - u
                        step = 1.0
                        while step >= NEWTON_MIN_STEP:
                            nt = proj(u + step * du)
                            fn = _dual_obj(nt, dy, n)
                            if fn < obj:
                                break
                            step *= 0.25
                    if fn < obj:
                        w, fw = nt, fn
                        tn = 1.0
                        newton_steps += 1
                    else:
                        # momentum between the points where consecutive GP steps start
                        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
                        w = _gp_step(u + ((tk - 1.0) / tn) * (u - prev), dy, proj)
                        fw = _dual_obj(w, dy, n)
                    if fw > obj:
                        w = _gp_step(u, dy, proj)
                        fw = _dual_obj(w, dy, n)
                        tn = 1.0
                        restarts += 1
                    prev = u
                    tk = tn
                    gp_steps += 1
                else:
                    w = _fw_step(u, dy, n, lam, p)[0]
                    fw = _dual_obj(w, dy, n)
                    fw_steps += 1
                if fw > obj + 1e-12 * max(1.0, abs(obj)):
                    violations += 1
                u = w
                obj = fw
                gap = dual_gap_ball(u, y, lam, p)
                it += 1
    report.iterations = it
    report.extra.update(
        fw_steps=fw_steps,
        gp_steps=gp_steps,
        newton_steps=newton_steps,
        restarts=restarts,
        monotone_violations=violations,
    )
    return _finish(report, u, y, lam, p, gap, opts.gap_tol, t, x)


def prox_tv1d_linf(y, lam, opts=None):
    """TV-Linf prox by projected gradient on the l1-ball constrained dual.

    Warm-started at the projection of the unconstrained dual optimum.
    """
    opts = opts or SolverOptions()
    y, lam = _check_args(y, lam, math.inf, allow_inf=True)
    n = y.size
    if n == 1 or lam == 0:
        return _trivial(y, "gp-linf")
    report = SolverReport(solver="gp-linf")
    with Timer() as t:
        dy = diff_apply(y)
        v = ddt_solve(dy)
        it = 0
        x = None
        if in_dual_ball(float(np.sum(np.abs(v))), lam, n):
            u = v
            x = np.full(n, y.mean())
            gap = 0.0
        else:
            u = project_l1_ball(v, lam)
            gap = dual_gap_ball(u, y, lam, math.inf)
        while gap > opts.gap_tol and it < opts.max_iter:
            u = project_l1_ball(u - 0.25 * (ddt_apply(u) - dy), lam)
            gap = dual_gap_ball(u, y, lam, math.inf)
            it += 1
    report.iterations = it
    return _finish(report, u, y, lam, math.inf, gap, opts.gap_tol, t, x)

"""Slow, independent reference solvers used to validate the production code.

Nothing here reuses the production solvers: projections, gaps and
iterations are written out again from scratch.

* :func:`oracle_tv1d_dual_qp` solves the 1D TV-Lp dual by plain projected
  gradient (accelerated with restarts for the norm-ball duals).
* :func:`oracle_joint_prox` computes ``prox`` of a sum of terms
  ``lam_j * ||G_j x||_p`` through the stacked dual.  Box-constrained duals
  (all ``p = 1``) are solved exactly as bounded least squares; ball duals
  by accelerated projected gradient from 20 random starts that must agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy.optimize import lsq_linear

__all__ = [
    "OracleResult",
    "OracleCertificationError",
    "JointTerm",
    "oracle_tv1d_dual_qp",
    "oracle_joint_prox",
    "oracle_project_l1",
    "oracle_project_lq",
    "l1_term",
    "tv_axis_terms",
    "CERT_GAP",
    "CERT_GAP_BALL",
]

CERT_GAP = 1e-10
# ball duals: the gap is first order in the dual error, whose rounding floor
# is about sqrt(eps), so certification is looser there
CERT_GAP_BALL = 1e-7
# restarts of the iterative joint oracle must land this close together
SPREAD_TOL = 1e-6


class OracleCertificationError(RuntimeError):
    """The oracle could not certify its answer."""


@dataclass
class OracleResult:
    x: np.ndarray
    gap: float
    iterations: int
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# projections written independently of the production module


@nb.njit(cache=True)
def _radial(u, lam):
    s = 0.0
    for v in u:
        s += v * v
    s = math.sqrt(s)
    if s <= lam:
        return u.copy()
    return u * (lam / s)


@nb.njit(cache=True)
def _sort_l1(u, lam):
    a = np.abs(u)
    if a.sum() <= lam:
        return u.copy()
    s = np.sort(a)[::-1]
    cs = 0.0
    theta = 0.0
    for k in range(s.size):
        cs += s[k]
        t = (cs - lam) / (k + 1)
        if s[k] - t > 0:
            theta = t
    return np.sign(u) * np.maximum(a - theta, 0.0)


@nb.njit(cache=True)
def _coord_root(a, mu, q):
    # t >= 0 with t + mu t^(q-1) = a, by safeguarded Newton on [0, a]
    lo = 0.0
    hi = a
    t = a / (1.0 + mu)
    for _ in range(200):
        f = t + mu * t ** (q - 1.0) - a
        if f > 0:
            hi = t
        else:
            lo = t
        df = 1.0 + mu * (q - 1.0) * t ** (q - 2.0) if t > 0 else np.inf
        tn = t - f / df
        if not (lo < tn < hi):
            tn = 0.5 * (lo + hi)
        if abs(tn - t) <= 1e-17 * a or hi - lo <= 1e-17 * a:
            return tn
        t = tn
    return t


@nb.njit(cache=True)
def _qnorm(t, q):
    m = 0.0
    for v in t:
        if abs(v) > m:
            m = abs(v)
    if m == 0.0:
        return 0.0
    s = 0.0
    for v in t:
        s += (abs(v) / m) ** q
    return m * s ** (1.0 / q)


@nb.njit(cache=True)
def _bisect_lq(u, lam, q):
    a = np.abs(u)
    if _qnorm(a, q) <= lam:
        return u.copy()
    t = np.empty_like(a)
    lo = 0.0
    hi = 1.0
    while True:
        for i in range(a.size):
            t[i] = _coord_root(a[i], hi, q) if a[i] > 0 else 0.0
        if _qnorm(t, q) <= lam:
            break
        lo = hi
        hi *= 2.0
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        for i in range(a.size):
            t[i] = _coord_root(a[i], mid, q) if a[i] > 0 else 0.0
        if _qnorm(t, q) > lam:
            lo = mid
        else:
            hi = mid
    for i in range(a.size):
        t[i] = _coord_root(a[i], hi, q) if a[i] > 0 else 0.0
    return np.sign(u) * t


def oracle_project_l1(u, lam):
    """Sort-based projection onto the l1 ball."""
    return _sort_l1(np.ascontiguousarray(u, dtype=np.float64), float(lam))


def oracle_project_lq(u, lam, q):
    """Bisection-based projection onto the lq ball (``q = 2`` is radial)."""
    u = np.ascontiguousarray(u, dtype=np.float64)
    if q == 2:
        return _radial(u, float(lam))
    if q == 1:
        return _sort_l1(u, float(lam))
    return _bisect_lq(u, float(lam), float(q))


# ---------------------------------------------------------------------------
# 1D dual QP


@nb.njit(cache=True)
def _dt(u):
    n = u.size + 1
    x = np.zeros(n)
    for i in range(n - 1):
        x[i] -= u[i]
        x[i + 1] += u[i]
    return x


@nb.njit(cache=True)
def _box_gap(u, y, w):
    x = y - _dt(u)
    g = 0.0
    for i in range(u.size):
        z = x[i + 1] - x[i]
        g += w[i] * abs(z) - u[i] * z
    return g


@nb.njit(cache=True)
def _pg_box(y, w, step, max_iter, tol):
    m = y.size - 1
    u = np.zeros(m)
    dy = y[1:] - y[:-1]
    it = 0
    while it < max_iter:
        t = _dt(u)
        moved = 0.0
        for i in range(m):
            g = (t[i + 1] - t[i]) - dy[i]
            v = u[i] - step * g
            if v > w[i]:
                v = w[i]
            elif v < -w[i]:
                v = -w[i]
            moved = max(moved, abs(v - u[i]))
            u[i] = v
        it += 1
        umax = 0.0
        for v in u:
            umax = max(umax, abs(v))
        # stop once the iterate only moves at rounding level
        if moved <= 4e-16 * (1.0 + umax):
            break
        if it % 256 == 0 and _box_gap(u, y, w) <= tol:
            break
    return u, it


def _ball_proj(lam, p):
    if p == 2:
        return lambda v: _radial(v, lam)
    if math.isinf(p):
        return lambda v: _sort_l1(v, lam)
    q = p / (p - 1.0)
    return lambda v: _bisect_lq(v, lam, q)


def _pnorm(z, p):
    if math.isinf(p):
        return float(np.max(np.abs(z))) if z.size else 0.0
    if p == 1:
        return float(np.sum(np.abs(z)))
    return _qnorm(np.ascontiguousarray(z), float(p))


def _fista(kt, y, projs, blocks, lipschitz, u0, max_iter, gap_fn, tol):
    """Accelerated projected gradient with adaptive restart on the stacked dual.

    Minimizes ``0.5 ||K^T u||^2 - u^T K y`` over a product of balls; ``kt``
    is the pair of callables ``(u -> K^T u, x -> K x)``.
    """
    apply_kt, apply_k = kt
    step = 1.0 / lipschitz
    u = u0.copy()
    z = u.copy()
    tk = 1.0
    ky = apply_k(y)

    def proj(v):
        out = np.empty_like(v)
        for (a, b), pr in zip(blocks, projs):
            out[a:b] = pr(np.ascontiguousarray(v[a:b]))
        return out

    def obj(v):
        t = apply_kt(v)
        return 0.5 * float(np.dot(t, t)) - float(np.dot(v, ky))

    fu = obj(u)
    gap = gap_fn(u)
    it = 0
    while it < max_iter and gap > tol:
        g = apply_k(apply_kt(z)) - ky
        un = proj(z - step * g)
        fn = obj(un)
        tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        it += 1
        if fn > fu and tk != 1.0:
            z = u.copy()
            tk = 1.0
            continue
        if fn > fu:
            # a plain step with stepsize 1/L cannot ascend; this is rounding in
            # a flat objective, while the gap may still move, so keep the step
            tn = 1.0
        z = un + ((tk - 1.0) / tn) * (un - u)
        u, fu, tk = un, fn, tn
        if it % 16 == 0:
            gap = gap_fn(u)
    return u, gap_fn(u), it


def _scale(y):
    # gaps are in units of y^2; certify relative to the signal magnitude
    return max(1.0, float(np.max(np.abs(y))) ** 2) if y.size else 1.0


def oracle_tv1d_dual_qp(y, w, p=1.0, max_iter=3_000_000, tol=1e-12, certify=None):
    """Reference 1D TV-Lp prox from the dual QP.

    Parameters
    ----------
    y : array_like
        Signal with at most 256 samples.
    w : float or array_like
        Uniform penalty, or per-edge penalties when ``p == 1``.
    p : float
        ``1``, ``1 < p < inf`` or ``inf``.

    Raises
    ------
    OracleCertificationError
        When the final duality gap exceeds ``certify * max(1, max|y|^2)``.
        ``certify`` defaults to ``CERT_GAP`` for ``p = 1`` and
        ``CERT_GAP_BALL`` otherwise.
    """
    if certify is None:
        certify = CERT_GAP if p == 1 else CERT_GAP_BALL
    y = np.ascontiguousarray(y, dtype=np.float64).reshape(-1)
    n = y.size
    if n > 256:
        raise ValueError("the oracle is limited to n <= 256")
    if n == 1:
        return OracleResult(y.copy(), 0.0, 0)
    lipschitz = 2.0 - 2.0 * math.cos((n - 1) * math.pi / n)
    if p == 1:
        wv = np.broadcast_to(np.asarray(w, dtype=np.float64), (n - 1,)).copy()
        u, it = _pg_box(y, wv, 1.0 / lipschitz, max_iter, tol)
        gap = float(_box_gap(u, y, wv))
    else:
        lam = float(w)
        if np.ndim(w) != 0:
            raise ValueError("per-edge weights need p = 1")
        if lam == 0:
            return OracleResult(y.copy(), 0.0, 0)
        proj = _ball_proj(lam, p)

        def gap_fn(v):
            x = y - _dt(v)
            z = np.diff(x)
            return lam * _pnorm(z, p) - float(np.dot(v, z))

        u, gap, it = _fista(
            (_dt, np.diff),
            y,
            [proj],
            [(0, n - 1)],
            lipschitz,
            np.zeros(n - 1),
            max_iter,
            gap_fn,
            tol,
        )
    x = y - _dt(u)
    if not gap <= certify * _scale(y):
        raise OracleCertificationError(f"oracle gap {gap:.3e} exceeds {certify:.1e}")
    return OracleResult(x, gap, int(it), {"dual": u})


# ---------------------------------------------------------------------------
# joint prox


@dataclass
class JointTerm:
    """Regularizer ``sum_rows w_r |(G x)_r|`` (``p = 1``) or ``lam ||G x||_p``."""

    G: np.ndarray
    weight: object
    p: float = 1.0


def l1_term(size, lam):
    return JointTerm(np.eye(size), float(lam), 1.0)


def tv_axis_terms(shape, axis, lam, p=1.0):
    """Anisotropic TV terms along ``axis`` of a row-major tensor of ``shape``.

    ``p = 1`` gives a single stacked term; otherwise one term per fiber.
    """
    shape = tuple(int(s) for s in shape)
    size = int(np.prod(shape))
    idx = np.arange(size).reshape(shape)
    fibers = np.moveaxis(idx, axis, -1).reshape(-1, shape[axis])
    mats = []
    for f in fibers:
        g = np.zeros((f.size - 1, size))
        for j in range(f.size - 1):
            g[j, f[j]] = -1.0
            g[j, f[j + 1]] = 1.0
        mats.append(g)
    if not mats or mats[0].shape[0] == 0:
        return []
    if p == 1:
        return [JointTerm(np.vstack(mats), float(lam), 1.0)]
    return [JointTerm(g, float(lam), float(p)) for g in mats]


def _joint_objective(x, y, terms):
    val = 0.5 * float(np.sum((x - y) ** 2))
    for t in terms:
        z = t.G @ x
        if t.p == 1:
            val += float(np.sum(np.broadcast_to(t.weight, z.shape) * np.abs(z)))
        else:
            val += float(t.weight) * _pnorm(z, t.p)
    return val


def _drop_zero_rows(t):
    # a zero penalty pins its dual block to 0, so the rows carry nothing
    if t.p != 1:
        return t if float(t.weight) > 0 else JointTerm(t.G[:0], t.weight, t.p)
    w = np.broadcast_to(np.asarray(t.weight, float), (t.G.shape[0],))
    keep = w > 0
    if keep.all():
        return t
    return JointTerm(t.G[keep], w[keep].copy(), 1.0)


def oracle_joint_prox(y, terms, restarts=20, max_iter=400_000, certify=None, seed=0):
    """Reference ``argmin_x 0.5 ||x - y||^2 + sum_j r_j(x)``.

    Parameters
    ----------
    y : array_like
        Flattened input of total size at most 64.
    terms : list of JointTerm
    restarts : int
        Random dual starts for the iterative path; all must agree to within
        ``SPREAD_TOL * max(1, max|y|)``.
    """
    y = np.ascontiguousarray(y, dtype=np.float64).reshape(-1)
    N = y.size
    if N > 64:
        raise ValueError("the joint oracle is limited to 64 entries")
    terms = [_drop_zero_rows(t) for t in terms]
    terms = [t for t in terms if t.G.shape[0] > 0]
    if certify is None:
        certify = CERT_GAP if all(t.p == 1 for t in terms) else CERT_GAP_BALL
    if not terms:
        return OracleResult(y.copy(), 0.0, 0)
    K = np.vstack([t.G for t in terms])
    blocks = []
    a = 0
    for t in terms:
        blocks.append((a, a + t.G.shape[0]))
        a += t.G.shape[0]

    if all(t.p == 1 for t in terms):
        w = np.concatenate([np.broadcast_to(np.asarray(t.weight, float), (t.G.shape[0],)) for t in terms])
        # dual: min 0.5 ||K^T u - y||^2 over the box, solved exactly
        res = lsq_linear(K.T, y, bounds=(-w, w), method="bvls", tol=1e-15, max_iter=10_000)
        u = np.clip(res.x, -w, w)
        x = y - K.T @ u
        z = K @ x
        gap = float(np.sum(w * np.abs(z) - u * z))
        if not gap <= certify * _scale(y):
            raise OracleCertificationError(f"joint oracle gap {gap:.3e} exceeds {certify:.1e}")
        return OracleResult(x, gap, int(res.nit), {"dual": u, "method": "bvls"})

    projs = []
    for t in terms:
        if t.p == 1:
            wv = np.broadcast_to(np.asarray(t.weight, float), (t.G.shape[0],)).copy()
            projs.append(lambda v, wv=wv: np.clip(v, -wv, wv))
        else:
            projs.append(_ball_proj(float(t.weight), t.p))
    lipschitz = float(np.linalg.norm(K, 2) ** 2)

    def gap_fn(u):
        x = y - K.T @ u
        g = 0.0
        for (s, e), t in zip(blocks, terms):
            z = t.G @ x
            if t.p == 1:
                g += float(np.sum(np.broadcast_to(t.weight, z.shape) * np.abs(z)))
            else:
                g += float(t.weight) * _pnorm(z, t.p)
            g -= float(np.dot(u[s:e], z))
        return g

    rng = np.random.default_rng(seed)
    sols = []
    total = 0
    best = None
    for r in range(restarts):
        u0 = np.zeros(K.shape[0]) if r == 0 else rng.normal(size=K.shape[0])
        for (s, e), pr in zip(blocks, projs):
            u0[s:e] = pr(np.ascontiguousarray(u0[s:e]))
        u, gap, it = _fista((lambda v: K.T @ v, lambda x: K @ x), y, projs, blocks, lipschitz, u0, max_iter, gap_fn, 1e-13)
        total += it
        if not gap <= certify * _scale(y):
            raise OracleCertificationError(f"joint oracle gap {gap:.3e} exceeds {certify:.1e}")
        x = y - K.T @ u
        sols.append(x)
        if best is None or gap < best[1]:
            best = (x, gap, u)
    spread = max(float(np.max(np.abs(s - best[0]))) for s in sols)
    if spread > SPREAD_TOL * math.sqrt(_scale(y)):
        raise OracleCertificationError(f"restarts disagree by {spread:.3e}")
    return OracleResult(best[0], best[1], total, {"dual": best[2], "method": "fista", "spread": spread})

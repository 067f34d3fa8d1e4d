"""Anisotropic TV prox for matrices and tensors by fiber decomposition.

The penalty ``sum_k lam_k sum_fibers ||D x_fiber||_{p_k}`` splits into one
term per axis; each term's prox is a batch of independent 1D proxes, one per
fiber along that axis.  The terms are then combined with the engines of
:mod:`tvprox.combiners`.

Fibers along an axis are cut into contiguous chunks that run on a thread
pool; every fiber is solved on its own and written to its own slice, so the
result is bitwise independent of the number of workers.
"""
from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba as nb
import numpy as np

from .combiners import combine
from .core import SolverOptions, SolverReport, as_signal
from .tv1d_l1 import tv1_kernel
from .tv1d_l2 import l2_hybrid_kernel
from .tv1d_lp import prox_tv1d_linf, prox_tv1d_lp_hybrid

__all__ = [
    "AxisSpec",
    "FiberSolveError",
    "FIBER_OPTIONS",
    "as_tensor",
    "fiber_index",
    "prox_tv1d",
    "axis_prox",
    "axis_penalty",
    "prox_tv2d",
    "prox_tvnd",
]

# accuracy of the 1D solves used inside the combiners (p != 1 only;
# the p = 1 taut string is exact)
FIBER_OPTIONS = SolverOptions(gap_tol=1e-10, max_iter=100_000)

# fibers per task; fixed so the work split does not depend on the pool size
_CHUNK = 64


class FiberSolveError(RuntimeError):
    """A 1D solve failed; ``index`` is the fiber's multi-index (``None`` on the axis)."""

    def __init__(self, msg, axis, index):
        super().__init__(f"{msg} (axis {axis}, fiber {index})")
        self.axis = axis
        self.index = index


@dataclass(frozen=True)
class AxisSpec:
    """Per-axis penalties ``(lam_k, p_k)``."""

    terms: tuple

    def __post_init__(self):
        terms = tuple((float(lam), float(p)) for lam, p in self.terms)
        for lam, p in terms:
            if not (lam >= 0 and math.isfinite(lam)):
                raise ValueError("lam must be finite and nonnegative")
            if not p >= 1:
                raise ValueError("p must be >= 1 (or inf)")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def uniform(cls, ndim, lam, p=1.0):
        return cls(tuple((lam, p) for _ in range(ndim)))

    @classmethod
    def parse(cls, text, ndim):
        """Parse ``"k=lam:p,..."``; axes not mentioned get ``lam = 0``."""
        terms = [(0.0, 1.0)] * ndim
        for item in filter(None, (s.strip() for s in text.split(","))):
            try:
                k, rest = item.split("=")
                lam, _, p = rest.partition(":")
                k = int(k)
                terms[k] = (float(lam), float(p) if p else 1.0)
            except (ValueError, IndexError) as exc:
                raise ValueError(f"bad axis term {item!r}") from exc
        return cls(tuple(terms))

    def __len__(self):
        return len(self.terms)


def as_tensor(Y):
    Y = np.array(Y, dtype=np.float64, copy=True, order="C")
    if Y.ndim == 0 or 0 in Y.shape:
        raise ValueError("tensor must have at least one axis and no empty axes")
    if not np.all(np.isfinite(Y)):
        raise ValueError("tensor contains NaN or Inf")
    return Y


def fiber_index(shape, axis, f):
    """Multi-index of fiber ``f`` along ``axis``, with ``None`` in the axis slot."""
    others = [s for i, s in enumerate(shape) if i != axis]
    idx = list(np.unravel_index(f, others)) if others else []
    idx = [int(i) for i in idx]
    idx.insert(axis, None)
    return tuple(idx)


def prox_tv1d(y, lam, p=1.0, opts=None, weights=None):
    """1D TV-Lp prox returning only the solution.

    ``p = 1`` uses the hybrid taut string (and accepts per-edge ``weights``);
    ``p = 2`` the GP/MSN hybrid; other finite ``p`` the GP+FW hybrid;
    ``p = inf`` projected gradient.  Raises ``RuntimeError`` when an
    iterative solver does not reach its gap tolerance.
    """
    p = float(p)
    if p == 1:
        y = as_signal(y)
        w = np.full(y.size - 1, float(lam)) if weights is None else np.asarray(weights, float)
        x = np.empty_like(y)
        expo = (opts or FIBER_OPTIONS).hybrid_exponent
        tv1_kernel(y, np.ascontiguousarray(w), x, 2, expo)
        return x
    if weights is not None:
        raise ValueError("per-edge weights are supported for p = 1 only")
    opts = opts or FIBER_OPTIONS
    if p == 2:
        y = as_signal(y)
        x = np.empty_like(y)
        gap = l2_hybrid_kernel(y, float(lam), x, opts.gap_tol, opts.boundary_tol, opts.max_iter)
        if not gap <= opts.gap_tol:
            raise RuntimeError(f"1D TV-L2 solve stopped at gap {gap:.2e}")
        return x
    if math.isinf(p):
        x, rep = prox_tv1d_linf(y, lam, opts)
    else:
        x, rep = prox_tv1d_lp_hybrid(y, lam, p, opts)
    if not rep.converged:
        raise RuntimeError(f"1D TV-L{p:g} solve stopped at gap {rep.duality_gap:.2e}")
    return x


@nb.njit(cache=True, nogil=True)
def _l1_fibers(Y, W, X, lo, hi, exponent):
    for f in range(lo, hi):
        tv1_kernel(Y[f], W[f], X[f], 2, exponent)


@nb.njit(cache=True, nogil=True)
def _l2_fibers(Y, lam, X, gaps, lo, hi, gap_tol, boundary_tol, max_iter):
    for f in range(lo, hi):
        gaps[f] = l2_hybrid_kernel(Y[f], lam, X[f], gap_tol, boundary_tol, max_iter)


_pools = {}
_pools_lock = threading.Lock()


def _fiber_pool(workers):
    # fiber tasks never submit work, so one shared pool per size is safe even
    # when the calling combiner runs on its own threads
    with _pools_lock:
        ex = _pools.get(workers)
        if ex is None:
            ex = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="tvfiber")
            _pools[workers] = ex
        return ex


def axis_prox(X, axis, lam, p=1.0, opts=None, weights=None):
    """Apply the 1D TV-Lp prox to every fiber of ``X`` along ``axis``.

    Parameters
    ----------
    X : array_like
    axis : int
    lam : float
    p : float
    opts : SolverOptions, optional
        ``workers`` sets the pool size; the 1D tolerances come from
        ``FIBER_OPTIONS`` unless given here.
    weights : array_like, optional
        Per-edge penalties for ``p = 1``, shaped like ``X`` with ``n_k - 1``
        entries along ``axis``.  Overrides ``lam``.

    Raises
    ------
    FiberSolveError
        With the multi-index of the first failing fiber.
    """
    X = np.asarray(X, dtype=np.float64)
    axis = int(axis) % X.ndim
    n = X.shape[axis]
    workers = opts.workers if opts is not None else 1
    inner = _fiber_options(opts)
    if n == 1 or (lam == 0 and weights is None):
        return X.copy()
    moved = np.moveaxis(X, axis, -1)
    Y = np.ascontiguousarray(moved.reshape(-1, n))
    F = Y.shape[0]
    out = np.empty_like(Y)
    chunks = [(lo, min(lo + _CHUNK, F)) for lo in range(0, F, _CHUNK)]
    p = float(p)
    if p == 1:
        if weights is None:
            W = np.full((F, n - 1), float(lam))
        else:
            W = np.asarray(weights, dtype=np.float64)
            want = X.shape[:axis] + (n - 1,) + X.shape[axis + 1:]
            if W.shape != want:
                raise ValueError(f"weights must have shape {want}, got {W.shape}")
            if np.any(W < 0) or not np.all(np.isfinite(W)):
                raise ValueError("weights must be finite and nonnegative")
            W = np.ascontiguousarray(np.moveaxis(W, axis, -1).reshape(F, n - 1))

        def task(c):
            _l1_fibers(Y, W, out, c[0], c[1], inner.hybrid_exponent)

    elif weights is not None:
        raise ValueError("per-edge weights are supported for p = 1 only")
    elif p == 2:
        gaps = np.zeros(F)

        def task(c):
            _l2_fibers(Y, float(lam), out, gaps, c[0], c[1], inner.gap_tol, inner.boundary_tol, inner.max_iter)

    else:

        def task(c):
            for f in range(c[0], c[1]):
                try:
                    out[f] = prox_tv1d(Y[f], lam, p, inner)
                except RuntimeError as exc:
                    raise FiberSolveError(str(exc), axis, fiber_index(X.shape, axis, f)) from exc

    if workers > 1 and len(chunks) > 1:
        for fut in [_fiber_pool(workers).submit(task, c) for c in chunks]:
            fut.result()
    else:
        for c in chunks:
            task(c)
    if p == 2:
        bad = np.flatnonzero(~(gaps <= inner.gap_tol))
        if bad.size:
            f = int(bad[0])
            msg = f"1D TV-L2 solve stopped at gap {gaps[f]:.2e}"
            raise FiberSolveError(msg, axis, fiber_index(X.shape, axis, f))
    return np.moveaxis(out.reshape(moved.shape), -1, axis).copy()


def axis_penalty(X, axis, lam, p=1.0):
    """``lam * sum over fibers of ||D x_fiber||_p`` along ``axis``."""
    X = np.asarray(X, dtype=np.float64)
    d = np.diff(X, axis=axis)
    if d.size == 0:
        return 0.0
    d = np.moveaxis(d, axis, -1).reshape(-1, d.shape[axis])
    p = float(p)
    if p == 1:
        return float(lam) * float(np.sum(np.abs(d)))
    return float(lam) * float(np.sum(np.linalg.norm(d, ord=p, axis=1)))


def _fiber_options(opts):
    if opts is None:
        return FIBER_OPTIONS
    return SolverOptions(
        gap_tol=min(opts.gap_tol, FIBER_OPTIONS.gap_tol),
        max_iter=max(opts.max_iter, FIBER_OPTIONS.max_iter),
        hybrid_exponent=opts.hybrid_exponent,
        fw_gp_ratio=opts.fw_gp_ratio,
    )


def _axis_operator(shape, axis, lam, p, opts):
    def op(v, step=1.0):
        return axis_prox(np.reshape(v, shape), axis, lam * step, p, opts).ravel()

    op.value = lambda x: axis_penalty(np.reshape(x, shape), axis, lam, p)
    # the p = 1 fiber solver is exact; the others stop at a per-fiber gap
    fibers = int(np.prod(shape)) // shape[axis]
    op.gap_floor = 0.0 if float(p) == 1 else fibers * _fiber_options(opts).gap_tol
    return op


def _solve_terms(Y, terms, combiner, opts, rho):
    # drop terms that cannot act: zero penalty or a length-one axis
    active = [(k, lam, p) for k, (lam, p) in enumerate(terms) if lam > 0 and Y.shape[k] > 1]
    if not active:
        return Y.copy(), SolverReport(solver="identity")
    if len(active) == 1:
        k, lam, p = active[0]
        return axis_prox(Y, k, lam, p, opts), SolverReport(solver="axis", iterations=1)
    ops = [_axis_operator(Y.shape, k, lam, p, opts) for k, lam, p in active]
    x, rep = combine(Y.ravel(), ops, combiner, opts, rho)
    rep.extra["axes"] = [k for k, _, _ in active]
    return x.reshape(Y.shape), rep


def prox_tv2d(Y, rows=(1.0, 1.0), cols=(1.0, 1.0), combiner="dr", opts=None, rho=1.0):
    """2D anisotropic TV prox.

    Parameters
    ----------
    Y : array_like, 2D
    rows : (lam, p)
        Penalty on differences within each row.
    cols : (lam, q)
        Penalty on differences within each column.
    combiner : {"dr", "pd", "admm", "ppd"}
        Douglas-Rachford by default.

    Returns
    -------
    X : ndarray
    report : SolverReport
        ``converged`` is False when the combiner hit ``max_iter``.
    """
    Y = as_tensor(Y)
    if Y.ndim != 2:
        raise ValueError("prox_tv2d expects a 2D array")
    opts = opts or SolverOptions()
    # rows are fibers along axis 1, columns along axis 0
    terms = [tuple(cols), tuple(rows)]
    AxisSpec(tuple(terms))
    # keep the row term first so r1 = rows, r2 = columns in the two-term combiners
    active = [(1, *terms[1]), (0, *terms[0])]
    active = [(k, float(lam), float(p)) for k, lam, p in active if lam > 0 and Y.shape[k] > 1]
    if len(active) < 2:
        return _solve_terms(Y, terms, combiner, opts, rho)
    ops = [_axis_operator(Y.shape, k, lam, p, opts) for k, lam, p in active]
    x, rep = combine(Y.ravel(), ops, combiner, opts, rho)
    rep.extra["axes"] = [1, 0]
    return x.reshape(Y.shape), rep


def prox_tvnd(Y, spec, combiner="ppd", opts=None, rho=1.0):
    """N-D anisotropic TV prox with one ``(lam_k, p_k)`` term per axis.

    ``spec`` is an :class:`AxisSpec`, a sequence of pairs, or a scalar
    ``lam`` (all axes, ``p = 1``).  ``combiner`` is ``"ppd"`` (default) or
    ``"admm"``.  A single active axis is solved directly.
    """
    Y = as_tensor(Y)
    if np.isscalar(spec):
        spec = AxisSpec.uniform(Y.ndim, spec)
    elif not isinstance(spec, AxisSpec):
        spec = AxisSpec(tuple(spec))
    if len(spec) != Y.ndim:
        raise ValueError(f"spec has {len(spec)} terms for a {Y.ndim}-D tensor")
    if combiner not in ("ppd", "admm"):
        raise ValueError("prox_tvnd supports the 'ppd' and 'admm' combiners")
    return _solve_terms(Y, spec.terms, combiner, opts or SolverOptions(), rho)

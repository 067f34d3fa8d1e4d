"""Shared types and primitives for total-variation proximity.

Signals are plain 1D ``float64`` numpy arrays; :func:`as_signal` validates
them.  Duals live on the ``n - 1`` edges between consecutive samples, with the
boundary values ``u_0 = u_n = 0`` kept implicit.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "in_dual_ball",
    "Weights",
    "SolverOptions",
    "SolverReport",
    "as_signal",
    "as_weights",
    "diff_apply",
    "diff_transpose_apply",
    "cumsum",
    "tv_penalty",
    "tv_objective",
    "dual_gap_l1",
    "dual_gap_ball",
    "moreau_check",
    "dual_exponent",
    "Timer",
]


def as_signal(y, name="y"):
    """Return ``y`` as a fresh contiguous 1D float64 array, rejecting NaN/Inf."""
    arr = np.array(y, dtype=np.float64, copy=True).reshape(-1)
    if arr.size < 1:
        raise ValueError(f"{name} must have at least one sample")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class Weights:
    """Per-edge penalties ``w_i >= 0`` on the ``n - 1`` differences.

    Use :meth:`uniform` for a single penalty shared by all edges, or
    :meth:`per_edge` for an explicit vector.
    """

    values: np.ndarray | None = None
    lam: float | None = None

    @classmethod
    def uniform(cls, lam):
        lam = float(lam)
        if not (lam >= 0 and math.isfinite(lam)):
            raise ValueError("penalty must be finite and nonnegative")
        return cls(values=None, lam=lam)

    @classmethod
    def per_edge(cls, w):
        w = np.array(w, dtype=np.float64, copy=True).reshape(-1)
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        w.setflags(write=False)
        return cls(values=w, lam=None)

    @property
    def is_uniform(self):
        return self.values is None

    def expand(self, n):
        """Weight vector of length ``n - 1``."""
        if self.values is None:
            return np.full(max(n - 1, 0), self.lam)
        if self.values.size != n - 1:
            raise ValueError(
                f"weight vector has length {self.values.size}, expected {n - 1}"
            )
        return np.array(self.values)


def as_weights(w, n):
    """Coerce a scalar, array or :class:`Weights` into a length ``n - 1`` array."""
    if isinstance(w, Weights):
        return w.expand(n)
    if np.ndim(w) == 0:
        return Weights.uniform(w).expand(n)
    return Weights.per_edge(w).expand(n)


@dataclass
class SolverOptions:
    """Tolerances and budgets shared by the iterative solvers.

    ``stop_tol`` is the primal-change tolerance used by the combiners; the
    1D dual solvers stop on ``gap_tol``.
    """

    gap_tol: float = 1e-5
    boundary_tol: float = 1e-6
    max_iter: int = 10_000
    hybrid_exponent: float = 1.05
    fw_gp_ratio: int = 10
    workers: int = 1
    stop_tol: float = 1e-6

    def __post_init__(self):
        if not self.gap_tol > 0:
            raise ValueError("gap_tol must be positive")
        if not 1.0 < self.hybrid_exponent < 2.0:
            raise ValueError("hybrid_exponent must lie in (1, 2)")
        if self.fw_gp_ratio < 1:
            raise ValueError("fw_gp_ratio must be at least 1")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")


@dataclass
class SolverReport:
    iterations: int = 0
    inner_steps: int = 0
    duality_gap: float = 0.0
    objective: float = float("nan")
    wall_time: float = 0.0
    converged: bool = True
    solver: str = ""
    extra: dict = field(default_factory=dict)


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False


def diff_apply(x):
    """Forward differences ``x[i+1] - x[i]``."""
    x = np.asarray(x, dtype=np.float64)
    return x[1:] - x[:-1]


def diff_transpose_apply(u, n):
    """Apply the transpose of the differencing matrix to an edge vector."""
    u = np.asarray(u, dtype=np.float64)
    if u.size != n - 1:
        raise ValueError(f"dual has length {u.size}, expected {n - 1}")
    out = np.zeros(n)
    out[:-1] -= u
    out[1:] += u
    return out


def cumsum(y):
    return np.cumsum(np.asarray(y, dtype=np.float64))


def dual_exponent(p):
    """Hoelder conjugate of ``p`` (``inf`` for 1, 1 for ``inf``)."""
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _lp_norm(z, p):
    if z.size == 0:
        return 0.0
    if p == 1:
        return float(np.sum(np.abs(z)))
    if math.isinf(p):
        return float(np.max(np.abs(z)))
    if p == 2:
        return float(np.sqrt(np.dot(z, z)))
    a = np.abs(z)
    m = a.max()
    if m == 0:
        return 0.0
    return float(m * np.sum((a / m) ** p) ** (1.0 / p))


def tv_penalty(x, w, p=1.0):
    """TV penalty of ``x``.

    For ``p == 1`` ``w`` may be a per-edge vector; otherwise it must be a
    uniform penalty and the result is ``lam * ||Dx||_p``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    z = diff_apply(x)
    if p == 1:
        return float(np.dot(as_weights(w, x.size), np.abs(z)))
    if isinstance(w, Weights):
        if not w.is_uniform:
            raise ValueError("per-edge weights are only supported for p = 1")
        lam = w.lam
    else:
        if np.ndim(w) != 0:
            raise ValueError("per-edge weights are only supported for p = 1")
        lam = float(w)
    return lam * _lp_norm(z, p)


def tv_objective(x, y, w, p=1.0):
    """Prox objective ``0.5 ||x - y||^2 + TV(x)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("x and y lengths differ")
    d = x - y
    return 0.5 * float(np.dot(d, d)) + tv_penalty(x, w, p)


def dual_gap_l1(u, y, w):
    """Duality gap of a (possibly infeasible) dual for weighted TV-L1.

    ``u`` is clipped into the box ``|u_i| <= w_i`` first, so the value is a
    valid certificate: ``gap >= 0.5 ||x - x*||^2`` for ``x = y - D^T u``.
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    w = as_weights(w, n)
    u = np.clip(np.asarray(u, dtype=np.float64), -w, w)
    x = y - diff_transpose_apply(u, n)
    z = diff_apply(x)
    return float(np.dot(w, np.abs(z)) - np.dot(u, z))


def dual_gap_ball(u, y, lam, p):
    """Duality gap for ``lam * ||Dx||_p`` given a dual with ``||u||_q <= lam``.

    The caller is responsible for feasibility of ``u``.
    """
    y = np.asarray(y, dtype=np.float64)
    x = y - diff_transpose_apply(u, y.size)
    z = diff_apply(x)
    return lam * _lp_norm(z, p) - float(np.dot(u, z))


def in_dual_ball(norm, lam, n):
    """True when an unconstrained dual of dual norm ``norm`` is feasible for ``lam``.

    Allows a relative slack of ``4 n eps`` for the rounding in the
    tridiagonal solve, so that ``lam`` computed as that norm counts as inside.
    """
    return norm <= lam * (1.0 + 4.0 * n * np.finfo(np.float64).eps)


def moreau_check(prox_value, dual_prox_value, y):
    """Infinity-norm residual of ``prox + dual_prox - y``."""
    a = np.asarray(prox_value, dtype=np.float64)
    b = np.asarray(dual_prox_value, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not (a.shape == b.shape == y.shape):
        raise ValueError("shapes differ")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a + b - y)))

"""Applications on top of the prox operators.

Fused lasso by accelerated proximal gradient, the fused-lasso signal
approximator in 1D and 2D, TV denoising of images and tensors, the ISNR
quality measure, an adversarial input family for the linearized taut string,
random data for the benchmark scenarios and the benchmark harness itself.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .combiners import combine_pd, l1_prox, tv1d_prox
from .core import SolverOptions, SolverReport, Timer, as_signal, tv_penalty
from .tv1d_l1 import prox_tv1d_l1_classic, prox_tv1d_l1_hybrid, prox_tv1d_l1_linearized
from .tv1d_l2 import prox_tv1d_l2_gp, prox_tv1d_l2_hybrid, prox_tv1d_l2_msn
from .tv1d_lp import prox_tv1d_linf, prox_tv1d_lp_fw, prox_tv1d_lp_gp, prox_tv1d_lp_hybrid
from .tv1d_newton import prox_tv1d_l1_pn
from .tvnd import AxisSpec, prox_tv1d, prox_tv2d, prox_tvnd

__all__ = [
    "soft_threshold",
    "flsa",
    "flsa_2d",
    "FusedLassoProblem",
    "least_squares_loss",
    "logistic_loss",
    "solve_fused_lasso",
    "synthetic_fused_lasso",
    "denoise",
    "isnr",
    "worst_case_signal",
    "scenario_one",
    "scenario_two",
    "SOLVERS",
    "solve_1d",
    "bench",
    "BENCH_SCENARIOS",
]


def soft_threshold(v, t):
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def flsa(y, lam1, lam2):
    """Fused-lasso signal approximator: ``soft(prox_TV(y, lam2), lam1)``.

    The composition is the exact prox of ``lam1 ||x||_1 + lam2 TV(x)``.
    """
    return soft_threshold(prox_tv1d(as_signal(y), float(lam2), 1.0), float(lam1))


def flsa_2d(Y, lam1, lam2, combiner="dr", opts=None):
    """2D fused-lasso signal approximator: 2D TV prox, then soft-thresholding.

    Returns
    -------
    X : ndarray
    report : SolverReport
        From the 2D TV prox.
    """
    X, rep = prox_tv2d(Y, (lam2, 1.0), (lam2, 1.0), combiner, opts)
    return soft_threshold(X, float(lam1)), rep


# ---------------------------------------------------------------------------
# fused lasso


@dataclass
class FusedLassoProblem:
    """``loss(A x (+ c), y) + lam1 ||x||_1 + lam2 ||D x||_p``.

    ``loss`` is ``"ls"`` (``0.5 ||A x - y||^2``) or ``"logistic"``
    (``sum log(1 + exp(-y_i (a_i . x + c)))`` with an unpenalized intercept
    ``c`` and labels in ``{-1, +1}``).
    """

    A: np.ndarray
    y: np.ndarray
    lam1: float = 0.0
    lam2: float = 0.0
    loss: str = "ls"
    p: float = 1.0

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if self.A.shape[0] != self.y.size:
            raise ValueError(f"A has {self.A.shape[0]} rows but y has {self.y.size} entries")
        if self.lam1 < 0 or self.lam2 < 0:
            raise ValueError("penalties must be nonnegative")
        if self.loss not in ("ls", "logistic"):
            raise ValueError("loss must be 'ls' or 'logistic'")
        if self.loss == "logistic" and not np.all(np.isin(self.y, (-1.0, 1.0))):
            raise ValueError("logistic responses must be -1 or +1")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")


def least_squares_loss(A, y, x):
    """Value and gradient of ``0.5 ||A x - y||^2``."""
    r = A @ x - y
    return 0.5 * float(r @ r), A.T @ r


def logistic_loss(A, y, x, c=0.0):
    """Value and gradients (in ``x`` and ``c``) of ``sum log(1 + exp(-y (A x + c)))``."""
    m = y * (A @ x + c)
    val = float(np.sum(np.logaddexp(0.0, -m)))
    # d/dm log(1 + e^-m) = -1 / (1 + e^m)
    s = -y * np.exp(-np.logaddexp(0.0, m))
    return val, A.T @ s, float(np.sum(s))


def _penalty(x, prob):
    return prob.lam1 * float(np.sum(np.abs(x))) + tv_penalty(x, prob.lam2, prob.p)


def solve_fused_lasso(prob, opts=None, tol=1e-10, x0=None):
    """Minimize a fused-lasso objective by FISTA with a fixed step ``1/L``.

    The prox of the penalty is the exact composition
    ``soft_threshold o prox_TV`` when ``p = 1`` and a proximal Dykstra
    combination otherwise.  Momentum restarts whenever the objective goes
    up.  Stops after five consecutive iterations in which the relative
    objective change is below ``tol`` and the prox-gradient step moves no
    entry by more than ``sqrt(tol) * max(1, max|x|)``, or after
    ``opts.max_iter`` iterations.

    Returns
    -------
    x : ndarray
        Coefficients; for the logistic loss ``report.extra['intercept']``
        holds ``c``.
    report : SolverReport
    """
    opts = opts or SolverOptions()
    A, y = prob.A, prob.y
    d = A.shape[1]
    logistic = prob.loss == "logistic"
    if logistic:
        Ac = np.hstack([A, np.ones((A.shape[0], 1))])
        lip = 0.25 * float(np.linalg.norm(Ac, 2) ** 2)
    else:
        lip = float(np.linalg.norm(A, 2) ** 2)
    lip = max(lip, 1e-12)
    eta = 1.0 / lip

    def smooth(v):
        if logistic:
            val, gx, gc = logistic_loss(A, y, v[:d], v[d])
            return val, np.append(gx, gc)
        return least_squares_loss(A, y, v)

    def prox(v):
        x = v[:d]
        if prob.p == 1:
            xn = soft_threshold(prox_tv1d(x, eta * prob.lam2, 1.0), eta * prob.lam1)
        elif prob.lam1 == 0:
            xn = prox_tv1d(x, eta * prob.lam2, prob.p)
        else:
            inner = SolverOptions(stop_tol=1e-10, max_iter=10_000)
            xn, _ = combine_pd(x, l1_prox(eta * prob.lam1), tv1d_prox(eta * prob.lam2, prob.p), inner)
        return np.append(xn, v[d:]) if logistic else xn

    def objective(v):
        return smooth(v)[0] + _penalty(v[:d], prob)

    size = d + 1 if logistic else d
    x = np.zeros(size) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    z = x.copy()
    tk = 1.0
    fx = objective(x)
    calm = 0
    it = 0
    restarts = 0
    with Timer() as t:
        while it < opts.max_iter:
            _, g = smooth(z)
            x_in = z
            xn = prox(z - eta * g)
            fn = objective(xn)
            it += 1
            if fn > fx:
                if tk == 1.0:
                    # a plain step from the accepted point no longer descends
                    calm = 5
                    break
                # restart momentum from the last accepted point
                z = x.copy()
                tk = 1.0
                restarts += 1
                continue
            tn = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
            z = xn + ((tk - 1.0) / tn) * (xn - x)
            rel = abs(fx - fn) / max(1.0, abs(fn))
            # the prox-gradient step must also be small: flat objectives stall early
            moved = float(np.max(np.abs(xn - x_in))) if size else 0.0
            x, fx, tk = xn, fn, tn
            small = moved <= math.sqrt(tol) * max(1.0, float(np.max(np.abs(xn))))
            calm = calm + 1 if rel <= tol and small else 0
            if calm >= 5:
                break
    rep = SolverReport(
        solver="fista",
        iterations=it,
        objective=fx,
        converged=calm >= 5,
        wall_time=t.elapsed,
        duality_gap=float("nan"),
    )
    rep.extra.update(restarts=restarts, step=eta)
    if logistic:
        rep.extra["intercept"] = float(x[d])
        return x[:d].copy(), rep
    return x, rep


def synthetic_fused_lasso(m, d, rng=None, blocks=4, noise_var=0.01):
    """Synthetic classification data for the fused lasso.

    Standard-normal design ``A`` (``m x d``), a piecewise-constant truth
    ``x_t`` with ``blocks`` random levels of unit variance, and labels
    ``y = sign(A x_t + v)`` with noise variance ``noise_var``.
    """
    rng = np.random.default_rng(rng)
    A = rng.standard_normal((m, d))
    cuts = np.sort(rng.choice(np.arange(1, d), size=min(blocks - 1, d - 1), replace=False))
    levels = rng.standard_normal(len(cuts) + 1)
    xt = np.repeat(levels, np.diff(np.concatenate([[0], cuts, [d]])))
    y = np.sign(A @ xt + rng.normal(scale=math.sqrt(noise_var), size=m))
    y[y == 0] = 1.0
    return A, y, xt


# ---------------------------------------------------------------------------
# denoising and quality


def denoise(Y, spec, combiner=None, opts=None):
    """TV denoising of an image (2D) or tensor.

    ``spec`` is an :class:`AxisSpec`, a sequence of ``(lam, p)`` pairs or a
    scalar ``lam``.  2D inputs default to Douglas-Rachford, higher orders to
    parallel proximal Dykstra.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if np.isscalar(spec):
        spec = AxisSpec.uniform(Y.ndim, spec)
    elif not isinstance(spec, AxisSpec):
        spec = AxisSpec(tuple(spec))
    if Y.ndim == 2 and combiner in (None, "dr", "pd", "admm", "ppd"):
        cols, rows = spec.terms
        return prox_tv2d(Y, rows, cols, combiner or "dr", opts)
    return prox_tvnd(Y, spec, combiner or "ppd", opts)


def isnr(original, noisy, restored):
    """Improvement in signal-to-noise ratio, in decibels.

    ``10 log10(||noisy - restored||^2 / ||restored - original||^2)``.  A
    perfect restoration gives ``+inf``; returning the noisy input itself
    gives ``-inf``.  Raises ``ValueError`` when all three coincide.
    """
    mu = np.asarray(original, dtype=np.float64)
    mu0 = np.asarray(noisy, dtype=np.float64)
    X = np.asarray(restored, dtype=np.float64)
    if not (mu.shape == mu0.shape == X.shape):
        raise ValueError("original, noisy and restored must have the same shape")
    num = float(np.sum((mu0 - X) ** 2))
    den = float(np.sum((X - mu) ** 2))
    if num == 0 and den == 0:
        raise ValueError("ISNR is undefined when original, noisy and restored coincide")
    if den == 0:
        return math.inf
    if num == 0:
        return -math.inf
    return 10.0 * math.log10(num / den)


# ---------------------------------------------------------------------------
# inputs for the benchmarks


def worst_case_signal(n, lam=1.0):
    """Adversarial input for the linearized taut string.

    A tall first sample, a ramp that descends by a tiny step over the first
    half, flat zeros and a very negative last sample.  Every breakpoint
    found near the end invalidates the whole prefix, so the linearized
    method rescans about ``3 n^2 / 8`` tube points while the classic method
    stays linear.
    """
    n = int(n)
    if n < 4:
        raise ValueError("n must be at least 4")
    lam = float(lam)
    m = n // 2
    a = lam / n
    step = a / (2 * m)
    y = np.zeros(n)
    y[0] = lam + a
    y[1:m] = a - np.arange(1, m) * step
    y[-1] = -10.0 * lam * n
    return y


def scenario_one(n, rng=None):
    """``lam ~ U[0, 50]`` and ``y_i ~ U[-2 lam, 2 lam]``; returns ``(y, lam)``."""
    rng = np.random.default_rng(rng)
    lam = float(rng.uniform(0.0, 50.0))
    return rng.uniform(-2.0 * lam, 2.0 * lam, int(n)), lam


def scenario_two(lam, n=1000, rng=None):
    """``y_i ~ U[-2, 2]`` with ``n = 1000`` and the given ``lam``."""
    rng = np.random.default_rng(rng)
    return rng.uniform(-2.0, 2.0, int(n)), float(lam)


# ---------------------------------------------------------------------------
# solver registry and benchmark harness


def _l1(fn):
    def run(y, lam, p, opts):
        if p != 1:
            raise ValueError(f"this solver handles p = 1 only, got p = {p:g}")
        return fn(y, lam, opts)

    return run


def _gp(y, lam, p, opts):
    if p == 2:
        return prox_tv1d_l2_gp(y, lam, opts)
    if math.isinf(p):
        return prox_tv1d_linf(y, lam, opts)
    return prox_tv1d_lp_gp(y, lam, p, opts)


def _ball(fn, name):
    def run(y, lam, p, opts):
        if p == 1 or math.isinf(p):
            raise ValueError(f"{name} needs 1 < p < inf")
        if np.ndim(lam) != 0:
            raise ValueError("per-edge weights need p = 1")
        return fn(y, lam, p, opts)

    return run


def _msn(y, lam, p, opts):
    if p != 2:
        raise ValueError("msn handles p = 2 only")
    return prox_tv1d_l2_msn(y, lam, opts)


def _hybrid(y, lam, p, opts):
    # every norm has its own hybrid: taut string, MSN + GP, GP + FW
    if p == 1:
        return prox_tv1d_l1_hybrid(y, lam, opts)
    if p == 2:
        return prox_tv1d_l2_hybrid(y, lam, opts)
    if math.isinf(p):
        return prox_tv1d_linf(y, lam, opts)
    return prox_tv1d_lp_hybrid(y, lam, p, opts)


SOLVERS = {
    "classic": _l1(prox_tv1d_l1_classic),
    "linearized": _l1(prox_tv1d_l1_linearized),
    "hybrid": _hybrid,
    "pn": _l1(prox_tv1d_l1_pn),
    "msn": _msn,
    "gp": _gp,
    "fw": _ball(prox_tv1d_lp_fw, "fw"),
    "gp-fw": _ball(prox_tv1d_lp_hybrid, "gp-fw"),
    "auto": _hybrid,
}


def solve_1d(y, lam, p=1.0, solver="auto", opts=None):
    """Run a named 1D solver; ``lam`` may be per-edge weights for ``p = 1``."""
    try:
        fn = SOLVERS[solver]
    except KeyError:
        raise ValueError(f"unknown solver {solver!r}; choose from {sorted(SOLVERS)}") from None
    return fn(y, lam, float(p), opts or SolverOptions())


BENCH_SCENARIOS = ("size", "penalty", "worstcase")


def _default_grid(scenario, max_n):
    if scenario == "size":
        grid = [int(round(10 ** (k / 2))) for k in range(2, 13)]
        return [n for n in grid if n <= max_n]
    if scenario == "penalty":
        return [float(v) for v in np.logspace(-3, 3, 13)]
    return [2**k for k in range(10, 15) if 2**k <= max_n]


def bench(scenario, solvers, p=1.0, grid=None, repeats=3, seed=0, max_n=10**6, opts=None):
    """Run a benchmark scenario and return a JSON-ready report.

    Parameters
    ----------
    scenario : {"size", "penalty", "worstcase"}
        ``size``: scenario-I data over a size grid (capped at ``max_n``);
        ``penalty``: ``n = 1000`` uniform data over a log grid of ``lam``;
        ``worstcase``: the adversarial family with ``lam = 1``.
    solvers : list of str
        Names from :data:`SOLVERS`.
    repeats : int
        Timings are the median of this many runs.

    Returns
    -------
    dict
        ``{scenario, grid, solver, p, cells}``; each cell holds ``solver``,
        ``n``, ``lambda``, ``wall_ns``, ``inner_steps``, ``gap`` and
        ``converged``, or ``error`` when the solver raised.  Failures are
        recorded and the run goes on.
    """
    if scenario not in BENCH_SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; choose from {BENCH_SCENARIOS}")
    solvers = list(solvers)
    if not solvers:
        raise ValueError("the solver set is empty")
    for s in solvers:
        if s not in SOLVERS:
            raise ValueError(f"unknown solver {s!r}")
    grid = list(grid) if grid is not None else _default_grid(scenario, max_n)
    rng = np.random.default_rng(seed)
    cases = []
    for g in grid:
        if scenario == "size":
            y, lam = scenario_one(int(g), rng)
        elif scenario == "penalty":
            y, lam = scenario_two(float(g), rng=rng)
        else:
            lam = 1.0
            y = worst_case_signal(int(g), lam)
        cases.append((y, lam))
    cells = []
    for name in solvers:
        for y, lam in cases:
            cell = {"solver": name, "n": int(y.size), "lambda": lam}
            try:
                times = []
                for _ in range(max(1, int(repeats))):
                    t0 = time.perf_counter_ns()
                    _, rep = solve_1d(y, lam, p, name, opts)
                    times.append(time.perf_counter_ns() - t0)
                cell.update(
                    wall_ns=int(np.median(times)),
                    inner_steps=int(rep.inner_steps or rep.iterations),
                    gap=float(rep.duality_gap) if math.isfinite(rep.duality_gap) else None,
                    converged=bool(rep.converged),
                )
            except Exception as exc:  # recorded per cell, the run continues
                cell["error"] = f"{type(exc).__name__}: {exc}"
            cells.append(cell)
    return {
        "scenario": scenario,
        "grid": [float(g) if scenario == "penalty" else int(g) for g in grid],
        "solver": solvers,
        "p": p if math.isfinite(p) else "inf",
        "cells": cells,
    }

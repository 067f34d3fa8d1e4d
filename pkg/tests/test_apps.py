import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tvprox.apps import (
    FusedLassoProblem,
    bench,
    denoise,
    flsa,
    flsa_2d,
    isnr,
    least_squares_loss,
    logistic_loss,
    scenario_one,
    scenario_two,
    soft_threshold,
    solve_1d,
    solve_fused_lasso,
    synthetic_fused_lasso,
    worst_case_signal,
)
from tvprox.core import SolverOptions, tv_objective
from tvprox.oracle import l1_term, oracle_joint_prox, tv_axis_terms
from tvprox.tv1d_l1 import prox_tv1d_l1_classic, prox_tv1d_l1_hybrid, prox_tv1d_l1_linearized
from tvprox.tvnd import prox_tv2d

TIGHT = SolverOptions(stop_tol=1e-9, max_iter=100000)


def test_flsa_worked_case():
    np.testing.assert_allclose(flsa([0.0, 2.0], 0.2, 0.5), [0.3, 1.3], atol=1e-14)


@settings(max_examples=40)
@given(st.integers(2, 12), st.floats(0, 1), st.floats(0, 1), st.integers(0, 2**31))
def test_flsa_matches_joint_oracle(n, lam1, lam2, seed):
    y = np.random.default_rng(seed).normal(size=n) * 2
    ref = oracle_joint_prox(y, [l1_term(n, lam1)] + tv_axis_terms((n,), 0, lam2)).x
    np.testing.assert_allclose(flsa(y, lam1, lam2), ref, atol=1e-6)


def test_fused_lasso_identity_design():
    prob = FusedLassoProblem(np.eye(2), [0.0, 2.0], 0.2, 0.5)
    x, rep = solve_fused_lasso(prob)
    np.testing.assert_allclose(x, [0.3, 1.3], atol=1e-6)
    assert rep.converged


def test_fused_lasso_unregularized(rng):
    A = rng.normal(size=(6, 6)) + 3 * np.eye(6)
    y = rng.normal(size=6)
    prob = FusedLassoProblem(A, y)
    x, rep = solve_fused_lasso(prob, opts=SolverOptions(max_iter=200000))
    # the optimum is 0, so the objective itself is the error
    assert rep.objective <= 1e-9
    x, rep = solve_fused_lasso(prob, opts=SolverOptions(max_iter=200000), tol=1e-20)
    np.testing.assert_allclose(x, np.linalg.solve(A, y), atol=1e-8)


def test_fused_lasso_p2_uses_combined_prox(rng):
    A = rng.normal(size=(20, 8))
    y = rng.normal(size=20)
    x, rep = solve_fused_lasso(FusedLassoProblem(A, y, 0.1, 0.5, p=2.0))
    assert rep.converged
    # first-order optimality by comparison with small perturbations
    def obj(v):
        from tvprox.core import tv_penalty

        return 0.5 * np.sum((A @ v - y) ** 2) + 0.1 * np.abs(v).sum() + tv_penalty(v, 0.5, 2.0)

    f = obj(x)
    for _ in range(50):
        assert obj(x + 1e-3 * rng.normal(size=8)) >= f - 1e-8


def test_logistic_gradient_at_zero(rng):
    A = rng.normal(size=(7, 4))
    y = rng.choice([-1.0, 1.0], size=7)
    val, gx, gc = logistic_loss(A, y, np.zeros(4))
    assert val == pytest.approx(7 * math.log(2))
    np.testing.assert_allclose(gx, -0.5 * A.T @ y, atol=1e-14)
    assert gc == pytest.approx(-0.5 * y.sum())


def test_logistic_gradient_finite_differences(rng):
    A = rng.normal(size=(9, 5))
    y = rng.choice([-1.0, 1.0], size=9)
    x = rng.normal(size=5)
    c = 0.3
    _, gx, gc = logistic_loss(A, y, x, c)
    h = 1e-6
    for j in range(5):
        e = np.zeros(5)
        e[j] = h
        fd = (logistic_loss(A, y, x + e, c)[0] - logistic_loss(A, y, x - e, c)[0]) / (2 * h)
        assert gx[j] == pytest.approx(fd, abs=1e-7)
    fd = (logistic_loss(A, y, x, c + h)[0] - logistic_loss(A, y, x, c - h)[0]) / (2 * h)
    assert gc == pytest.approx(fd, abs=1e-7)


def test_least_squares_gradient(rng):
    A = rng.normal(size=(4, 3))
    y = rng.normal(size=4)
    x = rng.normal(size=3)
    v, g = least_squares_loss(A, y, x)
    assert v == pytest.approx(0.5 * np.sum((A @ x - y) ** 2))
    np.testing.assert_allclose(g, A.T @ (A @ x - y))


def test_logistic_fused_lasso_runs():
    A, y, xt = synthetic_fused_lasso(60, 20, rng=3)
    x, rep = solve_fused_lasso(FusedLassoProblem(A, y, 0.5, 2.0, "logistic"))
    assert rep.converged
    assert "intercept" in rep.extra
    assert x.shape == (20,)
    assert set(np.unique(y)) <= {-1.0, 1.0}


def test_fused_lasso_validation():
    with pytest.raises(ValueError):
        FusedLassoProblem(np.eye(2), [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        FusedLassoProblem(np.eye(2), [1.0, 2.0], lam1=-1)
    with pytest.raises(ValueError):
        FusedLassoProblem(np.eye(2), [1.0, 0.5], loss="logistic")
    with pytest.raises(ValueError):
        FusedLassoProblem(np.eye(2), [1.0, 1.0], loss="hinge")


def test_flsa_2d_cases(rng):
    Y = np.array([[0.0, 2.0], [0.0, 2.0]])
    X, _ = flsa_2d(Y, 0.2, 0.5, opts=TIGHT)
    np.testing.assert_allclose(X, [[0.3, 1.3], [0.3, 1.3]], atol=1e-6)
    Z = rng.normal(size=(4, 5))
    np.testing.assert_allclose(flsa_2d(Z, 0.3, 0.0)[0], soft_threshold(Z, 0.3), atol=0)
    np.testing.assert_allclose(flsa_2d(Z, 0.0, 0.4)[0], prox_tv2d(Z, (0.4, 1), (0.4, 1))[0], atol=0)


def test_denoise_wrapper(rng):
    Y = rng.normal(size=(3, 4))
    np.testing.assert_array_equal(denoise(Y, 0.0)[0], Y)
    X, _ = denoise([[0.0, 2.0], [0.0, 2.0]], 0.5, opts=TIGHT)
    np.testing.assert_allclose(X, [[0.5, 1.5], [0.5, 1.5]], atol=1e-6)
    S = rng.normal(size=(2, 2))
    V = np.repeat(S[:, :, None], 2, axis=2)
    X3, _ = denoise(V, [(0.3, 1.0), (0.3, 1.0), (2.0, 1.0)], opts=TIGHT)
    ref, _ = prox_tv2d(S, (0.3, 1.0), (0.3, 1.0), "pd", TIGHT)
    np.testing.assert_allclose(X3[:, :, 1], ref, atol=1e-6)


def test_isnr_examples():
    assert isnr([0, 0], [1, 1], [0.1, 0.1]) == pytest.approx(10 * math.log10(1.62 / 0.02))
    assert isnr([0, 0], [1, 1], [0.1, 0.1]) == pytest.approx(19.085, abs=1e-3)
    assert isnr([0, 0], [1, 1], [0.5, 0.5]) == pytest.approx(0.0, abs=1e-12)
    assert isnr([0, 0], [1, 1], [0, 0]) == math.inf
    assert isnr([0, 0], [1, 1], [1, 1]) == -math.inf
    with pytest.raises(ValueError):
        isnr([1, 1], [1, 1], [1, 1])
    with pytest.raises(ValueError):
        isnr([1, 1], [1, 1, 1], [1, 1])


def test_worst_case_growth():
    steps = {}
    for n in (2**10, 2**11, 2**12):
        y = worst_case_signal(n)
        steps[n] = (
            prox_tv1d_l1_linearized(y, 1.0)[1].inner_steps,
            prox_tv1d_l1_classic(y, 1.0)[1].inner_steps,
            prox_tv1d_l1_hybrid(y, 1.0)[1].inner_steps,
        )
    for n in (2**10, 2**11):
        assert steps[2 * n][0] / steps[n][0] >= 3
        assert steps[2 * n][1] / steps[n][1] <= 2.5
    for n, s in steps.items():
        assert s[2] <= math.ceil(n**1.05) + n


def test_worst_case_is_deterministic():
    np.testing.assert_array_equal(worst_case_signal(64, 2.0), worst_case_signal(64, 2.0))
    with pytest.raises(ValueError):
        worst_case_signal(3)


def test_scenario_generators(rng):
    for _ in range(50):
        y, lam = scenario_one(30, rng)
        assert 0 <= lam <= 50
        assert np.all(np.abs(y) <= 2 * lam)
    y, lam = scenario_two(0.01, rng=rng)
    assert y.size == 1000 and lam == 0.01 and np.all(np.abs(y) <= 2)


def test_solve_1d_dispatch(rng):
    y = rng.normal(size=30)
    for name in ("classic", "linearized", "hybrid", "pn", "auto"):
        x, rep = solve_1d(y, 0.5, 1.0, name)
        assert tv_objective(x, y, 0.5) <= tv_objective(prox_tv1d_l1_classic(y, 0.5)[0], y, 0.5) + 1e-6
    for name in ("msn", "gp", "gp-fw", "hybrid"):
        solve_1d(y, 0.5, 2.0, name)
    with pytest.raises(ValueError):
        solve_1d(y, 0.5, 2.0, "classic")
    with pytest.raises(ValueError):
        solve_1d(y, 0.5, 1.0, "fw")
    with pytest.raises(ValueError):
        solve_1d(y, 0.5, 1.0, "nope")


def test_bench_empty_solver_set():
    with pytest.raises(ValueError):
        bench("size", [])
    with pytest.raises(ValueError):
        bench("size", ["nope"])
    with pytest.raises(ValueError):
        bench("bogus", ["classic"])


def test_bench_size_monotone():
    rep = bench("size", ["classic"], grid=[1000, 10000, 100000], repeats=5)
    times = [c["wall_ns"] for c in rep["cells"]]
    assert times == sorted(times)
    assert {"scenario", "grid", "solver", "cells"} <= set(rep)
    assert all({"n", "lambda", "wall_ns", "inner_steps", "gap"} <= set(c) for c in rep["cells"])


def test_bench_penalty_trend():
    rep = bench("penalty", ["classic", "pn"], grid=[1e-3, 1e3], repeats=1)
    steps = {(c["solver"], c["lambda"]): c["inner_steps"] for c in rep["cells"]}
    # the direct method's work hardly moves with lam, the Newton method's does
    assert steps[("classic", 1e3)] <= 3 * steps[("classic", 1e-3)]
    assert steps[("pn", 1e3)] != steps[("pn", 1e-3)]


def test_bench_records_failures():
    rep = bench("size", ["msn", "classic"], grid=[10], repeats=1)
    cells = {c["solver"]: c for c in rep["cells"]}
    assert "error" in cells["msn"]
    assert "error" not in cells["classic"]

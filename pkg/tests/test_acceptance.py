"""Exit criteria. Each test records one PASS/FAIL line, printed in the terminal summary."""

import io
import os
import time
import warnings

import numpy as np
import pytest

from digraph_nash.config import fixture_path, load_experiment
from digraph_nash.engine import AlgoConfig, apply_operator_A, consensus_stack, mixed_norm, run
from digraph_nash.game_model import check_diagonal_dominance, check_monotonicity_sampled, step_size_bounds
from digraph_nash.games import osnr_constants, osnr_gradient, osnr_jacobian
from digraph_nash.harness import cmd_oracle
from digraph_nash.montecarlo import run_montecarlo
from digraph_nash.network import build_cycle_plus_random, build_row_stochastic

from .conftest import ACCEPTANCE_RESULTS, PRINTED_NE
from .test_games import box_points, fd_gradient_of_cost, fd_jacobian


def record(num, ok, detail):
    ACCEPTANCE_RESULTS.append((num, bool(ok), detail))
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def osnr_run(gamma=None, steps=None):
    exp = load_experiment(fixture_path("osnr_six_player"))
    cfg = exp.algo
    if gamma is not None or steps is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cfg = AlgoConfig(
                gamma=cfg.gamma if gamma is None else gamma,
                steps=cfg.steps if steps is None else steps,
                tol=cfg.tol,
                max_iters=cfg.max_iters,
                record_every=cfg.record_every,
            )
    x_star = exp.oracle()
    t0 = time.perf_counter()
    traj = run(exp.spec, exp.weight_matrix(), cfg, init=exp.init, oracle_ne=x_star)
    return exp, traj, x_star, time.perf_counter() - t0


@pytest.fixture(scope="module")
def reference_run():
    return osnr_run()


def test_c01_oracle_ne():
    exp = load_experiment(fixture_path("osnr_six_player"))
    t0 = time.perf_counter()
    code, res = cmd_oracle(exp, out=io.StringIO())
    elapsed = time.perf_counter() - t0
    dev = np.max(np.abs(res["x"] - PRINTED_NE))
    ok = code == 0 and dev <= 5e-4 and res["residual"] < 1e-9 and elapsed < 1.0
    record(1, ok, f"max |x* - printed| = {dev:.2e} (<= 5e-4), |F(x*)|_inf = {res['residual']:.1e} (< 1e-9), "
                  f"{elapsed:.3f}s (< 1s)")


def test_c02_step_size_bounds():
    exp = load_experiment(fixture_path("osnr_six_player"))
    t0 = time.perf_counter()
    bounds = step_size_bounds(osnr_constants(exp.game))
    elapsed = time.perf_counter() - t0
    truncated = np.floor(bounds * 100) / 100
    ok = np.array_equal(truncated, [0.08, 0.07, 0.07, 0.13, 0.12, 0.12]) and elapsed < 1.0
    record(2, ok, f"bounds {np.round(bounds, 4).tolist()} truncate to {truncated.tolist()}")


def test_c03_convergence(reference_run):
    _, traj, x_star, elapsed = reference_run
    err = np.max(np.abs(traj.actions - x_star))
    ok = traj.reason == "tolerance" and traj.iterations < 100_000 and err < 1e-4 and elapsed < 30
    record(3, ok, f"{traj.iterations} iterations ({traj.reason}), |x - x*|_inf = {err:.2e}, {elapsed:.2f}s")


def test_c04_gamma_scaling(reference_run):
    _, fast, _, _ = reference_run
    _, slow, _, _ = osnr_run(gamma=0.8)
    ratio = slow.iterations / fast.iterations
    record(4, 3 <= ratio <= 5, f"iters(0.8)/iters(0.2) = {slow.iterations}/{fast.iterations} = {ratio:.2f} in [3, 5]")


def test_c05_baseline_slowdown(reference_run):
    _, fast, _, _ = reference_run
    _, base, x_star, _ = osnr_run(gamma=0.0, steps=np.full(6, 0.0006))
    ratio = base.iterations / fast.iterations
    ok = base.reason == "tolerance" and ratio >= 10
    record(5, ok, f"baseline {base.iterations} vs {fast.iterations} iterations: {ratio:.1f}x (>= 10x)")


def _nonexpansive_violations(spec, W, steps, rng, pairs=1000):
    worst, bad = -np.inf, 0
    for _ in range(pairs):
        X = rng.uniform(spec.lower, spec.upper, (spec.num_agents, spec.n))
        Y = rng.uniform(spec.lower, spec.upper, (spec.num_agents, spec.n))
        lhs = mixed_norm(apply_operator_A(spec, W, steps, X) - apply_operator_A(spec, W, steps, Y), spec)
        gap = lhs - mixed_norm(X - Y, spec)
        worst = max(worst, gap)
        bad += gap > 1e-9
    return bad, worst


def test_c06_nonexpansiveness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    details, total_bad = [], 0
    for name in ("osnr_six_player", "linear_nonmonotone"):
        exp = load_experiment(fixture_path(name))
        graphs = {
            "cycle": exp.weight_matrix(),
            "random": build_row_stochastic(build_cycle_plus_random(exp.spec.num_agents, 0.5, 1)),
        }
        for label, W in graphs.items():
            bad, worst = _nonexpansive_violations(exp.spec, W, exp.algo.steps, rng)
            total_bad += bad
            details.append(f"{name}/{label}: {bad} violations, max gap {worst:.1e}")
    elapsed = time.perf_counter() - t0
    record(6, total_bad == 0 and elapsed < 60, "; ".join(details) + f"; {elapsed:.1f}s")


def test_c07_fejer_monotone():
    exp = load_experiment(fixture_path("osnr_six_player"))
    S = consensus_stack(exp.oracle(), exp.spec.num_agents)
    dist = [mixed_norm(exp.init - S, exp.spec)]
    run(exp.spec, exp.weight_matrix(), exp.algo, init=exp.init,
        callback=lambda k, X: dist.append(mixed_norm(X - S, exp.spec)))
    worst = float(np.max(np.diff(dist)))
    record(7, worst <= 1e-10, f"{len(dist) - 1} steps, largest increase of |x^k - 1(x)x*|_v = {worst:.1e}")


def test_c08_nonmonotone_convergence():
    exp = load_experiment(fixture_path("linear_nonmonotone"))
    slack = check_diagonal_dominance(exp.constants).slack
    lam = check_monotonicity_sampled(exp.spec, 100)
    traj = run(exp.spec, exp.weight_matrix(), exp.algo, init=exp.init, oracle_ne=np.zeros(2))
    err = float(np.linalg.norm(traj.actions))
    start = float(np.linalg.norm(exp.init[[0, 1], [0, 1]]))
    ok = (
        np.allclose(slack, [0.1, 1.0], atol=1e-12)
        and abs(lam - (11 - np.sqrt(179.01)) / 2) < 1e-9
        and lam < 0
        and err < 1e-6
        and start > 0.1
    )
    record(8, ok, f"slack {np.round(slack, 6).tolist()}, lambda_min = {lam:.4f}, "
                  f"|x_0| = {start:.2f} -> |x_K| = {err:.1e} after {traj.iterations} iterations")


def test_c09_derivatives():
    exp = load_experiment(fixture_path("osnr_six_player"))
    g = exp.game
    worst_grad = worst_jac = 0.0
    for x in box_points(g, 100, seed=99):
        exact = osnr_gradient(g, x)
        worst_grad = max(worst_grad, np.linalg.norm(fd_gradient_of_cost(g, x) - exact) / np.linalg.norm(exact))
        J = osnr_jacobian(g, x)
        worst_jac = max(worst_jac, float(np.max(np.abs(fd_jacobian(g, x) - J) / np.abs(J))))
    ok = worst_grad < 1e-6 and worst_jac < 1e-6
    record(9, ok, f"max relative error: gradient {worst_grad:.1e}, Jacobian {worst_jac:.1e} (< 1e-6)")


@pytest.mark.slow
def test_c10_montecarlo_trend():
    t0 = time.perf_counter()
    rep = run_montecarlo(10, [0.2, 0.5, 0.8], 100, seed=0, jobs=os.cpu_count() or 1)
    elapsed = time.perf_counter() - t0
    iters = [rep.by_gamma(g).mean_iters for g in (0.2, 0.5, 0.8)]
    errs = [rep.by_gamma(g).mean_error for g in (0.2, 0.5, 0.8)]
    ok = (
        iters[0] < iters[1] < iters[2]
        and max(errs) < 1e-3
        and rep.verify()
        and not rep.skipped
        and elapsed < 600
    )
    record(10, ok, f"mean iters {np.round(iters, 1).tolist()}, mean errors {[f'{e:.1e}' for e in errs]}, "
                   f"{elapsed:.0f}s")

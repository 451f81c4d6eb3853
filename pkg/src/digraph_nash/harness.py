"""Single-experiment commands: assumption checks, runs, and the equilibrium oracle."""

import io
import json
import sys
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .config import Experiment
from .engine import Trajectory, run
from .errors import NashError, OracleUnavailableError
from .game_model import (
    check_diagonal_dominance,
    check_monotonicity_sampled,
    pseudo_gradient,
    step_size_bounds,
)
from .games import OsnrGame, osnr_condition_check
from .network import is_strongly_connected, validate_weights

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _fmt(v):
    return "[" + ", ".join(f"{x:.6g}" for x in np.asarray(v).ravel()) + "]"


@dataclass
class CheckResult:
    connected: bool
    weights_ok: bool
    dominance: np.ndarray
    condition: object
    bounds: np.ndarray
    steps_ok: bool
    lambda_min: object

    @property
    def passed(self):
        ok = self.connected and self.weights_ok and bool(np.all(self.dominance >= 0)) and self.steps_ok
        if self.condition is not None:
            ok = ok and bool(np.all(self.condition > 0))
        return ok


def check(exp: Experiment, monotonicity_samples=1000, seed=0) -> CheckResult:
    connected = is_strongly_connected(exp.graph)
    if exp.weights_array is not None:
        weights_ok = validate_weights(exp.weights_array, exp.graph).ok and connected
    else:
        weights_ok = connected
    slack = check_diagonal_dominance(exp.constants).slack
    cond = osnr_condition_check(exp.game).margin if isinstance(exp.game, OsnrGame) else None
    bounds = step_size_bounds(exp.constants)
    steps_ok = bool(np.all(exp.algo.steps < bounds))
    lam = None
    if exp.spec.jacobian is not None:
        lam = check_monotonicity_sampled(exp.spec, monotonicity_samples, seed)
    return CheckResult(connected, weights_ok, slack, cond, bounds, steps_ok, lam)


def cmd_check(exp: Experiment, out=None, monotonicity_samples=1000) -> int:
    """Print the assumption report; exit status 0 iff every required check holds."""
    out = sys.stdout if out is None else out
    res = check(exp, monotonicity_samples)
    g = exp.graph
    print(f"game: {exp.spec.name} ({exp.spec.num_agents} agents, n = {exp.spec.n})", file=out)
    print(
        f"graph: {g.num_nodes} nodes, {len(g.edge_list())} edges plus self-loops; "
        f"strongly connected: {'yes' if res.connected else 'NO'}",
        file=out,
    )
    if exp.weights_array is not None:
        report = validate_weights(exp.weights_array, g)
        print(f"weights (explicit): {'valid' if report.ok else 'INVALID'}", file=out)
        for v in report.violations:
            print(f"  - {v}", file=out)
    else:
        print(f"weights (in-degree recipe): {'valid' if res.weights_ok else 'unavailable'}", file=out)
    dom = "holds" if np.all(res.dominance >= 0) else "FAILS"
    print(f"diagonal dominance: {dom}; slack = {_fmt(res.dominance)}", file=out)
    if np.any(res.dominance == 0):
        print("  warning: zero slack for some agents (dominance is not strict)", file=out)
    if res.condition is not None:
        cond = "holds" if np.all(res.condition > 0) else "FAILS"
        print(f"power condition a_i > sum_(j!=i) phi_ij: {cond}; margin = {_fmt(res.condition)}", file=out)
    print(f"step-size bounds 1/ell_ii: {_fmt(res.bounds)}", file=out)
    print(f"steps: {_fmt(exp.algo.steps)} ({'admissible' if res.steps_ok else 'NOT below the bounds'})", file=out)
    if res.lambda_min is not None:
        tag = "monotone on samples" if res.lambda_min >= 0 else "not monotone"
        print(f"sampled min eigenvalue of sym(Jacobian): {res.lambda_min:.6g} ({tag})", file=out)
    print(f"gamma: {exp.algo.gamma}", file=out)
    print("result: " + ("PASS" if res.passed else "FAIL"), file=out)
    return EXIT_OK if res.passed else EXIT_VALIDATION


def oracle_or_none(exp: Experiment):
    try:
        return exp.oracle()
    except OracleUnavailableError:
        return None


def cmd_run(exp: Experiment, force=False, out=None, write=True):
    """
    Run the iteration and write ``trajectory.csv``, ``weights.csv`` and
    ``summary.json`` into the output directory.

    Returns ``(exit_code, trajectory_or_None)``.
    """
    out = sys.stdout if out is None else out
    if not force and cmd_check(exp, out=io.StringIO()) != EXIT_OK:
        print("assumption check failed (see `check`); use --force to run anyway", file=out)
        return EXIT_VALIDATION, None
    W = exp.weight_matrix()
    x_star = oracle_or_none(exp)
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            traj = run(exp.spec, W, exp.algo, init=exp.init, oracle_ne=x_star)
    except NashError as exc:
        print(f"run failed: {exc}", file=out)
        return EXIT_RUNTIME, None
    wall = time.perf_counter() - t0
    summary = summarize(traj, x_star, wall)
    if write:
        exp.out_dir.mkdir(parents=True, exist_ok=True)
        traj.to_csv(exp.out_dir / "trajectory.csv")
        W.to_csv(exp.out_dir / "weights.csv")
        (exp.out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    err = summary.get("action_error_inf")
    err_txt = "n/a" if err is None else f"{err:.3e}"
    print(
        f"iterations={traj.iterations} reason={traj.reason} action_error_inf={err_txt} "
        f"consensus={summary['consensus_residual']:.3e} wall_time={wall:.3f}s",
        file=out,
    )
    return EXIT_OK, traj


def summarize(traj: Trajectory, x_star, wall_time):
    x = traj.actions
    out = {
        "iterations": traj.iterations,
        "reason": traj.reason,
        "actions": x.tolist(),
        "consensus_residual": float(traj.consensus_residual[-1]),
        "fixed_point_residual": float(traj.fixed_point_residual[-1]),
        "wall_time": wall_time,
    }
    if x_star is not None:
        out["action_error"] = float(np.linalg.norm(x - x_star))
        out["action_error_inf"] = float(np.max(np.abs(x - x_star)))
        out["estimate_error"] = float(np.linalg.norm(traj.state - np.asarray(x_star)[None, :]))
    return out


def cmd_oracle(exp: Experiment, out=None):
    """Print the equilibrium, its pseudo-gradient residual and whether it is interior."""
    out = sys.stdout if out is None else out
    try:
        x = exp.oracle()
    except OracleUnavailableError as exc:
        print(f"oracle unavailable: {exc}", file=out)
        return EXIT_RUNTIME, None
    spec = exp.spec
    F = pseudo_gradient(spec, x)
    fp = x - np.clip(x - F, spec.lower, spec.upper)
    interior = bool(np.all(x > spec.lower) and np.all(x < spec.upper))
    print("x* = " + ", ".join(f"{v + 0.0:.6f}" for v in x), file=out)
    print(f"|F(x*)|_inf = {np.max(np.abs(F)):.3e}", file=out)
    print(f"|x* - proj(x* - F(x*))|_inf = {np.max(np.abs(fp)):.3e}", file=out)
    print(f"interior: {'yes' if interior else 'no'}", file=out)
    return EXIT_OK, {"x": x, "residual": float(np.max(np.abs(F))), "interior": interior}


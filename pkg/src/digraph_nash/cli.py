"""Command-line entry point: ``digraph-nash {check,run,montecarlo,oracle}``."""

import argparse
import logging
import sys

from . import harness
from .config import fixture_path, load_experiment, parse_steps_flag
from .errors import ConfigError, NashError
from .montecarlo import run_montecarlo


def _experiment(args):
    overrides = {}
    if args.gamma is not None:
        overrides["algorithm.gamma"] = args.gamma
    if args.steps is not None:
        overrides["algorithm.steps"] = parse_steps_flag(args.steps)
    if args.seed is not None:
        overrides["algorithm.init_seed"] = args.seed
    if args.out is not None:
        overrides["output.dir"] = args.out
    path = args.config
    if args.fixture:
        path = fixture_path(args.fixture)
    if path is None:
        raise ConfigError("either --config or --fixture is required")
    return load_experiment(path, overrides)


def build_parser():
    parser = argparse.ArgumentParser(prog="digraph-nash", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment YAML file")
        p.add_argument("--fixture", help="bundled fixture name (osnr_six_player, linear_nonmonotone)")
        p.add_argument("--gamma", type=float)
        p.add_argument("--steps", help="'theorem1' or a comma-separated list")
        p.add_argument("--seed", type=int, help="seed for a random initial condition")
        p.add_argument("--out", help="output directory")

    common(sub.add_parser("check", help="report the convergence assumptions"))
    p_run = sub.add_parser("run", help="run the iteration and write trajectory CSV")
    common(p_run)
    p_run.add_argument("--force", action="store_true", help="run even if checks fail")
    common(sub.add_parser("oracle", help="print the equilibrium from the closed-form oracle"))

    p_mc = sub.add_parser("montecarlo", help="gamma sweep over random OSNR instances")
    p_mc.add_argument("--n", type=int, default=10, help="number of agents")
    p_mc.add_argument("--gammas", default="0.2,0.5,0.8")
    p_mc.add_argument("--instances", type=int, default=100)
    p_mc.add_argument("--seed", type=int, default=0)
    p_mc.add_argument("--jobs", type=int, default=1)
    p_mc.add_argument("--out", default="out/montecarlo")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        if args.command == "montecarlo":
            gammas = [float(g) for g in args.gammas.split(",")]
            report = run_montecarlo(args.n, gammas, args.instances, seed=args.seed, jobs=args.jobs)
            report.write_csv(args.out)
            for a in report.aggregates:
                print(
                    f"gamma={a.gamma:g} count={a.count} mean_error={a.mean_error:.3e} "
                    f"std_error={a.std_error:.3e} mean_iters={a.mean_iters:.1f} "
                    f"mean_wall_time={a.mean_wall_time:.4f}s"
                )
            if report.skipped:
                print(f"skipped instances: {report.skipped}")
            return harness.EXIT_OK
        exp = _experiment(args)
        if args.command == "check":
            return harness.cmd_check(exp)
        if args.command == "run":
            return harness.cmd_run(exp, force=args.force)[0]
        return harness.cmd_oracle(exp)[0]
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_VALIDATION
    except NashError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""
Monte-Carlo sweeps of the averaging parameter over random OSNR instances.

Instance ``r`` (``r = 1 .. R``) is drawn with seed ``seed + r``, so rows do
not depend on execution order and parallel runs match sequential ones.
"""

import csv
import hashlib
import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, field, fields
from functools import partial
from pathlib import Path

import numpy as np

from .engine import AlgoConfig, default_init, run
from .errors import GenerationError
from .game_model import step_size_bounds
from .games import osnr_closed_form_ne, osnr_constants, random_osnr_instance
from .network import build_row_stochastic

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class InstanceRow:
    instance: int
    seed: int
    gamma: float
    iterations: int
    terminal_error: float
    reason: str
    wall_time: float

    def key(self):
        """Deterministic fields as text (wall time excluded)."""
        return f"{self.instance},{self.seed},{self.gamma!r},{self.iterations},{self.terminal_error!r},{self.reason}"


@dataclass(frozen=True)
class Aggregate:
    gamma: float
    count: int
    mean_error: float
    std_error: float
    mean_iters: float
    mean_wall_time: float


def aggregate(rows, gammas):
    out = []
    for gamma in gammas:
        sel = [r for r in rows if r.gamma == gamma]
        if not sel:
            out.append(Aggregate(gamma, 0, np.nan, np.nan, np.nan, np.nan))
            continue
        err = np.array([r.terminal_error for r in sel])
        out.append(
            Aggregate(
                gamma=gamma,
                count=len(sel),
                mean_error=float(np.mean(err)),
                std_error=float(np.std(err)),
                mean_iters=float(np.mean([r.iterations for r in sel])),
                mean_wall_time=float(np.mean([r.wall_time for r in sel])),
            )
        )
    return out


def rows_checksum(rows):
    h = hashlib.sha256()
    for r in rows:
        h.update(r.key().encode())
        h.update(b"\n")
    return h.hexdigest()


@dataclass
class MonteCarloReport:
    num_agents: int
    gammas: tuple
    rows: list
    aggregates: list
    skipped: list = field(default_factory=list)
    checksum: str = ""

    def verify(self):
        """True iff aggregates and checksum are recomputable exactly from the rows."""
        again = aggregate(self.rows, self.gammas)
        same = all(
            all(a == b or (np.isnan(a) and np.isnan(b)) for a, b in zip(astuple(x), astuple(y)))
            for x, y in zip(again, self.aggregates)
        )
        return same and len(again) == len(self.aggregates) and rows_checksum(self.rows) == self.checksum

    def by_gamma(self, gamma):
        return next(a for a in self.aggregates if a.gamma == gamma)

    def write_csv(self, out_dir):
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "instances.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f.name for f in fields(InstanceRow)])
            for r in self.rows:
                w.writerow(
                    [r.instance, r.seed, repr(r.gamma), r.iterations, repr(r.terminal_error), r.reason, repr(r.wall_time)]
                )
        with open(out_dir / "summary.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f.name for f in fields(Aggregate)] + ["skipped", "rows_checksum"])
            for a in self.aggregates:
                w.writerow([repr(v) if isinstance(v, float) else v for v in astuple(a)] + [len(self.skipped), self.checksum])


def run_instance(r, num_agents, gammas, seed, safety=0.99, tol=1e-7, max_iters=10_000_000):
    """All gamma runs for instance ``r``; ``None`` if the instance could not be generated."""
    inst_seed = seed + r
    try:
        game, graph = random_osnr_instance(num_agents, inst_seed)
    except GenerationError as exc:
        log.warning("instance %d skipped: %s", r, exc)
        return None
    spec = game.to_spec()
    W = build_row_stochastic(graph)
    steps = safety * step_size_bounds(osnr_constants(game))
    x_star = osnr_closed_form_ne(game)
    init = default_init(spec)
    rows = []
    for gamma in gammas:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cfg = AlgoConfig(gamma=gamma, steps=steps, tol=tol, max_iters=max_iters, record_every=max_iters)
            t0 = time.perf_counter()
            traj = run(spec, W, cfg, init=init)
            wall = time.perf_counter() - t0
        err = float(np.linalg.norm(traj.actions - x_star))
        rows.append(InstanceRow(r, inst_seed, float(gamma), traj.iterations, err, traj.reason, wall))
    return rows


def run_montecarlo(num_agents, gammas, instances, seed=0, jobs=1, **run_kwargs) -> MonteCarloReport:
    if instances < 1:
        raise ValueError("need at least one instance")
    gammas = tuple(float(g) for g in gammas)
    for g in gammas:
        if not 0.0 <= g < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {g}")
    task = partial(run_instance, num_agents=num_agents, gammas=gammas, seed=seed, **run_kwargs)
    indices = range(1, instances + 1)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(task, indices))
    else:
        results = [task(r) for r in indices]
    rows, skipped = [], []
    for r, res in zip(indices, results):
        if res is None:
            skipped.append(r)
        else:
            rows.extend(res)
    return MonteCarloReport(
        num_agents=num_agents,
        gammas=gammas,
        rows=rows,
        aggregates=aggregate(rows, gammas),
        skipped=skipped,
        checksum=rows_checksum(rows),
    )

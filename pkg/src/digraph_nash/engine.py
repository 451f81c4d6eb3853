"""
Averaged projected-gradient iteration over a row-stochastic network.

Estimates are held in an ``(N, n)`` array ``X``: row ``i`` is agent ``i``'s
estimate of the full joint action and ``X[i, block(j)]`` its estimate of
agent ``j``. The own blocks ``X[i, block(i)]`` are the agents' actions.

One iteration is::

    X <- gamma * X + (1 - gamma) * A(X)
    A  = project o (Id - step * own-gradient) o mix

where ``mix`` multiplies by the weight matrix (blockwise, the Kronecker lift is
never formed), the gradient step only touches own blocks and uses the
gradient evaluated at the freshly mixed row, and the projection clamps own
blocks to the agents' boxes.
"""

import csv
import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DivergenceError, GradientEvaluationError, InvalidInputError
from .game_model import GameConstants, GameSpec, as_steps, step_size_bounds
from .network import WeightMatrix

log = logging.getLogger(__name__)

CSV_HEADER = ["iter", "action_error", "consensus_residual", "fixed_point_residual", "step_delta"]


def own_mask(game: GameSpec) -> np.ndarray:
    """Boolean ``(N, n)`` mask of the own blocks, in the same order as a flat joint vector."""
    mask = np.zeros((game.num_agents, game.n), dtype=bool)
    for i in range(game.num_agents):
        mask[i, game.block(i)] = True
    return mask


def actions(game: GameSpec, X) -> np.ndarray:
    """The joint action ``x`` made of every agent's own block."""
    return np.asarray(X)[own_mask(game)]


def consensus_stack(x, N: int) -> np.ndarray:
    """Every agent holding the same estimate ``x``."""
    return np.tile(np.asarray(x, dtype=float), (N, 1))


def default_init(game: GameSpec, seed=None) -> np.ndarray:
    """
    Own blocks at the box midpoints and all other estimates zero.

    With a seed, own blocks are drawn uniformly from the boxes and the other
    estimates uniformly from the estimated agents' boxes.
    """
    N, n = game.num_agents, game.n
    mask = own_mask(game)
    if seed is None:
        X = np.zeros((N, n))
        X[mask] = game.midpoint()
        return X
    rng = np.random.default_rng(seed)
    return game.lower + (game.upper - game.lower) * rng.random((N, n))


def _check_shape(game, X):
    X = np.asarray(X, dtype=float)
    if X.shape != (game.num_agents, game.n):
        raise InvalidInputError(
            f"estimate matrix must have shape ({game.num_agents}, {game.n}), got {X.shape}"
        )
    return X


def block_norms(game: GameSpec, X) -> np.ndarray:
    """``(N, N)`` array of Euclidean norms of the blocks ``X[i, block(j)]``."""
    X = np.asarray(X, dtype=float)
    if all(d == 1 for d in game.dims):
        return np.abs(X)
    return np.sqrt(np.add.reduceat(X * X, game.offsets[:-1], axis=1))


def mixed_norm(X, game: Optional[GameSpec] = None) -> float:
    """
    Largest Euclidean norm over all ``(i, j)`` blocks.

    Without a game, every entry is treated as a scalar block.
    """
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return 0.0
    if game is None:
        return float(np.max(np.abs(X)))
    return float(np.max(block_norms(game, X)))


def mix(W: WeightMatrix, X) -> np.ndarray:
    """Row ``i`` of the result is ``sum_j w_ij * X[j]``."""
    return W.matrix @ X


def extended_gradient(game: GameSpec, X) -> np.ndarray:
    """Own-block gradients, each evaluated at the owning agent's estimate row."""
    if game.batch_gradient is not None:
        try:
            return np.asarray(game.batch_gradient(X), dtype=float)
        except Exception:
            # rerun agent by agent to attach the failing index
            pass
    parts = []
    for i in range(game.num_agents):
        try:
            parts.append(np.asarray(game.partial_gradient(i, X[i]), dtype=float).reshape(-1))
        except Exception as exc:
            raise GradientEvaluationError(i, exc) from exc
    return np.concatenate(parts)


def gradient_step(game: GameSpec, steps, X, mask=None) -> np.ndarray:
    """``Id - R^T Lambda F``: own blocks move along minus their gradient, others are copied."""
    mask = own_mask(game) if mask is None else mask
    steps = np.repeat(np.asarray(steps, dtype=float), game.dims)
    out = np.array(X, dtype=float)
    out[mask] = out[mask] - steps * extended_gradient(game, X)
    return out


def project_estimates(game: GameSpec, X, mask=None) -> np.ndarray:
    """Clamp own blocks to the boxes; other estimates are unconstrained."""
    mask = own_mask(game) if mask is None else mask
    out = np.array(X, dtype=float)
    out[mask] = np.clip(out[mask], game.lower, game.upper)
    return out


def apply_operator_A(game: GameSpec, W: WeightMatrix, steps, X) -> np.ndarray:
    """One application of ``project o gradient_step o mix``."""
    X = _check_shape(game, X)
    steps = as_steps(steps, game.num_agents)
    mask = own_mask(game)
    return project_estimates(game, gradient_step(game, steps, mix(W, X), mask), mask)


def km_step(X, gamma, XA):
    """``gamma * X + (1 - gamma) * XA``; ``gamma`` weighs the old iterate."""
    if not 0.0 <= gamma < 1.0:
        raise InvalidInputError(f"gamma must lie in [0, 1), got {gamma}")
    return gamma * np.asarray(X, dtype=float) + (1.0 - gamma) * np.asarray(XA, dtype=float)


def consensus_residual(X) -> float:
    """Largest Euclidean distance between two agents' estimate rows."""
    X = np.asarray(X, dtype=float)
    diff = X[:, None, :] - X[None, :, :]
    return float(np.sqrt(np.max(np.sum(diff * diff, axis=-1))))


def metrics(X, game: GameSpec, W: WeightMatrix, steps, oracle_ne=None) -> dict:
    X = _check_shape(game, X)
    out = {
        "consensus_residual": consensus_residual(X),
        "fixed_point_residual": mixed_norm(X - apply_operator_A(game, W, steps, X), game),
    }
    if oracle_ne is not None:
        x_star = np.asarray(oracle_ne, dtype=float)
        out["action_error"] = float(np.linalg.norm(actions(game, X) - x_star))
        # every row against x*, not just the own blocks
        out["estimate_error"] = float(np.linalg.norm(X - x_star[None, :]))
    return out


@dataclass
class AlgoConfig:
    """
    Parameters of a run.

    ``gamma`` is the weight on the previous iterate; it must be below 1
    (``gamma = 1`` would leave every iterate unchanged). ``gamma = 0`` runs the
    unaveraged iteration and is accepted with a warning.
    """

    gamma: float
    steps: np.ndarray
    tol: float = 1e-7
    max_iters: int = 10_000_000
    record_every: int = 10

    def __post_init__(self):
        self.gamma = float(self.gamma)
        if not self.gamma < 1.0:
            raise InvalidInputError(
                f"gamma must be strictly less than 1 (gamma = 1 makes no updates), got {self.gamma}"
            )
        if self.gamma < 0.0:
            raise InvalidInputError(f"gamma must be nonnegative, got {self.gamma}")
        if self.gamma == 0.0:
            warnings.warn("gamma = 0: running without averaging", stacklevel=2)
        self.steps = np.asarray(self.steps, dtype=float).reshape(-1)
        if np.any(~np.isfinite(self.steps)) or np.any(self.steps <= 0):
            raise InvalidInputError("step sizes must be positive and finite")
        if not self.tol > 0:
            raise InvalidInputError("tol must be positive")
        if int(self.max_iters) < 1 or int(self.record_every) < 1:
            raise InvalidInputError("max_iters and record_every must be positive")
        self.max_iters = int(self.max_iters)
        self.record_every = int(self.record_every)

    def check_steps(self, constants: Optional[GameConstants] = None):
        """
        Compare the steps to ``1 / ell_ii``. Returns the list of offending
        agents (empty when admissible, or when no constants are known).
        """
        if constants is None:
            warnings.warn("no game constants supplied: step sizes not checked", stacklevel=2)
            return []
        bounds = step_size_bounds(constants)
        if bounds.shape != self.steps.shape:
            raise InvalidInputError("step count does not match the game")
        bad = np.flatnonzero(self.steps >= bounds).tolist()
        if bad:
            warnings.warn(f"step sizes of agents {bad} are not below 1/ell_ii", stacklevel=2)
        return bad


@dataclass
class Trajectory:
    iterations: int
    state: np.ndarray
    reason: str
    iters: np.ndarray
    action_error: np.ndarray
    consensus_residual: np.ndarray
    fixed_point_residual: np.ndarray
    step_delta: np.ndarray
    game: GameSpec = field(repr=False)

    @property
    def actions(self):
        return actions(self.game, self.state)

    def final(self):
        """Metrics of the last recorded sample."""
        return {
            "iter": int(self.iters[-1]),
            "action_error": float(self.action_error[-1]),
            "consensus_residual": float(self.consensus_residual[-1]),
            "fixed_point_residual": float(self.fixed_point_residual[-1]),
            "step_delta": float(self.step_delta[-1]),
        }

    def rows(self):
        for k in range(self.iters.size):
            ae = self.action_error[k]
            yield [
                str(int(self.iters[k])),
                "" if np.isnan(ae) else repr(float(ae)),
                repr(float(self.consensus_residual[k])),
                repr(float(self.fixed_point_residual[k])),
                repr(float(self.step_delta[k])),
            ]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            writer.writerows(self.rows())


def run(
    game: GameSpec,
    W: WeightMatrix,
    config: AlgoConfig,
    init=None,
    oracle_ne=None,
    constants: Optional[GameConstants] = None,
    callback: Optional[Callable[[int, np.ndarray], None]] = None,
) -> Trajectory:
    """
    Iterate until the Euclidean norm of the full stacked update drops below
    ``config.tol`` or ``config.max_iters`` updates have been made.

    Metrics are recorded every ``config.record_every`` iterations and at
    termination. ``callback(k, X)`` is called after every update with the new
    iterate (a read-only view); it must not keep references to ``X``.

    Raises
    ------
    DivergenceError
        When the iterate stops being finite.
    """
    if W.num_nodes != game.num_agents:
        raise InvalidInputError("weight matrix size does not match the number of agents")
    steps = as_steps(config.steps, game.num_agents)
    if constants is not None:
        config.check_steps(constants)
    X = default_init(game) if init is None else _check_shape(game, init).copy()
    mask = own_mask(game)
    if np.any(X[mask] < game.lower) or np.any(X[mask] > game.upper):
        raise InvalidInputError("initial actions must lie inside the boxes")
    if oracle_ne is not None:
        oracle_ne = np.asarray(oracle_ne, dtype=float)
        if oracle_ne.shape != (game.n,):
            raise InvalidInputError(f"oracle NE must have length {game.n}")

    Wm = W.matrix
    step_vec = np.repeat(steps, game.dims)
    lo, hi = game.lower, game.upper
    gamma, tol, stride = config.gamma, config.tol, config.record_every
    samples = []

    def record(k, X, delta):
        m = metrics(X, game, W, steps, oracle_ne)
        samples.append(
            (k, m.get("action_error", np.nan), m["consensus_residual"], m["fixed_point_residual"], delta)
        )

    reason = "max_iters"
    k = 0
    while k < config.max_iters:
        Xh = Wm @ X
        XA = Xh.copy()
        XA[mask] = np.clip(Xh[mask] - step_vec * extended_gradient(game, Xh), lo, hi)
        Xn = XA if gamma == 0.0 else gamma * X + (1.0 - gamma) * XA
        diff = Xn - X
        delta = float(np.sqrt(np.sum(diff * diff)))
        k += 1
        if not np.isfinite(delta) or not np.all(np.isfinite(Xn)):
            last = dict(zip(CSV_HEADER, samples[-1])) if samples else None
            raise DivergenceError(k, last)
        X = Xn
        if callback is not None:
            view = X.view()
            view.flags.writeable = False
            callback(k, view)
        if delta < tol:
            reason = "tolerance"
            break
        if k % stride == 0:
            record(k, X, delta)
    if not samples or samples[-1][0] != k:
        record(k, X, delta)
    log.debug("run finished after %d iterations (%s)", k, reason)

    cols = list(zip(*samples))
    return Trajectory(
        iterations=k,
        state=X,
        reason=reason,
        iters=np.array(cols[0], dtype=int),
        action_error=np.array(cols[1], dtype=float),
        consensus_residual=np.array(cols[2], dtype=float),
        fixed_point_residual=np.array(cols[3], dtype=float),
        step_delta=np.array(cols[4], dtype=float),
        game=game,
    )

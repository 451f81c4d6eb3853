"""
Games in partial-decision form, their regularity constants, and the
checks that gate the distributed iteration.

A game is described by per-agent box action sets and a partial-gradient
evaluator. Joint points are flat vectors of length ``n = sum(dims)``; the
block of agent ``i`` occupies ``offsets[i]:offsets[i + 1]``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateGameError, InvalidInputError, UnsupportedDiagnosticError


@dataclass(frozen=True)
class GameSpec:
    """
    A game with box action sets.

    Parameters
    ----------
    dims : sequence of int
        Action dimension of every agent.
    lower, upper : array_like
        Box bounds, flattened over all agents (length ``n``).
    partial_gradient : callable
        ``partial_gradient(i, y)`` returns the gradient of agent ``i``'s cost
        with respect to its own action, at the joint point ``y``.
    jacobian : callable, optional
        ``jacobian(y)`` returns the ``n x n`` Jacobian of the pseudo-gradient.
    batch_gradient : callable, optional
        ``batch_gradient(Y)`` takes an ``(N, n)`` array whose row ``i`` is the
        joint point seen by agent ``i`` and returns the length-``n`` vector of
        own-block gradients. Used as a fast path by the engine; it must agree
        with ``partial_gradient``.
    name : str
        Label used in reports.
    """

    dims: tuple
    lower: np.ndarray
    upper: np.ndarray
    partial_gradient: Callable[[int, np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None
    batch_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "game"
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d <= 0 for d in dims):
            raise InvalidInputError(f"dims must be positive integers, got {self.dims}")
        lower = np.array(self.lower, dtype=float).reshape(-1)
        upper = np.array(self.upper, dtype=float).reshape(-1)
        n = sum(dims)
        if lower.shape != (n,) or upper.shape != (n,):
            raise InvalidInputError(f"box bounds must have length {n}")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise InvalidInputError("box bounds must be finite")
        if np.any(lower > upper):
            raise InvalidInputError("empty box: lower > upper for some component")
        lower.setflags(write=False)
        upper.setflags(write=False)
        offsets = np.concatenate(([0], np.cumsum(dims)))
        offsets.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "offsets", offsets)

    @property
    def num_agents(self):
        return len(self.dims)

    @property
    def n(self):
        return int(self.offsets[-1])

    def block(self, i):
        """Slice of agent ``i`` inside a joint vector."""
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def midpoint(self):
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True)
class GameConstants:
    """
    Strong-convexity moduli and cross-Lipschitz constants.

    ``ell[i, j]`` bounds how fast agent ``i``'s partial gradient changes with
    agent ``j``'s action; ``ell[i, i]`` is the self-Lipschitz constant.
    """

    mu: np.ndarray
    ell: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).reshape(-1)
        ell = np.array(self.ell, dtype=float)
        N = mu.size
        if ell.shape != (N, N):
            raise InvalidInputError(f"ell must be {N}x{N}, got shape {ell.shape}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(ell))):
            raise InvalidInputError("constants must be finite")
        if np.any(mu < 0) or np.any(ell < 0):
            raise InvalidInputError("constants must be nonnegative")
        if np.any(mu > np.diag(ell)):
            raise InvalidInputError("strong-convexity modulus exceeds self-Lipschitz constant")
        mu.setflags(write=False)
        ell.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "ell", ell)

    @property
    def num_agents(self):
        return self.mu.size

    @property
    def global_ell(self):
        """Max row sum of ``ell``, a Lipschitz bound for the whole pseudo-gradient."""
        return float(self.ell.sum(axis=1).max())

    def cross_sums(self):
        """``sum_{j != i} ell[i, j]`` for every agent."""
        return self.ell.sum(axis=1) - np.diag(self.ell)


@dataclass(frozen=True)
class DominanceReport:
    slack: np.ndarray

    @property
    def per_agent(self):
        return self.slack >= 0

    @property
    def holds(self):
        return bool(np.all(self.slack >= 0))

    @property
    def strict(self):
        return bool(np.all(self.slack > 0))


def _check_agent(game, i):
    if not 0 <= i < game.num_agents:
        raise InvalidInputError(f"agent index {i} out of range [0, {game.num_agents})")


def evaluate_partial_gradient(game: GameSpec, i: int, y) -> np.ndarray:
    """Gradient of agent ``i``'s cost in its own action, at joint point ``y``."""
    _check_agent(game, i)
    y = np.asarray(y, dtype=float)
    if y.shape != (game.n,):
        raise InvalidInputError(f"joint point must have shape ({game.n},), got {y.shape}")
    g = np.asarray(game.partial_gradient(i, y), dtype=float).reshape(-1)
    if g.shape != (game.dims[i],):
        raise InvalidInputError(
            f"partial gradient of agent {i} has length {g.size}, expected {game.dims[i]}"
        )
    return g


def pseudo_gradient(game: GameSpec, y) -> np.ndarray:
    """Stack of all partial gradients at a single joint point."""
    return np.concatenate([evaluate_partial_gradient(game, i, y) for i in range(game.num_agents)])


def project_action(game: GameSpec, i: int, v) -> np.ndarray:
    """Euclidean projection of ``v`` onto agent ``i``'s box."""
    _check_agent(game, i)
    v = np.asarray(v, dtype=float).reshape(-1)
    blk = game.block(i)
    if v.shape != (game.dims[i],):
        raise InvalidInputError(f"agent {i} action must have length {game.dims[i]}")
    return np.clip(v, game.lower[blk], game.upper[blk])


def check_diagonal_dominance(c: GameConstants) -> DominanceReport:
    """Per-agent slack ``mu_i - sum_{j != i} ell_ij``; dominance holds iff all slacks are >= 0."""
    return DominanceReport(slack=c.mu - c.cross_sums())


def step_size_bounds(c: GameConstants) -> np.ndarray:
    """
    Strict upper bounds ``1 / ell_ii`` on the step sizes.

    The bounds only involve each agent's own constants, so they are valid for
    any communication graph.
    """
    diag = np.diag(c.ell)
    if np.any(diag <= 0):
        bad = np.flatnonzero(diag <= 0).tolist()
        raise DegenerateGameError(f"self-Lipschitz constant is zero for agents {bad}")
    return 1.0 / diag


def contraction_factors(c: GameConstants, steps) -> np.ndarray:
    """``1 - a_i mu_i + a_i sum_{j != i} ell_ij``; at most one under dominance."""
    steps = np.asarray(steps, dtype=float)
    return 1.0 - steps * c.mu + steps * c.cross_sums()


def sample_box(game: GameSpec, count: int, rng) -> np.ndarray:
    """Uniform samples from the joint box, shape ``(count, n)``."""
    return game.lower + (game.upper - game.lower) * rng.random((count, game.n))


def check_monotonicity_sampled(game: GameSpec, sample_count: int = 1000, seed=0) -> float:
    """
    Smallest eigenvalue of the symmetric part of the Jacobian over box samples.

    A negative return value certifies that the pseudo-gradient is not
    monotone on the box.
    """
    if game.jacobian is None:
        raise UnsupportedDiagnosticError(f"game '{game.name}' has no Jacobian evaluator")
    rng = np.random.default_rng(seed)
    worst = np.inf
    for y in sample_box(game, sample_count, rng):
        J = np.asarray(game.jacobian(y), dtype=float)
        lam = np.linalg.eigvalsh(0.5 * (J + J.T))[0]
        worst = min(worst, lam)
    return float(worst)


def estimate_constants_sampled(game: GameSpec, sample_count: int = 10_000, seed=0) -> GameConstants:
    """
    Sampling fallback for the game constants.

    ``ell[i, j]`` is the largest spectral norm of the ``(i, j)`` Jacobian block
    seen over uniform box samples; ``mu[i]`` is the smallest eigenvalue of the
    symmetric part of the ``(i, i)`` block. These are estimates, not
    certified bounds.
    """
    if game.jacobian is None:
        raise UnsupportedDiagnosticError(f"game '{game.name}' has no Jacobian evaluator")
    rng = np.random.default_rng(seed)
    N = game.num_agents
    ell = np.zeros((N, N))
    mu = np.full(N, np.inf)
    for y in sample_box(game, sample_count, rng):
        J = np.asarray(game.jacobian(y), dtype=float)
        for i in range(N):
            bi = game.block(i)
            for j in range(N):
                ell[i, j] = max(ell[i, j], np.linalg.norm(J[bi, game.block(j)], 2))
            Jii = J[bi, bi]
            mu[i] = min(mu[i], np.linalg.eigvalsh(0.5 * (Jii + Jii.T))[0])
    mu = np.clip(mu, 0.0, np.diag(ell))
    return GameConstants(mu=mu, ell=ell)


def check_gradient_continuity(game: GameSpec, sample_count: int = 200, seed=0, rel_step=1e-7):
    """
    Spot check: returns the largest change in any partial gradient under a
    tiny perturbation of random box points. Large values flag discontinuities.
    """
    rng = np.random.default_rng(seed)
    scale = np.maximum(game.upper - game.lower, 1.0)
    worst = 0.0
    for y in sample_box(game, sample_count, rng):
        dy = rel_step * scale * rng.standard_normal(game.n)
        diff = pseudo_gradient(game, y + dy) - pseudo_gradient(game, y)
        worst = max(worst, float(np.max(np.abs(diff))))
    return worst


def as_steps(steps: Sequence[float], num_agents: int) -> np.ndarray:
    steps = np.asarray(steps, dtype=float).reshape(-1)
    if steps.shape != (num_agents,):
        raise InvalidInputError(f"need {num_agents} step sizes, got {steps.size}")
    if np.any(~np.isfinite(steps)) or np.any(steps <= 0):
        raise InvalidInputError("step sizes must be positive and finite")
    return steps

"""
Built-in games.

* :class:`OsnrGame` -- power control in optical networks with linear pricing
  and an OSNR-like utility. Actions are channel powers in mW.
* :class:`LinearGame` -- scalar agents with pseudo-gradient ``A x + b``.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GenerationError, InvalidInputError, OracleUnavailableError
from .game_model import GameConstants, GameSpec
from .network import build_cycle_plus_random


@dataclass(frozen=True)
class OsnrGame:
    """
    Parameters
    ----------
    eta, beta, a : array_like
        Pricing, utility weight and OSNR gain of every channel.
    phi : array_like
        ``N x N`` system matrix.
    n0 : float
        Input noise power (mW).
    x_min, x_max : float
        Common power interval of every channel (mW).
    """

    eta: np.ndarray
    beta: np.ndarray
    a: np.ndarray
    phi: np.ndarray
    n0: float
    x_min: float
    x_max: float

    def __post_init__(self):
        arrs = {}
        for name in ("eta", "beta", "a"):
            arrs[name] = np.array(getattr(self, name), dtype=float).reshape(-1)
        N = arrs["eta"].size
        phi = np.array(self.phi, dtype=float)
        if phi.shape != (N, N) or arrs["beta"].size != N or arrs["a"].size != N:
            raise InvalidInputError("eta, beta, a and phi dimensions disagree")
        for name, v in arrs.items():
            if np.any(v <= 0):
                raise InvalidInputError(f"{name} must be positive")
        if np.any(phi <= 0):
            raise InvalidInputError("phi must be positive")
        if not self.n0 >= 0:
            raise InvalidInputError("n0 must be nonnegative")
        if not 0 <= self.x_min < self.x_max:
            raise InvalidInputError("need 0 <= x_min < x_max")
        for name, v in arrs.items():
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "n0", float(self.n0))
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))

    @property
    def num_agents(self):
        return self.eta.size

    @property
    def phi_tilde(self):
        """``phi`` with its diagonal replaced by ``a``."""
        pt = self.phi.copy()
        np.fill_diagonal(pt, self.a)
        return pt

    def to_spec(self) -> GameSpec:
        pt = self.phi_tilde
        N = self.num_agents
        ab = self.a * self.beta
        c = self.eta + self.beta

        def partial_gradient(i, y):
            return np.array([osnr_gradient_row(self, i, y, pt)])

        def batch_gradient(Y):
            denom = self.n0 + np.einsum("ij,ij->i", pt, Y)
            if np.any(denom <= 0):
                bad = np.flatnonzero(denom <= 0).tolist()
                raise DomainError(f"nonpositive OSNR denominator for agents {bad}")
            return c - ab / denom

        return GameSpec(
            dims=(1,) * N,
            lower=np.full(N, self.x_min),
            upper=np.full(N, self.x_max),
            partial_gradient=partial_gradient,
            jacobian=lambda y: osnr_jacobian(self, y),
            batch_gradient=batch_gradient,
            name="osnr",
        )


def _denominators(g: OsnrGame, x, pt=None):
    pt = g.phi_tilde if pt is None else pt
    x = np.asarray(x, dtype=float)
    if x.shape != (g.num_agents,):
        raise InvalidInputError(f"power vector must have length {g.num_agents}")
    d = g.n0 + pt @ x
    if np.any(d <= 0):
        raise DomainError(f"nonpositive OSNR denominator for agents {np.flatnonzero(d <= 0).tolist()}")
    return d


def osnr_gradient_row(g: OsnrGame, i, y, pt=None):
    pt = g.phi_tilde if pt is None else pt
    d = g.n0 + float(pt[i] @ np.asarray(y, dtype=float))
    if d <= 0:
        raise DomainError(f"nonpositive OSNR denominator for agent {i}")
    return g.eta[i] + g.beta[i] - g.a[i] * g.beta[i] / d


def osnr_gradient(g: OsnrGame, x) -> np.ndarray:
    """Pseudo-gradient ``eta_i + beta_i - a_i beta_i / (n0 + sum_j phi~_ij x_j)``."""
    return g.eta + g.beta - g.a * g.beta / _denominators(g, x)


def osnr_jacobian(g: OsnrGame, x) -> np.ndarray:
    """``Theta_ij = a_i beta_i phi~_ij / (n0 + sum_k phi~_ik x_k)^2``."""
    pt = g.phi_tilde
    d = _denominators(g, x, pt)
    return (g.a * g.beta / d**2)[:, None] * pt


def osnr_osnr(g: OsnrGame, x) -> np.ndarray:
    """Signal-to-noise ratio ``x_i / (n0 + sum_j phi_ij x_j)`` of every channel."""
    x = np.asarray(x, dtype=float)
    return x / (g.n0 + g.phi @ x)


def osnr_cost(g: OsnrGame, x) -> np.ndarray:
    """Cost of every channel at the joint power vector ``x``."""
    x = np.asarray(x, dtype=float)
    r = osnr_osnr(g, x)
    phi_ii = np.diag(g.phi)
    return g.eta * x - g.beta * (np.log1p(g.a * r / (1.0 - phi_ii * r)) - x)


@dataclass(frozen=True)
class ConditionReport:
    margin: np.ndarray

    @property
    def per_agent(self):
        return self.margin > 0

    @property
    def holds(self):
        return bool(np.all(self.margin > 0))


def osnr_condition_check(g: OsnrGame) -> ConditionReport:
    """Strict diagonal dominance of ``phi~``: margins ``a_i - sum_{j != i} phi_ij``."""
    off = g.phi.sum(axis=1) - np.diag(g.phi)
    return ConditionReport(margin=g.a - off)


def osnr_constants(g: OsnrGame) -> GameConstants:
    """
    Constants over the box from monotonicity of ``Theta`` in ``x``.

    Every entry of ``Theta`` decreases in every coordinate, so its supremum
    over the box is at ``x_min * 1`` and its infimum at ``x_max * 1``.
    """
    N = g.num_agents
    ell = osnr_jacobian(g, np.full(N, g.x_min))
    mu = np.diag(osnr_jacobian(g, np.full(N, g.x_max)))
    return GameConstants(mu=mu, ell=ell)


def osnr_closed_form_ne(g: OsnrGame):
    """
    Inner equilibrium ``phi~^{-1} C`` with ``C_i = a_i beta_i / (eta_i + beta_i) - n0``.

    Returns ``None`` (with a warning) when the solution leaves the box, since it
    is then not an equilibrium of the constrained game.
    """
    C = g.a * g.beta / (g.eta + g.beta) - g.n0
    try:
        x = np.linalg.solve(g.phi_tilde, C)
    except np.linalg.LinAlgError as exc:
        raise OracleUnavailableError("phi~ is singular") from exc
    if np.any(x < g.x_min) or np.any(x > g.x_max):
        warnings.warn("closed-form solution lies outside the power box; no oracle", stacklevel=2)
        return None
    return x


@dataclass(frozen=True)
class LinearGame:
    """Scalar agents, pseudo-gradient ``A x + b`` on a box."""

    A: np.ndarray
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        n = A.shape[0]
        if A.shape != (n, n):
            raise InvalidInputError("A must be square")
        vals = {}
        for name in ("b", "lower", "upper"):
            v = np.array(getattr(self, name), dtype=float).reshape(-1)
            if v.size == 1 and n > 1:
                v = np.full(n, v[0])
            if v.shape != (n,):
                raise InvalidInputError(f"{name} must have length {n}")
            v.setflags(write=False)
            vals[name] = v
        if np.any(vals["lower"] > vals["upper"]):
            raise InvalidInputError("empty box")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        for name, v in vals.items():
            object.__setattr__(self, name, v)

    @property
    def num_agents(self):
        return self.A.shape[0]

    def gradient(self, x):
        return self.A @ np.asarray(x, dtype=float) + self.b

    def constants(self) -> GameConstants:
        """``mu_i = A_ii``, ``ell_ij = |A_ij|`` (exact for a linear map)."""
        return GameConstants(mu=np.diag(self.A).clip(min=0.0), ell=np.abs(self.A))

    def to_spec(self) -> GameSpec:
        A, b = self.A, self.b
        return GameSpec(
            dims=(1,) * self.num_agents,
            lower=self.lower,
            upper=self.upper,
            partial_gradient=lambda i, y: np.array([A[i] @ y + b[i]]),
            jacobian=lambda y: A.copy(),
            batch_gradient=lambda Y: np.einsum("ij,ij->i", A, Y) + b,
            name="linear",
        )


def nonmonotone_linear_game(half_width=1.0) -> LinearGame:
    """Two scalar agents, diagonally dominant but with a non-monotone pseudo-gradient."""
    A = np.array([[1.0, -0.9], [-9.0, 10.0]])
    return LinearGame(A=A, b=np.zeros(2), lower=np.full(2, -half_width), upper=np.full(2, half_width))


def linear_game_oracle(g: LinearGame, tol=1e-12, max_iters=1_000_000) -> np.ndarray:
    """
    Equilibrium of a linear game.

    Tries the unconstrained solution of ``A x = -b`` first; if it leaves the
    box, runs the projected Jacobi iteration ``x <- clip(x - (A x + b) / A_ii)``,
    a contraction in the max norm under strict row dominance.
    """
    A, b = g.A, g.b
    diag = np.diag(A)
    off = np.abs(A).sum(axis=1) - np.abs(diag)
    dominant = bool(np.all(diag > off))
    try:
        x = np.linalg.solve(A, -b)
    except np.linalg.LinAlgError:
        x = None
    if x is not None and np.all(x >= g.lower) and np.all(x <= g.upper):
        return x
    if not dominant:
        raise OracleUnavailableError("no interior solution and A is not strictly row dominant")
    x = np.clip(np.zeros_like(b), g.lower, g.upper)
    for _ in range(max_iters):
        xn = np.clip(x - (A @ x + b) / diag, g.lower, g.upper)
        if np.max(np.abs(xn - x)) < tol:
            return xn
        x = xn
    raise OracleUnavailableError("projected fixed-point iteration did not converge")


def random_osnr_instance(N: int, seed, max_retries=100, edge_prob=0.3):
    """
    Random OSNR game and communication graph.

    ``phi`` entries uniform in [6.8e-5, 7.5e-5], ``a`` in [0.1, 0.5], ``beta``
    in [0.3, 0.52], ``eta = 1``, ``n0 = 0.43e-6`` mW, box [0.2, 2] mW. Draws
    are repeated until the diagonal condition holds and the closed-form
    equilibrium is strictly inside the box.
    """
    if N < 2:
        raise InvalidInputError("N must be at least 2")
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        game = OsnrGame(
            eta=np.ones(N),
            beta=rng.uniform(0.3, 0.52, N),
            a=rng.uniform(0.1, 0.5, N),
            phi=rng.uniform(6.8e-5, 7.5e-5, (N, N)),
            n0=0.43e-6,
            x_min=0.2,
            x_max=2.0,
        )
        if not osnr_condition_check(game).holds:
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            x = osnr_closed_form_ne(game)
        if x is not None and np.all(x > game.x_min) and np.all(x < game.x_max):
            return game, build_cycle_plus_random(N, edge_prob, seed)
    raise GenerationError(f"no valid instance for N={N}, seed={seed} after {max_retries} draws")


def six_player_osnr() -> OsnrGame:
    """The six-channel instance shipped as the ``osnr_six_player`` fixture."""
    from .config import load_fixture, build_game

    return build_game(load_fixture("osnr_six_player")["game"])[0]

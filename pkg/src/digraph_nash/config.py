"""
Experiment configuration: YAML documents validated against a JSON schema.

Top-level sections::

    game:       {builtin: osnr|linear|nonmonotone|osnr_random, params: {...}}
                or {fixture: <bundled name or path to a YAML file>}
    graph:      {generator: cycle|cycle_plus_random, n, p, seed}
                or {edges: [[source, target], ...], n}
                optional weights: N x N matrix (default: the in-degree recipe)
    algorithm:  {gamma, steps: theorem1 | [a_1, ..., a_N], safety, tol,
                 max_iters, init_seed}
    output:     {dir, stride}

Edges are 0-based ``[source, target]`` pairs: ``target`` receives from
``source``.
"""

import copy
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np
import yaml

from .engine import AlgoConfig, default_init
from .errors import ConfigError, InvalidInputError, OracleUnavailableError
from .game_model import GameConstants, GameSpec, step_size_bounds
from .games import (
    LinearGame,
    OsnrGame,
    linear_game_oracle,
    osnr_closed_form_ne,
    osnr_constants,
    random_osnr_instance,
    nonmonotone_linear_game,
)
from .network import DiGraph, WeightMatrix, build_cycle_plus_random, build_row_stochastic, cycle_graph

_num_list = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_matrix = {"type": "array", "items": _num_list, "minItems": 1}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["game"],
    "additionalProperties": False,
    "properties": {
        "game": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "builtin": {"enum": ["osnr", "linear", "nonmonotone", "osnr_random"]},
                "fixture": {"type": "string"},
                "params": {"type": "object"},
            },
            "oneOf": [{"required": ["builtin"]}, {"required": ["fixture"]}],
        },
        "graph": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "generator": {"enum": ["cycle", "cycle_plus_random"]},
                "edges": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": {"type": "integer", "minimum": 0},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
                "n": {"type": "integer", "minimum": 1},
                "p": {"type": "number", "minimum": 0, "maximum": 1},
                "seed": {"type": ["integer", "null"]},
                "weights": _matrix,
            },
        },
        "algorithm": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gamma": {"type": "number"},
                "steps": {"oneOf": [{"const": "theorem1"}, _num_list]},
                "safety": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iters": {"type": "integer", "minimum": 1},
                "init_seed": {"type": ["integer", "null"]},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "stride": {"type": "integer", "minimum": 1},
            },
        },
    },
}

PARAM_SCHEMAS = {
    "osnr": {
        "type": "object",
        "required": ["beta", "a", "phi", "n0", "x_min", "x_max"],
        "additionalProperties": False,
        "properties": {
            "eta": _num_list,
            "beta": _num_list,
            "a": _num_list,
            "phi": _matrix,
            "phi_scale": {"type": "number", "exclusiveMinimum": 0},
            "n0": {"type": "number", "minimum": 0},
            "x_min": {"type": "number"},
            "x_max": {"type": "number"},
        },
    },
    "linear": {
        "type": "object",
        "required": ["A", "lower", "upper"],
        "additionalProperties": False,
        "properties": {"A": _matrix, "b": _num_list, "lower": _num_list, "upper": _num_list},
    },
    "nonmonotone": {
        "type": "object",
        "additionalProperties": False,
        "properties": {"half_width": {"type": "number", "exclusiveMinimum": 0}},
    },
    "osnr_random": {
        "type": "object",
        "required": ["n", "seed"],
        "additionalProperties": False,
        "properties": {"n": {"type": "integer", "minimum": 2}, "seed": {"type": "integer"}},
    },
}

DEFAULT_ALGORITHM = {
    "gamma": 0.2,
    "steps": "theorem1",
    "safety": 0.99,
    "tol": 1e-7,
    "max_iters": 10_000_000,
    "init_seed": None,
}
DEFAULT_OUTPUT = {"dir": "out", "stride": 10}


def _validate(doc, schema, prefix=""):
    validator = jsonschema.Draft7Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        loc = ".".join(str(p) for p in [prefix, *err.absolute_path] if p != "")
        raise ConfigError(err.message, loc)


def load_fixture(name):
    """Parsed YAML of a bundled fixture (``osnr_six_player``, ``linear_nonmonotone``)."""
    ref = resources.files("digraph_nash") / "fixtures" / f"{name}.yaml"
    if not ref.is_file():
        raise ConfigError(f"unknown fixture '{name}'", "game.fixture")
    return yaml.safe_load(ref.read_text())


def fixture_path(name) -> Path:
    return Path(str(resources.files("digraph_nash") / "fixtures" / f"{name}.yaml"))


def load_document(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else str(path)
        raise ConfigError(f"YAML parse error: {getattr(exc, 'problem', exc)}", where) from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping", str(path))
    return doc


def _resolve_game_section(section, base_dir=None):
    if "fixture" not in section:
        return section
    ref = section["fixture"]
    candidate = Path(ref) if base_dir is None else Path(base_dir) / ref
    if candidate.suffix in (".yaml", ".yml") and candidate.is_file():
        doc = load_document(candidate)
    elif Path(ref).is_file():
        doc = load_document(ref)
    else:
        doc = load_fixture(ref)
    if "game" not in doc or "fixture" in doc["game"]:
        raise ConfigError("fixture must contain a builtin game section", "game.fixture")
    return doc["game"]


def build_game(section, base_dir=None):
    """
    Returns ``(game, spec, constants, oracle)`` where ``oracle()`` computes the
    equilibrium (or raises :class:`OracleUnavailableError`).
    """
    section = _resolve_game_section(section, base_dir)
    kind = section["builtin"]
    params = section.get("params", {}) or {}
    _validate(params, PARAM_SCHEMAS[kind], "game.params")
    try:
        if kind == "osnr":
            N = len(params["beta"])
            game = OsnrGame(
                eta=params.get("eta", np.ones(N)),
                beta=params["beta"],
                a=params["a"],
                phi=np.asarray(params["phi"], dtype=float) * params.get("phi_scale", 1.0),
                n0=params["n0"],
                x_min=params["x_min"],
                x_max=params["x_max"],
            )
        elif kind == "osnr_random":
            game, _ = random_osnr_instance(params["n"], params["seed"])
        elif kind == "linear":
            n = len(params["A"])
            game = LinearGame(
                A=params["A"], b=params.get("b", np.zeros(n)), lower=params["lower"], upper=params["upper"]
            )
        else:
            game = nonmonotone_linear_game(params.get("half_width", 1.0))
    except InvalidInputError as exc:
        raise ConfigError(str(exc), "game.params") from exc
    if isinstance(game, OsnrGame):
        constants = osnr_constants(game)

        def oracle():
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                x = osnr_closed_form_ne(game)
            if x is None:
                raise OracleUnavailableError("closed-form equilibrium lies outside the box")
            return x

    else:
        constants = game.constants()

        def oracle():
            return linear_game_oracle(game)

    return game, game.to_spec(), constants, oracle


def build_graph(section, num_agents):
    """Returns ``(graph, weight_matrix_array)``; the array is ``None`` when the recipe applies."""
    section = section or {"generator": "cycle"}
    n = section.get("n", num_agents)
    if n != num_agents:
        raise ConfigError(f"graph has {n} nodes but the game has {num_agents} agents", "graph.n")
    if "edges" in section:
        try:
            g = DiGraph(n, frozenset(tuple(e) for e in section["edges"]))
        except InvalidInputError as exc:
            raise ConfigError(str(exc), "graph.edges") from exc
    else:
        gen = section.get("generator", "cycle")
        if gen == "cycle":
            g = cycle_graph(n)
        else:
            if n < 2:
                raise ConfigError("cycle_plus_random needs at least 2 nodes", "graph.n")
            g = build_cycle_plus_random(n, section.get("p", 0.3), section.get("seed"))
    weights = section.get("weights")
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
    return g, weights


@dataclass
class Experiment:
    raw: dict
    game: object
    spec: GameSpec
    constants: GameConstants
    oracle: object
    graph: DiGraph
    weights_array: Optional[np.ndarray]
    algo: AlgoConfig
    init: np.ndarray
    out_dir: Path

    def weight_matrix(self) -> WeightMatrix:
        """Build and validate the weights; raises on an invalid graph or matrix."""
        if self.weights_array is None:
            return build_row_stochastic(self.graph)
        return WeightMatrix(self.weights_array, self.graph)


def resolve_steps(steps, constants: GameConstants, safety=0.99):
    """``theorem1`` resolves to ``safety / ell_ii``; explicit lists pass through."""
    if isinstance(steps, str):
        if steps != "theorem1":
            raise ConfigError(f"unknown step rule '{steps}'", "algorithm.steps")
        return safety * step_size_bounds(constants)
    return np.asarray(steps, dtype=float)


def parse_steps_flag(value):
    """``--steps`` accepts ``theorem1`` or a comma-separated list of numbers."""
    if value == "theorem1":
        return value
    try:
        return [float(v) for v in value.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot parse step list '{value}'", "--steps") from exc


def load_experiment(source, overrides=None, base_dir=None) -> Experiment:
    """
    Build an :class:`Experiment` from a path or an already-parsed mapping.

    ``overrides`` maps ``section.key`` names (e.g. ``algorithm.gamma``) to values.
    """
    if isinstance(source, (str, Path)):
        base_dir = Path(source).parent
        doc = load_document(source)
    else:
        doc = copy.deepcopy(source)
    for dotted, value in (overrides or {}).items():
        sec, key = dotted.split(".")
        doc.setdefault(sec, {})[key] = value
    _validate(doc, SCHEMA)

    game, spec, constants, oracle = build_game(doc["game"], base_dir)
    graph, weights = build_graph(doc.get("graph"), spec.num_agents)

    alg = {**DEFAULT_ALGORITHM, **(doc.get("algorithm") or {})}
    out = {**DEFAULT_OUTPUT, **(doc.get("output") or {})}
    steps = resolve_steps(alg["steps"], constants, alg["safety"])
    if steps.shape != (spec.num_agents,):
        raise ConfigError(f"need {spec.num_agents} step sizes, got {steps.size}", "algorithm.steps")
    try:
        algo = AlgoConfig(
            gamma=alg["gamma"],
            steps=steps,
            tol=alg["tol"],
            max_iters=alg["max_iters"],
            record_every=out["stride"],
        )
    except InvalidInputError as exc:
        loc = "algorithm.gamma" if "gamma" in str(exc) else "algorithm"
        raise ConfigError(str(exc), loc) from exc
    init = default_init(spec, alg["init_seed"])
    return Experiment(
        raw=doc,
        game=game,
        spec=spec,
        constants=constants,
        oracle=oracle,
        graph=graph,
        weights_array=weights,
        algo=algo,
        init=init,
        out_dir=Path(out["dir"]),
    )


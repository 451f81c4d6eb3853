"""
Directed communication graphs and row-stochastic weight matrices.

Edges are ordered pairs ``(j, i)`` meaning "agent i receives from agent j".
Nodes are numbered ``0 .. N-1``. Self-loops are always present.
"""

import csv
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, TopologyError

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class DiGraph:
    num_nodes: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        N = int(self.num_nodes)
        if N < 1:
            raise InvalidInputError("a graph needs at least one node")
        edges = set()
        for e in self.edges:
            j, i = (int(v) for v in e)
            if not (0 <= j < N and 0 <= i < N):
                raise InvalidInputError(f"edge {e} references a node outside [0, {N})")
            edges.add((j, i))
        edges.update((i, i) for i in range(N))
        object.__setattr__(self, "num_nodes", N)
        object.__setattr__(self, "edges", frozenset(edges))

    def in_neighbors(self, i, include_self=True):
        return sorted(j for (j, k) in self.edges if k == i and (include_self or j != i))

    def out_neighbors(self, i, include_self=True):
        return sorted(k for (j, k) in self.edges if j == i and (include_self or k != i))

    def in_degree(self, i):
        """Number of in-neighbors other than ``i`` itself."""
        return len(self.in_neighbors(i, include_self=False))

    def edge_list(self):
        """Sorted ``[source, target]`` pairs, self-loops omitted."""
        return [[j, i] for (j, i) in sorted(self.edges) if j != i]

    def adjacency(self):
        """``A[i, j] = 1`` iff ``(j, i)`` is an edge, i.e. the sparsity pattern of W."""
        A = np.zeros((self.num_nodes, self.num_nodes), dtype=bool)
        for j, i in self.edges:
            A[i, j] = True
        return A


def _reach_all(succ, N):
    seen = [False] * N
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in succ[u]:
            if not seen[v]:
                seen[v] = True
                queue.append(v)
    return all(seen)


def is_strongly_connected(g: DiGraph) -> bool:
    """Forward and reverse BFS from node 0 must both reach every node."""
    N = g.num_nodes
    fwd = [[] for _ in range(N)]
    rev = [[] for _ in range(N)]
    for j, i in g.edges:
        fwd[j].append(i)
        rev[i].append(j)
    return _reach_all(fwd, N) and _reach_all(rev, N)


def cycle_graph(N: int) -> DiGraph:
    """Directed cycle ``0 -> 1 -> ... -> N-1 -> 0`` plus self-loops."""
    if N < 1:
        raise InvalidInputError("N must be positive")
    return DiGraph(N, frozenset((k, (k + 1) % N) for k in range(N)))


def build_cycle_plus_random(N: int, p: float, seed=None) -> DiGraph:
    """
    Directed cycle through all nodes, plus every other ordered pair
    independently with probability ``p``.

    The cycle makes the result strongly connected for any ``p``.
    """
    if N < 2:
        raise InvalidInputError("N must be at least 2")
    if not 0.0 <= p <= 1.0:
        raise InvalidInputError(f"edge probability must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    edges = {(k, (k + 1) % N) for k in range(N)}
    # one draw per ordered pair, in a fixed order, so the graph only depends on the seed
    for j in range(N):
        for i in range(N):
            if i == j or (j, i) in edges:
                continue
            if rng.random() < p:
                edges.add((j, i))
    return DiGraph(N, frozenset(edges))


@dataclass(frozen=True)
class WeightReport:
    violations: list

    @property
    def ok(self):
        return not self.violations


def validate_weights(W, g: DiGraph) -> WeightReport:
    """Report every way ``W`` fails to be a valid row-stochastic weight matrix for ``g``."""
    W = np.asarray(W, dtype=float)
    N = g.num_nodes
    if W.shape != (N, N):
        return WeightReport([f"shape {W.shape} does not match {N} nodes"])
    out = []
    if not np.all(np.isfinite(W)):
        out.append("non-finite entries")
    neg = np.argwhere(W < 0)
    if neg.size:
        out.append(f"negative entries at {[tuple(map(int, e)) for e in neg]}")
    rows = W.sum(axis=1)
    bad_rows = np.flatnonzero(np.abs(rows - 1.0) > ROW_SUM_TOL)
    if bad_rows.size:
        out.append(f"rows {bad_rows.tolist()} do not sum to 1")
    bad_diag = np.flatnonzero(np.diag(W) <= 0)
    if bad_diag.size:
        out.append(f"nonpositive diagonal at {bad_diag.tolist()}")
    pattern = g.adjacency()
    missing = np.argwhere(pattern & ~(W > 0))
    extra = np.argwhere(~pattern & (W != 0))
    if missing.size:
        out.append(f"sparsity: no weight on edges (row, col) {[tuple(map(int, e)) for e in missing]}")
    if extra.size:
        out.append(f"sparsity: weight on non-edges (row, col) {[tuple(map(int, e)) for e in extra]}")
    return WeightReport(out)


@dataclass(frozen=True)
class WeightMatrix:
    """Row-stochastic mixing matrix paired with its graph. Validated on construction."""

    matrix: np.ndarray
    graph: DiGraph

    def __post_init__(self):
        W = np.array(self.matrix, dtype=float)
        if not is_strongly_connected(self.graph):
            raise TopologyError("communication graph is not strongly connected")
        report = validate_weights(W, self.graph)
        if not report.ok:
            raise InvalidInputError("invalid weight matrix: " + "; ".join(report.violations))
        W.setflags(write=False)
        object.__setattr__(self, "matrix", W)

    @classmethod
    def from_matrix(cls, W):
        """Infer the graph from the sparsity pattern of ``W``."""
        W = np.asarray(W, dtype=float)
        N = W.shape[0]
        edges = frozenset((int(j), int(i)) for i, j in np.argwhere(W != 0))
        return cls(W, DiGraph(N, edges))

    @property
    def num_nodes(self):
        return self.graph.num_nodes

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in self.matrix:
                writer.writerow([repr(float(v)) for v in row])


def build_row_stochastic(g: DiGraph) -> WeightMatrix:
    """
    Locally constructible weights: ``w_ij = delta`` for every in-neighbor
    ``j != i`` and ``w_ii = 1 - delta * d(i)``, with ``d(i)`` the number of
    in-neighbors other than ``i`` and ``delta = 0.5 / max_i d(i)``.
    """
    if not is_strongly_connected(g):
        raise TopologyError("communication graph is not strongly connected")
    N = g.num_nodes
    deg = [g.in_degree(i) for i in range(N)]
    W = np.zeros((N, N))
    if N == 1:
        W[0, 0] = 1.0
        return WeightMatrix(W, g)
    delta = 0.5 / max(deg)
    for i in range(N):
        for j in g.in_neighbors(i, include_self=False):
            W[i, j] = delta
        W[i, i] = 1.0 - delta * deg[i]
    return WeightMatrix(W, g)


def read_weights_csv(path):
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh) if row])

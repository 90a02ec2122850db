"""Communication graphs and doubly stochastic mixing matrices."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import InvalidArgumentError

ATOL = 1e-12
# dense eigensolver up to this many nodes, deflated power iteration above
DENSE_EIG_LIMIT = 512


@dataclass(frozen=True)
class Graph:
    m: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        clean = set()
        for i, j in self.edges:
            if i == j:
                raise InvalidArgumentError(f"self-loop at node {i}")
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise InvalidArgumentError(f"edge ({i}, {j}) out of range for m={self.m}")
            clean.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(clean))

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.m, self.m))
        for i, j in self.edges:
            A[i, j] = A[j, i] = 1.0
        return A

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.m, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self, i):
        return sorted({b if a == i else a for a, b in self.edges if i in (a, b)})

    @property
    def connected(self) -> bool:
        if self.m <= 1:
            return True
        n, _ = connected_components(sp.csr_matrix(self.adjacency()), directed=False)
        return n == 1

    def relabel(self, perm) -> "Graph":
        perm = np.asarray(perm)
        return Graph(self.m, frozenset((int(perm[i]), int(perm[j])) for i, j in self.edges))


def k_regular_graph(m: int, k: int, seed: int = 0) -> Graph:
    """Circulant k-regular graph.

    Node ``i`` is joined to ``i +/- 1, ..., i +/- floor(k/2)`` (mod m) and,
    for odd ``k``, also to ``i + m/2``.  ``seed`` is accepted for interface
    stability; the construction is deterministic.
    """
    if m < 1 or not (0 <= k < m):
        raise InvalidArgumentError(f"need m >= 1 and 0 <= k < m, got m={m}, k={k}")
    if (m * k) % 2:
        raise InvalidArgumentError(f"no {k}-regular graph on {m} nodes (m*k odd)")
    offsets = list(range(1, k // 2 + 1))
    if k % 2:
        offsets.append(m // 2)
    edges = {(i, (i + s) % m) for i in range(m) for s in offsets}
    return Graph(m, frozenset(edges))


def cycle_graph(m: int) -> Graph:
    return k_regular_graph(m, 2) if m >= 3 else complete_graph(m)


def complete_graph(m: int) -> Graph:
    if m < 1:
        raise InvalidArgumentError("m must be >= 1")
    return Graph(m, frozenset((i, j) for i in range(m) for j in range(i + 1, m)))


def star_graph(m: int) -> Graph:
    return Graph(m, frozenset((0, j) for j in range(1, m)))


class MixingMatrix:
    """Doubly stochastic, graph-conformant weight matrix.

    Construction validates every invariant unless ``check=False`` (used by
    tests that feed deliberately broken matrices to the engine).
    """

    def __init__(self, weights, graph: Graph | None = None, check: bool = True):
        W = np.array(weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise InvalidArgumentError("mixing matrix must be square")
        W.setflags(write=False)
        self.weights = W
        self.graph = graph
        if check:
            problems = self.violations()
            if problems:
                raise InvalidArgumentError("; ".join(problems))

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    def violations(self, atol=ATOL):
        W = self.weights
        out = []
        if np.any(W < 0):
            out.append("negative entry")
        if not np.allclose(W.sum(axis=1), 1.0, rtol=0, atol=atol):
            out.append("row sums differ from 1")
        if not np.allclose(W.sum(axis=0), 1.0, rtol=0, atol=atol):
            out.append("column sums differ from 1")
        if not np.allclose(W, W.T, rtol=0, atol=atol):
            out.append("not symmetric")
        if self.graph is not None:
            allowed = self.graph.adjacency() + np.eye(self.m)
            if np.any((W > 0) & (allowed == 0)):
                out.append("weight on a non-edge")
        return out

    def is_doubly_stochastic(self, atol=ATOL) -> bool:
        W = self.weights
        return bool(
            np.all(W >= 0)
            and np.allclose(W.sum(axis=1), 1.0, rtol=0, atol=atol)
            and np.allclose(W.sum(axis=0), 1.0, rtol=0, atol=atol)
        )

    def to_csr(self):
        return sp.csr_matrix(self.weights)

    def __matmul__(self, other):
        return self.weights @ other

    def __repr__(self):
        return f"MixingMatrix(m={self.m})"


def max_degree_weights(g: Graph) -> MixingMatrix:
    """Max-degree chain: ``1/(D+1)`` on every edge, the rest on the diagonal."""
    deg = g.degrees()
    dmax = int(deg.max()) if g.m else 0
    W = g.adjacency() / (dmax + 1)
    W[np.diag_indices(g.m)] = 1.0 - deg / (dmax + 1)
    return MixingMatrix(W, g)


def uniform_neighbor_weights(g: Graph) -> MixingMatrix:
    """``1/(k+1)`` on each closed neighbourhood of a k-regular graph."""
    deg = g.degrees()
    if g.m and np.any(deg != deg[0]):
        raise InvalidArgumentError("uniform neighbour weights need a regular graph")
    k = int(deg[0]) if g.m else 0
    W = (g.adjacency() + np.eye(g.m)) / (k + 1)
    return MixingMatrix(W, g)


def lambda2(p) -> float:
    """Second largest (signed) eigenvalue of a symmetric mixing matrix."""
    W = p.weights if isinstance(p, MixingMatrix) else np.asarray(p, dtype=np.float64)
    if not np.allclose(W, W.T, rtol=0, atol=1e-12):
        raise InvalidArgumentError("lambda2 needs a symmetric matrix")
    m = W.shape[0]
    if m == 1:
        return 0.0
    if m <= DENSE_EIG_LIMIT:
        return float(np.linalg.eigvalsh(W)[-2])
    return _lambda2_deflated(W)


def _lambda2_deflated(W, tol=1e-12, max_iter=200000, seed=0):
    # (W + I)/2 keeps the eigenvalue order and makes the spectrum nonnegative,
    # so power iteration on the complement of the ones vector finds lambda_2.
    m = W.shape[0]
    v = np.random.default_rng(seed).standard_normal(m)
    v -= v.mean()
    v /= np.linalg.norm(v)
    theta = 0.0
    for _ in range(max_iter):
        u = 0.5 * (W @ v + v)
        u -= u.mean()
        new = float(v @ u)
        nrm = np.linalg.norm(u)
        if nrm == 0:
            return -1.0
        v = u / nrm
        if abs(new - theta) <= tol * max(1.0, abs(new)):
            theta = new
            break
        theta = new
    return 2.0 * theta - 1.0


def lambda2_of_expected_square(schedule) -> float:
    """``lambda_2(E[P(t)^2])`` for a stationary schedule."""
    return lambda2(schedule.expected_square())


def spectral_gap(p) -> float:
    return 1.0 - lambda2(p)


def b_half(lam2) -> float:
    """``(1/2) log(1/lambda_2)``, the mixing exponent used in the network-error bound."""
    return 0.5 * math.log(1.0 / lam2) if lam2 > 0 else math.inf

"""Communication graphs and gossip mixing matrices.

A mixing matrix W is symmetric, doubly stochastic, and aligned with the
graph: w_ij > 0 only on edges or the diagonal.  Two constants drive every
step-size rule downstream:

* rho = 1 - |lambda_2(W)|, the spectral gap.  Averaging with W contracts
  the consensus residual by (1 - rho)^2 per application.
* C = ||W - I||^2, the squared operator norm of the gossip increment,
  always <= 4 for doubly stochastic W.

Weights are Metropolis-Hastings: w_ij = 1 / (1 + max(deg_i, deg_j)) on
edges, diagonal topped up to make rows sum to one.  This keeps the matrix
construction local (each node needs only neighbor degrees) while satisfying
the two-sided stochasticity the algorithms assume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .linalg import operator_norm_sq, symmetric_eigenvalues
from .rng import RngStream, TOPOLOGY

KINDS = ("ring", "star", "grid", "complete", "erdos_renyi")

STOCHASTIC_ATOL = 1e-12
MIN_GAP = 1e-12


@dataclass(frozen=True)
class Graph:
    """Undirected connected graph on nodes 0..n-1."""

    n: int
    edges: frozenset  # of (i, j) pairs with i < j

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"graph needs at least one node, got n={self.n}")
        for i, j in self.edges:
            if not (0 <= i < j < self.n):
                raise ValueError(f"bad edge ({i}, {j}) for n={self.n}")
        if not self._connected():
            raise ValueError("graph is not connected")

    def _connected(self) -> bool:
        if self.n == 1:
            return True
        adj = self.neighbors()
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n

    def neighbors(self) -> list:
        adj = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg


def build_graph(kind: str, n: int, p: float | None = None, seed: int = 0) -> Graph:
    """Construct one of the standard test topologies.

    erdos_renyi draws edges i.i.d. with probability *p* and retries with an
    incremented sub-seed until the sample is connected (up to 1000 tries);
    the retry count keeps the constructor total instead of looping forever
    on tiny p.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown topology kind {kind!r}, expected one of {KINDS}")
    if n < 2:
        raise ValueError(f"topology {kind!r} needs n >= 2, got n={n}")

    if kind == "ring":
        edges = {tuple(sorted((i, (i + 1) % n))) for i in range(n)}
        return Graph(n, frozenset(edges))
    if kind == "star":
        return Graph(n, frozenset((0, i) for i in range(1, n)))
    if kind == "complete":
        return Graph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))
    if kind == "grid":
        side = round(n**0.5)
        if side * side != n:
            raise ValueError(f"grid topology needs a perfect square n, got n={n}")
        edges = set()
        for r in range(side):
            for c in range(side):
                u = r * side + c
                if c + 1 < side:
                    edges.add((u, u + 1))
                if r + 1 < side:
                    edges.add((u, u + side))
        return Graph(n, frozenset(edges))

    # erdos_renyi
    if p is None or not (0.0 < p <= 1.0):
        raise ValueError(f"erdos_renyi needs edge probability p in (0, 1], got {p}")
    base = RngStream(seed).child(TOPOLOGY)
    for attempt in range(1000):
        gen = base.child(attempt).generator()
        edges = set()
        for i in range(n):
            for j in range(i + 1, n):
                if gen.random() < p:
                    edges.add((i, j))
        try:
            return Graph(n, frozenset(edges))
        except ValueError:
            continue
    raise ValueError(
        f"erdos_renyi(n={n}, p={p}, seed={seed}) stayed disconnected after 1000 tries"
    )


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """A validated gossip matrix with its spectral constants."""

    w: np.ndarray = field(repr=False)
    rho: float
    c: float

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @cached_property
    def w_minus_i(self) -> np.ndarray:
        return self.w - np.eye(self.n)


def spectral_constants(w) -> MixingMatrix:
    """Validate a gossip matrix and measure rho and C.

    Rejects matrices that are not symmetric doubly stochastic with entries
    in [0, 1], and matrices whose spectral gap is numerically zero (a
    disconnected or bipartite-degenerate W would silently stall consensus).
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"mixing matrix must be square, got shape {w.shape}")
    n = w.shape[0]
    if np.max(np.abs(w - w.T)) > STOCHASTIC_ATOL:
        raise ValueError("mixing matrix is not symmetric")
    if np.min(w) < -STOCHASTIC_ATOL or np.max(w) > 1 + STOCHASTIC_ATOL:
        raise ValueError("mixing matrix entries must lie in [0, 1]")
    ones = np.ones(n)
    if np.max(np.abs(w @ ones - ones)) > STOCHASTIC_ATOL * n:
        raise ValueError("mixing matrix rows must sum to 1")

    if n == 1:
        return MixingMatrix(w=w.copy(), rho=1.0, c=0.0)

    vals = symmetric_eigenvalues(w)
    by_mag = np.sort(np.abs(vals))[::-1]
    rho = 1.0 - float(by_mag[1])
    if rho <= MIN_GAP:
        raise ValueError(f"spectral gap is numerically zero (rho={rho:.3e})")
    c = operator_norm_sq(w - np.eye(n))
    return MixingMatrix(w=w.copy(), rho=rho, c=c)


def metropolis_weights(graph: Graph) -> MixingMatrix:
    """Metropolis-Hastings gossip matrix for *graph*."""
    n = graph.n
    deg = graph.degrees()
    w = np.zeros((n, n))
    for i, j in graph.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(w, 1.0 - w.sum(axis=1))
    return spectral_constants(w)


def lazy_mix(w, gamma: float) -> np.ndarray:
    """The slowed-down gossip matrix I + gamma (W - I).

    Eigenvalues map to (1 - gamma) + gamma * lambda, so the result stays a
    valid gossip matrix for gamma in (0, 1] and its spectral gap is at least
    gamma * rho(W).
    """
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    w = np.asarray(w, dtype=np.float64)
    return np.eye(w.shape[0]) + gamma * (w - np.eye(w.shape[0]))

"""Trader network: 2D open-boundary lattice with optional long-range rewiring."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

_REWIRE_RETRIES = 100


@dataclass(frozen=True)
class SmallWorldNet:
    """Immutable undirected simple graph; neighbor lists are sorted."""

    n_nodes: int
    adjacency: tuple[tuple[int, ...], ...]
    degrees: tuple[int, ...] = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "degrees", tuple(len(a) for a in self.adjacency))

    @property
    def n_edges(self) -> int:
        return sum(self.degrees) // 2

    def neighbors(self, i: int) -> tuple[int, ...]:
        if not 0 <= i < self.n_nodes:
            raise IndexError(f"node id {i} out of range [0, {self.n_nodes})")
        return self.adjacency[i]

    def is_connected(self) -> bool:
        if self.n_nodes == 0:
            return True
        seen = np.zeros(self.n_nodes, dtype=bool)
        stack = [0]
        seen[0] = True
        count = 1
        while stack:
            for j in self.adjacency[stack.pop()]:
                if not seen[j]:
                    seen[j] = True
                    count += 1
                    stack.append(j)
        return count == self.n_nodes

    def export_edges(self, path: str | Path) -> None:
        """Write the edge list as ``i,j`` lines (each edge once, i < j)."""
        with open(path, "w", encoding="utf-8") as fh:
            for i, nbrs in enumerate(self.adjacency):
                for j in nbrs:
                    if i < j:
                        fh.write(f"{i},{j}\n")


def _from_sets(n_nodes: int, adj: list[set[int]]) -> SmallWorldNet:
    return SmallWorldNet(n_nodes, tuple(tuple(sorted(s)) for s in adj))


def build_lattice(side: int) -> SmallWorldNet:
    """side x side square grid, von Neumann neighborhood, open boundaries."""
    if side < 2:
        raise ValueError(f"lattice side must be at least 2, got {side}")
    n = side * side
    adj: list[set[int]] = [set() for _ in range(n)]
    for r in range(side):
        for c in range(side):
            i = r * side + c
            if c + 1 < side:
                adj[i].add(i + 1)
                adj[i + 1].add(i)
            if r + 1 < side:
                adj[i].add(i + side)
                adj[i + side].add(i)
    return _from_sets(n, adj)


def rewire(net: SmallWorldNet, p: float, rng: np.random.Generator) -> SmallWorldNet:
    """Rewire each edge with probability p to a random non-adjacent target.

    The lower-id endpoint is kept; the other end moves. Edge count is
    preserved, and a move that cannot find a valid target (or would strand
    the dropped endpoint at degree 0) keeps the original edge.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"rewire probability must lie in [0, 1], got {p!r}")
    adj = [set(a) for a in net.adjacency]
    if p > 0.0:
        edges = [(i, j) for i, nbrs in enumerate(net.adjacency) for j in nbrs if i < j]
        for i, j in edges:
            if j not in adj[i] or rng.random() >= p:
                continue
            if len(adj[j]) == 1:
                continue
            for _ in range(_REWIRE_RETRIES):
                k = int(rng.integers(net.n_nodes))
                if k != i and k != j and k not in adj[i]:
                    adj[i].remove(j)
                    adj[j].remove(i)
                    adj[i].add(k)
                    adj[k].add(i)
                    break
    out = _from_sets(net.n_nodes, adj)
    if not out.is_connected():
        log.warning("rewired network is disconnected (p=%g, n=%d)", p, net.n_nodes)
    return out


def build_network(side: int, rewire_prob: float, rng: np.random.Generator) -> SmallWorldNet:
    return rewire(build_lattice(side), rewire_prob, rng)

"""Directed acyclic communication graphs between agents."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import InvalidArgument, ValidationError


@dataclass(frozen=True)
class Dag:
    n: int
    order: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]

    def to_json(self) -> dict[str, Any]:
        return {"n": self.n, "order": list(self.order), "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> Dag:
        return cls(int(d["n"]), tuple(d["order"]), tuple(tuple(e) for e in d["edges"]))

    @classmethod
    def empty(cls, n: int) -> Dag:
        return cls(n, tuple(range(n)), ())

    @classmethod
    def chain(cls, n: int) -> Dag:
        return cls(n, tuple(range(n)), tuple((k, k + 1) for k in range(n - 1)))


def sample_dag(n: int, p: float = 0.5, seed: int | np.random.Generator | None = None) -> Dag:
    """Random topological order, then each forward pair kept with probability ``p``."""
    if n < 1:
        raise InvalidArgument(f"n must be >= 1, got {n}")
    if not 0.0 <= p <= 1.0:
        raise InvalidArgument(f"p must be in [0, 1], got {p}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    order = tuple(int(v) for v in rng.permutation(n))
    edges = []
    draws = rng.random(n * (n - 1) // 2)
    k = 0
    for a in range(n):
        for b in range(a + 1, n):
            if draws[k] < p:
                edges.append((order[a], order[b]))
            k += 1
    return Dag(n, order, tuple(sorted(edges)))


def topological_order(dag: Dag) -> tuple[int, ...]:
    return dag.order


def predecessors(dag: Dag, node: int) -> frozenset[int]:
    if not 0 <= node < dag.n:
        raise InvalidArgument(f"node {node} out of range for n={dag.n}")
    return frozenset(u for u, v in dag.edges if v == node)


def validate_dag(dag: Dag) -> None:
    """Raise :class:`ValidationError` if ``dag`` breaks any structural invariant.

    Acyclicity is checked with Kahn's algorithm on the edge set alone; the
    stored order is then checked separately.
    """
    n = dag.n
    if n < 1:
        raise ValidationError("bad-endpoint", "empty graph")
    seen = set()
    for u, v in dag.edges:
        if not (0 <= u < n and 0 <= v < n):
            raise ValidationError("bad-endpoint", f"({u}, {v})")
        if u == v:
            raise ValidationError("self-loop", str(u))
        if (u, v) in seen:
            raise ValidationError("duplicate-edge", f"({u}, {v})")
        seen.add((u, v))

    indeg = [0] * n
    out: list[list[int]] = [[] for _ in range(n)]
    for u, v in dag.edges:
        indeg[v] += 1
        out[u].append(v)
    queue = deque(k for k in range(n) if indeg[k] == 0)
    visited = 0
    while queue:
        u = queue.popleft()
        visited += 1
        for v in out[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    if visited != n:
        raise ValidationError("cycle-detected")

    if sorted(dag.order) != list(range(n)):
        raise ValidationError("bad-order", "order is not a permutation of 0..n-1")
    pos = {v: k for k, v in enumerate(dag.order)}
    for u, v in dag.edges:
        if pos[u] >= pos[v]:
            raise ValidationError("bad-order", f"edge ({u}, {v}) points backwards in order")

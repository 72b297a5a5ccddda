"""Link churn over a fixed potential-edge graph and per-node routing views.

Each potential edge is an independent two-state (up/down) Markov chain.  A
:class:`RoutingView` is what one node learns from a topology snapshot: its
one-hop neighbors, the hop count to every other node and the next hop a
shortest-path routing table would select (lowest id among tied first hops).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .core_bayes import DomainError


class _Unreachable:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNREACHABLE"

    def __reduce__(self):
        return (_Unreachable, ())


UNREACHABLE = _Unreachable()

Edge = tuple[int, int]


def normalize_edge(u: int, v: int) -> Edge:
    if u == v:
        raise ValueError(f"self-loop on node {u}")
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class Scenario:
    """Node set, wired-exit node and the edges that may ever be up."""

    nodes: tuple[int, ...]
    potential_edges: tuple[Edge, ...]
    backbone: int

    def __post_init__(self):
        nodes = tuple(sorted(int(n) for n in self.nodes))
        if len(set(nodes)) != len(nodes):
            raise ValueError("duplicate node ids")
        if self.backbone not in nodes:
            raise ValueError(f"backbone {self.backbone} is not a node")
        edges = tuple(sorted({normalize_edge(int(u), int(v)) for u, v in self.potential_edges}))
        known = set(nodes)
        for u, v in edges:
            if u not in known or v not in known:
                raise ValueError(f"edge ({u}, {v}) references an unknown node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "potential_edges", edges)

    @property
    def agents(self) -> tuple[int, ...]:
        return tuple(n for n in self.nodes if n != self.backbone)

    def initial_snapshot(self) -> "TopologySnapshot":
        """All potential edges up at tick 0."""
        return TopologySnapshot(0, frozenset(self.potential_edges), self.nodes)


@dataclass(frozen=True)
class TopologySnapshot:
    tick: int
    edges: frozenset[Edge]
    nodes: tuple[int, ...]

    def __post_init__(self):
        for u, v in self.edges:
            if u >= v:
                raise ValueError(f"edge ({u}, {v}) is not normalized")

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {n: [] for n in self.nodes}
        for u, v in sorted(self.edges):
            adj[u].append(v)
            adj[v].append(u)
        for n in adj:
            adj[n].sort()
        return adj

    def trace_line(self) -> str:
        """``tick<TAB>u-v u-v ...`` with edges sorted."""
        return f"{self.tick}\t" + " ".join(f"{u}-{v}" for u, v in self.sorted_edges())


@dataclass(frozen=True)
class ChurnParams:
    p_down: float
    p_up: float
    seed: int = 0

    def __post_init__(self):
        for name in ("p_down", "p_up"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")

    def stationary_up_fraction(self) -> float:
        total = self.p_up + self.p_down
        return 0.5 if total == 0 else self.p_up / total


def step_churn(
    snapshot: TopologySnapshot,
    potential_edges: Iterable[Edge],
    params: ChurnParams,
    rng: np.random.Generator,
) -> tuple[TopologySnapshot, np.random.Generator]:
    """Advance every potential edge one Markov step.

    One uniform draw is consumed per potential edge, in sorted edge order,
    so the sequence of snapshots is a pure function of the generator state.
    """
    edges = sorted(potential_edges)
    if not snapshot.edges <= set(edges):
        raise ValueError("snapshot contains edges outside the potential-edge set")
    u = rng.random(len(edges))
    up = np.fromiter((e in snapshot.edges for e in edges), dtype=bool, count=len(edges))
    stay_up = up & (u >= params.p_down)
    come_up = ~up & (u < params.p_up)
    alive = stay_up | come_up
    new_edges = frozenset(e for e, a in zip(edges, alive) if a)
    return TopologySnapshot(snapshot.tick + 1, new_edges, snapshot.nodes), rng


def bfs_distances(adj: Mapping[int, list[int]], source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


@dataclass(frozen=True)
class RoutingView:
    """One node's derived routing state for a snapshot.

    ``hops`` and ``next_hops`` only hold reachable nodes (the observer has
    hop count 0 and no next hop).
    """

    observer: int
    tick: int
    nodes: tuple[int, ...]
    neighbors: frozenset[int]
    hops: Mapping[int, int]
    next_hops: Mapping[int, int]
    adjacency: Mapping[int, list[int]] = field(repr=False, compare=False)
    _relay_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def _check(self, n: int) -> None:
        if n not in self.adjacency:
            raise DomainError(f"unknown node {n!r}")

    def reachable(self, n: int) -> bool:
        self._check(n)
        return n in self.hops

    def next_hop(self, n: int):
        """Selected next hop toward ``n``; ``None`` if unreachable or ``n`` is the observer."""
        self._check(n)
        return self.next_hops.get(n)

    def distance(self, src: int, dst: int):
        """Hop distance between two arbitrary nodes in the same snapshot."""
        self._check(src)
        self._check(dst)
        dist = self._relay_cache.get(src)
        if dist is None:
            dist = self._relay_cache[src] = bfs_distances(self.adjacency, src)
        return dist.get(dst, UNREACHABLE)

    def relay_hops(self, f: int, d: int):
        """Hops from the observer to ``d`` when relaying through neighbor ``f``."""
        dist = self.distance(f, d)
        return UNREACHABLE if dist is UNREACHABLE else 1 + dist


def derive_view(snapshot: TopologySnapshot, observer: int) -> RoutingView:
    adj = snapshot.adjacency()
    if observer not in adj:
        raise DomainError(f"observer {observer!r} is not in the scenario")
    dist = {observer: 0}
    first = {}
    frontier = [observer]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    first[v] = v if u == observer else first[u]
                    nxt.append(v)
                elif dist[v] == dist[u] + 1 and u != observer:
                    # another shortest path: keep the lowest first hop
                    if first[u] < first[v]:
                        first[v] = first[u]
        frontier = nxt
    return RoutingView(
        observer=observer,
        tick=snapshot.tick,
        nodes=snapshot.nodes,
        neighbors=frozenset(adj[observer]),
        hops=dist,
        next_hops=first,
        adjacency=adj,
    )


def hop_count(view: RoutingView, n: int):
    """Hop count from the view's observer to ``n`` (0 for itself) or ``UNREACHABLE``."""
    view._check(n)
    return view.hops.get(n, UNREACHABLE)

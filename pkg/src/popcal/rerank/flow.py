"""Integral min-cost flow and discrepancy-minimising re-ranking.

The solver is successive shortest paths with Johnson potentials. After each
Dijkstra pass it pushes as much flow as possible along zero-reduced-cost
edges (blocking flow), which keeps the number of shortest-path rounds small
for the unit-capacity bipartite networks used here.
"""

from __future__ import annotations

import heapq
import logging
import math
from typing import Mapping

from popcal.itemknn import CandidateList
from popcal.rerank.base import RankedList, RerankConfig, normalized_scores

_log = logging.getLogger(__name__)

INF = float("inf")


class InfeasibleFlow(RuntimeError):
    pass


class MinCostFlow:
    """Residual-graph min-cost flow over integer capacities and costs."""

    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.graph: list[list[int]] = [[] for _ in range(n_nodes)]
        # edge arrays; edge e and e ^ 1 are a forward/backward pair
        self.to: list[int] = []
        self.cap: list[int] = []
        self.cost: list[int] = []

    def add_edge(self, u: int, v: int, cap: int, cost: int) -> int:
        if cost < 0:
            raise ValueError("negative edge costs are not supported")
        e = len(self.to)
        self.to += [v, u]
        self.cap += [cap, 0]
        self.cost += [cost, -cost]
        self.graph[u].append(e)
        self.graph[v].append(e + 1)
        return e

    def flow_on(self, e: int) -> int:
        return self.cap[e ^ 1]

    def _dijkstra(self, s: int, pot: list[float]) -> list[float]:
        dist = [INF] * self.n
        dist[s] = 0
        heap = [(0, s)]
        to, cap, cost, graph = self.to, self.cap, self.cost, self.graph
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            pu = pot[u]
            for e in graph[u]:
                if cap[e] > 0:
                    v = to[e]
                    nd = d + cost[e] + pu - pot[v]
                    if nd < dist[v]:
                        dist[v] = nd
                        heapq.heappush(heap, (nd, v))
        return dist

    def _augment(self, s: int, t: int, limit: int, pot: list[float]) -> int:
        """Blocking flow on the admissible subgraph (reduced cost 0)."""
        to, cap, cost, graph = self.to, self.cap, self.cost, self.graph
        it = [0] * self.n
        on_path = [False] * self.n
        pushed = 0
        while pushed < limit:
            # iterative DFS from s to t using current-arc pointers
            path: list[int] = []
            u = s
            on_path[s] = True
            while u != t:
                adj = graph[u]
                advanced = False
                while it[u] < len(adj):
                    e = adj[it[u]]
                    v = to[e]
                    if cap[e] > 0 and not on_path[v] and cost[e] + pot[u] - pot[v] == 0:
                        path.append(e)
                        on_path[v] = True
                        u = v
                        advanced = True
                        break
                    it[u] += 1
                if not advanced:
                    if u == s:
                        on_path[s] = False
                        return pushed
                    on_path[u] = False
                    e = path.pop()
                    u = to[e ^ 1]
                    it[u] += 1
            f = limit - pushed
            for e in path:
                f = min(f, cap[e])
            for e in path:
                cap[e] -= f
                cap[e ^ 1] += f
            pushed += f
            for e in path:
                on_path[to[e]] = False
            on_path[s] = False
        return pushed

    def solve(self, s: int, t: int, demand: int) -> tuple[int, int]:
        """Send ``demand`` units from ``s`` to ``t`` at minimum cost.

        Returns ``(flow, cost)``; raises :class:`InfeasibleFlow` when the
        network cannot carry the demand.
        """
        pot = [0.0] * self.n
        flow = 0
        while flow < demand:
            dist = self._dijkstra(s, pot)
            if dist[t] == INF:
                raise InfeasibleFlow(f"network carries only {flow} of {demand} units")
            for v in range(self.n):
                if dist[v] < INF:
                    pot[v] += dist[v]
            pushed = self._augment(s, t, demand - flow, pot)
            if pushed == 0:
                raise RuntimeError("no admissible augmenting path after a shortest-path pass")
            flow += pushed
        total = sum(self.cost[e] * self.cap[e ^ 1] for e in range(0, len(self.to), 2))
        return flow, total


def uniform_target(all_cands: Mapping[str, CandidateList], n: int) -> dict[str, int]:
    """Equal exposure target over every item that appears as a candidate."""
    items = sorted({i for c in all_cands.values() for i in c.items})
    if not items:
        return {}
    each = (n * len(all_cands)) // len(items)
    return {i: each for i in items}


def discrepancy(lists: Mapping[str, RankedList], target: Mapping[str, int]) -> int:
    """Total shortfall of item frequencies below their targets."""
    counts: dict[str, int] = {}
    for lst in lists.values():
        for i in lst.items:
            counts[i] = counts.get(i, 0) + 1
    return sum(max(0, t - counts.get(i, 0)) for i, t in target.items())


COST_SCALE = 1000


def dm_rerank(all_cands: Mapping[str, CandidateList], cfg: RerankConfig,
              target: Mapping[str, int] | None = None) -> dict[str, RankedList]:
    """Choose ``n`` items per user minimising the target shortfall.

    Each item has a zero-cost sink edge up to its target and an expensive
    edge beyond it. The overflow cost exceeds any possible relevance cost,
    so the shortfall is minimised first and summed rank cost second.
    """
    n = cfg.n
    if target is None:
        target = uniform_target(all_cands, n)
    users = sorted(all_cands)
    for u in users:
        if len(all_cands[u]) < n:
            raise InfeasibleFlow(f"user {u} has {len(all_cands[u])} candidates, needs {n}")
    if sum(target.values()) > n * len(users):
        raise InfeasibleFlow("target exposure exceeds the number of recommendation slots")
    items = sorted({i for c in all_cands.values() for i in c.items} | set(target))
    uidx = {u: 1 + k for k, u in enumerate(users)}
    iidx = {i: 1 + len(users) + k for k, i in enumerate(items)}
    sink = 1 + len(users) + len(items)
    net = MinCostFlow(sink + 1)
    slots = n * len(users)
    overflow = COST_SCALE * slots + 1

    for u in users:
        net.add_edge(0, uidx[u], n, 0)
    edges: dict[str, list[tuple[int, str]]] = {}
    for u in users:
        c = all_cands[u]
        rel = normalized_scores(c)
        edges[u] = []
        for item, r in zip(c.items, rel):
            cost = int(round(COST_SCALE * (1.0 - r)))
            edges[u].append((net.add_edge(uidx[u], iidx[item], 1, cost), item))
    for i in items:
        t = int(target.get(i, 0))
        if t > 0:
            net.add_edge(iidx[i], sink, t, 0)
        net.add_edge(iidx[i], sink, slots, overflow)

    net.solve(0, sink, slots)
    out = {}
    for u in users:
        picked = {item for e, item in edges[u] if net.flow_on(e) > 0}
        ordered = tuple(i for i in all_cands[u].items if i in picked)
        out[u] = RankedList(u, ordered, f"dm:{cfg.digest()}")
    return out

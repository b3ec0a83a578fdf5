"""Topological memory: waypoint nodes, traversability edges, visited flags and stored features."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np


@dataclass
class Node:
    id: int
    position: np.ndarray
    visited: bool = False
    feature: np.ndarray | None = None
    feature_range: float = np.inf  # distance of the vantage point that produced `feature`
    stats: object | None = None    # raw region statistics behind `feature`


@dataclass
class WaypointGraph:
    nodes: list[Node] = field(default_factory=list)
    adj: dict[int, dict[int, float]] = field(default_factory=dict)

    def add_node(self, position) -> int:
        nid = len(self.nodes)
        self.nodes.append(Node(nid, np.asarray(position, dtype=np.float64)))
        self.adj[nid] = {}
        return nid

    def add_edge(self, a: int, b: int) -> None:
        if a == b:
            raise ValueError("self-loops are not traversable edges")
        length = float(np.linalg.norm(self.nodes[a].position - self.nodes[b].position))
        if not length > 0:
            raise ValueError("edge length must be positive")
        self.adj[a][b] = length
        self.adj[b][a] = length

    def position(self, nid: int) -> np.ndarray:
        return self.nodes[nid].position

    def neighbors(self, nid: int) -> list[int]:
        return sorted(self.adj[nid])

    def __len__(self) -> int:
        return len(self.nodes)

    def shortest_paths(self, src: int) -> tuple[dict[int, float], dict[int, int]]:
        """Dijkstra from `src`; ties between equal-length routes go to the smaller predecessor id."""
        dist = {src: 0.0}
        prev: dict[int, int] = {}
        heap = [(0.0, src)]
        done = set()
        while heap:
            d, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v in sorted(self.adj[u]):
                nd = d + self.adj[u][v]
                if v not in dist or nd < dist[v] - 1e-12 or (abs(nd - dist[v]) <= 1e-12 and u < prev.get(v, u + 1)):
                    if v not in done:
                        dist[v] = nd
                        prev[v] = u
                        heapq.heappush(heap, (nd, v))
        return dist, prev

    def shortest_path(self, src: int, dst: int) -> list[int]:
        dist, prev = self.shortest_paths(src)
        if dst not in dist:
            raise ValueError(f"node {dst} is unreachable from {src}")
        path = [dst]
        while path[-1] != src:
            path.append(prev[path[-1]])
        return path[::-1]

    def path_length(self, path: list[int]) -> float:
        return float(sum(self.adj[a][b] for a, b in zip(path[:-1], path[1:])))

    def distance(self, a: int, b: int) -> float:
        return self.shortest_paths(a)[0][b]

    def connected(self) -> bool:
        return len(self.shortest_paths(0)[0]) == len(self.nodes) if self.nodes else True

    def is_consistent(self) -> bool:
        return all(self.adj[b].get(a) == w and w > 0 for a in self.adj for b, w in self.adj[a].items())

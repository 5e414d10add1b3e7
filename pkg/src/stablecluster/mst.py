"""Minimum spanning tree and the Kruskal merge tree that drives the dynamic program."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import ParameterError
from .geometry import EUCLIDEAN, MetricKind, MetricSpec, as_points, distances_to

Edge = Tuple[int, int, float]

# Above this size the planar Euclidean tree is taken from the Delaunay graph.
DELAUNAY_THRESHOLD = 2000


@dataclass(frozen=True)
class SpanningTree:
    edges: Tuple[Edge, ...]
    n: int

    @property
    def weight(self) -> float:
        return float(sum(w for _, _, w in self.edges))


def edge_key(e: Edge):
    i, j, w = e
    return (w, min(i, j), max(i, j))


def _prim(P: np.ndarray, m: MetricSpec) -> List[Edge]:
    n = P.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    key = np.full(n, np.inf)
    parent = np.full(n, -1, dtype=np.int64)
    in_tree[0] = True
    d0 = distances_to(P, P[0], m)
    key[:] = d0
    parent[:] = 0
    key[0] = np.inf
    edges = []
    for _ in range(n - 1):
        v = int(np.argmin(key))
        edges.append((int(parent[v]), v, float(key[v])))
        in_tree[v] = True
        key[v] = np.inf
        dv = distances_to(P, P[v], m)
        better = (~in_tree) & (dv < key)
        key[better] = dv[better]
        parent[better] = v
    return edges


def _kruskal(n: int, candidates) -> List[Edge]:
    uf = list(range(n))

    def find(a):
        while uf[a] != a:
            uf[a] = uf[uf[a]]
            a = uf[a]
        return a

    out = []
    for e in sorted(candidates, key=edge_key):
        ra, rb = find(e[0]), find(e[1])
        if ra != rb:
            uf[ra] = rb
            out.append(e)
            if len(out) == n - 1:
                break
    return out


def _delaunay_mst(P: np.ndarray) -> Optional[List[Edge]]:
    from scipy.spatial import Delaunay, QhullError

    try:
        tri = Delaunay(P)
    except QhullError:
        return None
    s = tri.simplices
    pairs = np.vstack([s[:, [0, 1]], s[:, [1, 2]], s[:, [0, 2]]])
    pairs.sort(axis=1)
    pairs = np.unique(pairs, axis=0)
    diff = P[pairs[:, 0]] - P[pairs[:, 1]]
    w = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    # duplicate points are not Delaunay vertices; leave those inputs to Prim
    if len(np.unique(pairs)) != P.shape[0]:
        return None
    order = np.lexsort((pairs[:, 1], pairs[:, 0], w))
    edges = _kruskal(P.shape[0], [(int(pairs[t, 0]), int(pairs[t, 1]), float(w[t])) for t in order])
    return edges if len(edges) == P.shape[0] - 1 else None


def minimum_spanning_tree(X, m: MetricSpec = EUCLIDEAN) -> SpanningTree:
    P = as_points(X)
    n = P.shape[0]
    if n == 0:
        raise ParameterError("empty point set")
    if n == 1:
        return SpanningTree((), 1)
    edges = None
    if m.kind is MetricKind.EUCLIDEAN and P.shape[1] == 2 and n > DELAUNAY_THRESHOLD:
        edges = _delaunay_mst(P)
    if edges is None:
        edges = _prim(P, m)
    return SpanningTree(tuple(edges), n)


@dataclass(frozen=True)
class MergeTree:
    """Binary tree over the points; node ids ``0..n-1`` are the leaves (points).

    Internal node ``v`` splits its members along ``split_edge[v]``, the longest
    spanning-tree edge among them; children are listed in creation order, so
    every child id is smaller than its parent id.
    """

    n: int
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    split_edge: Tuple[Optional[Edge], ...]
    root: int

    @property
    def internal_nodes(self) -> range:
        return range(self.n, len(self.size))

    def is_leaf(self, v: int) -> bool:
        return v < self.n

    def children(self, v: int) -> Tuple[int, ...]:
        if self.is_leaf(v):
            return ()
        return (int(self.left[v]), int(self.right[v]))

    def members(self, v: int) -> List[int]:
        out, stack = [], [v]
        while stack:
            u = stack.pop()
            if u < self.n:
                out.append(u)
            else:
                stack.append(int(self.right[u]))
                stack.append(int(self.left[u]))
        return sorted(out)

    def to_json(self) -> dict:
        nodes = []
        for v in range(len(self.size)):
            e = self.split_edge[v]
            nodes.append({
                "id": v,
                "split_edge": None if e is None else [e[0], e[1], e[2]],
                "children": list(self.children(v)),
                "size": int(self.size[v]),
            })
        return {"n": self.n, "root": self.root, "nodes": nodes}


def build_merge_tree(T: SpanningTree) -> MergeTree:
    n = T.n
    total = 2 * n - 1
    left = np.full(total, -1, dtype=np.int64)
    right = np.full(total, -1, dtype=np.int64)
    size = np.zeros(total, dtype=np.int64)
    size[:n] = 1
    split: List[Optional[Edge]] = [None] * total
    uf = list(range(n))
    comp_node = list(range(n))

    def find(a):
        while uf[a] != a:
            uf[a] = uf[uf[a]]
            a = uf[a]
        return a

    nxt = n
    for e in sorted(T.edges, key=edge_key):
        ra, rb = find(e[0]), find(e[1])
        if ra == rb:
            raise ParameterError("spanning tree contains a cycle")
        a, b = comp_node[ra], comp_node[rb]
        left[nxt], right[nxt] = a, b
        size[nxt] = size[a] + size[b]
        split[nxt] = (int(e[0]), int(e[1]), float(e[2]))
        uf[ra] = rb
        comp_node[rb] = nxt
        nxt += 1
    if nxt != total:
        raise ParameterError("spanning tree is not connected")
    for arr in (left, right, size):
        arr.setflags(write=False)
    return MergeTree(n, left, right, size, tuple(split), total - 1)

"""Bottom-up dynamic program over the Kruskal merge tree."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .clustering import Clustering
from .errors import InfeasibleError, ParameterError
from .geometry import EUCLIDEAN, MetricSpec, Objective, aggregate, as_points
from .mst import MergeTree, build_merge_tree, minimum_spanning_tree
from .one_clustering import (
    CenterAccumulator,
    MeanAccumulator,
    cost_1median,
    make_median_accumulator,
    member_costs,
)


@dataclass
class CostTable:
    """``rows[v][j-1]`` is the best cost of splitting node ``v`` into ``j`` tree clusters.

    Rows stop at ``min(k, size(v))``; larger ``j`` is infeasible and reported
    as ``None``.  ``split[v][j-1]`` is how many clusters the left child gets.
    """

    tree: MergeTree
    k: int
    objective: Objective
    rows: List[np.ndarray]
    split: List[np.ndarray]
    insertions: int = 0
    node_centers: Dict[int, np.ndarray] = field(default_factory=dict)

    def mu(self, v: int, j: int) -> Optional[float]:
        if j < 1:
            raise ParameterError("j must be at least 1")
        row = self.rows[v]
        return float(row[j - 1]) if j <= row.shape[0] else None

    @property
    def root(self) -> int:
        return self.tree.root


def _combine_rows(ra: np.ndarray, rb: np.ndarray, k: int, center: bool):
    la, lb = ra.shape[0], rb.shape[0]
    L = min(k, la + lb)
    out = np.empty(L)
    arg = np.zeros(L, dtype=np.int64)
    for j in range(2, L + 1):
        i = np.arange(max(1, j - lb), min(la, j - 1) + 1)
        vals = np.maximum(ra[i - 1], rb[j - i - 1]) if center else ra[i - 1] + rb[j - i - 1]
        t = int(np.argmin(vals))  # first minimum: smallest i
        out[j - 1] = vals[t]
        arg[j - 1] = i[t]
    return out, arg


def _new_accumulator(objective: Objective, m: MetricSpec, d: int):
    if objective is Objective.MEANS:
        return MeanAccumulator(d)
    if objective is Objective.CENTER:
        return CenterAccumulator(m, d)
    return make_median_accumulator(m, d)


def _single_cost(acc, objective: Objective) -> Tuple[float, Optional[np.ndarray]]:
    if objective is Objective.MEDIAN:
        cost, center, _ = cost_1median(acc)
        return cost, center
    if objective is Objective.CENTER:
        return acc.ball()
    return acc.cost(), None


def fill_table(P: np.ndarray, tree: MergeTree, k: int, objective: Objective, m: MetricSpec) -> CostTable:
    objective = Objective(objective)
    n, d = P.shape
    total = 2 * n - 1
    rows: List[Optional[np.ndarray]] = [None] * total
    split: List[Optional[np.ndarray]] = [None] * total
    accs: Dict[int, object] = {}
    members: Dict[int, List[int]] = {}
    centers: Dict[int, np.ndarray] = {}
    insertions = 0
    center = objective is Objective.CENTER

    def leaf(v):
        acc = _new_accumulator(objective, m, d)
        acc.insert_many(P[v], [v])
        return acc

    for v in range(n):
        rows[v] = np.zeros(1)
        split[v] = np.zeros(1, dtype=np.int64)
    for v in tree.internal_nodes:
        a, b = tree.children(v)
        big, small = (a, b) if tree.size[a] >= tree.size[b] else (b, a)
        if big in accs:
            acc = accs.pop(big)
        else:
            acc = leaf(big)
            insertions += 1
        mem = members.pop(big) if big in members else [big]
        accs.pop(small, None)
        small_mem = members.pop(small) if small in members else [small]
        acc.insert_many(P[small_mem], small_mem)
        insertions += len(small_mem)
        mem.extend(small_mem)
        accs[v], members[v] = acc, mem
        mu1, c1 = _single_cost(acc, objective)
        if c1 is not None:
            centers[v] = c1
        row, arg = _combine_rows(rows[a], rows[b], k, center)
        row[0] = mu1
        rows[v], split[v] = row, arg
    if n > 1 and insertions > n * math.ceil(math.log2(n)):
        raise AssertionError(f"{insertions} accumulator insertions exceed n*ceil(log2 n) for n={n}")
    return CostTable(tree, k, objective, rows, split, insertions, centers)


def cluster_nodes(table: CostTable, k: int) -> List[int]:
    """Merge-tree nodes forming the ``k`` clusters chosen at the root."""
    tree = table.tree
    if k < 1 or k > table.k or table.mu(tree.root, k) is None:
        raise InfeasibleError(f"k={k} is outside the table range")
    out, stack = [], [(tree.root, k)]
    while stack:
        v, j = stack.pop()
        if j == 1:
            out.append(v)
            continue
        a, b = tree.children(v)
        i = int(table.split[v][j - 1])
        stack.append((b, j - i))
        stack.append((a, i))
    return out


def reconstruct(table: CostTable, k: int) -> List[List[int]]:
    """Member lists of the ``k`` tree clusters, ordered by lowest member."""
    return sorted((table.tree.members(v) for v in cluster_nodes(table, k)), key=lambda c: c[0])


def clustering_from_table(X, table: CostTable, k: int, m: MetricSpec, certified: bool = False) -> Clustering:
    P = as_points(X)
    n = P.shape[0]
    nodes = sorted(cluster_nodes(table, k), key=lambda v: table.tree.members(v)[0])
    labels = np.empty(n, dtype=np.int64)
    centers, costs = [], []
    for c, v in enumerate(nodes):
        mem = table.tree.members(v)
        labels[mem] = c
        if table.tree.is_leaf(v):
            center = P[v].copy()
        elif table.objective is Objective.MEANS:
            center = P[mem].mean(axis=0)
        else:
            center = table.node_centers[v]
        centers.append(center)
        costs.append(aggregate(member_costs(P[mem], center, table.objective, m), table.objective))
    total = aggregate(np.array(costs), table.objective)
    return Clustering(labels, np.array(centers), table.objective, m, total, costs, certified)


def solve_dp(
    X,
    k: int,
    objective="means",
    m: MetricSpec = EUCLIDEAN,
    certified: bool = False,
    tree: Optional[MergeTree] = None,
) -> Tuple[Clustering, CostTable]:
    P = as_points(X)
    n = P.shape[0]
    objective = Objective(objective)
    if k < 1:
        raise ParameterError("k must be at least 1")
    if k > n:
        raise InfeasibleError(f"k={k} exceeds the number of points n={n}")
    if objective is Objective.CENTER and not m.is_polyhedral:
        raise ParameterError("the center objective needs an L1 or polyhedral metric")
    t0 = time.perf_counter()
    if tree is None:
        tree = build_merge_tree(minimum_spanning_tree(P, m))
    t1 = time.perf_counter()
    shift = P.mean(axis=0)
    table = fill_table(P - shift, tree, k, objective, m)
    for v, c in table.node_centers.items():
        table.node_centers[v] = c + shift
    result = clustering_from_table(P, table, k, m, certified)
    t2 = time.perf_counter()
    result.timings = {"mst_ms": 1e3 * (t1 - t0), "dp_ms": 1e3 * (t2 - t1)}
    return result, table

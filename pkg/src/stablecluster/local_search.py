"""Single-swap local search for discrete k-median."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .clustering import Clustering, canonical_labels
from .errors import ParameterError, UnsupportedEngineError
from .geometry import L1, MetricKind, MetricSpec, Objective, as_points, pairwise
from .l1_subdivision import RangeIndex, build_swap_subdivision, trapezoid_offset_sum
from .seeding import gonzalez_kcenter

ENGINES = ("naive", "accelerated")
# a swap must beat the current cost by this relative margin
IMPROVEMENT_RTOL = 1e-12


def _center_set(S, n: int, k: Optional[int] = None) -> np.ndarray:
    S = np.asarray(S, dtype=np.int64).reshape(-1)
    if k is not None and S.size != k:
        raise ParameterError(f"expected {k} centers, got {S.size}")
    if S.size == 0 or np.unique(S).size != S.size:
        raise ParameterError("center indices must be distinct and nonempty")
    if S.min() < 0 or S.max() >= n:
        raise ParameterError("center index out of range")
    return S


def nearest_centers(X, S, m: MetricSpec = L1) -> Tuple[np.ndarray, np.ndarray]:
    """Position in ``S`` of each point's nearest center (first on ties) and the distance."""
    P = as_points(X)
    D = pairwise(P, P[np.asarray(S)], m)
    pos = np.argmin(D, axis=1)
    return pos, D[np.arange(P.shape[0]), pos]


def swap_cost_naive(X, S, m: MetricSpec = L1) -> float:
    P = as_points(X)
    S = _center_set(S, P.shape[0])
    return float(nearest_centers(P, S, m)[1].sum())


def _check_accelerated(P: np.ndarray, m: MetricSpec) -> None:
    if P.shape[1] != 2:
        raise UnsupportedEngineError("the accelerated engine is planar only (d=2)")
    if m.kind is not MetricKind.L1:
        raise UnsupportedEngineError("the accelerated engine evaluates L1 costs only")


def _cost_of_locations(idx: RangeIndex, C: np.ndarray) -> float:
    C = np.unique(C, axis=0)  # coincident centers serve the same points
    return math.fsum(trapezoid_offset_sum(idx, t, C[t.owner]) for t in build_swap_subdivision(C).trapezoids)


def swap_cost_accelerated(idx: RangeIndex, X, S) -> float:
    """Sum over cells of ``sum <x - c, u>`` for the subdivision of ``S``."""
    P = as_points(X)
    S = _center_set(S, P.shape[0])
    return _cost_of_locations(idx, P[S])


def _improves(new: float, cur: float) -> bool:
    return new < cur - IMPROVEMENT_RTOL * (1.0 + abs(cur))


def _swap_matrix_naive(D: np.ndarray, S: np.ndarray, cand: np.ndarray) -> np.ndarray:
    """``out[j, i]``: cost after replacing ``S[j]`` by ``cand[i]``."""
    DS = D[:, S]
    order = np.argsort(DS, axis=1, kind="stable")
    rows = np.arange(D.shape[0])
    d1 = DS[rows, order[:, 0]]
    d2 = DS[rows, order[:, 1]] if S.size > 1 else np.full(D.shape[0], np.inf)
    out = np.empty((S.size, cand.size))
    Dc = D[:, cand]
    for j in range(S.size):
        base = np.where(order[:, 0] == j, d2, d1)
        out[j] = np.minimum(Dc, base[:, None]).sum(axis=0)
    return out


def _swap_matrix_accelerated(P, idx, S, cand, threads: int) -> np.ndarray:
    def row(j):
        rest = np.delete(P[S], j, axis=0)
        return [_cost_of_locations(idx, np.vstack([rest, P[c]])) for c in cand]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.array(list(pool.map(row, range(S.size))))
    return np.array([row(j) for j in range(S.size)])


def best_1swap(
    X,
    S,
    engine: str = "naive",
    m: MetricSpec = L1,
    *,
    D: Optional[np.ndarray] = None,
    idx: Optional[RangeIndex] = None,
    threads: int = 1,
) -> Optional[Tuple[int, int, float]]:
    """Best ``(x in, y out, new cost)`` over all single swaps, or ``None`` if none strictly improves.

    Ties go to the lowest position of ``y`` in ``S``, then the lowest ``x``.
    """
    P = as_points(X)
    n = P.shape[0]
    S = _center_set(S, n)
    cand = np.setdiff1d(np.arange(n), S)
    if cand.size == 0:
        return None
    if engine == "naive":
        if D is None:
            D = pairwise(P, P, m)
        cur = float(D[:, S].min(axis=1).sum())
        M = _swap_matrix_naive(D, S, cand)
    elif engine == "accelerated":
        _check_accelerated(P, m)
        idx = idx if idx is not None else RangeIndex(P)
        cur = _cost_of_locations(idx, P[S])
        M = _swap_matrix_accelerated(P, idx, S, cand, threads)
    else:
        raise ParameterError(f"unknown engine {engine!r}; choose from {ENGINES}")
    j, i = np.unravel_index(int(np.argmin(M)), M.shape)
    new = float(M[j, i])
    if not _improves(new, cur):
        return None
    return int(cand[i]), int(S[j]), new


def resolve_threads(threads: Optional[int]) -> int:
    if threads is None:
        threads = int(os.environ.get("STABLE_CLUSTER_THREADS", "1") or 1)
    if threads < 1:
        raise ParameterError("threads must be positive")
    return threads


def clustering_from_centers(X, S, m: MetricSpec, objective=Objective.MEDIAN) -> Clustering:
    """Clustering induced by discrete centers ``S`` (nearest center, lowest position on ties)."""
    P = as_points(X)
    S = np.asarray(S, dtype=np.int64)
    pos, dist = nearest_centers(P, S, m)
    labels = canonical_labels(pos)
    # cluster ids follow first appearance; reorder centers to match
    first = {}
    for p, lab in zip(pos, labels):
        first.setdefault(int(lab), int(p))
    order = [first[c] for c in range(len(first))]
    centers = P[S[order]]
    costs = [float(dist[labels == c].sum()) for c in range(len(order))]
    return Clustering(labels, centers, Objective(objective), m, float(sum(costs)), costs)


def local_search_kmedian(
    X,
    k: int,
    m: MetricSpec = L1,
    init: Optional[Sequence[int]] = None,
    seed: Optional[int] = None,
    engine: str = "naive",
    threads: Optional[int] = None,
    max_iter: Optional[int] = None,
) -> Tuple[Clustering, int]:
    """Repeat the best strictly improving 1-swap until none exists.

    Without ``init`` the start is a farthest-point traversal from index 0, or
    from a random index when ``seed`` is given.
    """
    P = as_points(X)
    n = P.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"k must lie in [1, n]; got k={k}, n={n}")
    if engine not in ENGINES:
        raise ParameterError(f"unknown engine {engine!r}; choose from {ENGINES}")
    threads = resolve_threads(threads)
    if init is None:
        first = 0 if seed is None else int(np.random.default_rng(seed).integers(n))
        S, _ = gonzalez_kcenter(P, k, m, first=first)
    else:
        S = _center_set(init, n, k).copy()
    D = idx = None
    if engine == "naive":
        D = pairwise(P, P, m)
        cost = float(D[:, S].min(axis=1).sum())
    else:
        _check_accelerated(P, m)
        idx = RangeIndex(P)
        cost = _cost_of_locations(idx, P[S])
    swaps: List[dict] = []
    while max_iter is None or len(swaps) < max_iter:
        step = best_1swap(P, S, engine, m, D=D, idx=idx, threads=threads)
        if step is None:
            break
        x, y, new = step
        if not new < cost:
            raise AssertionError("local search cost failed to decrease")
        S[S == y] = x
        cost = new
        swaps.append({"x": x, "y": y, "cost": new})
    result = clustering_from_centers(P, np.sort(S), m)
    result.extra = {"engine": engine, "iterations": len(swaps), "swaps": swaps}
    return result, len(swaps)


@dataclass(frozen=True)
class SwapDiagnostics:
    sizes: dict
    costs: dict
    cost_current: float
    cost_optimal: float
    C: float
    gap: float

    def to_json(self) -> dict:
        return asdict(self)


def classify_swap_diagnostics(X, S, O, m: MetricSpec = L1, C: float = 1.0) -> SwapDiagnostics:
    """Split X by whether each point's nearest center in S and in O is shared by both sets.

    The first digit says whether ``nn(p)`` (in S) is also in O, the second
    whether ``nn*(p)`` (in O) is also in S.  ``gap = $(X) - $*(X) - C $*(X_00)``.
    """
    P = as_points(X)
    n = P.shape[0]
    S = _center_set(S, n)
    O = _center_set(O, n, S.size)
    pos_s, d_s = nearest_centers(P, S, m)
    pos_o, d_o = nearest_centers(P, O, m)
    s_shared = np.isin(S[pos_s], O)
    o_shared = np.isin(O[pos_o], S)
    sizes, costs = {}, {}
    for name, mask in (
        ("X00", ~s_shared & ~o_shared),
        ("X01", ~s_shared & o_shared),
        ("X10", s_shared & ~o_shared),
        ("X11", s_shared & o_shared),
    ):
        sizes[name] = int(mask.sum())
        costs[name] = {"current": float(d_s[mask].sum()), "optimal": float(d_o[mask].sum())}
    cur, opt = float(d_s.sum()), float(d_o.sum())
    gap = cur - opt - C * costs["X00"]["optimal"]
    return SwapDiagnostics(sizes, costs, cur, opt, float(C), gap)

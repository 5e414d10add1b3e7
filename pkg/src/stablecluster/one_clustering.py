"""Mergeable accumulators for the optimal 1-clustering cost of a growing point set."""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .dominance import DominanceIndex
from .errors import ParameterError
from .geometry import MetricKind, MetricSpec, Objective, distances_to, pairwise


def _rows(P, d: Optional[int]) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    if P.ndim == 1:
        P = P[None, :]
    if d is not None and P.shape[1] != d:
        raise ParameterError(f"dimension mismatch: accumulator has d={d}, point has d={P.shape[1]}")
    return P


class _Members:
    """Append-only member list; chunks are joined lazily so growth stays linear."""

    def __init__(self, d: int):
        self.d = d
        self._pts: list = []
        self._ids: list = []
        self._n = 0
        self._joined = (np.zeros((0, d)), np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return self._n

    def add(self, P: np.ndarray, ids) -> None:
        self._pts.append(P)
        self._ids.append(np.asarray(ids, dtype=np.int64).reshape(-1))
        self._n += P.shape[0]

    def _join(self):
        if self._pts:
            pts = [self._joined[0], *self._pts]
            ids = [self._joined[1], *self._ids]
            self._joined = (np.concatenate(pts), np.concatenate(ids))
            self._pts, self._ids = [], []
        return self._joined

    @property
    def points(self) -> np.ndarray:
        return self._join()[0]

    @property
    def ids(self) -> np.ndarray:
        return self._join()[1]


class MeanAccumulator:
    def __init__(self, d: int):
        self.d = d
        self.vec_sum = np.zeros(d)
        self.sq_sum = 0.0
        self.count = 0

    def insert(self, p) -> "MeanAccumulator":
        return self.insert_many(p)

    def insert_many(self, P, ids=None) -> "MeanAccumulator":
        P = _rows(P, self.d)
        self.vec_sum = self.vec_sum + P.sum(axis=0)
        self.sq_sum += float(np.einsum("ij,ij->", P, P))
        self.count += P.shape[0]
        return self

    @property
    def centroid(self) -> np.ndarray:
        if self.count == 0:
            raise ParameterError("empty accumulator")
        return self.vec_sum / self.count

    def cost(self) -> float:
        if self.count == 0:
            raise ParameterError("empty accumulator")
        c = self.sq_sum - float(self.vec_sum @ self.vec_sum) / self.count
        return max(c, 0.0)


def cost_1mean(acc: MeanAccumulator) -> float:
    return acc.cost()


def polyhedral_enclosing_ball(h: np.ndarray, U: np.ndarray) -> Tuple[float, np.ndarray]:
    """Smallest ball of ``max_u <p - x, u>`` containing a set with support values ``h``.

    ``h[j]`` is ``max_p <p, U[j]>``.  Solves ``min r`` subject to
    ``h_j - <x, U[j]> <= r`` and then snaps ``x`` onto the vertex spanned by the
    tight constraints.
    """
    d = U.shape[1]
    c = np.zeros(d + 1)
    c[-1] = 1.0
    A = np.hstack([-U, -np.ones((U.shape[0], 1))])
    res = linprog(c, A_ub=A, b_ub=-h, bounds=[(None, None)] * (d + 1), method="highs")
    if res.status != 0:
        raise RuntimeError(f"enclosing-ball LP failed: {res.message}")
    x = res.x[:d]
    r = float((h - U @ x).max())
    scale = max(1.0, float(np.abs(h).max()))
    slack = r - (h - U @ x)
    for tol in (1e-9, 1e-7, 1e-5):
        act = slack <= tol * scale
        if act.sum() < d + 1:
            continue
        M = np.hstack([U[act], np.ones((int(act.sum()), 1))])
        if np.linalg.matrix_rank(M) < d + 1:
            continue
        sol, *_ = np.linalg.lstsq(M, h[act], rcond=None)
        x2 = sol[:d]
        r2 = float((h - U @ x2).max())
        if r2 <= r:
            x, r = x2, r2
        break
    return max(r, 0.0), x


class CenterAccumulator:
    """Per-direction extreme values (and the points attaining them) of a point set."""

    def __init__(self, m: MetricSpec, d: int):
        if not m.is_polyhedral:
            raise ParameterError("the 1-center accumulator needs an L1 or polyhedral metric")
        self.m = m
        self.d = d
        self.planar_l1 = m.kind is MetricKind.L1 and d == 2
        # in the L1 plane the widths along (1, 1) and (-1, 1) determine the radius
        self.U = np.array([[1.0, 1.0], [-1.0, 1.0]]) if self.planar_l1 else m.family(d)
        k = self.U.shape[0]
        self.max_val = np.full(k, -np.inf)
        self.min_val = np.full(k, np.inf)
        self.max_pt = np.zeros((k, d))
        self.min_pt = np.zeros((k, d))
        self.count = 0
        self._cache = None

    def insert(self, p) -> "CenterAccumulator":
        return self.insert_many(p)

    def insert_many(self, P, ids=None) -> "CenterAccumulator":
        P = _rows(P, self.d)
        if P.shape[0] == 0:
            return self
        proj = P @ self.U.T
        hi = proj.argmax(axis=0)
        lo = proj.argmin(axis=0)
        cols = np.arange(self.U.shape[0])
        up = proj[hi, cols] > self.max_val
        down = proj[lo, cols] < self.min_val
        if up.any() or down.any():
            self._cache = None
        self.max_val = np.where(up, proj[hi, cols], self.max_val)
        self.max_pt[up] = P[hi[up]]
        self.min_val = np.where(down, proj[lo, cols], self.min_val)
        self.min_pt[down] = P[lo[down]]
        self.count += P.shape[0]
        return self

    def extreme_points(self) -> np.ndarray:
        """Distinct points attaining some directional extreme."""
        return np.unique(np.vstack([self.max_pt, self.min_pt]), axis=0)

    def ball(self) -> Tuple[float, np.ndarray]:
        if self.count == 0:
            raise ParameterError("empty accumulator")
        if self._cache is None:
            if self.planar_l1:
                w = self.max_val - self.min_val
                a = 0.5 * (self.max_val[0] + self.min_val[0])
                b = 0.5 * (self.max_val[1] + self.min_val[1])
                self._cache = (0.5 * float(w.max()), np.array([0.5 * (a - b), 0.5 * (a + b)]))
            else:
                self._cache = polyhedral_enclosing_ball(self.max_val, self.U)
        return self._cache

    def cost(self) -> float:
        return self.ball()[0]


def cost_1center(acc: CenterAccumulator) -> float:
    return acc.cost()


def cone_bisectors(U: np.ndarray) -> np.ndarray:
    """Unit bisector ``w_i`` between consecutive directions ``u_{i-1}`` and ``u_i``."""
    W = U + np.roll(U, 1, axis=0)
    return W / np.linalg.norm(W, axis=1, keepdims=True)


def _planar_family(m: MetricSpec) -> np.ndarray:
    U = np.asarray(m.family(2), dtype=np.float64)
    ang = np.arctan2(U[:, 1], U[:, 0])
    U = U[np.argsort(ang, kind="stable")]
    norms = np.linalg.norm(U, axis=1)
    if not np.allclose(norms, norms[0], rtol=1e-12):
        raise ParameterError("cone decomposition needs directions of equal norm")
    return U


class MedianStructure:
    """Cone decomposition evaluating ``F(x) = sum_p max_u <p - x, u>`` in the plane.

    Cone ``i`` spans the angular range from bisector ``w_i`` to ``w_{i+1}``; a
    point on a shared boundary ray belongs to the lower-indexed cone (cone 0 is
    closed on both sides and also holds ``p = x``).
    """

    def __init__(self, m: MetricSpec, d: int = 2):
        if d != 2 or not m.is_polyhedral:
            raise ParameterError("MedianStructure handles planar L1/polyhedral metrics only")
        self.d = 2
        self.U = _planar_family(m)
        r = self.U.shape[0]
        W = cone_bisectors(self.U)
        perp = np.column_stack([-W[:, 1], W[:, 0]])
        # s = <p, perp(w_i)>, t = <p, perp(w_{i+1})>
        self.S = perp
        self.T = np.roll(perp, -1, axis=0)
        self.cones = [DominanceIndex(s_strict=(i != 0), t_strict=(i == r - 1)) for i in range(r)]
        self._members = _Members(2)

    def __len__(self) -> int:
        return len(self._members)

    @property
    def points(self) -> np.ndarray:
        return self._members.points

    @property
    def ids(self) -> np.ndarray:
        return self._members.ids

    def insert(self, p, pid: int = -1) -> "MedianStructure":
        return self.insert_many(p, [pid])

    def insert_many(self, P, ids=None) -> "MedianStructure":
        P = _rows(P, 2)
        if ids is None:
            ids = np.full(P.shape[0], -1)
        for i, cone in enumerate(self.cones):
            cone.insert(P @ self.S[i], P @ self.T[i], P @ self.U[i])
        self._members.add(P, ids)
        return self

    def cone_counts(self, x) -> Tuple[np.ndarray, np.ndarray]:
        """Per-cone (beta, alpha) for query points ``x``: counts and sums of <p, u_i>."""
        x = _rows(x, 2)
        betas, alphas = [], []
        for i, cone in enumerate(self.cones):
            b, a = cone.query(x @ self.S[i], x @ self.T[i])
            betas.append(b)
            alphas.append(a)
        return np.array(betas), np.array(alphas)

    def evaluate(self, x) -> np.ndarray:
        x = _rows(x, 2)
        beta, alpha = self.cone_counts(x)
        lin = self.U @ x.T  # (r, q): <x, u_i>
        return (alpha - beta * lin).sum(axis=0)


class DirectMedian:
    """Fallback 1-median evaluator by direct summation (any dimension, any metric)."""

    def __init__(self, m: MetricSpec, d: int):
        self.m = m
        self.d = d
        self._members = _Members(d)

    def __len__(self) -> int:
        return len(self._members)

    @property
    def points(self) -> np.ndarray:
        return self._members.points

    @property
    def ids(self) -> np.ndarray:
        return self._members.ids

    def insert(self, p, pid: int = -1):
        return self.insert_many(p, [pid])

    def insert_many(self, P, ids=None):
        P = _rows(P, self.d)
        if ids is None:
            ids = np.full(P.shape[0], -1)
        self._members.add(P, ids)
        return self

    def evaluate(self, x) -> np.ndarray:
        x = _rows(x, self.d)
        return pairwise(x, self.points, self.m).sum(axis=1)


def make_median_accumulator(m: MetricSpec, d: int):
    if d == 2 and m.is_polyhedral:
        return MedianStructure(m, d)
    return DirectMedian(m, d)


def cost_1median(acc, candidates: Optional[Sequence[int]] = None) -> Tuple[float, np.ndarray, int]:
    """Cheapest member-centred 1-median: ``(cost, center, center id)``.

    ``candidates`` are point ids among the members (default: all members);
    ties go to the lowest id.
    """
    if len(acc) == 0:
        raise ParameterError("empty accumulator")
    if candidates is None:
        sel = np.arange(len(acc))
    else:
        candidates = np.asarray(list(candidates), dtype=np.int64)
        if candidates.size == 0:
            raise ParameterError("empty candidate set")
        where = {int(pid): j for j, pid in enumerate(acc.ids)}
        try:
            sel = np.array([where[int(c)] for c in candidates], dtype=np.int64)
        except KeyError as exc:
            raise ParameterError(f"candidate {exc.args[0]} is not a member") from None
    F = acc.evaluate(acc.points[sel])
    best = F.min()
    # exact ties only; ids break them
    tied = sel[F == best]
    j = tied[np.argmin(acc.ids[tied])]
    return float(max(best, 0.0)), acc.points[j].copy(), int(acc.ids[j])


def one_cluster_cost(P, objective: Objective, m: MetricSpec) -> Tuple[float, np.ndarray]:
    """Direct (non-incremental) 1-clustering cost and center of the rows of ``P``."""
    P = _rows(P, None)
    objective = Objective(objective)
    if objective is Objective.MEANS:
        c = P.mean(axis=0)
        return float(((P - c) ** 2).sum()), c
    if objective is Objective.CENTER:
        acc = CenterAccumulator(m, P.shape[1]).insert_many(P)
        r, c = acc.ball()
        return r, c
    D = pairwise(P, P, m).sum(axis=1)
    j = int(np.argmin(D))
    return float(D[j]), P[j].copy()


def member_costs(P, center, objective: Objective, m: MetricSpec) -> np.ndarray:
    """Per-point contribution of ``P`` when served by ``center``."""
    objective = Objective(objective)
    if objective is Objective.MEANS:
        diff = _rows(P, None) - np.asarray(center, dtype=np.float64)
        return np.einsum("ij,ij->i", diff, diff)
    return distances_to(P, center, m)

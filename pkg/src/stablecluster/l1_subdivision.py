"""Trapezoidal refinement of the planar L1 Voronoi diagram and a 3-level range index.

Within an x-slab whose walls include every center abscissa and every
abscissa where two centers' distance profiles cross, each center's distance
is ``h_c(x) + |y - c_y|`` with ``h_c`` linear, so the owners along any vertical
line are the non-dominated centers in y order.  Every cell edge then has
slope -1, 0 or +1, and a cell inside one quadrant of its owner satisfies
``delta(p, c) = <p - c, u>`` for a fixed ``u`` in ``{-1, 1}^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ParameterError
from .geometry import as_points

Line = Tuple[int, float]  # y = slope * x + intercept, slope in {-1, 0, 1}
SLOPES = (-1, 0, 1)


@dataclass(frozen=True)
class Trapezoid:
    """Cell ``{xl <= x < xr, bottom(x) <= y < top(x)}``; ``None`` bounds are unbounded."""

    owner: int
    u: Tuple[int, int]
    xl: float
    xr: float
    bottom: Optional[Line]
    top: Optional[Line]

    def contains(self, P: np.ndarray) -> np.ndarray:
        x, y = P[:, 0], P[:, 1]
        inside = (x >= self.xl) & (x < self.xr)
        if self.bottom is not None:
            s, a = self.bottom
            inside &= (y - s * x) >= a
        if self.top is not None:
            s, a = self.top
            inside &= (y - s * x) < a
        return inside


@dataclass(frozen=True)
class PlanarSubdivision:
    centers: np.ndarray
    trapezoids: Tuple[Trapezoid, ...]

    def __len__(self) -> int:
        return len(self.trapezoids)

    def locate(self, P) -> Tuple[np.ndarray, np.ndarray]:
        """Owner index and number of covering cells for each point."""
        P = as_points(P, 2)
        owner = np.full(P.shape[0], -1, dtype=np.int64)
        hits = np.zeros(P.shape[0], dtype=np.int64)
        for t in self.trapezoids:
            inside = t.contains(P)
            owner[inside] = t.owner
            hits += inside
        return owner, hits


def critical_abscissas(C: np.ndarray) -> np.ndarray:
    """Center abscissas plus every x where ``|x - c_x| - |x - b_x| = |c_y - b_y|``."""
    cx, cy = C[:, 0], C[:, 1]
    dx = cx[None, :] - cx[:, None]  # b_x - c_x  (row c, column b)
    dy = np.abs(cy[None, :] - cy[:, None])
    mask = np.abs(dx) > dy
    mid = 0.5 * (cx[:, None] + cx[None, :]) + 0.5 * np.sign(dx) * dy
    return np.unique(np.concatenate([cx, mid[mask]]))


def _visible(H: np.ndarray, Dy: np.ndarray) -> np.ndarray:
    """``vis[s, c]``: center c strictly owns a point on slab s's vertical lines.

    ``c`` is hidden by ``b`` when ``(h_b + |c_y - b_y|, b) <= (h_c, c)`` in
    lexicographic order, i.e. ``b`` is at least as close everywhere and wins ties.
    """
    k = H.shape[1]
    reach = H[:, :, None] + Dy[None, :, :]  # [s, b, c]
    hc = H[:, None, :]
    idx = np.arange(k)
    lower = idx[:, None] < idx[None, :]  # b < c
    hidden = (reach < hc) | ((reach == hc) & lower[None, :, :])
    hidden[:, idx, idx] = False
    return ~hidden.any(axis=1)


def build_swap_subdivision(centers) -> PlanarSubdivision:
    C = as_points(centers, 2)
    k = C.shape[0]
    if k == 0:
        raise ParameterError("no centers")
    if np.unique(C, axis=0).shape[0] != k:
        raise ParameterError("duplicate centers")
    xs = critical_abscissas(C)
    walls = np.concatenate([[-np.inf], xs, [np.inf]])
    mids = np.concatenate([[xs[0] - 1.0], 0.5 * (xs[:-1] + xs[1:]), [xs[-1] + 1.0]])
    H = np.abs(mids[:, None] - C[None, :, 0])
    Dy = np.abs(C[:, None, 1] - C[None, :, 1])
    vis = _visible(H, Dy)
    y_order = np.lexsort((np.arange(k), C[:, 1]))

    cells: List[Trapezoid] = []
    open_cells: Dict[tuple, float] = {}
    for s in range(len(mids)):
        xl, xr = walls[s], walls[s + 1]
        sx = np.where(C[:, 0] <= xl, 1, -1)
        live = [int(c) for c in y_order if vis[s, c]]
        current: Dict[tuple, float] = {}
        for j, c in enumerate(live):
            below: Optional[Line] = None
            above: Optional[Line] = None
            if j > 0:
                below = _bisector(C, sx, live[j - 1], c)
            if j + 1 < len(live):
                above = _bisector(C, sx, c, live[j + 1])
            level: Line = (0, float(C[c, 1]))
            for uy, lo, hi in ((-1, below, level), (1, level, above)):
                if lo is not None and lo == hi:
                    continue
                key = (c, (int(sx[c]), uy), lo, hi)
                current[key] = open_cells.pop(key, xl)
        for key, start in open_cells.items():
            cells.append(Trapezoid(key[0], key[1], start, xl, key[2], key[3]))
        open_cells = current
    for key, start in open_cells.items():
        cells.append(Trapezoid(key[0], key[1], start, np.inf, key[2], key[3]))
    cells.sort(key=lambda t: (t.owner, t.xl))
    return PlanarSubdivision(C, tuple(cells))


def _bisector(C: np.ndarray, sx: np.ndarray, a: int, b: int) -> Line:
    """Boundary between y-adjacent owners ``a`` (below) and ``b`` (above) inside a slab."""
    sa, sb = int(sx[a]), int(sx[b])
    slope = (sb - sa) // 2
    intercept = 0.5 * (sa * C[a, 0] - sb * C[b, 0] + C[a, 1] + C[b, 1])
    return (slope, float(intercept))


class RangeIndex:
    """Static 3-level index answering count and coordinate sums over trapezoids.

    Level 1 is the x order; each aligned block of ``2**D`` consecutive points
    is re-sorted by the bottom-edge key ``y - s_b x``; each aligned sub-block
    of ``2**L`` positions of that order is sorted by the top-edge key
    ``y - s_t x`` with running sums of x and y.  The running sums are taken
    relative to ``origin`` to keep them well conditioned.
    """

    def __init__(self, X):
        P = as_points(X, 2)
        self.n = P.shape[0]
        self.origin = P.mean(axis=0) if self.n else np.zeros(2)
        order = np.lexsort((P[:, 1], P[:, 0]))
        raw = P[order]
        self.pts = raw - self.origin
        # keys use raw coordinates so membership agrees bit for bit with Trapezoid.contains
        self.xs = raw[:, 0].copy()
        self.keys = {s: raw[:, 1] - s * raw[:, 0] for s in SLOPES}
        self.depth = max(1, int(np.ceil(np.log2(max(self.n, 1)))) + 1)
        self._lvl2: Dict[tuple, tuple] = {}
        self._lvl3: Dict[tuple, tuple] = {}
        self._ranks: Dict[int, np.ndarray] = {}

    def _second(self, D: int, sb: int):
        got = self._lvl2.get((D, sb))
        if got is None:
            block = np.arange(self.n) >> D
            perm = np.lexsort((self.keys[sb], block))
            got = (perm, self.keys[sb][perm])
            self._lvl2[(D, sb)] = got
        return got

    def _third(self, D: int, L: int, sb: int, st: int):
        levels = self._lvl3.get((D, sb, st))
        if levels is None:
            # level L is built from level L-1 by merging sorted runs of half length
            perm, _ = self._second(D, sb)
            rank = self._rank(st)[perm]
            o = np.arange(self.n)
            levels = []
            for lv in range(D + 1):
                if lv:
                    o = o[np.argsort((o >> lv) * self.n + rank[o], kind="stable")]
                p = perm[o]
                cs = np.zeros((self.n + 1, 2))
                np.cumsum(self.pts[p], axis=0, out=cs[1:])
                levels.append((self.keys[st][p], cs))
            self._lvl3[(D, sb, st)] = levels
        return levels[L]

    def _rank(self, s: int) -> np.ndarray:
        r = self._ranks.get(s)
        if r is None:
            r = np.empty(self.n, dtype=np.int64)
            r[np.argsort(self.keys[s], kind="stable")] = np.arange(self.n)
            self._ranks[s] = r
        return r

    def _aligned(self, lo: int, hi: int, cap: int):
        """Aligned dyadic blocks covering ``[lo, hi)``; a block may end at ``n``."""
        n = self.n
        while lo < hi:
            L = cap
            while L > 0 and (lo % (1 << L) or min(lo + (1 << L), n) > hi):
                L -= 1
            end = min(lo + (1 << L), n)
            yield L, lo, end
            lo = end

    def query(self, xl: float, xr: float, bottom: Optional[Line], top: Optional[Line]):
        """Count and (x, y) sums of points with ``xl <= x < xr`` between the two lines."""
        count, sums = self.query_centered(xl, xr, bottom, top)
        return count, sums + count * self.origin

    def query_centered(self, xl: float, xr: float, bottom: Optional[Line], top: Optional[Line]):
        """Like ``query`` but with the sums taken relative to ``origin``."""
        i0 = int(np.searchsorted(self.xs, xl, side="left")) if np.isfinite(xl) else 0
        i1 = int(np.searchsorted(self.xs, xr, side="left")) if np.isfinite(xr) else self.n
        sb, ab = (0, None) if bottom is None else bottom
        st, at = (0, None) if top is None else top
        count = 0
        sums = np.zeros(2)
        for D, p, e in self._aligned(i0, i1, self.depth):
            q = p
            if ab is not None:
                _, kb = self._second(D, sb)
                q = p + int(np.searchsorted(kb[p:e], ab, side="left"))
            for L, g, h in self._aligned(q, e, D):
                kt, cs = self._third(D, L, sb, st)
                c = (h - g) if at is None else int(np.searchsorted(kt[g:h], at, side="left"))
                count += c
                sums += cs[g + c] - cs[g]
        return count, sums


def trapezoid_offset_sum(idx: RangeIndex, t: Trapezoid, c) -> float:
    """``sum of <x - c, u(t)>`` over X in t, accumulated relative to the index origin."""
    count, sums = idx.query_centered(t.xl, t.xr, t.bottom, t.top)
    if not count:
        return 0.0
    u = np.asarray(t.u, dtype=np.float64)
    return float(sums @ u - count * ((np.asarray(c, dtype=np.float64) - idx.origin) @ u))


def trapezoid_sum(idx: RangeIndex, t: Trapezoid, u) -> Tuple[int, float]:
    """``(|X in t|, sum of <x, u> over X in t)``."""
    if t.xl > t.xr:
        raise ParameterError("trapezoid walls are reversed")
    count, sums = idx.query(t.xl, t.xr, t.bottom, t.top)
    return count, float(u[0] * sums[0] + u[1] * sums[1])

"""Insert-only weighted 2D dominance counting.

A query ``(s0, t0)`` reports how many stored points satisfy ``s > s0`` (or
``s >= s0``) and ``t <= t0`` (or ``t < t0``), together with the sum of their
weights.  Static blocks are merge-sort trees over the points ordered by
decreasing ``s``; insertions use the logarithmic method, rebuilding a block
only when it is absorbed into one at least 1.5 times larger.
"""

from __future__ import annotations

from typing import List

import numpy as np


class _StaticBlock:
    __slots__ = ("m", "s_asc", "t_sorted", "levels")

    def __init__(self, s: np.ndarray, t: np.ndarray, w: np.ndarray):
        m = s.shape[0]
        self.m = m
        order = np.argsort(-s, kind="stable")
        s = s[order]
        t = t[order]
        w = w[order]
        self.s_asc = s[::-1].copy()
        t_order = np.argsort(t, kind="stable")
        self.t_sorted = t[t_order]
        rank = np.empty(m, dtype=np.int64)
        rank[t_order] = np.arange(m)
        pos = np.arange(m, dtype=np.int64)
        self.levels = []
        L = 0
        while (1 << L) <= m:
            comp = (pos >> L) * m + rank
            o = np.argsort(comp, kind="stable")
            cs = np.zeros(m + 1)
            np.cumsum(w[o], out=cs[1:])
            self.levels.append((comp[o], cs))
            L += 1

    def query(self, s0, t0, s_strict: bool, t_strict: bool):
        m = self.m
        side_s = "right" if s_strict else "left"
        q = m - np.searchsorted(self.s_asc, s0, side=side_s)
        R = np.searchsorted(self.t_sorted, t0, side="left" if t_strict else "right")
        cnt = np.zeros(q.shape, dtype=np.int64)
        tot = np.zeros(q.shape)
        for L, (comp, cs) in enumerate(self.levels):
            hit = ((q >> L) & 1).astype(bool)
            if not hit.any():
                continue
            start = (q >> (L + 1)) << (L + 1)
            idx = np.searchsorted(comp, (start >> L) * m + R, side="left")
            cnt += np.where(hit, idx - start, 0)
            tot += np.where(hit, cs[idx] - cs[start], 0.0)
        return cnt, tot


class DominanceIndex:
    def __init__(self, s_strict: bool = True, t_strict: bool = False):
        self.s_strict = s_strict
        self.t_strict = t_strict
        self.blocks: List[_StaticBlock] = []
        self._raw: List[tuple] = []
        self.rebuilt_points = 0

    def __len__(self) -> int:
        return sum(b.m for b in self.blocks)

    def insert(self, s, t, w) -> None:
        s = np.atleast_1d(np.asarray(s, dtype=np.float64))
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        w = np.atleast_1d(np.asarray(w, dtype=np.float64))
        if s.size == 0:
            return
        parts = [(s, t, w)]
        carry = s.size
        # blocks and their raw arrays are kept largest-first
        while self.blocks and self.blocks[-1].m <= 2 * carry:
            self.blocks.pop()
            raw = self._raw.pop()
            parts.append(raw)
            carry += raw[0].size
        S = np.concatenate([p[0] for p in parts])
        T = np.concatenate([p[1] for p in parts])
        W = np.concatenate([p[2] for p in parts])
        self.rebuilt_points += S.size
        self.blocks.append(_StaticBlock(S, T, W))
        self._raw.append((S, T, W))

    def query(self, s0, t0):
        s0 = np.atleast_1d(np.asarray(s0, dtype=np.float64))
        t0 = np.atleast_1d(np.asarray(t0, dtype=np.float64))
        cnt = np.zeros(s0.shape, dtype=np.int64)
        tot = np.zeros(s0.shape)
        for b in self.blocks:
            c, w = b.query(s0, t0, self.s_strict, self.t_strict)
            cnt += c
            tot += w
        return cnt, tot

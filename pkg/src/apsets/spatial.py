"""Uniform-grid spatial hash with exact distance post-filtering.

Points are bucketed by ``floor(x / cell_size)``.  Bucket keys are flattened to
int64 and kept sorted so that every query is a handful of vectorised
``searchsorted`` calls rather than a Python loop over points.
"""

from __future__ import annotations

import itertools
import math
from functools import cached_property

import numpy as np

from .errors import InputError


def default_cell_size(A) -> float:
    """Mean inter-point spacing of ``A`` (volume per point to the power 1/p)."""
    from .pointset import unit_ball_volume

    n = max(len(A), 1)
    vol = unit_ball_volume(A.dim) * A.window_radius**A.dim
    return (vol / n) ** (1.0 / A.dim)


class SpatialIndex:
    """Grid hash over a fixed ``(n, p)`` array of points."""

    def __init__(self, points: np.ndarray, cell_size: float):
        if not (math.isfinite(cell_size) and cell_size > 0):
            raise InputError("cell_size must be finite and positive")
        pts = np.asarray(points, dtype=float)
        if not np.all(np.isfinite(pts)):
            raise InputError("non-finite coordinates")
        self.points = pts
        self.dim = pts.shape[1]
        if len(pts):
            extent = float(np.ptp(pts, axis=0).max())
            # keep flattened keys well inside int64
            cell_size = max(cell_size, extent / float(1 << (60 // self.dim)) * 4)
        self.cell_size = float(cell_size)
        cells = np.floor(pts / self.cell_size).astype(np.int64)
        if len(pts):
            self._cmin = cells.min(axis=0)
            self._cmax = cells.max(axis=0)
        else:
            self._cmin = np.zeros(self.dim, dtype=np.int64)
            self._cmax = -np.ones(self.dim, dtype=np.int64)
        span = self._cmax - self._cmin + 1
        strides = np.ones(self.dim, dtype=np.int64)
        for k in range(self.dim - 2, -1, -1):
            strides[k] = strides[k + 1] * max(int(span[k + 1]), 1)
        self._strides = strides
        keys = self._encode(cells)
        self._order = np.argsort(keys, kind="stable")
        self._keys = keys[self._order]
        self._cells = cells

    def _encode(self, cells: np.ndarray) -> np.ndarray:
        return ((cells - self._cmin) * self._strides).sum(axis=1)

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def buckets(self) -> dict:
        """Map from integer cell coordinates to the indices of points in that cell."""
        out: dict = {}
        for i, cell in enumerate(map(tuple, self._cells.tolist())):
            out.setdefault(cell, []).append(i)
        return out

    def query_many(self, X, r: float, strict: bool = False):
        """All pairs ``(q, i)`` with ``|X[q] - points[i]| <= r`` (``< r`` if strict).

        Returns two int arrays sorted by ``q`` then ``i``.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        empty = (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
        if len(self.points) == 0 or len(X) == 0 or r < 0:
            return empty
        c = self.cell_size
        lo = np.floor((X - r) / c).astype(np.int64)
        hi = np.floor((X + r) / c).astype(np.int64)
        lo = np.maximum(lo, self._cmin)
        hi = np.minimum(hi, self._cmax)
        live = np.all(lo <= hi, axis=1)
        if not live.any():
            return empty
        qidx = np.flatnonzero(live)
        lo, hi, Xl = lo[live], hi[live], X[live]
        span = (hi - lo).max(axis=0)
        r2 = r * r
        n_offsets = float(np.prod(span + 1.0))
        if n_offsets * 2000 > len(Xl) * len(self.points):
            return self._scan(Xl, qidx, r2, strict)
        qs, ps = [], []
        for off in itertools.product(*(range(int(s) + 1) for s in span)):
            cell = lo + np.asarray(off, dtype=np.int64)
            ok = np.all(cell <= hi, axis=1)
            if not ok.any():
                continue
            keys = self._encode(cell[ok])
            start = np.searchsorted(self._keys, keys, side="left")
            stop = np.searchsorted(self._keys, keys, side="right")
            counts = stop - start
            total = int(counts.sum())
            if total == 0:
                continue
            q_local = np.repeat(np.flatnonzero(ok), counts)
            first = np.repeat(start - np.cumsum(counts) + counts, counts)
            pos = first + np.arange(total)
            pj = self._order[pos]
            diff = self.points[pj] - Xl[q_local]
            d2 = np.einsum("ij,ij->i", diff, diff)
            keep = d2 < r2 if strict else d2 <= r2
            qs.append(qidx[q_local[keep]])
            ps.append(pj[keep])
        if not qs:
            return empty
        q = np.concatenate(qs)
        p = np.concatenate(ps)
        order = np.lexsort((p, q))
        return q[order], p[order]

    def _scan(self, X, qidx, r2, strict):
        # direct distance scan; cheaper than walking many nearly empty cells
        qs, ps = [], []
        step = max(1, (1 << 22) // max(len(self.points), 1))
        for s in range(0, len(X), step):
            diff = X[s:s + step, None, :] - self.points[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            q, p = np.nonzero(d2 < r2 if strict else d2 <= r2)
            qs.append(qidx[s + q])
            ps.append(p)
        return np.concatenate(qs).astype(np.int64), np.concatenate(ps).astype(np.int64)

    def query(self, x, r: float, strict: bool = False) -> np.ndarray:
        """Sorted indices of points within distance ``r`` of ``x``."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return self.query_many(x, r, strict)[1]

    def count_within(self, X, r: float, strict: bool = False) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        q, _ = self.query_many(X, r, strict)
        return np.bincount(q, minlength=len(X))

    def pairs(self, r: float, strict: bool = False):
        """Index pairs ``i < j`` at distance ``<= r``."""
        q, p = self.query_many(self.points, r, strict)
        keep = q < p
        return q[keep], p[keep]


def build_index(A, cell_size: float) -> SpatialIndex:
    """Grid hash over the points of ``A`` with the given cell size."""
    return SpatialIndex(A.points, cell_size)

"""Window-scale geometry: gaps, covering radii, difference sets, classification."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InconclusiveWindow, InputError
from .pointset import PointSet, Tolerances, unit_ball_volume
from .spatial import SpatialIndex, build_index

__all__ = [
    "ClassificationReport",
    "DifferenceSet",
    "build_index",
    "classify",
    "covering_radius",
    "difference_set",
    "min_pairwise_gap",
    "probe_grid",
]


def min_pairwise_gap(A: PointSet) -> float:
    """Smallest distance between two distinct points; ``inf`` if ``#A < 2``."""
    n = len(A)
    if n < 2:
        return math.inf
    r = A.index.cell_size
    while True:
        idx = A.index if r == A.index.cell_size else SpatialIndex(A.points, r)
        i, j = idx.pairs(r)
        if i.size:
            d = np.linalg.norm(A.points[i] - A.points[j], axis=1)
            return float(d.min())
        r *= 2.0


def probe_grid(radius: float, step: float, dim: int) -> np.ndarray:
    """Points of ``step * Z^p`` inside the closed ball ``B(0, radius)``."""
    k = int(math.floor(radius / step))
    axis = np.arange(-k, k + 1, dtype=float) * step
    if dim == 1:
        grid = axis.reshape(-1, 1)
    else:
        mesh = np.meshgrid(*([axis] * dim), indexing="ij")
        grid = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.einsum("ij,ij->i", grid, grid) <= radius * radius
    return grid[keep]


def _probe_max_distance(tree: cKDTree, probe_radius: float, outer: float, step: float, dim: int):
    """Max over probes of the distance to the nearest stored point.

    Only probes with ``|x| + d(x) <= outer`` count: for those the nearest point
    inside the ball ``B(0, outer)`` is also the nearest point of the full set,
    so the window cannot inflate the value.
    """
    probes = probe_grid(probe_radius, step, dim)
    if len(probes) == 0 or tree.n == 0:
        return None
    d, _ = tree.query(probes, k=1)
    trusted = np.linalg.norm(probes, axis=1) + d <= outer * (1 + 1e-12)
    if not trusted.any():
        return None
    return float(d[trusted].max())


def covering_radius(A: PointSet, tol: Tolerances | None = None) -> float:
    """Grid estimate of the covering radius of ``A`` on ``B(0, R - margin)``.

    The estimate is a max over probe points, so the true value over the probed
    region is at most ``estimate + probe_step * sqrt(p) / 2``.
    """
    tol = (tol or Tolerances()).resolve(A)
    rho = A.window_radius - tol.boundary_margin
    if rho <= 0:
        raise InconclusiveWindow("boundary margin leaves no probe region")
    if len(A) == 0:
        raise InconclusiveWindow("empty point set has no covering radius")
    value = _probe_max_distance(A.kdtree, rho, A.window_radius, tol.probe_step, A.dim)
    if value is None:
        raise InconclusiveWindow("no probe point is trusted inside the window")
    return value


@dataclass(frozen=True, eq=False)
class DifferenceSet:
    """Deduplicated vectors ``a - b`` (``a, b`` in the window) with ``|a - b| <= radius_cap``.

    ``counts[k]`` is the number of ordered pairs realising ``vectors[k]``
    (within ``eq_tol``); the zero vector is realised by every point.
    """

    dim: int
    radius_cap: float
    vectors: np.ndarray
    counts: np.ndarray
    separation: float
    eq_tol: float

    def __len__(self) -> int:
        return len(self.vectors)

    def within(self, radius: float) -> np.ndarray:
        """Boolean mask of stored vectors with norm ``<= radius``."""
        return np.linalg.norm(self.vectors, axis=1) <= radius


_HASH_MULTIPLIERS = np.array(
    [0x9E3779B97F4A7C15, 0xC2B2AE3D27D4EB4F, 0x165667B19E3779F9, 0xD6E8FEB86659FD93],
    dtype=np.uint64,
)


def _group_rows(keys: np.ndarray):
    """Group identical integer rows: ``(first occurrence per group, group of each row)``.

    Groups are ordered by first occurrence.  Rows are hashed to one word and
    the grouping is checked exactly; a hash collision falls back to a full
    row sort.
    """
    n, p = keys.shape
    if n == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    mult = np.resize(_HASH_MULTIPLIERS, p)
    with np.errstate(over="ignore"):
        h = (keys.astype(np.uint64) * mult).sum(axis=1, dtype=np.uint64)
    _, first, inverse = np.unique(h, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    if not np.array_equal(keys[first][inverse], keys):
        _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
    # renumber groups by first occurrence
    rank = np.empty(len(first), dtype=np.int64)
    by_first = np.argsort(first, kind="stable")
    rank[by_first] = np.arange(len(first))
    return first[by_first], rank[inverse]


# rows of difference vectors generated per block; bounds peak memory
PAIR_BLOCK = 1 << 21


def _merge_clusters(reps: np.ndarray, counts: np.ndarray, eq_tol: float):
    """Union rows closer than ``eq_tol``; the earliest row represents its cluster."""
    if len(reps) < 2:
        return reps, counts
    pairs = cKDTree(reps).query_pairs(eq_tol, output_type="ndarray")
    if not len(pairs):
        return reps, counts
    parent = np.arange(len(reps))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            # rows are in generation order, so the smaller index came first
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(x) for x in range(len(reps))])
    counts = np.bincount(roots, weights=counts, minlength=len(reps)).astype(np.int64)
    keep = roots == np.arange(len(reps))
    return reps[keep], counts[keep]


def _sort_vectors(vectors: np.ndarray):
    norms = np.round(np.linalg.norm(vectors, axis=1), 12)
    keys = tuple(vectors[:, k] for k in reversed(range(vectors.shape[1]))) + (norms,)
    return np.lexsort(keys)


class _KeyAccumulator:
    """Running first-occurrence grouping of vectors by their ``eq_tol`` grid key."""

    def __init__(self, p: int, eq_tol: float):
        self.eq_tol = eq_tol
        self.keys = np.empty((0, p), dtype=np.int64)
        self.vectors = np.empty((0, p))
        self.counts = np.empty(0, dtype=np.int64)

    def add(self, vectors: np.ndarray, counts: np.ndarray) -> None:
        keys = np.round(vectors / self.eq_tol).astype(np.int64)
        keys = np.concatenate([self.keys, keys])
        vectors = np.concatenate([self.vectors, vectors])
        counts = np.concatenate([self.counts, counts])
        first, inverse = _group_rows(keys)
        self.counts = np.bincount(inverse, weights=counts).astype(np.int64)
        self.keys, self.vectors = keys[first], vectors[first]


def _dedupe(vectors: np.ndarray, counts: np.ndarray, eq_tol: float):
    """Merge vectors closer than ``eq_tol``; the earliest row represents its cluster."""
    acc = _KeyAccumulator(vectors.shape[1], eq_tol)
    acc.add(vectors, counts)
    return _merge_clusters(acc.vectors, acc.counts, eq_tol)


def _pair_blocks(A: PointSet, D: float):
    """Yield ``(i, j)`` index arrays of all pairs ``i < j`` with ``|a_i - a_j| <= D``,
    in lexicographic order, a block of first indices at a time."""
    n = len(A)
    # crude neighbours-per-point estimate, only used to size blocks
    density = n / max(A.window_radius, 1e-300) ** A.dim
    per_point = max(1.0, density * (2 * D) ** A.dim)
    step = max(1, int(PAIR_BLOCK // (2 * per_point)))
    for s in range(0, n, step):
        e = min(n, s + step)
        block = cKDTree(A.points[s:e])
        m = block.sparse_distance_matrix(A.kdtree, D, output_type="ndarray")
        i = m["i"].astype(np.int64) + s
        j = m["j"].astype(np.int64)
        keep = j > i
        i, j = i[keep], j[keep]
        order = np.lexsort((j, i))
        yield i[order], j[order]


def difference_set(A: PointSet, D: float, tol: Tolerances | None = None) -> DifferenceSet:
    """All ``a - b`` with ``|a - b| <= D``, deduplicated at ``eq_tol``.

    Pairs are generated in blocks so memory stays bounded by the number of
    distinct vectors rather than the number of pairs.
    """
    tol = (tol or Tolerances()).resolve(A)
    if not (math.isfinite(D) and D >= 0):
        raise InputError("difference radius must be finite and non-negative")
    if D > 2 * A.window_radius * (1 + 1e-12):
        raise InputError("difference radius exceeds the window diameter")
    p = A.dim
    if len(A) == 0:
        empty = np.empty((0, p))
        return DifferenceSet(p, D, empty, np.empty(0, dtype=np.int64), math.inf, tol.eq_tol)
    # generation order: 0 first, then (a_j - a_i, a_i - a_j) for each pair
    acc = _KeyAccumulator(p, tol.eq_tol)
    acc.add(np.zeros((1, p)), np.array([len(A)]))
    if D > 0 and len(A) > 1:
        for i, j in _pair_blocks(A, D):
            v = A.points[j] - A.points[i]
            acc.add(np.stack([v, -v], axis=1).reshape(-1, p), np.ones(2 * len(v), dtype=np.int64))
    reps, counts = _merge_clusters(acc.vectors, acc.counts, tol.eq_tol)
    reps = reps.copy()
    reps[np.abs(reps) < 0.5 * tol.eq_tol] = 0.0
    order = _sort_vectors(reps)
    reps, counts = reps[order], counts[order]
    reps.setflags(write=False)
    counts.setflags(write=False)
    if len(reps) >= 2:
        d, _ = cKDTree(reps).query(reps, k=2)
        sep = float(d[:, 1].min())
    else:
        sep = math.inf
    return DifferenceSet(p, float(D), reps, counts, sep, tol.eq_tol)


@dataclass(frozen=True)
class ClassificationReport:
    r_min: float
    covering_radius_est: float
    diff_separation: float
    diff_radius: float
    diff_covering_radius: float
    uniformly_discrete: bool
    relatively_dense: bool
    delone: bool
    finite_type: bool
    meyer: bool
    window_radius: float
    eq_tol: float
    probe_step: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _classify_diff_radius(A: PointSet, tol: Tolerances) -> float:
    if tol.diff_radius is not None:
        return min(tol.diff_radius, 2 * A.window_radius)
    R = A.window_radius
    D = R / 2
    n = len(A)
    # expected ordered pairs within D is about n^2 (D/R)^p / 2
    est = n * n * (D / R) ** A.dim / 2
    if est > tol.max_diff_pairs:
        D = R * (2.0 * tol.max_diff_pairs / (n * n)) ** (1.0 / A.dim)
    return D


def classify(A: PointSet, tol: Tolerances | None = None) -> ClassificationReport:
    """Delone / finite-type / Meyer flags at window scale.

    Thresholds: uniformly discrete iff ``r_min > 2 eq_tol``; relatively dense
    iff the covering radius estimate is below ``R/4``; finite type iff the
    difference set within ``D`` (default ``R/2``) is separated by more than
    ``2 eq_tol``; Meyer iff finite type and that difference set is itself
    relatively dense (covering radius below ``D/4``) inside ``B(0, D)``.
    These are window heuristics, not exact set properties.

    Raises :class:`InconclusiveWindow` when ``R < 8 *`` covering radius.
    """
    tol = (tol or Tolerances()).resolve(A)
    if len(A) < 2:
        raise InputError("classification needs at least two points")
    R = A.window_radius
    r_min = min_pairwise_gap(A)
    cov = covering_radius(A, tol)
    if R < 8 * cov:
        raise InconclusiveWindow(
            f"window radius {R:.6g} is below 8x the covering radius estimate {cov:.6g}"
        )
    D = _classify_diff_radius(A, tol)
    ds = difference_set(A, D, tol)
    uniformly_discrete = r_min > 2 * tol.eq_tol
    relatively_dense = cov < R / 4
    finite_type = ds.separation > 2 * tol.eq_tol
    diff_cov = math.inf
    if len(ds) and D > 0:
        p = A.dim
        step = max((unit_ball_volume(p) * D**p / tol.max_probes) ** (1.0 / p), 1e3 * tol.eq_tol)
        value = _probe_max_distance(cKDTree(ds.vectors), D, D, step, p)
        if value is not None:
            diff_cov = value
    delone = uniformly_discrete and relatively_dense
    meyer = finite_type and delone and diff_cov < D / 4
    return ClassificationReport(
        r_min=r_min,
        covering_radius_est=cov,
        diff_separation=ds.separation,
        diff_radius=D,
        diff_covering_radius=diff_cov,
        uniformly_discrete=uniformly_discrete,
        relatively_dense=relatively_dense,
        delone=delone,
        finite_type=finite_type,
        meyer=meyer,
        window_radius=R,
        eq_tol=tol.eq_tol,
        probe_step=tol.probe_step,
    )

"""Bohr and Besicovitch almost periods of windowed point sets.

A translation ``tau`` is tested on the interior points
``|a| <= R - margin - |tau| - eps`` (so ``a + tau`` and its ``eps``-ball stay
inside the window) and always for both ``tau`` and ``-tau``.

For ``eps < r_min / 2`` an ``eps``-ball holds at most one point, so the
bijection in the Bohr criterion reduces to the one-sided test "every ``a`` has
some ``a'`` with ``|a + tau - a'| < eps``".  :func:`bijection_match_oracle`
checks the bijection directly with a maximum bipartite matching.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import CriterionInvalid, InconclusiveWindow, InputError, OracleRefused
from .geometry import _probe_max_distance, _sort_vectors, difference_set
from .pointset import PointSet, Tolerances, unit_ball_volume

ORACLE_MAX_POINTS = 5000


@dataclass(frozen=True, eq=False)
class DefectSet:
    """Interior points left unmatched by the translation ``tau`` at tolerance ``epsilon``."""

    tau: np.ndarray
    epsilon: float
    unmatched: np.ndarray
    interior_count: int

    @property
    def fraction(self) -> float:
        return len(self.unmatched) / self.interior_count if self.interior_count else 0.0

    @property
    def empty(self) -> bool:
        return len(self.unmatched) == 0


class BohrCheck(NamedTuple):
    holds: bool
    witness: DefectSet


@dataclass(frozen=True)
class VerifiedPeriod:
    tau: tuple
    kind: str
    defect: float


@dataclass(frozen=True)
class AlmostPeriodReport:
    epsilon: float
    search_radius: float
    gap_estimate: float
    verified: list = field(default_factory=list)
    delta: float | None = None

    @property
    def taus(self) -> np.ndarray:
        if not self.verified:
            return np.empty((0, 0))
        return np.array([v.tau for v in self.verified], dtype=float)

    def __len__(self) -> int:
        return len(self.verified)


def _interior_radius(A: PointSet, tau: np.ndarray, eps: float, margin: float) -> float:
    return A.window_radius - margin - float(np.linalg.norm(tau)) - eps


def _interior_by_norm(A: PointSet, radius: float) -> np.ndarray:
    return A.norm_order[:A.count_within(radius)]


def _as_tau(A: PointSet, tau) -> np.ndarray:
    t = np.asarray(tau, dtype=float).reshape(-1)
    if t.shape != (A.dim,):
        raise InputError(f"translation must have {A.dim} coordinates")
    if not np.all(np.isfinite(t)):
        raise InputError("non-finite translation")
    return t


def has_neighbour(A: PointSet, X: np.ndarray, r: float, strict: bool = True) -> np.ndarray:
    """For each row of ``X``, whether some point of ``A`` lies within ``r`` (``< r`` if strict)."""
    if len(X) == 0 or len(A) == 0:
        return np.zeros(len(X), dtype=bool)
    d, _ = A.kdtree.query(X, k=1, distance_upper_bound=r * (1 + 1e-9) + 1e-300)
    return d < r if strict else d <= r


def _unmatched(A: PointSet, idx: np.ndarray, shift: np.ndarray, eps: float, strict=True) -> np.ndarray:
    if idx.size == 0:
        return idx
    return idx[~has_neighbour(A, A.points[idx] + shift, eps, strict)]


def _count_unmatched_upto(A, idx, shift, eps, limit, strict=True):
    """Unmatched count over ``idx``, stopping early once it exceeds ``limit``.

    Returns ``None`` on early stop.  Points are scanned in the given order in
    growing chunks, so failures near the origin are found cheaply.
    """
    total = 0
    start = 0
    chunk = 64
    while start < len(idx):
        part = idx[start:start + chunk]
        total += len(_unmatched(A, part, shift, eps, strict))
        if total > limit:
            return None
        start += chunk
        chunk *= 4
    return total


def _require_one_sided(A: PointSet, eps: float) -> None:
    if not eps > 0:
        raise InputError("epsilon must be positive")
    if not eps < A.min_gap / 2:
        raise CriterionInvalid(
            f"epsilon {eps:.6g} is not below r_min/2 = {A.min_gap / 2:.6g}; "
            "use bijection_match_oracle"
        )


def _defect(A: PointSet, tau: np.ndarray, eps: float, margin: float) -> DefectSet:
    rho = _interior_radius(A, tau, eps, margin)
    if rho < 0:
        raise InconclusiveWindow("|tau| + eps exceeds the usable window")
    idx = A.interior(rho)
    miss = _unmatched(A, idx, tau, eps)
    t = tau.copy()
    t.setflags(write=False)
    miss.setflags(write=False)
    return DefectSet(t, float(eps), miss, int(idx.size))


def is_bohr_almost_period(A: PointSet, tau, eps: float, tol: Tolerances | None = None) -> BohrCheck:
    """One-sided Bohr test for ``tau`` and ``-tau`` (valid for ``eps < r_min/2``).

    The witness is the first nonempty defect set, or the ``+tau`` one if both
    are empty.
    """
    tol = tol or Tolerances()
    t = _as_tau(A, tau)
    _require_one_sided(A, eps)
    plus = _defect(A, t, eps, tol.boundary_margin)
    if not plus.empty:
        return BohrCheck(False, plus)
    minus = _defect(A, -t, eps, tol.boundary_margin)
    if not minus.empty:
        return BohrCheck(False, minus)
    return BohrCheck(True, plus)


def besicovitch_defect(A: PointSet, tau, eps: float, tol: Tolerances | None = None) -> DefectSet:
    """Defect set of ``tau`` on the interior; ``fraction`` stands in for delta."""
    tol = tol or Tolerances()
    t = _as_tau(A, tau)
    if not eps > 0:
        raise InputError("epsilon must be positive")
    d = _defect(A, t, eps, tol.boundary_margin)
    if d.interior_count == 0:
        raise InconclusiveWindow("no interior point to test")
    return d


# ---------------------------------------------------------------------------
# matching oracle


def _augment(u, adj, match_r, seen) -> bool:
    stack = [[u, 0]]
    while stack:
        frame = stack[-1]
        v, k = frame
        if k < len(adj[v]):
            frame[1] += 1
            w = adj[v][k]
            if w in seen:
                continue
            seen.add(w)
            if match_r[w] < 0:
                for lv, lk in stack:
                    match_r[adj[lv][lk - 1]] = lv
                return True
            stack.append([match_r[w], 0])
        else:
            stack.pop()
    return False


def max_bipartite_matching(adj, n_right: int) -> int:
    """Size of a maximum matching; ``adj[u]`` lists right neighbours of left vertex ``u``.

    Augmenting paths (Kuhn), neighbours tried in list order.
    """
    match_r = [-1] * n_right
    size = 0
    for u in range(len(adj)):
        if adj[u] and _augment(u, adj, match_r, set()):
            size += 1
    return size


def bijection_match_oracle(A: PointSet, tau, eps: float, tol: Tolerances | None = None) -> bool:
    """True iff interior points can be matched injectively to points within ``eps`` of ``a + tau``.

    Only the ``+tau`` direction is matched; the Bohr test corresponds to the
    oracle holding for both ``tau`` and ``-tau``.
    """
    tol = tol or Tolerances()
    if len(A) > ORACLE_MAX_POINTS:
        raise OracleRefused(f"oracle limited to {ORACLE_MAX_POINTS} points, got {len(A)}")
    t = _as_tau(A, tau)
    if not eps > 0:
        raise InputError("epsilon must be positive")
    rho = _interior_radius(A, t, eps, tol.boundary_margin)
    if rho < 0:
        raise InconclusiveWindow("|tau| + eps exceeds the usable window")
    idx = A.interior(rho)
    targets = A.points[idx] + t
    # neighbour lists come from the grid index, the criterion uses the k-d tree
    q, j = A.index.query_many(targets, eps, strict=True)
    cuts = np.searchsorted(q, np.arange(len(idx) + 1))
    adj = [j[cuts[k]:cuts[k + 1]].tolist() for k in range(len(idx))]
    return max_bipartite_matching(adj, len(A)) == len(idx)


# ---------------------------------------------------------------------------
# searches


def _gap_estimate(verified: np.ndarray, S: float, dim: int, tol: Tolerances) -> float:
    if len(verified) == 0 or S <= 0:
        return math.inf
    step = (unit_ball_volume(dim) * S**dim / tol.max_probes) ** (1.0 / dim)
    step = max(step, 1e3 * tol.eq_tol)
    value = _probe_max_distance(cKDTree(verified), S, S, step, dim)
    return math.inf if value is None else value


def _candidate_pool(A: PointSet, eps: float, S: float, tol: Tolerances):
    """Difference vectors within ``S`` plus, for each, the number of ordered
    pairs whose difference lies within ``eps`` of it (a pruning bound)."""
    cap = min(S + eps, 2 * A.window_radius)
    ds = difference_set(A, cap, tol)
    inside = ds.within(S)
    cands = ds.vectors[inside]
    if len(ds.vectors) == 0:
        return cands, np.zeros(0)
    tree = cKDTree(ds.vectors)
    # a little slack so merged representatives never undercount
    r = eps + 2 * tol.eq_tol
    mult = np.zeros(len(cands))
    step = 1 << 16
    for s in range(0, len(cands), step):
        m = cKDTree(cands[s:s + step]).sparse_distance_matrix(tree, r, output_type="ndarray")
        mult[s:s + step] = np.bincount(m["i"], weights=ds.counts[m["j"]], minlength=len(cands[s:s + step]))
    return cands, mult


def _check_candidates(A, cands, mult, eps, margin, max_fraction):
    """Return ``(tau, defect)`` for candidates whose unmatched fraction stays
    below ``max_fraction`` (0 means Bohr: no unmatched point) for both signs."""
    out = []
    for k, tau in enumerate(cands):
        rho = _interior_radius(A, tau, eps, margin)
        if rho < 0:
            continue
        n_int = A.count_within(rho)
        if n_int == 0:
            continue
        if max_fraction == 0:
            limit = 0
        else:
            # unmatched < max_fraction * n_int
            limit = int(math.ceil(max_fraction * n_int)) - 1
        if mult is not None and mult[k] < n_int - limit:
            continue
        idx = _interior_by_norm(A, rho)
        fracs = []
        for s in (1.0, -1.0):
            c = _count_unmatched_upto(A, idx, s * tau, eps, limit)
            if c is None:
                break
            fracs.append(c / n_int)
        else:
            out.append((tau, max(fracs)))
    return out


def _report(A, hits, eps, S, tol, kind, delta=None) -> AlmostPeriodReport:
    if hits:
        taus = np.array([h[0] for h in hits], dtype=float)
        defects = np.array([h[1] for h in hits])
        order = _sort_vectors(taus)
        taus, defects = taus[order], defects[order]
    else:
        taus, defects = np.empty((0, A.dim)), np.empty(0)
    verified = [
        VerifiedPeriod(tuple(float(x) for x in t), kind, float(d)) for t, d in zip(taus, defects)
    ]
    gap = _gap_estimate(taus, S, A.dim, tol)
    return AlmostPeriodReport(float(eps), float(S), gap, verified, delta)


def _check_search_radius(A: PointSet, S: float) -> None:
    if not (math.isfinite(S) and S >= 0):
        raise InputError("search radius must be finite and non-negative")
    if S > A.window_radius / 2 * (1 + 1e-12):
        raise InputError("search radius must not exceed half the window radius")


def find_almost_periods(A: PointSet, eps: float, S: float, tol: Tolerances | None = None,
                        *, candidates=None) -> AlmostPeriodReport:
    """All difference vectors ``|v| <= S`` that are Bohr ``eps``-almost periods.

    Any ``eps``-almost period lies within ``eps`` of a difference vector that
    is a ``2 eps``-almost period, so difference vectors form a complete
    candidate net.  ``candidates`` overrides the net (e.g. differences from a
    single base point, which are complete for the same reason).
    ``gap_estimate`` is the largest probe distance to a verified vector inside
    ``B(0, S)``.

    For ``eps >= r_min / 2`` the one-sided test is only necessary; survivors
    are confirmed with :func:`bijection_match_oracle` in both directions, so
    such calls are limited to ``ORACLE_MAX_POINTS`` points.
    """
    tol = (tol or Tolerances()).resolve(A)
    _check_search_radius(A, S)
    if not eps > 0:
        raise InputError("epsilon must be positive")
    matching = not eps < A.min_gap / 2
    if matching and len(A) > ORACLE_MAX_POINTS:
        raise OracleRefused(
            f"eps >= r_min/2 needs the matching oracle, limited to {ORACLE_MAX_POINTS} points"
        )
    if candidates is None:
        cands, mult = _candidate_pool(A, eps, S, tol)
    else:
        cands = np.atleast_2d(np.asarray(candidates, dtype=float)).reshape(-1, A.dim)
        cands = cands[np.linalg.norm(cands, axis=1) <= S]
        mult = None
    hits = _check_candidates(A, cands, mult, eps, tol.boundary_margin, 0.0)
    if matching:
        hits = [h for h in hits
                if bijection_match_oracle(A, h[0], eps, tol) and bijection_match_oracle(A, -h[0], eps, tol)]
    return _report(A, hits, eps, S, tol, "bohr")


def find_besicovitch_periods(A: PointSet, eps: float, delta: float, S: float,
                             tol: Tolerances | None = None) -> AlmostPeriodReport:
    """Difference vectors ``|v| <= S`` whose defect fraction is below ``delta`` for both signs."""
    tol = (tol or Tolerances()).resolve(A)
    _check_search_radius(A, S)
    if not eps > 0:
        raise InputError("epsilon must be positive")
    if not 0 < delta < 1:
        raise InputError("delta must lie in (0, 1)")
    cands, mult = _candidate_pool(A, eps, S, tol)
    hits = _check_candidates(A, cands, mult, eps, tol.boundary_margin, delta)
    return _report(A, hits, eps, S, tol, "besicovitch", delta)

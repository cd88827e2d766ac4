"""Decide whether a windowed finite-type set is an ideal crystal ``L + F``.

Pipeline: classify the window, pick a safe ``eps`` from the spacing of short
difference vectors, find one exact period in a narrow cone around each
coordinate axis, span ``L`` by those periods, read ``F`` off the residues of
interior points and finally check set equality on the interior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial import cKDTree

from .almost_periods import _count_unmatched_upto, _interior_by_norm, find_almost_periods, has_neighbour
from .errors import (
    EpsilonTooLarge,
    InconclusiveWindow,
    InputError,
    NoAlmostPeriods,
    NotAlmostPeriod,
    NotFiniteType,
    RecognitionFailure,
)
from .geometry import ClassificationReport, classify, difference_set
from .lattice import IdealCrystal, Lattice, decompose_classes, in_lattice
from .pointset import PointSet, Tolerances

VERDICTS = ("ideal_crystal", "not_crystal", "inconclusive")

# size of the central sub-window used for the eps estimates
ESTIMATE_SAMPLE = 3000


@dataclass(frozen=True)
class EpsilonChoice:
    epsilon: float
    separation: float
    diff_radius: float
    gap_estimate: float
    ap_epsilon: float
    ap_search_radius: float
    sample_radius: float


@dataclass(frozen=True)
class PeriodCheck:
    holds: bool
    failures: np.ndarray          # indices a with a + T or a - T missing
    tested: int


@dataclass(frozen=True, eq=False)
class PeriodSet:
    epsilon_used: float
    periods: list
    independent: np.ndarray       # rows T_1 ... T_p
    off_axis_ratios: tuple = ()

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.independent))


@dataclass(frozen=True, eq=False)
class RecognitionResult:
    verdict: str
    reason: str = ""
    crystal: IdealCrystal | None = None
    evidence: dict = field(default_factory=dict)

    @property
    def is_crystal(self) -> bool:
        return self.verdict == "ideal_crystal"


# ---------------------------------------------------------------------------
# epsilon


def _central_sample(A: PointSet) -> PointSet:
    if len(A) <= ESTIMATE_SAMPLE:
        return A
    r = float(np.partition(A.norms, ESTIMATE_SAMPLE - 1)[ESTIMATE_SAMPLE - 1])
    return A.restricted(r)


def compute_epsilon(A: PointSet, tol: Tolerances | None = None, *,
                    report: ClassificationReport | None = None) -> EpsilonChoice:
    """Return ``eps = min(1, s) / 2`` with ``s`` the spacing of ``A - A`` within ``2 R' + 4``.

    ``R'`` is the probe gap of the verified ``lam``-almost periods found from the
    base point, with ``lam = min(1, 0.49 r_min)`` so that the one-sided
    criterion stays valid.  Both ``R'`` and ``s`` are measured on the central
    sub-window holding at most ``ESTIMATE_SAMPLE`` points.  They only steer
    the choice of ``eps``; later stages check every claim exactly.
    """
    tol = (tol or Tolerances()).resolve(A)
    if report is None:
        report = classify(A, tol)
    if not report.finite_type:
        raise NotFiniteType(f"difference vectors are {report.diff_separation:.3g} apart")
    lam = min(1.0, 0.49 * report.r_min)
    sub = _central_sample(A)
    S = min(sub.window_radius / 4, 16 * report.covering_radius_est)
    a0 = sub.points[sub.origin_point()]
    cands = sub.points[sub.index.query(a0, S)] - a0
    aps = find_almost_periods(sub, lam, S, tol, candidates=cands)
    if len(aps) <= 1 or not math.isfinite(aps.gap_estimate):
        raise NoAlmostPeriods(f"no nonzero {lam:.3g}-almost period within {S:.6g}")
    D = min(2 * aps.gap_estimate + 4, 2 * sub.window_radius)
    s = difference_set(sub, D, tol).separation
    if not s > 2 * tol.eq_tol:
        raise NotFiniteType(f"difference vectors are {s:.3g} apart")
    return EpsilonChoice(
        epsilon=min(1.0, s) / 2,
        separation=s,
        diff_radius=D,
        gap_estimate=aps.gap_estimate,
        ap_epsilon=lam,
        ap_search_radius=S,
        sample_radius=sub.window_radius,
    )


# ---------------------------------------------------------------------------
# single periods


def snap_to_exact_period(A: PointSet, tau, eps: float, tol: Tolerances | None = None) -> np.ndarray:
    """Snap an ``eps/2``-almost period to the exact difference ``c - a``.

    ``a`` is the interior point nearest the origin and ``c`` the unique point
    with ``|a + tau - c| < eps / 2``.
    """
    tol = tol or Tolerances()
    tau = np.asarray(tau, dtype=float).reshape(-1)
    if tau.shape != (A.dim,):
        raise InputError(f"translation must have {A.dim} coordinates")
    rho = A.window_radius - tol.boundary_margin - float(np.linalg.norm(tau)) - eps / 2
    if rho < 0:
        raise InconclusiveWindow("translation too long for the window")
    a = A.points[A.origin_point(rho)]
    hits = A.index.query(a + tau, eps / 2, strict=True)
    if len(hits) == 0:
        raise NotAlmostPeriod("no point within eps/2 of the translated base point")
    if len(hits) > 1:
        raise EpsilonTooLarge(f"{len(hits)} points within eps/2 of the translated base point")
    return A.points[hits[0]] - a


def verify_period(A: PointSet, T, tol: Tolerances | None = None, *, quick: bool = False) -> PeriodCheck:
    """Check that ``a + T`` and ``a - T`` lie in ``A`` for all ``|a| <= R - |T| - margin``.

    ``quick`` stops at the first failure (scanning outwards from the origin)
    and reports no witnesses.
    """
    tol = (tol or Tolerances()).resolve(A)
    T = np.asarray(T, dtype=float).reshape(-1)
    if T.shape != (A.dim,):
        raise InputError(f"period must have {A.dim} coordinates")
    norm = float(np.linalg.norm(T))
    if norm + tol.eq_tol > A.window_radius - tol.boundary_margin:
        raise InconclusiveWindow("period too long for the window")
    idx = _interior_by_norm(A, A.window_radius - norm - tol.boundary_margin)
    if quick:
        ok = all(_count_unmatched_upto(A, idx, s * T, tol.eq_tol, 0, strict=False) == 0
                 for s in (1.0, -1.0))
        return PeriodCheck(ok, np.empty(0, dtype=int), len(idx))
    bad = np.zeros(len(idx), dtype=bool)
    for s in (1.0, -1.0):
        bad |= ~has_neighbour(A, A.points[idx] + s * T, tol.eq_tol, strict=False)
    return PeriodCheck(not bad.any(), np.sort(idx[bad]), len(idx))


def _is_almost_period(A, tau, eps, margin) -> bool:
    rho = A.window_radius - margin - float(np.linalg.norm(tau)) - eps
    if rho < 0:
        return False
    idx = _interior_by_norm(A, rho)
    if len(idx) == 0:
        return False
    return all(_count_unmatched_upto(A, idx, s * tau, eps, 0) == 0 for s in (1.0, -1.0))


# ---------------------------------------------------------------------------
# cone periods


def in_cone(x, axis: int, min_norm: float, ratio: float) -> np.ndarray:
    """Membership in ``{|x| > min_norm, dist(x, axis line) < ratio * |x_axis|}``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    along = x[:, axis]
    off = np.sqrt(np.maximum(np.einsum("ij,ij->i", x, x) - along**2, 0.0))
    return (np.linalg.norm(x, axis=1) > min_norm) & (off < ratio * np.abs(along))


def _off_axis_ratio(T: np.ndarray, axis: int) -> float:
    off = float(np.abs(np.delete(T, axis)).sum())
    return off / abs(float(T[axis]))


def extract_independent_periods(A: PointSet, eps: float, tol: Tolerances | None = None, *,
                                search_radius: float | None = None,
                                cone_min_norm: float | None = None,
                                cone_ratio: float | None = None) -> PeriodSet:
    """One verified exact period per coordinate cone.

    Cone ``j`` is ``|x| > 4p`` with distance to the ``e_j`` axis below
    ``|x_j| / (4p)`` (defaults).  Candidates are ``c - a0`` for the base point
    ``a0`` inside the search ball (default radius ``R/2``), shortest first; the
    first that is an ``eps/2``-almost period, snaps, and verifies exactly wins.
    The chosen periods satisfy ``sum_{k != j} |T_jk| < |T_jj| / p``, which
    forces a nonzero determinant.
    """
    tol = (tol or Tolerances()).resolve(A)
    p = A.dim
    S = A.window_radius / 2 if search_radius is None else float(search_radius)
    min_norm = 4.0 * p if cone_min_norm is None else float(cone_min_norm)
    ratio = 1.0 / (4 * p) if cone_ratio is None else float(cone_ratio)
    if S <= min_norm:
        raise RecognitionFailure("inconclusive", "window-too-small",
                       detail=f"search radius {S:.6g} does not reach the cone minimum {min_norm:.6g}")
    a0 = A.points[A.origin_point()]
    near = A.index.query(a0, S)
    cands = A.points[near] - a0
    order = np.lexsort(tuple(cands[:, k] for k in reversed(range(p))) + (np.round(np.linalg.norm(cands, axis=1), 12),))
    cands = cands[order]
    chosen, ratios, tried = [], [], []
    for j in range(p):
        pool = cands[in_cone(cands, j, min_norm, ratio)]
        found = None
        n_ap = 0
        for tau in pool:
            if not _is_almost_period(A, tau, eps / 2, tol.boundary_margin):
                continue
            n_ap += 1
            try:
                T = snap_to_exact_period(A, tau, eps, tol)
            except (NotAlmostPeriod, EpsilonTooLarge):
                continue
            if verify_period(A, T, tol, quick=True).holds:
                found = T
                break
        tried.append({"axis": j, "cone_candidates": int(len(pool)), "almost_periods": n_ap})
        if found is not None and found[j] < 0:
            found = -found
        if found is None:
            reason = "period-verification-failed" if n_ap else "no-verified-period-in-cone"
            raise RecognitionFailure("not_crystal", reason, axis=j, cones=tried)
        r = _off_axis_ratio(found, j)
        if not r < 1.0 / p:
            raise RecognitionFailure("not_crystal", "period-verification-failed", axis=j, cones=tried,
                           detail="off-axis ratio not below 1/p")
        chosen.append(found)
        ratios.append(r)
    M = np.array(chosen)
    if abs(np.linalg.det(M)) <= 0:
        raise RecognitionFailure("not_crystal", "period-verification-failed", detail="singular period matrix")
    return PeriodSet(float(eps), list(chosen), M, tuple(ratios))


# ---------------------------------------------------------------------------
# lattice post-processing


def _integer_row_basis(rows: list) -> list:
    """Row echelon basis of the integer row span (Euclid on columns)."""
    rows = [list(r) for r in rows if any(r)]
    p = len(rows[0]) if rows else 0
    basis = []
    for col in range(p):
        while True:
            nz = [r for r in rows if r[col] != 0]
            if not nz:
                break
            piv = min(nz, key=lambda r: abs(r[col]))
            rest = []
            for r in rows:
                if r is piv:
                    continue
                if r[col]:
                    q = r[col] // piv[col]
                    r = [x - q * y for x, y in zip(r, piv)]
                if any(r):
                    rest.append(r)
            if all(r[col] == 0 for r in rest):
                basis.append(piv)
                rows = rest
                break
            rows = rest + [piv]
    return basis


def _lll(B: np.ndarray, delta: float = 0.75) -> np.ndarray:
    """LLL-reduce the rows of ``B`` (small dimensions only)."""
    B = np.array(B, dtype=float)
    n = len(B)

    def gs(B):
        Q = np.zeros_like(B)
        mu = np.zeros((n, n))
        for i in range(n):
            Q[i] = B[i]
            for j in range(i):
                mu[i, j] = B[i] @ Q[j] / (Q[j] @ Q[j])
                Q[i] = Q[i] - mu[i, j] * Q[j]
        return Q, mu

    Q, mu = gs(B)
    k = 1
    while k < n:
        for j in range(k - 1, -1, -1):
            q = round(mu[k, j])
            if q:
                B[k] -= q * B[j]
                Q, mu = gs(B)
        if Q[k] @ Q[k] >= (delta - mu[k, k - 1] ** 2) * (Q[k - 1] @ Q[k - 1]):
            k += 1
        else:
            B[[k, k - 1]] = B[[k - 1, k]]
            Q, mu = gs(B)
            k = max(k - 1, 1)
    # orient each vector so its first nonzero coordinate is positive
    for row in B:
        nz = np.flatnonzero(np.abs(row) > 1e-12)
        if nz.size and row[nz[0]] < 0:
            row *= -1
    return B


def _enlarge_lattice(A: PointSet, L: Lattice, decomposition, tol: Tolerances) -> Lattice:
    """Add residue differences that are verified periods of ``A`` to ``L``."""
    a0 = A.points[A.origin_point()]
    K = len(decomposition)
    reps = []
    for _, members in decomposition.classes:
        d = A.points[members] - a0
        reps.append(d[np.argmin(np.linalg.norm(d, axis=1))])
    reps = np.array(reps)
    reps = reps[np.argsort(np.linalg.norm(reps, axis=1), kind="stable")]
    gens = [list(np.round(K * np.eye(L.dim)[i]).astype(int)) for i in range(L.dim)]
    current = L
    for g in reps:
        if not np.any(g) or in_lattice(current, g):
            continue
        if np.linalg.norm(g) + tol.eq_tol > A.window_radius - tol.boundary_margin:
            continue
        if not verify_period(A, g, tol, quick=True).holds:
            continue
        c = K * L.coords(g)
        ci = np.round(c)
        if np.abs(c - ci).max() > 1e-6 * K:
            continue
        gens.append([int(x) for x in ci])
        rows = _integer_row_basis(gens)
        coords = np.array([[float(Fraction(x, K)) for x in r] for r in rows])
        current = Lattice.from_vectors(_lll(coords @ L.vectors))
        gens = [list(r) for r in rows]
    return current


# ---------------------------------------------------------------------------
# pipeline


def _check_equality(A: PointSet, crystal: IdealCrystal, rho: float, eq_tol: float):
    """Compare ``(L + F) ∩ B(0, rho)`` with ``A ∩ B(0, rho)`` within ``eq_tol``."""
    gen = crystal.points_in_ball(rho + eq_tol)
    inside = A.interior(rho)
    if len(gen) == 0:
        return inside, np.empty((0, A.dim))
    d, _ = cKDTree(gen).query(A.points[inside], distance_upper_bound=eq_tol * 1.000001)
    missing_from_crystal = inside[~np.isfinite(d)]
    core = gen[np.linalg.norm(gen, axis=1) <= rho - eq_tol]
    extra = core[~has_neighbour(A, core, eq_tol, strict=False)]
    return missing_from_crystal, extra


def recognize_crystal(A: PointSet, tol: Tolerances | None = None, *, minimize: bool = False,
                      search_radius: float | None = None) -> RecognitionResult:
    """Run the full recognition pipeline; never raises for window-scale failures."""
    tol = (tol or Tolerances()).resolve(A)
    evidence: dict = {}
    try:
        try:
            report = classify(A, tol)
        except InconclusiveWindow as exc:
            raise RecognitionFailure("inconclusive", "window-too-small", detail=str(exc))
        evidence["classification"] = report
        if not report.finite_type:
            raise RecognitionFailure("not_crystal", "not-finite-type")
        try:
            choice = compute_epsilon(A, tol, report=report)
        except NotFiniteType as exc:
            raise RecognitionFailure("not_crystal", "not-finite-type", detail=str(exc))
        except NoAlmostPeriods as exc:
            raise RecognitionFailure("not_crystal", "no-verified-period", detail=str(exc))
        evidence["epsilon"] = choice
        periods = extract_independent_periods(A, choice.epsilon, tol, search_radius=search_radius)
        evidence["periods"] = periods
        L = Lattice.from_vectors(periods.independent)
        rho = A.window_radius - tol.boundary_margin
        longest = max(float(np.linalg.norm(T)) for T in periods.independent)
        if rho - longest < L.covering_circumradius():
            raise RecognitionFailure("inconclusive", "window-too-small",
                           detail="period checks do not cover a full lattice cell")
        inside = A.interior(rho)
        dec = decompose_classes(A.points[inside], L)
        if minimize:
            L = _enlarge_lattice(A, L, dec, tol)
            dec = decompose_classes(A.points[inside], L)
        if dec.ambiguous:
            raise RecognitionFailure("inconclusive", "ambiguous-residues")
        residues = np.array([L.frac_coords(r) for r, _ in dec.classes])
        residues = residues[np.lexsort(residues.T[::-1])]
        crystal = IdealCrystal(L, residues)
        missing, extra = _check_equality(A, crystal, rho, tol.eq_tol)
        if len(missing) or len(extra):
            raise RecognitionFailure("not_crystal", "residue-mismatch",
                           missing=missing[:20].tolist(), extra=extra[:20].tolist())
        return RecognitionResult("ideal_crystal", "", crystal, evidence)
    except RecognitionFailure as f:
        evidence.update(f.evidence)
        return RecognitionResult(f.verdict, f.reason, None, evidence)

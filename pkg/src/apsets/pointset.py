"""Windowed point sets, numerical tolerances and the point-set text format.

The text format is line oriented::

    # radius: 50            (optional; recognised comment carrying the window radius)
    dim 2
    0.0 0.0
    1.0 0.5                 # trailing comments are allowed

``#`` starts a comment.  The first non-comment line must be ``dim <p>``; every
following non-comment line holds ``p`` decimal reals.  LF and CRLF are both
accepted.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError, ParseError

_RADIUS_COMMENT = re.compile(r"^#\s*radius\s*[:=]\s*(\S+)\s*$", re.IGNORECASE)


def unit_ball_volume(p: int) -> float:
    return math.pi ** (p / 2) / math.gamma(p / 2 + 1)


@dataclass(frozen=True)
class Tolerances:
    """Numerical knobs that realise exact-set notions on a finite window.

    ``None`` fields are filled in by :meth:`resolve` from the point set:
    ``eq_tol`` defaults to ``1e-9 * max(1, max |coordinate|)`` and
    ``probe_step`` is chosen so the covering-radius probe grid holds at most
    ``max_probes`` points.  ``diff_radius`` is the cap ``D`` used by
    :func:`apsets.geometry.classify` (default ``R/2``, shrunk if the pair count
    would exceed ``max_diff_pairs``).
    """

    eq_tol: float | None = None
    probe_step: float | None = None
    boundary_margin: float = 0.0
    diff_radius: float | None = None
    max_probes: int = 1 << 18
    max_diff_pairs: int = 1_000_000

    def __post_init__(self):
        for name in ("eq_tol", "probe_step", "diff_radius"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be finite and positive, got {v!r}")
        if not (math.isfinite(self.boundary_margin) and self.boundary_margin >= 0):
            raise InputError("boundary_margin must be finite and >= 0")
        if self.eq_tol is not None and self.probe_step is not None:
            if not self.eq_tol < self.probe_step:
                raise InputError("eq_tol must be smaller than probe_step")
        if self.max_probes < 1 or self.max_diff_pairs < 1:
            raise InputError("budgets must be positive")

    def resolve(self, A: "PointSet") -> "Tolerances":
        """Return a copy with every automatic field fixed for ``A``."""
        eq_tol = self.eq_tol
        if eq_tol is None:
            scale = float(np.abs(A.points).max()) if len(A) else 0.0
            eq_tol = 1e-9 * max(1.0, scale)
        step = self.probe_step
        if step is None:
            rho = max(A.window_radius - self.boundary_margin, 0.0)
            p = A.dim
            step = (unit_ball_volume(p) * rho**p / self.max_probes) ** (1.0 / p)
            step = max(step, 1e3 * eq_tol)
        if not eq_tol < step:
            raise InputError("eq_tol must be smaller than probe_step")
        return replace(self, eq_tol=eq_tol, probe_step=step)


def _as_points(points, dim=None) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        if dim is None or dim == 1:
            arr = arr.reshape(-1, 1)
        elif arr.size == 0:
            arr = arr.reshape(0, dim)
        else:
            raise InputError("flat coordinate array only allowed for dim 1")
    if arr.ndim != 2:
        raise InputError("points must be an (n, p) array")
    if arr.shape[0] == 0 and dim is not None:
        arr = arr.reshape(0, dim)
    if dim is not None and arr.shape[1] != dim:
        raise InputError(f"expected dim {dim}, got {arr.shape[1]}")
    if arr.shape[1] < 1:
        raise InputError("dim must be >= 1")
    if not np.all(np.isfinite(arr)):
        raise InputError("non-finite coordinates")
    return arr


@dataclass(frozen=True, eq=False)
class PointSet:
    """A finite sample ``A ∩ B(0, R)`` of a discrete set in ``R^p``.

    ``points`` is an ``(n, p)`` float array (read-only).  Every point satisfies
    ``|a| <= window_radius`` and no two points coincide within the default
    ``eq_tol``.
    """

    points: np.ndarray
    window_radius: float

    def __post_init__(self):
        arr = _as_points(self.points)
        arr = np.array(arr, dtype=float, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)
        R = float(self.window_radius)
        if not (math.isfinite(R) and R > 0):
            raise InputError(f"window_radius must be finite and positive, got {R!r}")
        object.__setattr__(self, "window_radius", R)
        if len(arr):
            norms = np.linalg.norm(arr, axis=1)
            if norms.max() > R * (1 + 1e-12) + 1e-12:
                raise InputError(
                    f"point at distance {norms.max():.17g} lies outside window radius {R:.17g}"
                )
            tol = 1e-9 * max(1.0, float(np.abs(arr).max()))
            if len(arr) > 1 and cKDTree(arr).query_pairs(tol, output_type="ndarray").size:
                raise InputError("two points coincide within eq_tol")

    @classmethod
    def from_points(cls, points, window_radius=None, dim=None) -> "PointSet":
        """Build a point set; the window defaults to the largest point norm."""
        arr = _as_points(points, dim)
        if window_radius is None:
            window_radius = float(np.linalg.norm(arr, axis=1).max()) if len(arr) else 1.0
            window_radius = window_radius if window_radius > 0 else 1.0
        return cls(arr, window_radius)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    @cached_property
    def norms(self) -> np.ndarray:
        n = np.linalg.norm(self.points, axis=1)
        n.setflags(write=False)
        return n

    @cached_property
    def norm_order(self) -> np.ndarray:
        """Point indices sorted by norm (stable)."""
        o = np.argsort(self.norms, kind="stable")
        o.setflags(write=False)
        return o

    def count_within(self, radius: float) -> int:
        """Number of points with ``|a| <= radius``."""
        return int(np.searchsorted(self.norms[self.norm_order], radius, side="right"))

    def interior(self, radius: float) -> np.ndarray:
        """Indices of points with ``|a| <= radius``."""
        return np.flatnonzero(self.norms <= radius)

    def restricted(self, radius: float) -> "PointSet":
        """The sub-window ``A ∩ B(0, radius)`` (closed ball)."""
        idx = self.interior(radius)
        return PointSet(self.points[idx], radius)

    @cached_property
    def index(self):
        from .spatial import build_index, default_cell_size

        return build_index(self, default_cell_size(self))

    @cached_property
    def min_gap(self) -> float:
        from .geometry import min_pairwise_gap

        return min_pairwise_gap(self)

    @cached_property
    def kdtree(self) -> cKDTree:
        return cKDTree(self.points)

    def origin_point(self, radius: float | None = None) -> int:
        """Index of the point nearest the origin (ties broken lexicographically)."""
        idx = np.arange(len(self)) if radius is None else self.interior(radius)
        if idx.size == 0:
            raise InputError("no point available for a base point")
        n = self.norms[idx]
        cand = idx[n <= n.min()]
        keys = tuple(self.points[cand, k] for k in reversed(range(self.dim)))
        return int(cand[np.lexsort(keys)[0]])


# ---------------------------------------------------------------------------
# text format


def parse_points(text: str, window_radius: float | None = None) -> PointSet:
    """Parse the point-set text format; raises :class:`ParseError` with a line number."""
    dim = None
    radius_hint = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        m = _RADIUS_COMMENT.match(line)
        if m:
            try:
                radius_hint = float(m.group(1))
            except ValueError:
                raise ParseError(f"bad radius comment {m.group(1)!r}", lineno) from None
            continue
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if dim is None:
            if len(tokens) != 2 or tokens[0] != "dim":
                raise ParseError("expected header 'dim <p>'", lineno)
            try:
                dim = int(tokens[1])
            except ValueError:
                raise ParseError(f"bad dimension {tokens[1]!r}", lineno) from None
            if dim < 1:
                raise ParseError("dimension must be >= 1", lineno)
            continue
        if len(tokens) != dim:
            raise ParseError(f"expected {dim} coordinates, found {len(tokens)}", lineno)
        try:
            row = [float(t) for t in tokens]
        except ValueError:
            raise ParseError(f"non-numeric coordinate in {line!r}", lineno) from None
        if not all(math.isfinite(v) for v in row):
            raise ParseError("non-finite coordinate", lineno)
        rows.append(row)
    if dim is None:
        raise ParseError("missing 'dim <p>' header")
    arr = np.array(rows, dtype=float).reshape(len(rows), dim)
    R = window_radius if window_radius is not None else radius_hint
    return PointSet.from_points(arr, R, dim)


def format_points(A: PointSet) -> str:
    lines = [f"# radius: {A.window_radius:.17g}", f"dim {A.dim}"]
    for row in A.points:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def load_points(path, window_radius: float | None = None) -> PointSet:
    data = Path(path).read_bytes().decode("utf-8")
    return parse_points(data, window_radius)


def save_points(A: PointSet, path) -> None:
    Path(path).write_bytes(format_points(A).encode("ascii"))

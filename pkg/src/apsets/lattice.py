"""Lattices, residue classes of point sets, and the discrete frontier inequality."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError, ParseError, UndefinedStatistic, Unsupported
from .pointset import PointSet


@dataclass(frozen=True, eq=False)
class Lattice:
    """Full-rank lattice spanned by the columns ``T_1 ... T_p`` of ``basis``.

    ``membership_tol`` is a tolerance on lattice coordinates; by default it is
    ``1e-6`` scaled by the spectral norm of the inverse basis, i.e. a Euclidean
    slack of about ``1e-6``.
    """

    basis: np.ndarray
    membership_tol: float | None = None
    inv_basis: np.ndarray = field(init=False, repr=False)
    det: float = field(init=False)

    def __post_init__(self):
        B = np.array(self.basis, dtype=float)
        if B.ndim == 0:
            B = B.reshape(1, 1)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise InputError("basis must be a square p x p matrix")
        if not np.all(np.isfinite(B)):
            raise InputError("non-finite basis entries")
        det = float(np.linalg.det(B))
        scale = float(np.prod(np.linalg.norm(B, axis=0)))
        if scale == 0 or abs(det) <= 1e-12 * scale:
            raise InputError("basis is singular")
        inv = np.linalg.inv(B)
        if np.abs(B @ inv - np.eye(len(B))).max() > 1e-9:
            raise InputError("basis is too ill-conditioned to invert reliably")
        B.setflags(write=False)
        inv.setflags(write=False)
        object.__setattr__(self, "basis", B)
        object.__setattr__(self, "inv_basis", inv)
        object.__setattr__(self, "det", det)
        tol = self.membership_tol
        if tol is None:
            tol = 1e-6 * float(np.linalg.norm(inv, 2))
        object.__setattr__(self, "membership_tol", float(tol))

    @classmethod
    def from_vectors(cls, vectors, membership_tol=None) -> "Lattice":
        """Lattice whose basis columns are the given vectors."""
        V = np.atleast_2d(np.asarray(vectors, dtype=float))
        return cls(V.T, membership_tol)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def vectors(self) -> np.ndarray:
        """Basis vectors as rows."""
        return self.basis.T

    def coords(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return v @ self.inv_basis.T

    def frac_coords(self, a) -> np.ndarray:
        """Fractional lattice coordinates in ``[0, 1)``, snapped to 0 within tolerance."""
        c = self.coords(a)
        f = c - np.floor(c)
        tol = self.membership_tol
        f = np.where((f < tol) | (f > 1 - tol), 0.0, f)
        return f

    def covering_circumradius(self) -> float:
        """Half the longest diagonal of the fundamental parallelepiped."""
        best = 0.0
        for signs in itertools.product((-1.0, 1.0), repeat=self.dim):
            best = max(best, float(np.linalg.norm(self.basis @ np.asarray(signs))))
        return best / 2

    def points_in_ball(self, radius: float, offsets=None) -> np.ndarray:
        """All points ``t + f`` with ``t`` in the lattice, ``f`` in ``offsets`` and ``|t + f| <= radius``."""
        p = self.dim
        offsets = np.zeros((1, p)) if offsets is None else np.atleast_2d(np.asarray(offsets, dtype=float))
        if len(offsets) == 0:
            return np.empty((0, p))
        reach = radius + float(np.linalg.norm(offsets, axis=1).max())
        bound = np.ceil(np.linalg.norm(self.inv_basis, axis=1) * reach).astype(int) + 1
        axes = [np.arange(-b, b + 1) for b in bound]
        mesh = np.meshgrid(*axes, indexing="ij")
        n = np.stack([m.ravel() for m in mesh], axis=1).astype(float)
        base = n @ self.basis.T
        out = []
        r2 = radius * radius * (1 + 1e-12)
        for f in offsets:
            pts = base + f
            keep = np.einsum("ij,ij->i", pts, pts) <= r2
            out.append(pts[keep])
        return np.concatenate(out)


def in_lattice(L: Lattice, v) -> bool | np.ndarray:
    """Whether ``v`` (or each row of ``v``) is a lattice vector within tolerance."""
    c = L.coords(v)
    ok = np.all(np.abs(c - np.round(c)) <= L.membership_tol, axis=-1)
    return bool(ok) if np.ndim(ok) == 0 else ok


def residue(L: Lattice, a) -> np.ndarray:
    """Canonical representative of ``a + L`` in the fundamental parallelepiped."""
    return L.frac_coords(a) @ L.basis.T


@dataclass(frozen=True, eq=False)
class IdealCrystal:
    """``L + F`` with residues stored as fractional coordinates in ``[0, 1)^p``."""

    lattice: Lattice
    residues: np.ndarray

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.residues, dtype=float))
        if F.shape[1] != self.lattice.dim:
            F = F.reshape(-1, self.lattice.dim)
        if len(F) < 1:
            raise InputError("an ideal crystal needs at least one residue")
        F = self.lattice.frac_coords(F @ self.lattice.basis.T)
        if _torus_pairs(F, 2 * self.lattice.membership_tol).size:
            raise InputError("residues coincide modulo the lattice")
        F.setflags(write=False)
        object.__setattr__(self, "residues", F)

    @classmethod
    def from_cartesian(cls, lattice: Lattice, offsets) -> "IdealCrystal":
        offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
        return cls(lattice, lattice.coords(offsets))

    @property
    def offsets(self) -> np.ndarray:
        """Residues as Cartesian vectors inside the fundamental parallelepiped."""
        return self.residues @ self.lattice.basis.T

    def points_in_ball(self, radius: float) -> np.ndarray:
        return self.lattice.points_in_ball(radius, self.offsets)


def _torus_pairs(F: np.ndarray, r: float) -> np.ndarray:
    if len(F) < 2:
        return np.empty((0, 2), dtype=int)
    G = np.mod(F, 1.0)
    G[G >= 1.0] = 0.0
    return cKDTree(G, boxsize=1.0).query_pairs(r, p=np.inf, output_type="ndarray")


@dataclass(frozen=True, eq=False)
class ClassDecomposition:
    """Partition of point indices into classes ``a ~ b  iff  a - b in L``.

    ``classes`` is a list of ``(residue, member_indices)`` ordered by first
    member.  ``ambiguous`` is set when two class residues lie within twice the
    membership tolerance of each other.
    """

    lattice: Lattice
    classes: list
    ambiguous: bool = False

    def __len__(self) -> int:
        return len(self.classes)

    def sizes(self) -> np.ndarray:
        return np.array([len(m) for _, m in self.classes], dtype=int)

    def labels(self, n: int) -> np.ndarray:
        out = np.full(n, -1, dtype=int)
        for k, (_, members) in enumerate(self.classes):
            out[members] = k
        return out


def decompose_classes(A: PointSet | np.ndarray, L: Lattice) -> ClassDecomposition:
    """Split the points of ``A`` into residue classes modulo ``L``."""
    pts = A.points if isinstance(A, PointSet) else np.atleast_2d(np.asarray(A, dtype=float))
    n = len(pts)
    if n == 0:
        return ClassDecomposition(L, [])
    tol = L.membership_tol
    f = L.frac_coords(pts)
    period = max(int(round(1.0 / tol)), 1)
    keys = np.mod(np.round(f / tol).astype(np.int64), period)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    reps = f[first]
    root = np.arange(len(reps))
    pairs = _torus_pairs(reps, tol)
    if len(pairs):
        parent = np.arange(len(reps))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for a, b in pairs:
            ra, rb = find(a), find(b)
            if ra != rb:
                if first[ra] <= first[rb]:
                    parent[rb] = ra
                else:
                    parent[ra] = rb
        root = np.array([find(x) for x in range(len(reps))])
    label = root[inverse]
    by_label = np.argsort(label, kind="stable")
    uniq, starts = np.unique(label[by_label], return_index=True)
    groups = np.split(by_label, starts[1:])
    groups.sort(key=lambda g: g[0])
    classes = [(f[g[0]] @ L.basis.T, g) for g in groups]
    class_fracs = np.array([f[m[0]] for _, m in classes])
    ambiguous = bool(_torus_pairs(class_fracs, 2 * tol).size)
    return ClassDecomposition(L, classes, ambiguous)


# ---------------------------------------------------------------------------
# finite subsets of Z^p


@dataclass(frozen=True)
class LatticeSubset:
    """Finite set of integer coordinate vectors (coordinates in the basis of ``L``)."""

    dim: int
    coords: frozenset

    def __post_init__(self):
        if self.dim < 1:
            raise InputError("dim must be >= 1")
        for c in self.coords:
            if len(c) != self.dim or not all(isinstance(x, int) for x in c):
                raise InputError(f"bad lattice coordinate {c!r}")

    @classmethod
    def from_iterable(cls, points, dim: int | None = None) -> "LatticeSubset":
        pts = []
        for c in points:
            row = []
            for x in c:
                if isinstance(x, (bool, np.bool_)):
                    raise InputError("boolean is not an integer coordinate")
                if isinstance(x, (int, np.integer)):
                    row.append(int(x))
                elif float(x).is_integer():
                    row.append(int(x))
                else:
                    raise InputError(f"non-integer coordinate {x!r}")
            pts.append(tuple(row))
        if dim is None:
            if not pts:
                raise InputError("cannot infer dim of an empty subset")
            dim = len(pts[0])
        return cls(dim, frozenset(pts))

    def __len__(self) -> int:
        return len(self.coords)

    def __iter__(self):
        return iter(sorted(self.coords))

    def __contains__(self, c) -> bool:
        return tuple(c) in self.coords


def _neighbour_steps(p: int):
    steps = []
    for j in range(p):
        for s in (1, -1):
            e = [0] * p
            e[j] = s
            steps.append(tuple(e))
    return steps


def frontier(E: LatticeSubset) -> LatticeSubset:
    """Points of ``E`` missing at least one of their ``2p`` lattice neighbours."""
    if E.dim < 2:
        raise Unsupported("the frontier inequality is stated for p > 1")
    steps = _neighbour_steps(E.dim)
    S = E.coords
    out = [
        b for b in S
        if any(tuple(x + d for x, d in zip(b, s)) not in S for s in steps)
    ]
    return LatticeSubset(E.dim, frozenset(out))


def project(E: LatticeSubset, axis: int) -> LatticeSubset:
    """Projection onto the hyperplane ``x[axis] = 0`` (0-based axis)."""
    if not 0 <= axis < E.dim:
        raise InputError(f"axis must be in [0, {E.dim})")
    out = frozenset(c[:axis] + (0,) + c[axis + 1:] for c in E.coords)
    return LatticeSubset(E.dim, out)


class FrontierBound(NamedTuple):
    lhs: float
    rhs: int
    holds: bool


def frontier_inequality(E: LatticeSubset) -> FrontierBound:
    """Compare ``(#E)^((p-1)/p)`` with ``(p-1) #Fr(E)``; the empty set gives ``0 <= 0``."""
    p = E.dim
    fr = frontier(E)
    lhs = len(E) ** ((p - 1) / p)
    rhs = (p - 1) * len(fr)
    return FrontierBound(lhs, rhs, lhs <= rhs + 1e-12)


def parse_lattice_subset(text: str) -> LatticeSubset:
    """One whitespace-separated integer vector per line; ``#`` starts a comment."""
    rows = []
    dim = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.replace(",", " ").split()
        try:
            row = tuple(int(t) for t in tokens)
        except ValueError:
            raise ParseError(f"non-integer coordinate in {line!r}", lineno) from None
        if dim is None:
            dim = len(row)
        elif len(row) != dim:
            raise ParseError(f"expected {dim} coordinates, found {len(row)}", lineno)
        rows.append(row)
    if dim is None:
        raise ParseError("empty lattice subset")
    return LatticeSubset(dim, frozenset(rows))


# ---------------------------------------------------------------------------
# class-mass statistic


class ClassMass(NamedTuple):
    mass_ratio: float
    large_classes: int


def class_mass_statistic(A: PointSet, L: Lattice, N: int, R: float) -> ClassMass:
    """Fraction of ``A ∩ B(0, R)`` lying in classes with more than ``N`` members there.

    ``B(0, R)`` is the open ball.
    """
    if N < 1:
        raise InputError("N must be >= 1")
    if R > A.window_radius * (1 + 1e-12):
        raise InputError("R exceeds the window radius")
    idx = np.flatnonzero(A.norms < R)
    if idx.size == 0:
        raise UndefinedStatistic("no points inside B(0, R)")
    dec = decompose_classes(A.points[idx], L)
    sizes = dec.sizes()
    large = sizes > N
    return ClassMass(float(sizes[large].sum() / idx.size), int(large.sum()))


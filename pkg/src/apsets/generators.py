"""Deterministic positive and negative control sets.

Randomised kinds draw from ``numpy.random.Generator(PCG64(SeedSequence(seed)))``;
that pairing is the stream contract recorded as :data:`RNG_NAME`, so a spec
and seed produce identical points on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .geometry import min_pairwise_gap
from .lattice import IdealCrystal, Lattice
from .pointset import PointSet, unit_ball_volume

RNG_NAME = "numpy-PCG64-SeedSequence/v1"

GOLDEN = (1 + math.sqrt(5)) / 2

KINDS = ("lattice", "ideal_crystal", "perturbed_lattice", "fibonacci", "defect_crystal", "poisson")

# displacement field: (weight, frequency multipliers, phase); weights sum to 1
_MODES = (
    (0.5, (math.sqrt(2), math.sqrt(3), math.sqrt(5)), 0.0),
    (0.3, (math.sqrt(7), -math.sqrt(11), math.sqrt(13)), 1.0),
    (0.2, (-math.sqrt(17), math.sqrt(19), math.sqrt(23)), 2.0),
)


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    dim: int = 1
    window_radius: float = 50.0
    basis: tuple | None = None          # basis vectors T_j as rows
    residues: tuple | None = None       # Cartesian offsets
    alpha: float = 0.0
    defect_density: float = 0.0
    intensity: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown generator kind {self.kind!r}")
        if self.dim < 1:
            raise InputError("dim must be >= 1")
        if not (math.isfinite(self.window_radius) and self.window_radius > 0):
            raise InputError("window radius must be positive")
        if not 0 <= self.defect_density < 1:
            raise InputError("defect density must lie in [0, 1)")
        if not (math.isfinite(self.alpha) and self.alpha >= 0):
            raise InputError("alpha must be >= 0")
        if not (math.isfinite(self.intensity) and self.intensity > 0):
            raise InputError("intensity must be positive")
        if not 0 <= self.seed < 2**64:
            raise InputError("seed must be a 64-bit unsigned integer")
        if self.kind == "fibonacci" and self.dim != 1:
            raise InputError("the Fibonacci chain is one-dimensional")

    def lattice(self) -> Lattice:
        if self.basis is None:
            return Lattice(np.eye(self.dim))
        L = Lattice.from_vectors(self.basis)
        if L.dim != self.dim:
            raise InputError(f"basis has dimension {L.dim}, expected dimension {self.dim}")
        return L

    def crystal(self) -> IdealCrystal:
        offsets = np.zeros((1, self.dim)) if self.residues is None else np.asarray(self.residues, dtype=float)
        offsets = offsets.reshape(-1, self.dim)
        return IdealCrystal.from_cartesian(self.lattice(), offsets)


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def _window(points: np.ndarray, R: float) -> np.ndarray:
    keep = np.linalg.norm(points, axis=1) <= R
    return points[keep]


def displacement(x: np.ndarray, alpha: float) -> np.ndarray:
    """Almost periodic vector field with ``sup |u| <= alpha`` (three cosine modes)."""
    x = np.atleast_2d(x)
    p = x.shape[1]
    u = np.zeros_like(x)
    for k, (w, freqs, phase) in enumerate(_MODES):
        omega = np.array([freqs[i % 3] * (1 + i // 3) for i in range(p)])
        amp = w * alpha * np.cos(x @ omega + phase)
        u[:, k % p] += amp
    return u


def fibonacci_word(min_length: int) -> str:
    """Prefix of the fixed point of ``a -> ab, b -> a``."""
    w = "a"
    while len(w) < min_length:
        w = "".join("ab" if c == "a" else "a" for c in w)
    return w


def fibonacci_points(R: float) -> np.ndarray:
    """Two-sided Fibonacci chain in ``[-R, R]``: 0 rightward, -1 leftward."""
    w = fibonacci_word(int(math.ceil(R)) + 4)
    lengths = np.array([GOLDEN if c == "a" else 1.0 for c in w])
    right = np.concatenate([[0.0], np.cumsum(lengths)])
    left = -1.0 - np.concatenate([[0.0], np.cumsum(lengths)])
    pts = np.concatenate([left[::-1], right])
    pts = pts[np.abs(pts) <= R]
    return pts.reshape(-1, 1)


def generate(spec: GeneratorSpec) -> PointSet:
    """Build the point set described by ``spec``."""
    R = spec.window_radius
    p = spec.dim
    kind = spec.kind
    if kind == "fibonacci":
        return PointSet(fibonacci_points(R), R)
    if kind == "poisson":
        rng = rng_for(spec.seed)
        n = int(rng.poisson(spec.intensity * unit_ball_volume(p) * R**p))
        direction = rng.standard_normal((n, p))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = R * rng.random(n) ** (1.0 / p)
        return PointSet(direction * radius[:, None], R)

    if kind == "lattice" and spec.residues is not None:
        raise InputError("use kind 'ideal_crystal' to add residues")
    crystal = spec.crystal()
    base = crystal.points_in_ball(R)
    if kind in ("lattice", "ideal_crystal"):
        return PointSet(base, R)

    r_min = min_pairwise_gap(PointSet(base, R)) if len(base) > 1 else crystal.lattice.covering_circumradius()
    if kind == "perturbed_lattice":
        if not spec.alpha < r_min / 4:
            raise InputError(f"alpha must be below r_min/4 = {r_min / 4:.6g}")
        pts = base + displacement(base, spec.alpha)
        return PointSet(_window(pts, R), R)

    # defect_crystal
    rng = rng_for(spec.seed)
    n = len(base)
    hit = rng.random(n) < spec.defect_density
    direction = rng.standard_normal((n, p))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    pts = base + hit[:, None] * direction * (r_min / 3)
    return PointSet(_window(pts, R), R)


def defect_mask(spec: GeneratorSpec) -> np.ndarray:
    """Which base-crystal points a ``defect_crystal`` spec displaces (same order as the base)."""
    if spec.kind != "defect_crystal":
        raise InputError("defect mask only exists for defect crystals")
    base = spec.crystal().points_in_ball(spec.window_radius)
    rng = rng_for(spec.seed)
    return rng.random(len(base)) < spec.defect_density

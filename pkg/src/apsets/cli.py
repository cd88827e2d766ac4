"""Command-line interface.

Exit codes: 0 success (or ``ideal_crystal``), 1 ``not_crystal`` or frontier
violations, 2 parse or usage error, 3 inconclusive window.
"""

from __future__ import annotations

import argparse
import itertools
import math
import sys
from pathlib import Path

import numpy as np

from . import report as rep
from .almost_periods import find_almost_periods, find_besicovitch_periods
from .errors import APSetsError, CriterionInvalid, InconclusiveWindow, InputError
from .generators import KINDS, GeneratorSpec, generate, rng_for
from .geometry import classify
from .lattice import (
    Lattice,
    LatticeSubset,
    class_mass_statistic,
    frontier,
    frontier_inequality,
    parse_lattice_subset,
    project,
)
from .pointset import Tolerances, format_points, parse_points
from .recognition import recognize_crystal

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3
VERDICT_EXIT = {"ideal_crystal": EXIT_OK, "not_crystal": EXIT_NEGATIVE, "inconclusive": EXIT_INCONCLUSIVE}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers


def parse_vectors(text: str, dim: int | None = None, *, flat_1d: bool = False) -> list:
    """``"1,0;0,1"`` -> ``[[1, 0], [0, 1]]``.

    With ``flat_1d`` and ``dim`` 1, ``"0,0.5"`` means two scalars.
    """
    text = text.strip()
    if not text:
        raise UsageError("empty vector list")
    try:
        if flat_1d and dim == 1 and ";" not in text:
            return [[float(x)] for x in text.split(",")]
        return [[float(x) for x in part.split(",")] for part in text.split(";")]
    except ValueError:
        raise UsageError(f"bad number in {text!r}") from None


def _read_input(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_bytes(text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def _text_lines(doc: dict, prefix: str = "") -> list:
    lines = []
    for key in sorted(doc):
        value = doc[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            lines.extend(_text_lines(value, name + "."))
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            lines.append(f"{name}: {len(value)} entries")
            for k, item in enumerate(value):
                lines.extend(_text_lines(item, f"{name}[{k}]."))
        elif isinstance(value, float):
            lines.append(f"{name}: {value:.10g}")
        else:
            lines.append(f"{name}: {value}")
    return lines


def _render(doc: dict, as_json: bool) -> str:
    if as_json:
        return rep.dumps(doc)
    return "\n".join(_text_lines(doc)) + "\n"


def _tolerances(args) -> Tolerances:
    return Tolerances(boundary_margin=args.margin)


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args) -> int:
    data = _read_input(args.file)
    A = parse_points(data.decode("utf-8"), args.radius)
    tol = _tolerances(args).resolve(A)
    blocks: dict = {"input": {"points": len(A), "dim": A.dim, "window_radius": A.window_radius}}
    warnings = []
    code = EXIT_OK
    try:
        blocks["classification"] = rep.classification_block(classify(A, tol))
    except InconclusiveWindow as exc:
        warnings.append(f"classification inconclusive: {exc}")
        code = EXIT_INCONCLUSIVE
    if args.eps is not None and code == EXIT_OK:
        S = A.window_radius / 4 if args.search_radius is None else args.search_radius
        try:
            if args.delta is None:
                aps = find_almost_periods(A, args.eps, S, tol)
            else:
                aps = find_besicovitch_periods(A, args.eps, args.delta, S, tol)
            blocks["almost_periods"] = rep.almost_period_block(aps)
        except CriterionInvalid as exc:
            raise UsageError(str(exc)) from None
        except InconclusiveWindow as exc:
            warnings.append(f"almost-period scan inconclusive: {exc}")
            code = EXIT_INCONCLUSIVE
    elif args.delta is not None and args.eps is None:
        raise UsageError("--delta needs --eps")
    if args.recognize:
        res = recognize_crystal(A, tol, minimize=args.minimize)
        blocks["recognition"] = rep.recognition_block(res)
    if args.lattice is not None:
        L = Lattice.from_vectors(parse_vectors(args.lattice))
        R = A.window_radius if args.stat_radius is None else args.stat_radius
        stat = class_mass_statistic(A, L, args.classes_n, R)
        blocks["class_mass"] = rep.class_mass_block(L, args.classes_n, R, stat)
    blocks["warnings"] = warnings
    doc = rep.envelope(data, **blocks)
    _emit(_render(doc, args.json), args.output)
    return code


def cmd_recognize(args) -> int:
    data = _read_input(args.file)
    A = parse_points(data.decode("utf-8"), args.radius)
    res = recognize_crystal(A, _tolerances(args), minimize=args.minimize,
                            search_radius=args.search_radius)
    doc = rep.envelope(data, recognition=rep.recognition_block(res))
    _emit(_render(doc, args.json), args.output)
    return VERDICT_EXIT[res.verdict]


class _FrontierTally:
    def __init__(self):
        self.checked = 0
        self.violations = 0
        self.projection_violations = 0
        self.min_ratio = math.inf
        self.min_ratio_size = None
        self.max_ratio = 0.0

    def add(self, E: LatticeSubset) -> None:
        self.checked += 1
        res = frontier_inequality(E)
        if not res.holds:
            self.violations += 1
        n_fr = len(frontier(E)) if len(E) else 0
        for j in range(E.dim):
            if len(project(E, j)) > n_fr:
                self.projection_violations += 1
        if res.lhs > 0:
            ratio = res.rhs / res.lhs
            if ratio < self.min_ratio:
                self.min_ratio, self.min_ratio_size = ratio, len(E)
            self.max_ratio = max(self.max_ratio, ratio)

    def block(self) -> dict:
        return {
            "checked": self.checked,
            "violations": self.violations,
            "projection_violations": self.projection_violations,
            "min_ratio": self.min_ratio,
            "min_ratio_size": self.min_ratio_size,
            "max_ratio": self.max_ratio,
        }


def frontier_sweep(dim: int, *, exhaustive_grid: int | None = None, trials: int = 0,
                   max_size: int = 64, seed: int = 0, box: int | None = None) -> dict:
    """Check the frontier inequality and projection bound on many subsets of ``Z^dim``."""
    if dim < 2:
        raise UsageError("the frontier inequality needs --dim >= 2")
    tally = _FrontierTally()
    summary: dict = {"dim": dim}
    if exhaustive_grid is not None:
        k = exhaustive_grid
        cells = list(itertools.product(range(k), repeat=dim))
        if len(cells) > 20:
            raise UsageError("exhaustive grid too large (at most 20 cells)")
        for mask in range(1 << len(cells)):
            E = frozenset(c for b, c in enumerate(cells) if mask >> b & 1)
            tally.add(LatticeSubset(dim, E))
        summary["exhaustive_grid"] = k
    if trials:
        if max_size < 1:
            raise UsageError("--max-size must be >= 1")
        side = box or max(2, math.ceil(max_size ** (1.0 / dim) - 1e-9))
        while side**dim < max_size:
            side += 1
        cells = np.array(list(itertools.product(range(side), repeat=dim)))
        rng = rng_for(seed)
        for _ in range(trials):
            size = int(rng.integers(1, max_size + 1))
            pick = rng.choice(len(cells), size=size, replace=False)
            tally.add(LatticeSubset(dim, frozenset(tuple(int(x) for x in cells[i]) for i in pick)))
        summary.update({"trials": trials, "max_size": max_size, "seed": seed, "box": side})
    summary.update(tally.block())
    return summary


def cmd_frontier_check(args) -> int:
    data = None
    if args.input:
        data = _read_input(args.input)
        E = parse_lattice_subset(data.decode("utf-8"))
        if E.dim < 2:
            raise UsageError("the frontier inequality needs dimension >= 2")
        tally = _FrontierTally()
        tally.add(E)
        summary = {"dim": E.dim, "size": len(E), "frontier": len(frontier(E)), **tally.block()}
    else:
        if args.exhaustive_grid is None and not args.trials:
            raise UsageError("give --exhaustive-grid, --trials or --input")
        summary = frontier_sweep(args.dim, exhaustive_grid=args.exhaustive_grid, trials=args.trials,
                                 max_size=args.max_size, seed=args.seed, box=args.box)
    doc = rep.envelope(data, frontier_check=summary)
    _emit(_render(doc, args.json), args.output)
    bad = summary["violations"] or summary["projection_violations"]
    return EXIT_NEGATIVE if bad else EXIT_OK


def spec_from_args(args) -> GeneratorSpec:
    kind = args.kind.replace("-", "_")
    if kind not in KINDS:
        raise UsageError(f"unknown kind {args.kind!r}")
    basis = residues = None
    dim = args.dim
    if args.basis is not None:
        basis = parse_vectors(args.basis)
        if dim is None:
            dim = len(basis[0])
    dim = dim or 1
    if args.residues is not None:
        residues = parse_vectors(args.residues, dim, flat_1d=True)
    try:
        return GeneratorSpec(
            kind=kind,
            dim=dim,
            window_radius=args.radius,
            basis=None if basis is None else tuple(map(tuple, basis)),
            residues=None if residues is None else tuple(map(tuple, residues)),
            alpha=args.alpha,
            defect_density=args.defect_density,
            intensity=args.intensity,
            seed=args.seed,
        )
    except InputError as exc:
        raise UsageError(str(exc)) from None


def cmd_generate(args) -> int:
    spec = spec_from_args(args)
    try:
        A = generate(spec)
    except InputError as exc:
        raise UsageError(str(exc)) from None
    _emit(format_points(A), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _nonneg(text):
    v = float(text)
    if not (math.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError("must be a finite number >= 0")
    return v


def _positive(text):
    v = float(text)
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError("must be a finite number > 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apsets", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_file=True):
        if with_file:
            p.add_argument("file", help="point-set file ('-' for stdin)")
            p.add_argument("--radius", type=_positive, help="window radius (default: file comment or max norm)")
            p.add_argument("--margin", type=_nonneg, default=0.0, help="boundary margin")
        p.add_argument("--json", action="store_true", help="emit JSON")
        p.add_argument("-o", "--output", help="write the report to a file")

    p = sub.add_parser("analyze", help="classify a point set and scan for almost periods")
    common(p)
    p.add_argument("--eps", type=_positive, help="almost-period tolerance (enables the scan)")
    p.add_argument("--delta", type=_positive, help="defect fraction bound (Besicovitch scan)")
    p.add_argument("--search-radius", type=_nonneg, help="candidate radius (default R/4)")
    p.add_argument("--recognize", action="store_true", help="also run crystal recognition")
    p.add_argument("--minimize", action="store_true", help="enlarge the recognised lattice")
    p.add_argument("--lattice", help="basis vectors 'x,y;x,y' for the class-mass statistic")
    p.add_argument("--classes-n", type=int, default=10, help="class size threshold N")
    p.add_argument("--stat-radius", type=_positive, help="ball radius for the statistic")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("recognize", help="decide whether a point set is an ideal crystal")
    common(p)
    p.add_argument("--minimize", action="store_true", help="enlarge the recognised lattice")
    p.add_argument("--search-radius", type=_positive, help="cone search radius (default R/2)")
    p.set_defaults(func=cmd_recognize)

    p = sub.add_parser("frontier-check", help="sweep the discrete frontier inequality")
    common(p, with_file=False)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--max-size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--box", type=int, help="side of the random-subset box")
    p.add_argument("--exhaustive-grid", type=int, metavar="K", help="all subsets of a K^dim grid")
    p.add_argument("--input", help="check one lattice subset from a file")
    p.set_defaults(func=cmd_frontier_check)

    p = sub.add_parser("generate", help="write a generated point set")
    p.add_argument("kind", help="one of: " + ", ".join(k.replace("_", "-") for k in KINDS))
    p.add_argument("--dim", type=int)
    p.add_argument("--radius", type=_positive, default=50.0)
    p.add_argument("--basis", help="basis vectors 'x,y;x,y'")
    p.add_argument("--residues", help="residue vectors 'x,y;x,y' (1D: '0,0.5')")
    p.add_argument("--alpha", type=_nonneg, default=0.0)
    p.add_argument("--defect-density", type=_nonneg, default=0.0)
    p.add_argument("--intensity", type=_positive, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (InputError, UnicodeDecodeError, OSError) as exc:
        print(f"apsets: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InconclusiveWindow as exc:
        print(f"apsets: inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except APSetsError as exc:
        print(f"apsets: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

"""JSON rendering of analysis results with byte-stable output.

Keys are sorted, floats are written with 17 significant digits and
non-finite numbers become ``null``.
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

from . import __version__
from .almost_periods import AlmostPeriodReport
from .geometry import ClassificationReport
from .lattice import ClassMass, Lattice
from .recognition import RecognitionResult

SCHEMA = 1


def digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def _float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    if x == 0:
        return "0.0"
    text = f"{x:.17g}"
    if all(c not in text for c in ".en"):
        text += ".0"
    return text


def dumps(obj, indent: int = 2) -> str:
    """Serialise ``obj`` (dicts, lists, numbers, strings, numpy values)."""
    out: list[str] = []

    def emit(value, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(value, np.ndarray):
            value = value.tolist()
        if isinstance(value, np.generic):
            value = value.item()
        if value is None:
            out.append("null")
        elif isinstance(value, bool):
            out.append("true" if value else "false")
        elif isinstance(value, int):
            out.append(str(value))
        elif isinstance(value, float):
            out.append(_float(value))
        elif isinstance(value, str):
            out.append(json.dumps(value))
        elif isinstance(value, dict):
            if not value:
                out.append("{}")
                return
            out.append("{\n")
            items = sorted(value.items())
            for k, (key, v) in enumerate(items):
                out.append(f"{pad}{json.dumps(str(key))}: ")
                emit(v, level + 1)
                out.append(",\n" if k < len(items) - 1 else "\n")
            out.append(end + "}")
        elif isinstance(value, (list, tuple)):
            if not value:
                out.append("[]")
                return
            if all(isinstance(v, (int, float, np.generic)) and not isinstance(v, bool) for v in value):
                out.append("[")
                for k, v in enumerate(value):
                    emit(v, level + 1)
                    if k < len(value) - 1:
                        out.append(", ")
                out.append("]")
                return
            out.append("[\n")
            for k, v in enumerate(value):
                out.append(pad)
                emit(v, level + 1)
                out.append(",\n" if k < len(value) - 1 else "\n")
            out.append(end + "]")
        else:
            raise TypeError(f"cannot serialise {type(value).__name__}")

    emit(obj, 0)
    return "".join(out) + "\n"


def loads(text: str):
    return json.loads(text)


# ---------------------------------------------------------------------------
# blocks


def classification_block(r: ClassificationReport) -> dict:
    return r.to_dict()


def almost_period_block(r: AlmostPeriodReport) -> dict:
    return {
        "epsilon": r.epsilon,
        "delta": r.delta,
        "search_radius": r.search_radius,
        "gap_estimate": r.gap_estimate,
        "verified": [
            {"tau": list(v.tau), "kind": v.kind, "defect": v.defect} for v in r.verified
        ],
    }


def lattice_block(L: Lattice) -> dict:
    return {"basis_vectors": L.vectors.tolist(), "det": L.det}


def recognition_block(r: RecognitionResult) -> dict:
    out = {"verdict": r.verdict, "reason": r.reason}
    if r.crystal is not None:
        out["basis_vectors"] = r.crystal.lattice.vectors.tolist()
        out["residues"] = r.crystal.offsets.tolist()
        out["residue_count"] = len(r.crystal.residues)
    ev = r.evidence
    details = {}
    if "epsilon" in ev:
        e = ev["epsilon"]
        details["epsilon"] = e.epsilon
        details["diff_separation"] = e.separation
        details["period_gap_estimate"] = e.gap_estimate
        details["estimate_window_radius"] = e.sample_radius
    if "periods" in ev:
        ps = ev["periods"]
        details["cone_periods"] = ps.independent.tolist()
        details["off_axis_ratios"] = list(ps.off_axis_ratios)
    for key in ("detail", "axis", "cones", "missing", "extra"):
        if key in ev:
            details[key] = ev[key]
    out["evidence"] = details
    return out


def class_mass_block(L: Lattice, N: int, R: float, stat: ClassMass) -> dict:
    return {
        "lattice": lattice_block(L),
        "N": N,
        "radius": R,
        "mass_ratio": stat.mass_ratio,
        "large_classes": stat.large_classes,
    }


def envelope(data: bytes | None = None, **blocks) -> dict:
    doc = {"schema": SCHEMA, "tool": {"name": "apsets", "version": __version__}}
    if data is not None:
        doc["input_digest"] = digest(data)
    doc.update({k: v for k, v in blocks.items() if v is not None})
    return doc

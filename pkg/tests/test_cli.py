import json
import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from apsets import load_points
from apsets.cli import frontier_sweep, main, parse_vectors
from apsets.report import dumps, loads


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def crystal_file(tmp_path, capsys):
    path = tmp_path / "crystal.pts"
    code, _, _ = run(capsys, "generate", "ideal-crystal", "--basis", "2", "--residues", "0,0.5",
                     "--radius", 50, "-o", path)
    assert code == 0
    return path


@pytest.fixture
def fib_file(tmp_path, capsys):
    path = tmp_path / "fib.pts"
    assert run(capsys, "generate", "fibonacci", "--radius", 500, "-o", path)[0] == 0
    return path


# --- generate ---------------------------------------------------------------------


def test_generate_crystal_count(crystal_file):
    A = load_points(crystal_file)
    # the closed window [-50, 50] holds 51 + 50 points
    assert len(A) == 101
    assert A.window_radius == 50


def test_generate_is_deterministic(tmp_path, capsys):
    outs = []
    for k in range(2):
        path = tmp_path / f"p{k}.pts"
        run(capsys, "generate", "poisson", "--dim", 2, "--radius", 20, "--seed", 7, "-o", path)
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_generate_bad_spec(capsys):
    with pytest.raises(SystemExit) as exc:
        run(capsys, "generate", "perturbed-lattice", "--alpha", 0.5)
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run(capsys, "generate", "quasicrystal")
    assert exc.value.code == 2


def test_generate_to_stdout(capsys):
    code, out, _ = run(capsys, "generate", "lattice", "--dim", 2, "--radius", 2)
    assert code == 0
    assert out.splitlines()[1] == "dim 2" or "dim 2" in out


# --- analyze ------------------------------------------------------------------------


def test_analyze_lattice_flags(tmp_path, capsys):
    path = tmp_path / "z2.pts"
    run(capsys, "generate", "lattice", "--dim", 2, "--radius", 20, "-o", path)
    code, out, _ = run(capsys, "analyze", path, "--json")
    assert code == 0
    cls = json.loads(out)["classification"]
    assert cls["delone"] and cls["meyer"] and cls["finite_type"]


def test_analyze_fibonacci_periods(fib_file, capsys):
    code, out, _ = run(capsys, "analyze", fib_file, "--eps", 0.05, "--json")
    assert code == 0
    doc = json.loads(out)
    assert doc["classification"]["finite_type"]
    assert [v["tau"] for v in doc["almost_periods"]["verified"]] == [[0.0]]
    assert doc["input_digest"].startswith("sha256:")
    assert doc["schema"] == 1


def test_analyze_fibonacci_meyer(tmp_path, capsys):
    path = tmp_path / "f.pts"
    run(capsys, "generate", "fibonacci", "--radius", 100, "-o", path)
    doc = json.loads(run(capsys, "analyze", path, "--json")[1])
    assert doc["classification"]["meyer"]


def test_analyze_parse_error(tmp_path, capsys):
    path = tmp_path / "bad.pts"
    path.write_text("dim 3\n0 0 0\n1 2\n")
    code, _, err = run(capsys, "analyze", path)
    assert code == 2
    assert "line 3" in err


def test_analyze_inconclusive(tmp_path, capsys):
    path = tmp_path / "tiny.pts"
    path.write_text("dim 1\n0\n1\n")
    code, out, _ = run(capsys, "analyze", path, "--radius", 1.5, "--json")
    assert code == 3
    assert json.loads(out)["warnings"]


def test_analyze_large_eps_uses_matching(crystal_file, capsys):
    code, out, _ = run(capsys, "analyze", crystal_file, "--eps", 0.3, "--search-radius", 4, "--json")
    assert code == 0
    taus = [v["tau"][0] for v in json.loads(out)["almost_periods"]["verified"]]
    assert taus == [0.0, -2.0, 2.0, -4.0, 4.0]


def test_analyze_large_eps_refused_on_big_windows(tmp_path, capsys):
    path = tmp_path / "big.pts"
    run(capsys, "generate", "lattice", "--dim", 2, "--radius", 45, "-o", path)
    code, _, err = run(capsys, "analyze", path, "--eps", 0.6, "--search-radius", 2)
    assert code == 2
    assert "error" in err


def test_analyze_besicovitch_and_class_mass(tmp_path, capsys):
    path = tmp_path / "d.pts"
    run(capsys, "generate", "defect-crystal", "--radius", 200, "--defect-density", 0.01, "--seed", 3, "-o", path)
    code, out, _ = run(capsys, "analyze", path, "--eps", 0.1, "--delta", 0.06, "--search-radius", 5,
                       "--lattice", "1", "--classes-n", 10, "--json")
    assert code == 0
    doc = json.loads(out)
    taus = {round(v["tau"][0]) for v in doc["almost_periods"]["verified"]}
    assert set(range(-5, 6)) <= taus
    assert all(v["kind"] == "besicovitch" for v in doc["almost_periods"]["verified"])
    assert doc["class_mass"]["mass_ratio"] >= 0.95


def test_analyze_text_output(crystal_file, capsys):
    code, out, _ = run(capsys, "analyze", crystal_file)
    assert code == 0
    assert "classification.finite_type: True" in out


# --- recognize ------------------------------------------------------------------------


def test_recognize_crystal_exit_zero(crystal_file, capsys):
    code, out, _ = run(capsys, "recognize", crystal_file, "--json")
    assert code == 0
    doc = json.loads(out)["recognition"]
    assert doc["verdict"] == "ideal_crystal"
    assert doc["basis_vectors"] and doc["residues"]
    code, out, _ = run(capsys, "recognize", crystal_file, "--json", "--minimize")
    assert json.loads(out)["recognition"]["basis_vectors"] == [[2.0]]


def test_recognize_fibonacci_exit_one(fib_file, capsys):
    code, out, _ = run(capsys, "recognize", fib_file, "--json")
    assert code == 1
    assert json.loads(out)["recognition"]["reason"] == "no-verified-period"


def test_recognize_tiny_window_exit_three(tmp_path, capsys):
    path = tmp_path / "tiny.pts"
    run(capsys, "generate", "lattice", "--dim", 2, "--radius", 3, "-o", path)
    assert run(capsys, "recognize", path)[0] == 3


def test_recognize_implies_finite_type(crystal_file, capsys):
    assert run(capsys, "recognize", crystal_file)[0] == 0
    doc = json.loads(run(capsys, "analyze", crystal_file, "--json")[1])
    assert doc["classification"]["finite_type"]


def test_stdin_input(crystal_file, capsys, monkeypatch):
    import io

    data = crystal_file.read_bytes()
    monkeypatch.setattr(sys, "stdin", io.TextIOWrapper(io.BytesIO(data)))
    assert run(capsys, "recognize", "-")[0] == 0


# --- frontier-check ---------------------------------------------------------------------


def test_frontier_exhaustive(capsys):
    code, out, _ = run(capsys, "frontier-check", "--dim", 2, "--exhaustive-grid", 3, "--json")
    assert code == 0
    doc = json.loads(out)["frontier_check"]
    assert doc["checked"] == 2**9
    assert doc["violations"] == 0 and doc["projection_violations"] == 0


def test_frontier_random(capsys):
    code, out, _ = run(capsys, "frontier-check", "--dim", 3, "--trials", 300, "--max-size", 64, "--seed", 1, "--json")
    assert code == 0
    assert json.loads(out)["frontier_check"]["box"] == 4


def test_frontier_dim_one(capsys):
    with pytest.raises(SystemExit) as exc:
        run(capsys, "frontier-check", "--dim", 1, "--trials", 10)
    assert exc.value.code == 2


def test_frontier_input_file(tmp_path, capsys):
    path = tmp_path / "e.txt"
    path.write_text("0 0\n0 1\n1 0\n1 1\n")
    code, out, _ = run(capsys, "frontier-check", "--input", path, "--json")
    doc = json.loads(out)["frontier_check"]
    assert code == 0 and doc["frontier"] == 4 and doc["size"] == 4


def test_frontier_sweep_ratio_tracking():
    s = frontier_sweep(2, exhaustive_grid=2)
    assert s["checked"] == 16
    assert s["min_ratio"] == pytest.approx(1.0)


# --- JSON --------------------------------------------------------------------------------


def test_dumps_format():
    text = dumps({"b": [1.0, 2], "a": {"z": float("inf"), "y": True}, "c": 0.1})
    assert text == '{\n  "a": {\n    "y": true,\n    "z": null\n  },\n  "b": [1.0, 2],\n  "c": 0.10000000000000001\n}\n'


json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10**9, 10**9) | st.floats(allow_nan=False, allow_infinity=False)
    | st.text(max_size=8),
    lambda kids: st.lists(kids, max_size=4) | st.dictionaries(st.text(max_size=5), kids, max_size=4),
    max_leaves=12,
)


@given(json_values)
def test_dumps_round_trip(value):
    assert loads(dumps(value)) == value
    assert dumps(loads(dumps(value))) == dumps(value)


def test_parse_vectors():
    assert parse_vectors("1,0;0,1") == [[1.0, 0.0], [0.0, 1.0]]
    assert parse_vectors("0,0.5", 1, flat_1d=True) == [[0.0], [0.5]]


def test_module_entry_point(crystal_file):
    proc = subprocess.run([sys.executable, "-m", "apsets", "recognize", str(crystal_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "ideal_crystal" in proc.stdout

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import integer_window
from apsets import (
    GeneratorSpec,
    PointSet,
    Tolerances,
    besicovitch_defect,
    bijection_match_oracle,
    difference_set,
    find_almost_periods,
    find_besicovitch_periods,
    generate,
    is_bohr_almost_period,
)
from apsets.almost_periods import max_bipartite_matching
from apsets.errors import CriterionInvalid, InconclusiveWindow, InputError, OracleRefused


def taus(report):
    return {tuple(round(x, 9) for x in v.tau) for v in report.verified}


# --- single translations -----------------------------------------------------


def test_bohr_exact_period(Z20):
    check = is_bohr_almost_period(Z20, [1.0], 0.1)
    assert check.holds
    assert check.witness.empty and check.witness.fraction == 0.0


def test_bohr_half_shift_fails_everywhere(Z20):
    check = is_bohr_almost_period(Z20, [0.5], 0.1)
    assert not check.holds
    assert check.witness.fraction == 1.0


def test_bohr_rejects_large_epsilon(Z20):
    with pytest.raises(CriterionInvalid):
        is_bohr_almost_period(Z20, [1.0], 0.5)


def test_bohr_translation_too_long(Z20):
    with pytest.raises(InconclusiveWindow):
        is_bohr_almost_period(Z20, [25.0], 0.1)


def test_bohr_checks_both_directions():
    # the shift by +1 is fine inside this one-sided window, -1 is not
    A = PointSet.from_points(np.arange(0, 11, dtype=float), 10.0)
    assert bijection_match_oracle(A, [1.0], 0.1)
    assert not bijection_match_oracle(A, [-1.0], 0.1)
    assert not is_bohr_almost_period(A, [1.0], 0.1).holds


def test_bohr_fibonacci_agrees_with_oracle():
    A = generate(GeneratorSpec("fibonacci", window_radius=500))
    ds = difference_set(A, 20.0)
    assert len(ds) > 20
    for v in ds.vectors:
        bohr = is_bohr_almost_period(A, v, 0.05).holds
        both = bijection_match_oracle(A, v, 0.05) and bijection_match_oracle(A, -v, 0.05)
        assert bohr == both
        assert bohr == (np.linalg.norm(v) == 0)


def test_oracle_examples():
    assert bijection_match_oracle(PointSet.from_points([0.0, 1, 2, 3, 4]), [1.0], 0.1)
    A = PointSet.from_points([0.0, 1.0], 12.0)
    assert not bijection_match_oracle(A, [10.0], 0.1)


def test_oracle_size_limit():
    A = PointSet.from_points(np.arange(6001, dtype=float) - 3000, 3000)
    with pytest.raises(OracleRefused):
        bijection_match_oracle(A, [1.0], 0.1)


def test_oracle_needs_the_matching_not_just_neighbours():
    # two interior points compete for one target: every point has a match, no bijection
    A = PointSet.from_points([0.0, 0.3, 1.15], 2.0)
    assert oracles.unmatched(A.points, 2.0, [1.0], 0.5) == []
    assert not bijection_match_oracle(A, [1.0], 0.5)
    assert not oracles.has_perfect_matching(A.points, 2.0, [1.0], 0.5)


def test_matching_helper():
    assert max_bipartite_matching([[0, 1], [0], [1]], 2) == 2
    assert max_bipartite_matching([[0], [0], []], 3) == 1
    assert max_bipartite_matching([[1, 0], [1]], 2) == 2


@given(st.lists(st.tuples(st.integers(-12, 12), st.integers(-12, 12)), min_size=2, max_size=30, unique=True),
       st.tuples(st.integers(-8, 8), st.integers(-8, 8)), st.floats(0.05, 2.0))
def test_oracle_equals_assignment_oracle(rows, t, eps):
    P = np.array(rows, dtype=float) / 4
    A = PointSet.from_points(P, 4.5, dim=2)
    tau = np.array(t, dtype=float) / 4
    if np.linalg.norm(tau) + eps > 4.5:
        return
    assert bijection_match_oracle(A, tau, eps) == oracles.has_perfect_matching(P, 4.5, tau, eps)


@given(st.lists(st.tuples(st.integers(-12, 12), st.integers(-12, 12)), min_size=2, max_size=30, unique=True),
       st.tuples(st.integers(-8, 8), st.integers(-8, 8)), st.floats(0.01, 0.124))
def test_one_sided_equals_oracle_below_half_gap(rows, t, eps):
    P = np.array(rows, dtype=float) / 4
    A = PointSet.from_points(P, 4.5, dim=2)
    tau = np.array(t, dtype=float) / 4 + 0.003
    if np.linalg.norm(tau) + eps > 4.5:
        return
    check = is_bohr_almost_period(A, tau, eps)
    oracle = bijection_match_oracle(A, tau, eps) and bijection_match_oracle(A, -tau, eps)
    assert check.holds == oracle
    plus = oracles.unmatched(P, 4.5, tau, eps)
    assert (check.holds and plus == []) or not check.holds


# --- searches ----------------------------------------------------------------


def test_find_two_residue_crystal():
    A = generate(GeneratorSpec("ideal_crystal", window_radius=50, basis=((2.0,),), residues=((0.0,), (0.5,))))
    rep = find_almost_periods(A, 0.1, 10.0)
    assert {(float(k),) for k in range(-10, 11, 2)} <= taus(rep)
    # brute-force check of every reported vector and of every even integer
    for v in rep.verified:
        assert oracles.unmatched(A.points, 50, v.tau, 0.1) == []
        assert oracles.unmatched(A.points, 50, -np.array(v.tau), 0.1) == []
    assert rep.gap_estimate <= 2.0
    assert rep.verified[0].tau == (0.0,)


def test_find_square_lattice():
    A = generate(GeneratorSpec("lattice", dim=2, window_radius=30))
    rep = find_almost_periods(A, 0.1, 5.0)
    want = {(float(i), float(j)) for i in range(-5, 6) for j in range(-5, 6) if i * i + j * j <= 25}
    assert taus(rep) == want
    assert all(v.kind == "bohr" and v.defect == 0.0 for v in rep.verified)
    norms = [np.linalg.norm(v.tau) for v in rep.verified]
    assert norms == sorted(norms)


def test_find_poisson_only_trivial_periods():
    A = generate(GeneratorSpec("poisson", window_radius=100, seed=2))
    rep = find_almost_periods(A, 0.05, 20.0)
    # difference vectors shorter than eps are trivially almost periods
    assert all(np.linalg.norm(v.tau) < 0.05 for v in rep.verified)
    assert (0.0,) in taus(rep)


def test_search_radius_bound(Z20):
    with pytest.raises(InputError):
        find_almost_periods(Z20, 0.1, 11.0)


def test_large_epsilon_uses_matching():
    A = integer_window(-10, 10, 10)
    rep = find_almost_periods(A, 0.6, 3.0)
    # eps >= r_min/2: checked through the matching in both directions
    assert taus(rep) == {(float(k),) for k in range(-3, 4)}


@pytest.mark.parametrize("seed", range(3))
def test_monotone_in_epsilon_and_symmetric(seed):
    A = generate(GeneratorSpec("perturbed_lattice", dim=1, window_radius=60, alpha=0.1, seed=seed))
    small = taus(find_almost_periods(A, 0.08, 12.0))
    large = taus(find_almost_periods(A, 0.3, 12.0))
    assert small <= large
    for t in large:
        assert tuple(round(-x, 9) + 0.0 for x in t) in large


def test_lattice_periods_for_any_eps_above_eq_tol():
    spec = GeneratorSpec("ideal_crystal", dim=2, window_radius=20, basis=((1.0, 0.0), (0.5, 1.0)),
                         residues=((0.0, 0.0), (0.5, 0.3)))
    A = generate(spec)
    rep = find_almost_periods(A, 1e-6, 6.0)
    L = spec.lattice()
    want = {tuple(round(x, 9) for x in v) for v in L.points_in_ball(6.0)}
    assert want <= taus(rep)
    assert rep.gap_estimate <= np.linalg.norm(L.basis.sum(axis=1))


# --- Besicovitch -------------------------------------------------------------


def test_besicovitch_moved_point():
    x = np.arange(-10, 11, dtype=float)
    x[10] = 0.3
    A = PointSet.from_points(x, 10.0)
    d = besicovitch_defect(A, [1.0], 0.1)
    assert sorted(A.points[d.unmatched, 0].tolist()) == [-1.0, 0.3]
    want = oracles.unmatched(A.points, 10.0, [1.0], 0.1)
    assert sorted(d.unmatched.tolist()) == want
    assert d.interior_count == 17
    assert d.fraction == pytest.approx(2 / 17)


def test_besicovitch_zero_translation():
    A = generate(GeneratorSpec("poisson", window_radius=30, seed=5))
    assert besicovitch_defect(A, [0.0], 0.01).fraction == 0.0


def test_besicovitch_empty_interior():
    A = PointSet.from_points([9.0], 10.0)
    with pytest.raises(InconclusiveWindow):
        besicovitch_defect(A, [1.0], 0.1)


def test_besicovitch_defect_crystal_basis_vector():
    spec = GeneratorSpec("defect_crystal", dim=1, window_radius=500, defect_density=0.01, seed=11)
    A = generate(spec)
    d = besicovitch_defect(A, [1.0], 0.1)
    assert d.fraction <= 0.03
    assert d.fraction > 0
    assert sorted(d.unmatched.tolist()) == oracles.unmatched(A.points, 500, [1.0], 0.1)


def test_besicovitch_equals_bohr_on_ideal_crystal():
    A = generate(GeneratorSpec("ideal_crystal", window_radius=40, basis=((2.0,),), residues=((0.0,), (0.7,))))
    bohr = find_almost_periods(A, 0.1, 10.0)
    for delta in (0.001, 0.2):
        bes = find_besicovitch_periods(A, 0.1, delta, 10.0)
        assert taus(bes) == taus(bohr)
        assert all(v.kind == "besicovitch" for v in bes.verified)
    # a loose threshold admits shifts that carry one residue class onto the other
    loose = find_besicovitch_periods(A, 0.1, 0.9, 10.0)
    half = {round(v.tau[0], 6): v.defect for v in loose.verified}
    assert half[0.7] == pytest.approx(0.5, abs=0.05)


def test_besicovitch_defect_crystal_lattice_vectors():
    A = generate(GeneratorSpec("defect_crystal", dim=1, window_radius=400, defect_density=0.01, seed=3))
    rep = find_besicovitch_periods(A, 0.1, 0.05, 10.0)
    assert {(float(k),) for k in range(-10, 11)} <= taus(rep)
    assert all(0.0 <= v.defect < 0.05 for v in rep.verified)


def test_besicovitch_poisson_control():
    A = generate(GeneratorSpec("poisson", window_radius=100, seed=2))
    rep = find_besicovitch_periods(A, 0.05, 0.05, 20.0)
    assert all(np.linalg.norm(v.tau) < 0.05 for v in rep.verified)


def test_besicovitch_delta_range(Z20):
    with pytest.raises(InputError):
        find_besicovitch_periods(Z20, 0.1, 1.5, 5.0)

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unitary_anderson.lattice import anderson_operator
from unitary_anderson.model import LatticeBox, ModelParams, PhaseDistribution, sample_phase_field
from unitary_anderson.moments import (TruncationWarning, decay_experiment, determinant_ratio,
                                      dissipative_bound, dissipative_integral_check, dynamical_profile,
                                      fractional_moment, free_operator, green_samples, is_dissipative,
                                      moment_stability, plateau_ratio, position_moment, position_moment_curve,
                                      random_dissipative, running_sup_row, second_moment_ratio,
                                      trajectory_diagnostic, triangular_form, two_phase_monte_carlo,
                                      two_phase_quadrature)
from unitary_anderson.moments import _field
from unitary_anderson.resolvent import resolvent

P = ModelParams(0.5)
FULL = PhaseDistribution.uniform()


def test_free_operator_choice():
    assert free_operator(P, LatticeBox.neumann(4)).bc is not None
    S = free_operator(P, LatticeBox.interval(-5, 6))
    assert S.size == 12
    with pytest.raises(ValueError):
        free_operator(ModelParams(0.5, 2), LatticeBox(((1, 4), (0, 3))))


def test_green_samples_match_direct_solve():
    box = LatticeBox.neumann(5)
    S = free_operator(P, box)
    z = [1.2, 0.5j]
    G = green_samples(S, FULL, z, 2, [0, 3, 7], 5, 4, "t")
    for i in range(5):
        U = anderson_operator(P, _field(FULL, box, 4, "t", i))
        for m, zz in enumerate(z):
            assert np.allclose(G[i, m], resolvent(U, zz)[[0, 3, 7], 2])


def test_fractional_moment_worker_independent():
    box = LatticeBox.neumann(6)
    a = fractional_moment(P, FULL, box, 1.1, 0, 5, 0.3, 200, 1, workers=1)
    b = fractional_moment(P, FULL, box, 1.1, 0, 5, 0.3, 200, 1, workers=2)
    assert a == b
    with pytest.raises(ValueError):
        fractional_moment(P, FULL, box, 1.0, 0, 5, 0.3, 10, 1)
    with pytest.raises(ValueError):
        fractional_moment(P, FULL, box, 1.1, 0, 5, 1.0, 10, 1)


def test_fractional_moment_bounded_near_circle():
    rep = moment_stability(P, FULL, LatticeBox.cube(6, 1), 0.4, [1.1, 1.01, 1.001], 0, 0, 0.3, 1000, 2)
    assert rep.bounded
    assert rep.values.max() < 5


def test_decay_experiment_positive_rate():
    prof = decay_experiment(P, FULL, 1, 1.01 * np.exp(0.4j), 0.2, [2, 6, 10, 14, 18], 300, 1)
    assert prof.fitted_rate > 0 and prof.r_squared > 0.9
    assert np.all(np.diff(prof.values) < 0)


def test_second_moment_ratio_bounded():
    r = second_moment_ratio(P, FULL, LatticeBox.cube(4, 1), 0.9 * np.exp(0.3j), 0, 0, 0.5, 300, 2)
    assert 0 < r.ratio < 1
    assert r.stderr > 0
    with pytest.raises(ValueError):
        second_moment_ratio(P, FULL, LatticeBox.cube(4, 1), 1.1, 0, 0, 0.5, 10, 2)


def test_two_phase_quadrature_vs_monte_carlo():
    box = LatticeBox.interval(0, 7)
    ph = sample_phase_field(FULL, box, 3)
    q = two_phase_quadrature(P, ph, FULL, (2, 5), 1.3, 1, 4, 0.5)
    mc = two_phase_monte_carlo(P, ph, FULL, (2, 5), 1.3, 1, 4, 0.5, 2000, 1)
    assert abs(q - mc.value) < 3 * mc.stderr
    assert two_phase_quadrature(P, ph, FULL, (2, 5), 1.3, 1, 4, 0.5, nodes=48) == pytest.approx(q, rel=1e-4)


@given(st.integers(0, 10**6), st.floats(1e-6, 2.0))
@settings(max_examples=40, deadline=None)
def test_dissipative_integral_bound(seed, scale):
    rng = np.random.default_rng(seed)
    A = random_dissipative(rng, scale)
    assert is_dissipative(A)
    T = triangular_form(A)
    assert abs(T[1, 0]) < 1e-12
    assert determinant_ratio(A) >= 0.5 - 1e-9
    lam = -np.linalg.eigvals(A).real[0]
    for s in (0.3, 0.5):
        assert dissipative_integral_check(A, s, (lam - 0.5, lam + 0.5)) <= dissipative_bound(s)


def test_dissipative_errors():
    with pytest.raises(ValueError):
        dissipative_integral_check(-1j * np.eye(2), 0.5)
    with pytest.raises(ValueError):
        dissipative_integral_check(1j * np.eye(2), 0.5, (0, 2))
    assert dissipative_integral_check(1j * np.eye(2), 0.5) == pytest.approx(1.0, rel=0.2)


def test_running_sup_row_matches_powers():
    U = anderson_operator(P, sample_phase_field(FULL, LatticeBox.neumann(6), 0))
    M = U.dense()
    R = running_sup_row(U, 4, 5)
    best = np.zeros(12)
    for n in range(-5, 6):
        best = np.maximum(best, np.abs(np.linalg.matrix_power(M if n >= 0 else M.conj().T, abs(n))[4]))
    assert np.allclose(R[-1], best)
    assert np.all(np.diff(R, axis=0) >= 0)


def test_dynamical_profile_and_truncation_flag():
    with pytest.warns(TruncationWarning):
        ap = dynamical_profile(P, FULL, LatticeBox.interval(-40, 39), 0, range(2, 12), 30, 40, 1)
    assert ap.truncated
    assert ap.fit.rate > 0
    with warnings.catch_warnings():
        warnings.simplefilter("error", TruncationWarning)
        ok = dynamical_profile(P, FULL, LatticeBox.interval(-60, 59), 0, range(2, 6), 10, 10, 1)
    assert not ok.truncated
    assert len(list(ok.to_profile().rows())) == 4


def test_position_moments():
    box = LatticeBox.interval(-60, 59)
    psi = np.zeros(box.volume)
    psi[box.index(0)] = 1
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        free, _ = position_moment_curve(ModelParams(0.3), None, box, psi, 2, 25, 1, 0)
        loc, se = position_moment_curve(ModelParams(0.3), FULL, box, psi, 2, 25, 20, 0)
        est = position_moment(ModelParams(0.3), FULL, box, psi, 2, 25, 20, 0)
    assert free[0] == 0 and np.all(np.diff(free) >= 0)
    assert loc[-1] < free[-1]
    assert est.value == pytest.approx(loc[-1])
    assert plateau_ratio(np.minimum(np.arange(100.0), 10)) == pytest.approx(0.0)
    assert plateau_ratio(np.arange(100.0)) == pytest.approx(1.0)


def test_trajectory_diagnostic_monotone_in_r():
    box = LatticeBox.interval(-40, 39)
    psi = np.zeros(box.volume)
    psi[box.index(0)] = 1
    out = trajectory_diagnostic(ModelParams(0.3), FULL, box, psi, [0, 5, 10, 20], 15, 1)
    vals = [out[r] for r in (0, 5, 10, 20)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))

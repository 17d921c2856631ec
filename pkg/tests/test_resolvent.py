import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unitary_anderson.lattice import anderson_operator
from unitary_anderson.model import LatticeBox, ModelParams, PhaseDistribution, sample_phase_field
from unitary_anderson.resolvent import (DecayProfile, ResolventError, combes_thomas_profile,
                                        geometric_resolvent_check, green, modified_green, poisson_functional,
                                        resolvent, resolvent_columns, shell_distance, spectral_function,
                                        spectrum_distance)

P = ModelParams(0.5)


def _U(box, seed=0, hi=1.0, p=P):
    return anderson_operator(p, sample_phase_field(PhaseDistribution.uniform(0, hi), box, seed))


@given(st.floats(0.2, 3.0).filter(lambda x: abs(x - 1) > 1e-3), st.floats(0, 2 * np.pi))
@settings(max_examples=30, deadline=None)
def test_resolvent_inverts(rho, arg):
    U = _U(LatticeBox.neumann(6))
    z = rho * np.exp(1j * arg)
    G = resolvent(U, z)
    assert np.allclose(G @ (U.dense() - z * np.eye(12)), np.eye(12), atol=1e-9)


def test_sparse_and_dense_paths_agree():
    p = ModelParams(0.5, 2)
    U = _U(LatticeBox.neumann(33, 2), p=p)
    assert U.is_sparse
    z = 1.2
    col = resolvent_columns(U, z, [U.box.index((30, 31))])
    e = np.zeros(U.size)
    e[U.box.index((30, 31))] = 1
    assert np.linalg.norm(U.entries @ col[:, 0] - z * col[:, 0] - e) < 1e-10


def test_green_and_modified_green():
    U = _U(LatticeBox.neumann(5))
    z = 0.7 * np.exp(1j)
    G = np.linalg.inv(U.dense() - z * np.eye(10))
    assert green(U, z, 3, 5) == pytest.approx(G[3, 5])
    assert modified_green(U, z, 4, 4) == pytest.approx(1 + 2 * z * G[4, 4])
    with pytest.raises(ResolventError):
        green(U, np.exp(0.3j), 0, 0)


def test_poisson_functional_converges():
    U = _U(LatticeBox.neumann(4), seed=3, hi=6).dense()
    errs = [np.abs(poisson_functional(U, lambda w: w, r, max(64, int(np.ceil(10 / (1 - r))))) - U).max()
            for r in (0.9, 0.99)]
    assert errs[1] < errs[0] / 5
    one = poisson_functional(U, lambda w: np.ones_like(w), 0.99, 1000)
    assert np.allclose(one, np.eye(8), atol=1e-3)
    with pytest.raises(ValueError):
        poisson_functional(U, lambda w: w, 1.0, 100)


def test_spectral_function():
    U = _U(LatticeBox.neumann(4), seed=1).dense()
    assert np.allclose(spectral_function(U, lambda w: w**3), U @ U @ U, atol=1e-12)


@pytest.mark.parametrize("L,y", [(2, 6), (3, -7), (3, 9)])
def test_geometric_identity_d1(L, y):
    U = _U(LatticeBox.interval(-40, 39), seed=L)
    r = geometric_resolvent_check(U, L, y, 1.4 * np.exp(0.5j))
    assert r.max < 1e-10


def test_geometric_identity_d2():
    p = ModelParams(0.5, 2)
    U = _U(LatticeBox(((-10, 11), (-10, 11))), seed=4, p=p)
    assert geometric_resolvent_check(U, 1, (3, -2), 0.6 * np.exp(0.2j)).max < 1e-10


def test_spectrum_distance_free_arc():
    S = anderson_operator(P, sample_phase_field(PhaseDistribution.uniform(0, 1e-9), LatticeBox.neumann(20), 0))
    assert spectrum_distance(S, 2.0) == pytest.approx(1.0, abs=1e-6)


def test_combes_thomas_envelope():
    U = _U(LatticeBox.interval(0, 199), seed=3)
    prev = None
    for rho in (1.2, 1.5):
        res = combes_thomas_profile(U, rho * np.exp(1j * (P.lambda0 + 0.5)), 100, 60)
        assert res.B_fit > 0
        assert res.under_envelope(res.B_fit)
        assert res.B <= res.B_fit
        assert res.profile.r_squared > 0.9
        if prev is not None:
            assert res.dist > prev
        prev = res.dist
    with pytest.raises(ValueError):
        combes_thomas_profile(U, 2.0, 100, 150)


def test_shell_distance_and_profile_csv(tmp_path):
    box = LatticeBox(((-2, 2), (-2, 2)))
    sh = shell_distance(box, (0, 0))
    assert sh.max() == 2 and np.sum(sh == 1) == 8
    prof = DecayProfile.from_values(np.arange(1, 6), np.exp(-0.5 * np.arange(1, 6)))
    assert prof.fitted_rate == pytest.approx(0.5)
    prof.to_csv(tmp_path / "p.csv")
    head = (tmp_path / "p.csv").read_text().splitlines()[0]
    assert head == "dist,value,fitted_rate,fitted_prefactor,r_squared"

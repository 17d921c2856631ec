import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unitary_anderson.lattice import build_S_interval, build_U
from unitary_anderson.model import BoundarySpec, LatticeBox, ModelParams, PhaseDistribution, PhaseField, \
    sample_phase_field
from unitary_anderson.transfer import (boundary_solution, ckm_moment, cocycle, corner_green, green_via_solutions,
                                       green_matrix_via_solutions, growth_exponent, log_cocycle_norm,
                                       lyapunov_estimate, norm_decoupling_integral, tilde_transfer,
                                       transfer_matrix, write_lyapunov_csv)

angles = st.floats(0, 2 * np.pi)


@given(st.floats(0.05, 0.95), angles, angles, st.floats(-0.5, 0.5), angles)
@settings(max_examples=200)
def test_determinant(t, th, eta, logr, arg):
    z = np.exp(logr + 1j * arg)
    T = transfer_matrix(z, th, eta, ModelParams(t))
    # the entries cancel terms of size (1 + |z|)/t^2, so roundoff scales with their square
    tol = 1e-15 * max(1.0, ((1 + abs(z)) / t**2) ** 2)
    assert abs(np.linalg.det(T) - np.exp(1j * (th - eta))) <= tol


def test_broadcasting():
    p = ModelParams(0.5)
    th = np.linspace(0, 1, 7)
    T = transfer_matrix(1.2, th, 0.3, p)
    assert T.shape == (7, 2, 2)
    assert np.allclose(T[3], transfer_matrix(1.2, th[3], 0.3, p))
    with pytest.raises(ValueError):
        transfer_matrix(0, 0.1, 0.2, p)


def test_band_edge_vector_in_pair_order():
    p = ModelParams(0.5)
    v = np.array([1j, 1.0])
    assert np.allclose(transfer_matrix(np.exp(1j * p.lambda0), 0, 0, p) @ v, v)
    assert np.allclose(transfer_matrix(1.0, 0, 0, p) @ v, -v)


@given(st.integers(0, 10**6), st.floats(0.6, 1.6), angles)
@settings(max_examples=30, deadline=None)
def test_boundary_solutions_solve_eigen_equation(seed, rho, arg):
    p = ModelParams(0.4)
    a, b = 0, 19
    ph = sample_phase_field(PhaseDistribution.uniform(), LatticeBox.interval(a, b), seed)
    z = rho * np.exp(1j * arg)
    U = build_U(ph, build_S_interval(p, (a, b))).dense() - z * np.eye(20)
    left = boundary_solution(z, BoundarySpec.eta(0.0), ph, (a, b), "left", p)
    right = boundary_solution(z, BoundarySpec.eta(0.0), ph, (a, b), "right", p)
    va, vb = left.psi[1:-1], right.psi[1:-1]
    # each satisfies every row except the two at the opposite end
    assert np.max(np.abs((U @ va)[:-2])) <= 1e-9 * np.linalg.norm(va)
    assert np.max(np.abs((U @ vb)[2:])) <= 1e-9 * np.linalg.norm(vb)
    assert left.at(a) == 1 and right.at(b) == 1


def test_tilde_recursion():
    p = ModelParams(0.5)
    rng = np.random.default_rng(2)
    ph = PhaseField(LatticeBox.interval(0, 19), rng.uniform(0, 6, 20))
    z = 1.3 * np.exp(0.7j)
    s = boundary_solution(z, BoundarySpec.eta(0.0), ph, (0, 19), "left", p)
    for n in range(1, 8):
        x = np.array([s.tilde_at(2 * n), s.tilde_at(2 * n + 1)])
        y = np.array([s.tilde_at(2 * n + 2), s.tilde_at(2 * n + 3)])
        Tt = tilde_transfer(z, ph.theta[2 * n + 1], ph.theta[2 * n + 2], p)
        assert np.allclose(Tt @ x, y, rtol=1e-12)


@pytest.mark.parametrize("interval", [(0, 19), (0, 20), (2, 23), (4, 21)])
def test_green_via_solutions_matches_inverse(interval):
    p = ModelParams(0.5)
    a, b = interval
    ph = sample_phase_field(PhaseDistribution.uniform(), LatticeBox.interval(a, b), 5)
    z = 0.8 * np.exp(2.0j)
    n = b - a + 1
    Gd = np.linalg.inv(build_U(ph, build_S_interval(p, interval)).dense() - z * np.eye(n))
    assert np.allclose(green_matrix_via_solutions(p, ph, interval, z), Gd, rtol=1e-9, atol=0)
    if b % 2 == 0:
        assert corner_green(p, ph, interval, z) == pytest.approx(Gd[0, -1], rel=1e-10)


def test_green_via_solutions_errors():
    p = ModelParams(0.5)
    ph = sample_phase_field(PhaseDistribution.uniform(), LatticeBox.interval(0, 9), 1)
    with pytest.raises(ValueError):
        green_via_solutions(p, ph, (0, 9), 1.2, 0, 10)
    with pytest.raises(ValueError):
        boundary_solution(1.2, BoundarySpec.eta(0.0), ph, (1, 9), "left", p)
    with pytest.raises(ValueError):
        boundary_solution(1.2, BoundarySpec.eta(0.0), ph, (0, 9), "middle", p)
    w, _ = np.linalg.eig(build_U(ph, build_S_interval(p, (0, 9))).dense())
    with pytest.raises(ZeroDivisionError):
        green_via_solutions(p, ph, (0, 9), w[0], 3, 4)


def test_cocycle_and_log_norm_agree():
    p = ModelParams(0.5)
    th = np.random.default_rng(0).uniform(0, 2 * np.pi, 40)
    z = 1.01 * np.exp(0.3j)
    M = cocycle(z, th, 20, p)
    assert log_cocycle_norm(z, th[None], 20, p)[0] == pytest.approx(np.log(np.linalg.norm(M, 2)))
    v = np.array([0.6, 0.8])
    assert log_cocycle_norm(z, th[None], 20, p, v)[0] == pytest.approx(np.log(np.linalg.norm(M @ v)))
    assert np.array_equal(cocycle(z, th, 0, p), np.eye(2))
    with pytest.raises(ValueError):
        cocycle(z, th, 21, p)


def test_free_cocycle_inside_band_does_not_grow():
    p = ModelParams(0.5)
    assert abs(growth_exponent(np.exp(0.4j), np.zeros(4000), 2000, p)) < 0.01
    # outside the arc the free cocycle grows
    assert growth_exponent(np.exp(2.5j), np.zeros(4000), 2000, p) > 0.1


def test_lyapunov_rotation_invariant_and_reproducible(tmp_path):
    p = ModelParams(0.5)
    dist = PhaseDistribution.uniform()
    a = lyapunov_estimate(np.exp(0.2j), dist, 100, 200, 3, p)
    b = lyapunov_estimate(np.exp(0.2j), dist, 100, 200, 3, p)
    c = lyapunov_estimate(np.exp(2.2j), dist, 100, 200, 3, p)
    assert a == b
    assert a.gamma > 10 * a.stderr
    assert abs(a.gamma - c.gamma) < 4 * np.hypot(a.stderr, c.stderr)
    write_lyapunov_csv(tmp_path / "l.csv", [a, c])
    assert len((tmp_path / "l.csv").read_text().splitlines()) == 3
    with pytest.raises(ValueError):
        lyapunov_estimate(1.0, dist, 10, 200, 0, p)


def test_ckm_moment_decreasing():
    p = ModelParams(0.5)
    dist = PhaseDistribution.uniform()
    v = [1.0, 0.0]
    vals = [ckm_moment(1.0, dist, 0.1, n, 500, v, 2, p).value for n in (0, 20, 40, 80)]
    assert vals[0] == 1.0
    assert all(x > y for x, y in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        ckm_moment(1.0, dist, 0.1, 10, 10, [1.0, 1.0], 0, p)


def test_norm_decoupling_integral_finite():
    p = ModelParams(0.5)
    val = norm_decoupling_integral(1.0, (0.3, 0.7 + 0.1j), PhaseDistribution.uniform(), 0.5, p)
    assert np.isfinite(val) and val > 0

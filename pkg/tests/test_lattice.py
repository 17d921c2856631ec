import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unitary_anderson.lattice import (BandedUnitary, anderson_operator, boundary_operator, build_S_interval,
                                      build_S_tensor, build_U, decoupled_operator, exterior_restriction,
                                      load_csv, rank_one_phase, rank_one_rotation, split_operator,
                                      splitting_data)
from unitary_anderson.model import BoundarySpec, LatticeBox, ModelParams, PhaseDistribution, PhaseField, \
    sample_phase_field

ts = st.floats(0.05, 0.95)


@given(ts, st.integers(-6, 6), st.integers(3, 30), st.floats(0, 6.28), st.floats(0, 6.28))
@settings(max_examples=60, deadline=None)
def test_interval_unitary_and_banded(t, a, n, ea, eb):
    S = build_S_interval(ModelParams(t), (a, a + n - 1), BoundarySpec.eta(ea, eb))
    assert S.unitarity_defect() < 1e-12
    assert S.band_defect() == 0


@given(ts, st.integers(1, 3), st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_tensor_operator_unitary(t, d, seed):
    L = {1: 5, 2: 3, 3: 2}[d]
    p = ModelParams(t, d)
    box = LatticeBox.neumann(L, d)
    U = anderson_operator(p, sample_phase_field(PhaseDistribution.uniform(), box, seed))
    assert U.unitarity_defect() < 1e-12
    assert U.band_defect() == 0


def test_bulk_five_diagonal():
    p = ModelParams(0.4)
    S = build_S_interval(p, (-10, 11)).dense()
    r, t = p.r, p.t
    # rows of sites 0 and 1, columns -2..2 and -1..3; <e_{2k-2}|S e_{2k}> = -t^2
    assert S[10, 8:13] == pytest.approx([0, r * t, r * r, r * t, -t * t])
    assert S[11, 9:14] == pytest.approx([-t * t, -r * t, r * r, -r * t, 0])
    assert S[8, 10] == pytest.approx(-t * t)


@given(st.integers(-8, 8))
@settings(max_examples=17, deadline=None)
def test_translation_covariance_even_shift(k):
    p = ModelParams(0.35)
    box = LatticeBox.interval(-6, 9)
    ph = sample_phase_field(PhaseDistribution.uniform(), box, 3)
    U = build_U(ph, build_S_interval(p, (-6, 9)))
    V = build_U(ph.shifted(2 * k), build_S_interval(p, (-6 + 2 * k, 9 + 2 * k)))
    assert np.allclose(U.dense(), V.dense(), atol=1e-15)


def test_neumann_parity_enforced():
    p = ModelParams(0.5)
    with pytest.raises(ValueError):
        build_S_interval(p, (1, 8), BoundarySpec.neumann())
    with pytest.raises(ValueError):
        build_S_interval(p, (0, 1))
    with pytest.raises(ValueError):
        build_S_tensor(p, LatticeBox.interval(1, 8))
    with pytest.raises(ValueError):
        build_S_tensor(ModelParams(0.5, 2), LatticeBox.neumann(2))


def test_kron_ordering_matches_tensor():
    p = ModelParams(0.5, 2)
    box = LatticeBox(((0, 3), (0, 5)))
    S = build_S_tensor(p, box).dense()
    a = build_S_interval(p, (0, 3), BoundarySpec.neumann()).dense()
    b = build_S_interval(p, (0, 5), BoundarySpec.neumann()).dense()
    i, j = box.index((1, 2)), box.index((2, 4))
    assert S[i, j] == pytest.approx(a[1, 2] * b[2, 4])


def test_sparse_storage_for_large_boxes():
    p = ModelParams(0.5, 2)
    S = build_S_tensor(p, LatticeBox.neumann(33, 2))
    assert S.is_sparse
    assert S.band_defect() == 0


def test_exterior_restriction_contraction():
    p = ModelParams(0.5)
    world = LatticeBox.interval(-20, 21)
    U = anderson_operator(p, sample_phase_field(PhaseDistribution.uniform(), world, 1))
    E = exterior_restriction(U, LatticeBox.interval(-4, 5))
    svd = np.linalg.svd(E.dense(), compute_uv=False).max()
    assert svd <= 1 + 1e-12
    assert E.operator_norm() <= svd + 1e-12
    E.validate()


def test_decoupled_plus_boundary_is_world():
    p = ModelParams(0.5)
    U = anderson_operator(p, sample_phase_field(PhaseDistribution.uniform(), LatticeBox.interval(-20, 21), 2))
    dec, inside = decoupled_operator(U, 2)
    T = boundary_operator(U, 2)
    assert np.allclose((dec + T).toarray(), U.dense(), atol=1e-15)
    # the coupling is supported near the cube boundary
    rows = np.flatnonzero(np.abs(T.toarray()).sum(1) > 0)
    sites = U.box.sites()[rows, 0]
    assert sites.min() >= -8 and sites.max() <= 9
    with pytest.raises(ValueError):
        decoupled_operator(U, 10)


@given(st.integers(0, 10**6), st.sampled_from([4, 6, 8, 10]))
@settings(max_examples=25, deadline=None)
def test_rank_one_splitting_phase(seed, cut):
    p = ModelParams(0.45)
    ph = sample_phase_field(PhaseDistribution.uniform(0, 1), LatticeBox.interval(0, 15), seed)
    sd = splitting_data(p, cut, ph)
    assert np.exp(1j * sd.beta) == pytest.approx(np.exp(-1j * p.lambda0), abs=1e-12)
    # U^{L0} = e^{i beta |f^><f^|} (U^{L1} + U^{L2}) with f = D psi
    U0 = anderson_operator(p, ph).dense()
    U12 = split_operator(p, ph.theta, ph.box, cut)
    f = np.exp(-1j * ph.theta) * sd.psi
    assert np.allclose(rank_one_rotation(f, sd.beta) @ U12, U0, atol=1e-13)


def test_rank_one_phase_generic():
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6)))
    f = rng.normal(size=6) + 1j * rng.normal(size=6)
    f /= np.linalg.norm(f)
    beta = 0.8
    V = rank_one_rotation(f, beta) @ Q
    g = (V - Q).conj().T @ f
    assert rank_one_phase(Q, f, g) == pytest.approx(beta)
    with pytest.raises(ValueError):
        rank_one_phase(Q, f, 3 * g)


def test_csv_roundtrip(tmp_path):
    p = ModelParams(0.5)
    U = anderson_operator(p, sample_phase_field(PhaseDistribution.uniform(), LatticeBox.neumann(4), 0))
    U.dump_csv(tmp_path / "u.csv")
    assert np.array_equal(load_csv(tmp_path / "u.csv", U.size), U.dense())


def test_validate_rejects_non_unitary():
    box = LatticeBox.interval(0, 3)
    with pytest.raises(ValueError):
        BandedUnitary(box, 2 * np.eye(4)).validate()
    M = np.eye(4, dtype=complex)
    M[[0, 3]] = M[[3, 0]]
    with pytest.raises(ValueError, match="band"):
        BandedUnitary(box, M).validate()


def test_build_U_box_mismatch():
    p = ModelParams(0.5)
    with pytest.raises(ValueError):
        build_U(PhaseField.constant(LatticeBox.interval(0, 5)), build_S_interval(p, (0, 7)))

"""Deterministic and random banded unitaries on lattice boxes.

The free one-dimensional operator is ``S_0 = U_e U_o`` where ``U_e`` is made of
``B_1`` blocks on the pairs ``(2k, 2k+1)`` and ``U_o`` of ``B_2`` blocks on the
pairs ``(2k+1, 2k+2)``. On a finite interval each endpoint is left unpaired in
exactly one of the two factors and receives a ``1x1`` block ``e^{i eta}``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .model import BoundarySpec, LatticeBox, ModelParams, PhaseField

DENSE_LIMIT = 4096
UNITARY_TOL = 1e-12
VALIDATE_LIMIT = 1024


@dataclass(frozen=True)
class BandedUnitary:
    """Finite complex matrix with lattice geometry.

    ``support`` lists the box indices the matrix acts on (``None`` means the
    whole box); it is used for exterior restrictions. ``params`` and ``theta``
    are carried along so restrictions can be rebuilt from the same data.
    """

    box: LatticeBox
    entries: object
    kind: str = "unitary"
    band_width: int = 2
    params: ModelParams | None = None
    theta: np.ndarray | None = None
    bc: BoundarySpec | None = None
    support: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.entries)

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.entries.toarray()
        return self.entries

    def sparse(self):
        return sp.csr_array(self.entries)

    def __matmul__(self, x):
        return self.entries @ x

    def sites(self) -> np.ndarray:
        s = self.box.sites()
        return s if self.support is None else s[self.support]

    def unitarity_defect(self) -> float:
        M = self.entries
        prod = (M.conj().T @ M)
        if sp.issparse(prod):
            prod = prod.toarray()
        return float(np.max(np.abs(prod - np.eye(self.size))))

    def operator_norm(self, iterations: int = 20, seed: int = 0) -> float:
        """Power iteration on ``M^* M``."""
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(self.size) + 1j * rng.standard_normal(self.size)
        x /= np.linalg.norm(x)
        M = self.entries
        est = 0.0
        for _ in range(iterations):
            y = M.conj().T @ (M @ x)
            est = np.linalg.norm(y)
            if est == 0:
                return 0.0
            x = y / est
        return float(np.sqrt(est))

    def band_defect(self) -> float:
        """Largest modulus of an entry with ``|j - k|_inf > band_width``."""
        M = sp.coo_array(self.entries)
        s = self.sites()
        far = np.max(np.abs(s[M.row] - s[M.col]), axis=1) > self.band_width
        return float(np.max(np.abs(M.data[far]), initial=0.0))

    def validate(self) -> "BandedUnitary":
        if self.kind == "unitary":
            defect = self.unitarity_defect()
            if defect >= UNITARY_TOL:
                raise ValueError(f"BandedUnitary: not unitary, max|U*U - I| = {defect:.3e}")
        elif self.kind == "contraction":
            norm = self.operator_norm()
            if norm > 1 + UNITARY_TOL:
                raise ValueError(f"BandedUnitary: norm {norm} exceeds 1")
        if self.band_defect() > 0:
            raise ValueError("BandedUnitary: entries outside the band")
        return self

    def dump_csv(self, path) -> None:
        """Write nonzero entries as ``row,col,re,im``."""
        M = sp.coo_array(self.entries)
        order = np.lexsort((M.col, M.row))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "re", "im"])
            for i in order:
                v = M.data[i]
                w.writerow([int(M.row[i]), int(M.col[i]), repr(float(v.real)), repr(float(v.imag))])


def load_csv(path, size: int) -> np.ndarray:
    M = np.zeros((size, size), dtype=complex)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            M[int(row["row"]), int(row["col"])] = float(row["re"]) + 1j * float(row["im"])
    return M


def _store(M, volume: int):
    M = sp.csr_array(M)
    M.eliminate_zeros()
    return M.toarray() if volume <= DENSE_LIMIT else M


def _interval_factors(params: ModelParams, a: int, b: int, eta_a: float, eta_b: float):
    n = b - a + 1
    r, t = params.r, params.t
    B1 = np.array([[r, t], [-t, r]], dtype=complex)
    B2 = np.array([[r, -t], [t, r]], dtype=complex)
    Ue = np.zeros((n, n), dtype=complex)
    Uo = np.zeros((n, n), dtype=complex)
    for k in range(a, b + 1):
        i = k - a
        if k % 2 == 0 and k + 1 <= b:
            Ue[i:i + 2, i:i + 2] = B1
        if k % 2 == 1 and k + 1 <= b:
            Uo[i:i + 2, i:i + 2] = B2
    # the unpaired endpoint of each factor carries the boundary phase
    if a % 2 == 1:
        Ue[0, 0] = np.exp(1j * eta_a)
    else:
        Uo[0, 0] = np.exp(1j * eta_a)
    if b % 2 == 0:
        Ue[-1, -1] = np.exp(1j * eta_b)
    else:
        Uo[-1, -1] = np.exp(1j * eta_b)
    return Ue, Uo


def interval_factors(params: ModelParams, interval, bc: BoundarySpec | None = None):
    """The two block-diagonal factors ``(U_e, U_o)`` of ``S`` on an interval."""
    a, b = interval
    eta_a, eta_b = (bc or BoundarySpec.eta(0.0)).etas(params)
    return _interval_factors(params, int(a), int(b), eta_a, eta_b)


def _check_interval(interval, bc: BoundarySpec):
    a, b = (int(v) for v in interval)
    if b - a + 1 < 3:
        raise ValueError(f"interval [{a}, {b}] too short (need at least 3 sites)")
    for end, cond in ((a, bc.left), (b, bc.right)):
        if isinstance(cond, str):
            want = 0 if end == a else 1
            if end % 2 != want:
                raise ValueError(
                    f"Neumann condition needs an even left and odd right endpoint, got [{a}, {b}]"
                )
    return a, b


def build_S_interval(params: ModelParams, interval, bc: BoundarySpec | None = None) -> BandedUnitary:
    """``S_{eta_a, eta_b}^{[a,b]} = U_e U_o`` with boundary phases from ``bc``."""
    bc = bc or BoundarySpec.eta(0.0)
    a, b = _check_interval(interval, bc)
    Ue, Uo = interval_factors(params, (a, b), bc)
    box = LatticeBox.interval(a, b)
    S = BandedUnitary(box, _store(Ue @ Uo, box.volume), params=params, bc=bc)
    return S.validate() if box.volume <= VALIDATE_LIMIT else S


def build_S_tensor(params: ModelParams, box: LatticeBox, bc: BoundarySpec | None = None) -> BandedUnitary:
    """Tensor product of the one-dimensional restrictions, one per axis."""
    bc = bc or BoundarySpec.neumann()
    if box.d != params.d:
        raise ValueError(f"box has dimension {box.d} but params.d = {params.d}")
    if not box.is_neumann_compatible():
        raise ValueError(f"box {box.intervals} is not Neumann compatible")
    M = None
    for a, b in box.intervals:
        f = sp.csr_array(build_S_interval(params, (a, b), bc).entries)
        M = f if M is None else sp.kron(M, f, format="csr")
    S = BandedUnitary(box, _store(M, box.volume), params=params, bc=bc)
    return S.validate() if box.volume <= VALIDATE_LIMIT else S


def build_U(phases: PhaseField, S: BandedUnitary) -> BandedUnitary:
    """``U = D S`` with ``D e_k = e^{-i theta_k} e_k``."""
    if phases.box != S.box:
        raise ValueError("build_U: phase field and operator live on different boxes")
    d = np.exp(-1j * phases.theta)
    if S.is_sparse:
        M = sp.csr_array(sp.diags_array(d) @ S.entries)
    else:
        M = d[:, None] * S.entries
    return replace(S, entries=M, theta=phases.theta)


def anderson_operator(params: ModelParams, phases: PhaseField, bc: BoundarySpec | None = None) -> BandedUnitary:
    """Convenience: ``D_omega S_N^Lambda`` on the box of ``phases``."""
    return build_U(phases, build_S_tensor(params, phases.box, bc))


def _inner_indices(box: LatticeBox, inner: LatticeBox) -> np.ndarray:
    s = box.sites()
    lo, hi = inner.lower, np.array([b for _, b in inner.intervals])
    return np.flatnonzero(np.all((s >= lo) & (s <= hi), axis=1))


def exterior_restriction(U_world: BandedUnitary, inner: LatticeBox | None) -> BandedUnitary:
    """``P U P`` on the sites of the world box outside ``inner``; a contraction."""
    box = U_world.box
    if inner is None:
        keep = np.arange(box.volume)
    else:
        if not box.contains_box(inner):
            raise ValueError("exterior_restriction: inner box not contained in world box")
        keep = np.setdiff1d(np.arange(box.volume), _inner_indices(box, inner))
    M = sp.csr_array(U_world.entries)[keep][:, keep]
    return BandedUnitary(box, _store(M, box.volume), kind="contraction",
                         params=U_world.params, theta=U_world.theta, bc=U_world.bc,
                         support=keep)


def decoupled_operator(U_world: BandedUnitary, L: int, bc: BoundarySpec | None = None):
    """``U^{Lambda_L} (+) U^{Lambda_L^c}`` as a matrix on the world box.

    ``U^{Lambda_L} = D S_N^{Lambda_L}`` on the cube ``[-2L, 2L+1]^d`` and the
    exterior part is the plain restriction of ``U_world``.
    """
    if U_world.params is None or U_world.theta is None:
        raise ValueError("decoupled_operator: world operator must carry params and phases")
    box = U_world.box
    cube = LatticeBox.cube(L, box.d)
    if not box.contains_box(cube.shifted(0)) or not box.contains_box(
        LatticeBox.cube(L + 1, box.d)
    ):
        raise ValueError("decoupled_operator: world box leaves no margin around Lambda_L")
    inside = _inner_indices(box, cube)
    outside = np.setdiff1d(np.arange(box.volume), inside)
    phases = PhaseField(cube, np.asarray(U_world.theta)[inside])
    U_in = anderson_operator(U_world.params, phases, bc)
    M = sp.lil_array((box.volume, box.volume), dtype=complex)
    W = sp.csr_array(U_world.entries)
    M[np.ix_(inside, inside)] = U_in.entries
    M[np.ix_(outside, outside)] = W[outside][:, outside].toarray()
    return sp.csr_array(M), inside


def boundary_operator(U_world: BandedUnitary, L: int, bc: BoundarySpec | None = None):
    """``T^{(L)} = U - (U^{Lambda_L} (+) U^{Lambda_L^c})`` on the world box (sparse)."""
    if any(a > -2 * L - 4 or b < 2 * L + 5 for a, b in U_world.box.intervals):
        raise ValueError("boundary_operator: world box needs a margin of 2 cells around Lambda_L")
    decoupled, _ = decoupled_operator(U_world, L, bc)
    T = sp.csr_array(U_world.entries) - decoupled
    T.eliminate_zeros()
    return T


@dataclass(frozen=True)
class SplittingData:
    psi: np.ndarray
    phi: np.ndarray
    beta: float


def splitting_vectors(params: ModelParams, box: LatticeBox, cut: int):
    """Vectors ``psi``, ``phi`` with ``S_N^{L0} = S_N^{L1} (+) S_N^{L2} + |psi><phi|``."""
    (a, b), = box.intervals
    if cut % 2 or cut - a < 4 or b - cut + 1 < 4:
        raise ValueError(f"cut {cut} must be even with at least 4 sites on each side of [{a}, {b}]")
    r, t = params.r, params.t
    psi = np.zeros(box.volume, dtype=complex)
    phi = np.zeros(box.volume, dtype=complex)
    i = cut - a
    psi[i - 2:i + 2] = [-t, -r, -1j * r, 1j * t]
    phi[i - 1:i + 1] = [-1j * t, t]
    return psi, phi


def split_operator(params: ModelParams, theta, box: LatticeBox, cut: int, axis: int = 0,
                   bc: BoundarySpec | None = None) -> np.ndarray:
    """Dense ``U^{L1} (+) U^{L2}`` for a cut perpendicular to ``axis`` at ``cut``."""
    iv = list(box.intervals)
    a, b = iv[axis]
    left = LatticeBox(tuple(iv[:axis] + [(a, cut - 1)] + iv[axis + 1:]))
    right = LatticeBox(tuple(iv[:axis] + [(cut, b)] + iv[axis + 1:]))
    out = np.zeros((box.volume, box.volume), dtype=complex)
    theta = np.asarray(theta)
    for part in (left, right):
        idx = _inner_indices(box, part)
        Up = anderson_operator(params, PhaseField(part, theta[idx]), bc)
        out[np.ix_(idx, idx)] = Up.dense()
    return out


def splitting_data(params: ModelParams, cut: int, phases: PhaseField) -> SplittingData:
    """Rank-one splitting of a 1-d Neumann box at the even site ``cut``."""
    box = phases.box
    if box.d != 1:
        raise ValueError("splitting_data is one-dimensional; use split_operator for d > 1")
    psi, phi = splitting_vectors(params, box, cut)
    U12 = split_operator(params, phases.theta, box, cut)
    Dpsi = np.exp(-1j * phases.theta) * psi
    mu = 1 + np.vdot(U12 @ phi, Dpsi)
    return SplittingData(psi, phi, float(np.angle(mu)))


def rank_one_phase(U, f, g, tol: float = 1e-10) -> float:
    """Angle ``beta`` with ``U + |f><g| = e^{i beta |f^><f^|} U``."""
    U = U.dense() if isinstance(U, BandedUnitary) else np.asarray(U)
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    V = U + np.outer(f, g.conj())
    defect = np.max(np.abs(V.conj().T @ V - np.eye(len(f))))
    if defect > tol:
        raise ValueError(f"rank_one_phase: U + |f><g| is not unitary (defect {defect:.2e})")
    mu = 1 + np.vdot(U @ g, f)
    beta = float(np.angle(mu))
    if beta == -np.pi:
        beta = np.pi
    return beta


def rank_one_rotation(f, beta: float) -> np.ndarray:
    """``e^{i beta |f^><f^|} = I + (e^{i beta} - 1)|f^><f^|``."""
    fh = np.asarray(f, dtype=complex) / np.linalg.norm(f)
    return np.eye(len(fh)) + (np.exp(1j * beta) - 1) * np.outer(fh, fh.conj())

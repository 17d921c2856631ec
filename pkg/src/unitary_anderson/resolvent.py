"""Resolvents, Green's functions and their exact and asymptotic identities."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lattice import DENSE_LIMIT, BandedUnitary, boundary_operator, decoupled_operator
from .model import LatticeBox
from .stats import DecayFit, fit_log_linear

SOLVE_TOL = 1e-10


class ResolventError(ArithmeticError):
    """Linear solve failed or ``z`` is numerically on the spectrum."""


def _matrix(U):
    return U.entries if isinstance(U, BandedUnitary) else U


def _index(U, site) -> int:
    if isinstance(U, BandedUnitary):
        return U.box.index(np.atleast_1d(site))
    return int(site)


def _check_z(U, z):
    if isinstance(U, BandedUnitary) and U.kind == "unitary" and abs(abs(z) - 1.0) < 1e-14:
        raise ResolventError(f"z = {z} lies on the unit circle")


def resolvent_columns(U, z: complex, cols) -> np.ndarray:
    """Columns ``(U - z)^{-1} e_l`` for the given column indices, residual-checked."""
    _check_z(U, z)
    M = _matrix(U)
    n = M.shape[0]
    cols = np.atleast_1d(np.asarray(cols, dtype=int))
    E = np.zeros((n, len(cols)), dtype=complex)
    E[cols, np.arange(len(cols))] = 1.0
    if sp.issparse(M):
        A = sp.csc_array(M - z * sp.eye_array(n, dtype=complex, format="csc"))
        X = spla.splu(A).solve(E)
    else:
        A = M - z * np.eye(n)
        try:
            X = sla.solve(A, E, check_finite=False)
        except sla.LinAlgError as exc:
            raise ResolventError(f"singular system at z = {z}") from exc
    res = np.max(np.linalg.norm(A @ X - E, axis=0))
    if not np.isfinite(res) or res > SOLVE_TOL:
        raise ResolventError(f"resolvent solve at z = {z} has residual {res:.2e}")
    return X


def resolvent(U, z: complex) -> np.ndarray:
    """Dense ``(U - z)^{-1}``."""
    M = _matrix(U)
    return resolvent_columns(U, z, np.arange(M.shape[0]))


def green(U, z: complex, k, l) -> complex:
    """``G(k, l; z) = <e_k | (U - z)^{-1} e_l>``; ``k, l`` are lattice sites."""
    X = resolvent_columns(U, z, [_index(U, l)])
    return complex(X[_index(U, k), 0])


def modified_green(U, z: complex, k, l) -> complex:
    """``<e_k | (U + z)(U - z)^{-1} e_l> = delta_kl + 2z G(k, l; z)``."""
    if z == 0:
        raise ValueError("modified_green: z must be nonzero")
    ik, il = _index(U, k), _index(U, l)
    x = resolvent_columns(U, z, [il])[:, 0]
    y = _matrix(U) @ x + z * x
    return complex(y[ik])


def poisson_functional(U, f, r: float, quadrature_n: int) -> np.ndarray:
    """``(1-r^2)/2pi int (U - r e^{it})^{-1} (U^{-1} - r e^{-it})^{-1} f(e^{it}) dt`` by the trapezoid rule.

    ``f`` is a callable on the unit circle or its values on the grid
    ``t_j = 2 pi j / quadrature_n``.
    """
    if not 0.0 < r < 1.0:
        raise ValueError("poisson_functional: r must lie in (0, 1)")
    if quadrature_n < 64:
        raise ValueError("poisson_functional: quadrature_n must be >= 64")
    M = np.asarray(U.dense() if isinstance(U, BandedUnitary) else U, dtype=complex)
    n = M.shape[0]
    ts = 2 * np.pi * np.arange(quadrature_n) / quadrature_n
    w = np.exp(1j * ts)
    fv = f(w) if callable(f) else np.asarray(f, dtype=complex)
    if fv.shape != (quadrature_n,):
        raise ValueError("poisson_functional: f samples do not match the grid")
    Minv = M.conj().T
    I = np.eye(n)
    out = np.zeros((n, n), dtype=complex)
    for start in range(0, quadrature_n, 512):
        sl = slice(start, start + 512)
        A = np.linalg.inv(M[None] - r * w[sl, None, None] * I)
        B = np.linalg.inv(Minv[None] - r * w[sl, None, None].conj() * I)
        out += np.einsum("q,qij,qjk->ik", fv[sl], A, B)
    return (1 - r * r) / quadrature_n * out


def spectral_function(U, f) -> np.ndarray:
    """``f(U)`` by eigendecomposition (``U`` normal)."""
    M = np.asarray(U.dense() if isinstance(U, BandedUnitary) else U, dtype=complex)
    T, Z = sla.schur(M, output="complex")
    return (Z * f(np.diag(T))) @ Z.conj().T


def cell_indices(box: LatticeBox, x) -> np.ndarray:
    """Box indices of the sites of the cell ``C_x``."""
    x = np.broadcast_to(np.asarray(x, dtype=int), (box.d,))
    return np.flatnonzero(np.all(box.cell_index() == x, axis=1))


@dataclass(frozen=True)
class GeometricResidual:
    identity: float
    vanishing: float
    first_expansion: float
    double_expansion: float

    @property
    def max(self) -> float:
        return max(self.identity, self.vanishing, self.first_expansion, self.double_expansion)


def geometric_resolvent_check(U_world: BandedUnitary, L: int, y, z: complex, bc=None) -> GeometricResidual:
    """Residuals of the geometric resolvent identity and of its two-step expansion."""
    y = np.broadcast_to(np.asarray(y, dtype=int), (U_world.box.d,))
    if np.max(np.abs(y)) < L + 2:
        raise ValueError(f"geometric_resolvent_check: need |y| >= L+2, got |y| = {np.max(np.abs(y))}")
    for a, b in U_world.box.intervals:
        if a > -2 * (L + 4) or b < 2 * (L + 4) + 1:
            raise ValueError("geometric_resolvent_check: world box needs a margin of L+4 cells")
    if not np.all([a // 2 <= c <= b // 2 for c, (a, b) in zip(y, U_world.box.intervals)]):
        raise ValueError("geometric_resolvent_check: cell y outside the world box")
    if U_world.box.volume > DENSE_LIMIT:
        raise ValueError("geometric_resolvent_check: world box too large for dense resolvents")
    n = U_world.box.volume
    I = np.eye(n)
    W = U_world.dense()
    D0, _ = decoupled_operator(U_world, L, bc)
    D1, _ = decoupled_operator(U_world, L + 1, bc)
    T0 = boundary_operator(U_world, L, bc).toarray()
    T1 = boundary_operator(U_world, L + 1, bc).toarray()
    G = np.linalg.solve(W - z * I, I)
    G0 = np.linalg.solve(D0.toarray() - z * I, I)
    G1 = np.linalg.solve(D1.toarray() - z * I, I)
    c0 = cell_indices(U_world.box, 0)
    cy = cell_indices(U_world.box, y)
    blk = np.ix_(c0, cy)
    rhs = (G0 @ T0 @ G @ T1 @ G1)[blk]
    first = G0 - G0 @ T0 @ G
    double = G0 - G0 @ T0 @ G1 + G0 @ T0 @ G @ T1 @ G1
    return GeometricResidual(
        identity=float(np.max(np.abs(G[blk] - rhs))),
        vanishing=float(np.max(np.abs(G0[blk]))),
        first_expansion=float(np.max(np.abs(G - first))),
        double_expansion=float(np.max(np.abs(G - double))),
    )


def geometric_resolvent_residual(U_world: BandedUnitary, L: int, y, z: complex, bc=None) -> float:
    """``max |chi_0 G chi_y - chi_0 G^(L) T^(L) G T^(L+1) G^(L+1) chi_y|``."""
    return geometric_resolvent_check(U_world, L, y, z, bc).identity


def spectrum_distance(U, z: complex) -> float:
    M = np.asarray(U.dense() if isinstance(U, BandedUnitary) else U)
    if M.shape[0] > DENSE_LIMIT:
        raise ValueError("spectrum_distance: box too large for a full eigendecomposition")
    return float(np.min(np.abs(np.linalg.eigvals(M) - z)))


@dataclass(frozen=True)
class DecayProfile:
    """Shell values with a log-linear fit ``value ~ prefactor * exp(-rate * dist)``."""

    distances: np.ndarray
    values: np.ndarray
    fitted_rate: float
    fitted_prefactor: float
    r_squared: float
    rate_stderr: float = float("nan")
    stderr: np.ndarray | None = None
    meta: dict | None = None

    def __post_init__(self):
        d = np.asarray(self.distances)
        if np.any(np.diff(d) <= 0):
            raise ValueError("DecayProfile: distances must be strictly increasing")
        if np.any(np.asarray(self.values) < 0):
            raise ValueError("DecayProfile: values must be nonnegative")

    @classmethod
    def from_values(cls, distances, values, stderr=None, mask=None, meta=None) -> "DecayProfile":
        fit = fit_log_linear(distances, values, mask=mask)
        return cls(np.asarray(distances), np.asarray(values, dtype=float), fit.rate, fit.prefactor,
                   fit.r_squared, fit.rate_stderr, None if stderr is None else np.asarray(stderr), meta)

    @property
    def fit(self) -> DecayFit:
        return DecayFit(self.fitted_rate, self.fitted_prefactor, self.r_squared, self.rate_stderr,
                        len(self.distances))

    def rows(self):
        for n, v in zip(self.distances, self.values):
            yield [int(n), repr(float(v)), repr(float(self.fitted_rate)), repr(float(self.fitted_prefactor)),
                   repr(float(self.r_squared))]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["dist", "value", "fitted_rate", "fitted_prefactor", "r_squared"])
            w.writerows(self.rows())


def shell_distance(box: LatticeBox, origin) -> np.ndarray:
    """``|j - origin|_inf`` for every site ``j`` of the box."""
    origin = np.broadcast_to(np.asarray(origin, dtype=int), (box.d,))
    return np.max(np.abs(box.sites() - origin), axis=1)


@dataclass(frozen=True)
class CombesThomasResult:
    profile: DecayProfile
    dist: float
    B_fit: float
    B_envelope: float

    @property
    def B(self) -> float:
        """Largest decay constant that is both fitted and admissible for the envelope."""
        return min(self.B_fit, self.B_envelope)

    def envelope(self, B: float | None = None) -> np.ndarray:
        B = self.B if B is None else B
        return 2.0 / self.dist * np.exp(-self.dist * self.profile.distances * B)

    def under_envelope(self, B: float | None = None, rtol: float = 1e-12) -> bool:
        return bool(np.all(self.profile.values <= self.envelope(B) * (1 + rtol)))


def combes_thomas_profile(U: BandedUnitary, z: complex, origin, max_dist: int) -> CombesThomasResult:
    """Shell maxima of ``|G(j, origin; z)|`` against ``(2/dist) exp(-dist * n * B)``.

    ``B_fit`` is the least-squares rate divided by ``dist(z, sigma(U))``;
    ``B_envelope`` is the largest ``B`` for which every shell value lies under
    the envelope.
    """
    dist = spectrum_distance(U, z)
    if dist < 1e-10:
        raise ResolventError(f"z = {z} lies in the spectrum (distance {dist:.1e})")
    col = resolvent_columns(U, z, [U.box.index(origin)])[:, 0]
    shells = shell_distance(U.box, origin)
    ns = np.arange(max_dist + 1)
    if max_dist > shells.max():
        raise ValueError("combes_thomas_profile: max_dist exceeds the box")
    vals = np.array([np.max(np.abs(col[shells == n])) for n in ns])
    profile = DecayProfile.from_values(ns, vals, meta={"dist": dist})
    B_fit = profile.fitted_rate / dist
    with np.errstate(divide="ignore"):
        bounds = -np.log(vals[1:] * dist / 2.0) / (ns[1:] * dist)
    B_env = float(np.min(bounds)) if len(bounds) else np.inf
    return CombesThomasResult(profile, dist, B_fit, B_env)

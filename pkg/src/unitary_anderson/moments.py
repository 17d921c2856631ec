"""Monte Carlo estimators for fractional moments and dynamical quantities."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy import integrate

from .lattice import BandedUnitary, build_S_interval, build_S_tensor, build_U
from .model import BoundarySpec, LatticeBox, ModelParams, PhaseDistribution, PhaseField, sample_phase_field
from .resolvent import DecayProfile, ResolventError, resolvent_columns
from .stats import MomentEstimate, fit_log_linear, map_samples, mean_stderr, sample_int_seed


class TruncationWarning(UserWarning):
    """The finite box can be reached from the sites of interest within the time horizon."""


def free_operator(params: ModelParams, box: LatticeBox, bc: BoundarySpec | None = None) -> BandedUnitary:
    """``S_N`` on Neumann-compatible boxes, else the ``eta = 0`` restriction of a 1-d interval."""
    if box.d != params.d:
        params = ModelParams(params.t, box.d)
    if box.is_neumann_compatible():
        return build_S_tensor(params, box, bc)
    if box.d == 1:
        return build_S_interval(params, box.intervals[0], bc or BoundarySpec.eta(0.0))
    raise ValueError(f"no boundary construction for box {box.intervals}")


def _field(dist, box, seed, tag, i):
    return sample_phase_field(dist, box, sample_int_seed(seed, tag, i))


# ---------------------------------------------------------------- fractional moments

def _green_columns_chunk(payload, idx):
    S, dist, seed, tag, z_list, l_index, rows = payload
    out = np.full((len(idx), len(z_list), len(rows)), np.nan, dtype=complex)
    for n, i in enumerate(idx):
        U = build_U(_field(dist, S.box, seed, tag, i), S)
        for m, z in enumerate(z_list):
            try:
                out[n, m] = resolvent_columns(U, z, [l_index])[rows, 0]
            except ResolventError:
                pass
    return out


def green_samples(S: BandedUnitary, dist: PhaseDistribution, z_list, l, rows, samples: int, seed: int,
                  tag: str, workers: int = 1) -> np.ndarray:
    """``G(k, l; z)`` for every sample, every ``z`` and every row index ``k`` (``nan`` on failures).

    All ``z`` share the same phase realisations.
    """
    payload = (S, dist, int(seed), tag, [complex(z) for z in z_list], S.box.index(l), np.asarray(rows))
    return map_samples(_green_columns_chunk, payload, samples, workers)


def _summarise(vals, quantity, s, z):
    ok = np.isfinite(vals)
    if not ok.any():
        raise ResolventError(f"{quantity}: every sample failed")
    m, se = mean_stderr(vals[ok])
    return MomentEstimate(quantity, float(m), float(se), int(ok.sum()), s, z)


def fractional_moment(params: ModelParams, dist: PhaseDistribution, box: LatticeBox, z: complex, k, l,
                      s: float, samples: int, seed: int, workers: int = 1, bc=None) -> MomentEstimate:
    """Monte Carlo mean of ``|G(k, l; z)|^s``; failed solves are dropped from the sample count."""
    if not 0 < s < 1:
        raise ValueError("fractional_moment: s must lie in (0, 1)")
    if abs(z) == 0 or abs(abs(z) - 1) < 1e-14:
        raise ValueError("fractional_moment: need |z| not in {0, 1}")
    S = free_operator(params, box, bc)
    G = green_samples(S, dist, [z], l, [box.index(k)], samples, seed, "fractional-moment", workers)
    return _summarise(np.abs(G[:, 0, 0]) ** s, "fractional_moment", s, complex(z))


@dataclass(frozen=True)
class StabilityReport:
    """Fractional moments along ``|z| -> 1`` from common realisations."""

    radii: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    increments: np.ndarray
    increment_stderr: np.ndarray
    half_values: np.ndarray
    half_stderr: np.ndarray

    @property
    def decelerating(self) -> bool:
        """Each increment is at most half of the previous positive one, up to 3 stderr."""
        inc, se = self.increments, self.increment_stderr
        return bool(all(inc[j] <= 0.5 * max(inc[j - 1], 0.0) + 3 * se[j] for j in range(1, len(inc))))

    @property
    def sample_stable(self) -> bool:
        """Estimates from the first half of the samples agree with the full estimate."""
        joint = np.sqrt(self.stderr**2 + self.half_stderr**2)
        return bool(np.all(np.abs(self.values - self.half_values) <= 3 * joint))

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.values))) and self.decelerating and self.sample_stable


def moment_stability(params: ModelParams, dist: PhaseDistribution, box: LatticeBox, arg: float, radii, k, l,
                     s: float, samples: int, seed: int, workers: int = 1) -> StabilityReport:
    """Fractional moments at ``z = rho e^{i arg}`` for ``rho`` in ``radii`` with common random numbers."""
    radii = np.asarray(radii, dtype=float)
    S = free_operator(params, box)
    G = green_samples(S, dist, radii * np.exp(1j * arg), l, [box.index(k)], samples, seed,
                      "moment-stability", workers)
    X = np.abs(G[:, :, 0]) ** s
    X = X[np.all(np.isfinite(X), axis=1)]
    m, se = mean_stderr(X)
    h, hse = mean_stderr(X[: len(X) // 2])
    inc, ise = [], []
    for j in range(1, len(radii)):
        a, b = mean_stderr(X[:, j] - X[:, j - 1])
        inc.append(a)
        ise.append(b)
    return StabilityReport(radii, m, se, np.array(inc), np.array(ise), h, hse)


def decay_geometry(d: int, max_dist: int, buffer: int = 20) -> LatticeBox:
    """Cube ``[-2M, 2M+1]^d`` holding ``l = 0`` and ``k = n e_1`` for ``n <= max_dist`` with a buffer."""
    M = int(math.ceil((max_dist + buffer) / 2))
    return LatticeBox.cube(M, d)


def decay_experiment(params: ModelParams, dist: PhaseDistribution, d: int, z: complex, s: float, distance_list,
                     samples: int, seed: int, workers: int = 1, buffer: int | None = None) -> DecayProfile:
    """``E|G(k, 0; z)|^s`` for ``k = n e_1`` over the distances, with a log-linear fit.

    Distances where the estimate is below ten standard errors are excluded from
    the fit.
    """
    distances = np.asarray(distance_list, dtype=int)
    if buffer is None:
        buffer = 20 if d == 1 else 4
    box = decay_geometry(d, int(distances.max()), buffer)
    origin = np.zeros(d, dtype=int)
    rows = []
    for n in distances:
        site = origin.copy()
        site[0] = n
        rows.append(box.index(site))
    S = free_operator(ModelParams(params.t, d), box)
    G = green_samples(S, dist, [z], origin, rows, samples, seed, "fractional-decay", workers)[:, 0, :]
    X = np.abs(G) ** s
    X = X[np.all(np.isfinite(X), axis=1)]
    m, se = mean_stderr(X)
    meta = {"t": params.t, "d": d, "z": complex(z), "s": s, "samples": len(X), "box": box.intervals}
    return DecayProfile.from_values(distances, m, se, mask=m >= 10 * se, meta=meta)


@dataclass(frozen=True)
class SecondMomentRatio:
    z: complex
    lhs: float
    rhs: float
    ratio: float
    stderr: float
    samples: int


def second_moment_ratio(params: ModelParams, dist: PhaseDistribution, box: LatticeBox, z: complex, k, l,
                        s: float, samples: int, seed: int, workers: int = 1) -> SecondMomentRatio:
    """``E((1-|z|^2)|G(k,l;z)|^2) / sum_{|m-k| <= 4} E|G(m,l;z)|^s`` with a delta-method stderr."""
    if abs(z) >= 1:
        raise ValueError("second_moment_ratio: need |z| < 1")
    k = np.broadcast_to(np.asarray(k, dtype=int), (box.d,))
    sites = box.sites()
    near = np.flatnonzero(np.max(np.abs(sites - k), axis=1) <= 4)
    ik = box.index(k)
    S = free_operator(params, box)
    G = green_samples(S, dist, [z], l, np.concatenate([[ik], near]), samples, seed, "second-moment",
                      workers)[:, 0, :]
    G = G[np.all(np.isfinite(G), axis=1)]
    a = (1 - abs(z) ** 2) * np.abs(G[:, 0]) ** 2
    b = np.sum(np.abs(G[:, 1:]) ** s, axis=1)
    ma, _ = mean_stderr(a)
    mb, _ = mean_stderr(b)
    q = ma / mb
    infl = (a - q * b) / mb
    _, se = mean_stderr(infl)
    return SecondMomentRatio(complex(z), float(ma), float(mb), float(q), float(se), len(a))


# ---------------------------------------------------------------- two-phase oracle

def _green_two_phase(params, phases, sites, z, k, l, grid_i, grid_j, bc=None):
    S = free_operator(params, phases.box, bc).dense()
    box = phases.box
    ii, jj = (box.index(x) for x in sites)
    ik, il = box.index(k), box.index(l)
    th = np.array(phases.theta)
    A, B = np.meshgrid(grid_i, grid_j, indexing="ij")
    A, B = A.ravel(), B.ravel()
    Th = np.broadcast_to(th, (len(A), len(th))).copy()
    Th[:, ii] = A
    Th[:, jj] = B
    M = np.exp(-1j * Th)[:, :, None] * S[None] - z * np.eye(len(th))[None]
    e = np.zeros((len(A), len(th), 1), dtype=complex)
    e[:, il, 0] = 1
    return np.linalg.solve(M, e)[:, ik, 0]


def two_phase_quadrature(params: ModelParams, phases: PhaseField, dist: PhaseDistribution, sites, z: complex,
                         k, l, s: float, nodes: int = 96) -> float:
    """``int int |G(k,l;z)|^s dmu(theta_i) dmu(theta_j)`` with the other phases frozen (tensor Gauss-Legendre)."""
    x, w = dist.quadrature(nodes)
    G = _green_two_phase(params, phases, sites, z, k, l, x, x)
    return float(np.sum(np.outer(w, w).ravel() * np.abs(G) ** s))


def two_phase_monte_carlo(params: ModelParams, phases: PhaseField, dist: PhaseDistribution, sites, z: complex,
                          k, l, s: float, samples: int, seed: int) -> MomentEstimate:
    """Monte Carlo version of :func:`two_phase_quadrature`."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    a = dist.sample(rng, samples)
    b = dist.sample(rng, samples)
    S = free_operator(params, phases.box).dense()
    box = phases.box
    ii, jj = (box.index(x) for x in sites)
    vals = np.empty(samples)
    for n in range(samples):
        th = np.array(phases.theta)
        th[ii], th[jj] = a[n], b[n]
        vals[n] = abs(resolvent_columns(np.exp(-1j * th)[:, None] * S, z, [box.index(l)])[box.index(k), 0]) ** s
    m, se = mean_stderr(vals)
    return MomentEstimate("two_phase_moment", m, se, samples, s, complex(z))


# ---------------------------------------------------------------- dissipative 2x2 integrals

def is_dissipative(A, slack: float = 1e-12) -> bool:
    A = np.asarray(A, dtype=complex)
    im = (A - A.conj().T) / 2j
    return bool(np.min(np.linalg.eigvalsh(im)) >= -slack)


def triangular_form(A) -> np.ndarray:
    """Upper triangular matrix unitarily equivalent to ``A`` (complex Schur form)."""
    T, _ = sla.schur(np.asarray(A, dtype=complex), output="complex")
    return T


def determinant_ratio(A) -> float:
    """``|Im a11 + Im a22|^2 / |a12|^2`` of the triangular form."""
    T = triangular_form(A)
    a12 = abs(T[0, 1])
    if a12 == 0:
        return np.inf
    return float(abs(T[0, 0].imag + T[1, 1].imag) ** 2 / a12**2)


def dissipative_bound(s: float) -> float:
    """Explicit constant bounding ``int_E ||(A + x)^{-1}||^s dx`` for dissipative ``2x2`` ``A``."""
    return (2 * 2**s + 2 ** (1.5 * s)) / (1 - s)


def dissipative_integral_check(A, s: float, E=(0.0, 1.0), quadrature_n: int = 200) -> float:
    """``int_E ||(A + x I)^{-1}||^s dx`` by adaptive quadrature split at ``-Re`` of the eigenvalues."""
    A = np.asarray(A, dtype=complex)
    if A.shape != (2, 2):
        raise ValueError("dissipative_integral_check: A must be 2x2")
    if not is_dissipative(A):
        raise ValueError("dissipative_integral_check: A is not dissipative")
    lo, hi = float(E[0]), float(E[1])
    if abs(hi - lo - 1) > 1e-12:
        raise ValueError("dissipative_integral_check: E must have length 1")
    I = np.eye(2)

    def f(x):
        return np.linalg.norm(np.linalg.inv(A + x * I), 2) ** s

    pts = sorted(p for p in (-np.linalg.eigvals(A).real) if lo < p < hi)
    val, _ = integrate.quad(f, lo, hi, points=pts or None, limit=quadrature_n, epsabs=1e-10, epsrel=1e-8)
    return float(val)


def random_dissipative(rng: np.random.Generator, im_scale: float = 1.0) -> np.ndarray:
    """``H + i K`` with ``H`` hermitian and ``K`` positive semidefinite of size ``im_scale``."""
    X = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    H = (X + X.conj().T) / 2
    Y = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    K = Y @ Y.conj().T
    return H + 1j * im_scale * K / np.linalg.norm(K, 2)


# ---------------------------------------------------------------- dynamics

def _check_reach(box: LatticeBox, sites, N: int, band: int = 2) -> bool:
    """True if ``U^n`` for ``|n| <= N`` can reach the boundary from one of ``sites``."""
    reach = band * N
    for site in np.atleast_2d(sites):
        for c, (a, b) in zip(site, box.intervals):
            if c - a <= reach or b - c <= reach:
                return True
    return False


def running_sup_row(U, k_index: int, N: int) -> np.ndarray:
    """``R[m, l] = max_{|n| <= m} |<e_k|U^n e_l>|`` for ``m = 0..N``.

    Rows of ``U^n`` come from ``(U^t)^n e_k`` and rows of ``U^{-n}`` from
    ``conj(U)^n e_k``; no power of ``U`` is formed.
    """
    M = sp.csr_array(U.entries if isinstance(U, BandedUnitary) else U)
    Ut, Uc = sp.csr_array(M.T), sp.csr_array(M.conj())
    f = np.zeros(M.shape[0], dtype=complex)
    f[k_index] = 1.0
    g = f.copy()
    R = np.empty((N + 1, M.shape[0]))
    R[0] = np.abs(f)
    for m in range(1, N + 1):
        f = Ut @ f
        g = Uc @ g
        R[m] = np.maximum(R[m - 1], np.maximum(np.abs(f), np.abs(g)))
    return R


@dataclass(frozen=True)
class AmplitudeProfile:
    l_values: np.ndarray
    amplitudes: np.ndarray
    stderr: np.ndarray
    N: int
    fit: object
    truncated: bool = False
    samples: int = 0

    def to_profile(self) -> DecayProfile:
        return DecayProfile(self.l_values, self.amplitudes, self.fit.rate, self.fit.prefactor,
                            self.fit.r_squared, self.fit.rate_stderr, self.stderr)


def _amplitude_chunk(payload, idx):
    S, dist, seed, ik, cols, N = payload
    out = np.empty((len(idx), len(cols)))
    for n, i in enumerate(idx):
        U = build_U(_field(dist, S.box, seed, "dynamical", i), S)
        out[n] = running_sup_row(U, ik, N)[-1, cols]
    return out


def dynamical_profile(params: ModelParams, dist: PhaseDistribution, box: LatticeBox, k, l_list, N: int,
                      samples: int, seed: int, workers: int = 1) -> AmplitudeProfile:
    """``E sup_{|n| <= N} |<e_k|U^n e_l>|`` for ``l = k + offset e_1`` and a log-linear fit in the offset."""
    if N < 1:
        raise ValueError("dynamical_profile: need N >= 1")
    k = np.broadcast_to(np.asarray(k, dtype=int), (box.d,))
    offs = np.asarray(l_list, dtype=int)
    ls = np.array([k + o * np.eye(box.d, dtype=int)[0] for o in offs])
    truncated = _check_reach(box, np.vstack([k[None], ls]), N)
    if truncated:
        warnings.warn(f"dynamical_profile: box {box.intervals} reachable within N={N} steps",
                      TruncationWarning, stacklevel=2)
    S = free_operator(params, box)
    A = map_samples(_amplitude_chunk, (S, dist, int(seed), box.index(k), [box.index(x) for x in ls], N),
                    samples, workers)
    m, se = mean_stderr(A)
    dists = np.abs(offs)
    fit = fit_log_linear(dists, m, mask=m >= 10 * se)
    return AmplitudeProfile(offs, m, se, N, fit, truncated, samples)


def _weights(box: LatticeBox, p: float) -> np.ndarray:
    if p == 0:
        return np.ones(box.volume)
    return np.linalg.norm(box.sites(), axis=1) ** p


def position_moment_history(U, box: LatticeBox, psi, p: float, N: int) -> np.ndarray:
    """``h[m] = max_{|n| <= m} || |X|^p U^n psi ||`` for ``m = 0..N``."""
    M = sp.csr_array(U.entries if isinstance(U, BandedUnitary) else U)
    Mh = sp.csr_array(M.conj().T)
    w = _weights(box, p)
    f = np.asarray(psi, dtype=complex)
    g = f.copy()
    h = np.empty(N + 1)
    h[0] = np.linalg.norm(w * f)
    for m in range(1, N + 1):
        f = M @ f
        g = Mh @ g
        h[m] = max(h[m - 1], np.linalg.norm(w * f), np.linalg.norm(w * g))
    return h


def _position_chunk(payload, idx):
    S, dist, seed, psi, p, N = payload
    return np.stack([position_moment_history(build_U(_field(dist, S.box, seed, "position", i), S), S.box,
                                             psi, p, N) for i in idx])


def position_moment_curve(params: ModelParams, dist: PhaseDistribution | None, box: LatticeBox, psi, p: float,
                          N: int, samples: int, seed: int, workers: int = 1):
    """Mean and stderr of ``max_{|n| <= m} || |X|^p U^n psi ||`` for ``m = 0..N``.

    ``dist=None`` uses the free operator (all phases zero).
    """
    psi = np.asarray(psi, dtype=complex)
    supp = box.sites()[np.abs(psi) > 0]
    if _check_reach(box, supp, N):
        warnings.warn(f"position_moment: box {box.intervals} reachable within N={N} steps",
                      TruncationWarning, stacklevel=2)
    S = free_operator(params, box)
    if dist is None:
        h = position_moment_history(S, box, psi, p, N)
        return h, np.zeros_like(h)
    H = map_samples(_position_chunk, (S, dist, int(seed), psi, p, N), samples, workers)
    return mean_stderr(H)


def position_moment(params: ModelParams, dist: PhaseDistribution | None, box: LatticeBox, psi, p: float, N: int,
                    samples: int, seed: int, workers: int = 1) -> MomentEstimate:
    m, se = position_moment_curve(params, dist, box, psi, p, N, samples, seed, workers)
    return MomentEstimate("position_moment", float(m[-1]), float(se[-1]), max(samples, 1))


def plateau_ratio(curve, early: int | None = None) -> float:
    """Slope over the last quarter of ``curve`` divided by the slope over its first ``early`` steps."""
    c = np.asarray(curve, dtype=float)
    n = len(c)
    early = early or max(2, n // 20)
    s0 = (c[early] - c[0]) / early
    q = np.arange(3 * n // 4, n)
    s1 = np.polyfit(q, c[q], 1)[0]
    return float(s1 / s0) if s0 > 0 else np.inf


def trajectory_diagnostic(params: ModelParams, dist: PhaseDistribution | None, box: LatticeBox, psi, r_list,
                          N: int, seed: int) -> dict:
    """``r -> sup_{|n| <= N} ||(I - P_r) U^n psi||`` for one realisation; ``P_r`` keeps ``|k|_inf <= r``."""
    S = free_operator(params, box)
    if dist is None:
        U = S
    else:
        U = build_U(sample_phase_field(dist, box, sample_int_seed(seed, "trajectory", 0)), S)
    M = sp.csr_array(U.entries)
    Mh = sp.csr_array(M.conj().T)
    radius = np.max(np.abs(box.sites()), axis=1)
    outside = {int(r): radius > r for r in r_list}
    best = {r: 0.0 for r in outside}
    f = np.asarray(psi, dtype=complex)
    g = f.copy()
    for n in range(N + 1):
        for r, mask in outside.items():
            best[r] = max(best[r], np.linalg.norm(f[mask]), np.linalg.norm(g[mask]))
        if n < N:
            f = M @ f
            g = Mh @ g
    return best

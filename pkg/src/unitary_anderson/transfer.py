"""Transfer matrices of the one-dimensional model.

Generalised eigenvectors of ``U psi = z psi`` propagate in pairs
``(psi_{2k-1}, psi_{2k}) -> (psi_{2k+1}, psi_{2k+2})`` through
``T_z(theta_{2k}, theta_{2k+1})``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .model import BoundarySpec, ModelParams, PhaseDistribution, PhaseField
from .stats import MomentEstimate, mean_stderr, sample_rng


def transfer_matrix(z: complex, theta, eta, params: ModelParams) -> np.ndarray:
    """``T_z(theta, eta)``; broadcasts over array-valued angles to shape ``(..., 2, 2)``."""
    if z == 0:
        raise ValueError("transfer_matrix: z must be nonzero")
    r, t = params.r, params.t
    theta = np.asarray(theta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    ez = np.exp(-1j * eta) / z
    eth = np.exp(1j * (theta - eta))
    T = np.empty(np.broadcast(theta, eta).shape + (2, 2), dtype=complex)
    T[..., 0, 0] = -ez
    T[..., 0, 1] = r / t * (eth - ez)
    T[..., 1, 0] = r / t * (1 - ez)
    T[..., 1, 1] = -z * np.exp(1j * theta) / t**2 + r**2 / t**2 * (1 + eth - ez)
    return T


def tilde_map(z: complex, theta, params: ModelParams) -> np.ndarray:
    """Matrix sending ``(phi_{2n-1}, phi_{2n})`` to ``(phi~_{2n}, phi~_{2n+1})``."""
    r, t = params.r, params.t
    M = np.empty(np.shape(theta) + (2, 2), dtype=complex)
    M[..., 0, 0] = t * t
    M[..., 0, 1] = r * t
    M[..., 1, 0] = r * t
    M[..., 1, 1] = r * r - z * np.exp(1j * np.asarray(theta))
    return M


def tilde_transfer(z: complex, theta, eta, params: ModelParams) -> np.ndarray:
    """``T~_z(theta, eta) = T_z(eta, theta)^t``.

    Propagates ``(phi~_{2n}, phi~_{2n+1}) -> (phi~_{2n+2}, phi~_{2n+3})`` with
    ``theta = theta_{2n+1}`` and ``eta = theta_{2n+2}``.
    """
    return np.swapaxes(transfer_matrix(z, eta, theta, params), -1, -2)


def _pair_phases(phases, n: int, start: int = 0):
    theta = phases.theta if isinstance(phases, PhaseField) else np.asarray(phases, dtype=float)
    if theta.shape[-1] < start + 2 * n:
        raise ValueError(f"cocycle: need {start + 2 * n} phases, got {theta.shape[-1]}")
    seg = theta[..., start:start + 2 * n]
    return seg[..., 0::2], seg[..., 1::2]


def cocycle(z: complex, phases, n: int, params: ModelParams) -> np.ndarray:
    """Ordered product ``T_z(theta_{2n-2}, theta_{2n-1}) ... T_z(theta_0, theta_1)``.

    ``phases`` is a 1-d field or array whose first entry is ``theta_0``.
    No renormalisation; use :func:`log_cocycle_norm` for long products.
    """
    M = np.eye(2, dtype=complex)
    if n == 0:
        return M
    ev, od = _pair_phases(phases, n)
    for T in transfer_matrix(z, ev, od, params):
        M = T @ M
    return M


def log_cocycle_norm(z: complex, theta: np.ndarray, n: int, params: ModelParams, v=None,
                     renormalize: bool = True):
    """``log ||T_z(omega, n)||`` (or ``log ||T_z(omega, n) v||``) for a batch of realisations.

    ``theta`` has shape ``(samples, >= 2n)``. The running product is divided
    by its max-norm after every step and the logarithm accumulated.
    """
    theta = np.atleast_2d(theta)
    S = theta.shape[0]
    ev, od = _pair_phases(theta, n)
    if v is None:
        M = np.broadcast_to(np.eye(2, dtype=complex), (S, 2, 2)).copy()
    else:
        M = np.broadcast_to(np.asarray(v, dtype=complex).reshape(2, 1), (S, 2, 1)).copy()
    logacc = np.zeros(S)
    with np.errstate(over="raise", invalid="raise"):
        for k in range(n):
            M = transfer_matrix(z, ev[:, k], od[:, k], params) @ M
            if renormalize:
                scale = np.max(np.abs(M), axis=(1, 2))
                M /= scale[:, None, None]
                logacc += np.log(scale)
    norms = np.linalg.norm(M, ord=2, axis=(1, 2)) if v is None else np.linalg.norm(M[:, :, 0], axis=1)
    return logacc + np.log(norms)


def growth_exponent(z: complex, phases, n: int, params: ModelParams, v=None) -> float:
    """``log ||T_z(omega, n)|| / n`` for one fixed phase sequence."""
    theta = phases.theta if isinstance(phases, PhaseField) else np.asarray(phases, dtype=float)
    return float(log_cocycle_norm(z, theta[None, :], n, params, v)[0] / n)


@dataclass(frozen=True)
class LyapunovEstimate:
    z: complex
    gamma: float
    n_steps: int
    n_samples: int
    stderr: float


def lyapunov_estimate(z: complex, dist: PhaseDistribution, n: int, samples: int, seed: int,
                      params: ModelParams, v=None) -> LyapunovEstimate:
    """Monte Carlo mean of ``log ||T_z(omega, n)|| / n``."""
    if n < 50 or samples < 100:
        raise ValueError("lyapunov_estimate: need n >= 50 and samples >= 100")
    theta = _sample_phases(dist, samples, 2 * n, seed, "lyapunov")
    g = log_cocycle_norm(z, theta, n, params, v) / n
    m, se = mean_stderr(g)
    return LyapunovEstimate(complex(z), m, n, samples, se)


def write_lyapunov_csv(path, estimates) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z_re", "z_im", "gamma", "stderr", "n", "samples"])
        for e in estimates:
            w.writerow([repr(float(e.z.real)), repr(float(e.z.imag)), repr(float(e.gamma)), repr(float(e.stderr)), e.n_steps, e.n_samples])


def _sample_phases(dist: PhaseDistribution, samples: int, length: int, seed: int, tag: str):
    return np.stack([dist.sample(sample_rng(seed, tag, i), length) for i in range(samples)])


def ckm_moment(z: complex, dist: PhaseDistribution, delta: float, n: int, samples: int, v, seed: int,
               params: ModelParams) -> MomentEstimate:
    """Monte Carlo estimate of ``E ||T_z(omega, n) v||^{-delta}`` for a unit vector ``v``."""
    v = np.asarray(v, dtype=complex)
    if abs(np.linalg.norm(v) - 1) > 1e-12:
        raise ValueError("ckm_moment: v must be a unit vector")
    if n == 0:
        return MomentEstimate("ckm", 1.0, 0.0, samples, delta, complex(z))
    theta = _sample_phases(dist, samples, 2 * n, seed, "ckm")
    vals = np.exp(-delta * log_cocycle_norm(z, theta, n, params, v))
    m, se = mean_stderr(vals)
    return MomentEstimate("ckm", m, se, samples, delta, complex(z))


@dataclass(frozen=True)
class SolutionPair:
    """Generalised eigenvector on consecutive sites and its tilde transform.

    ``psi[i]`` is the value at ``sites[i]``; ``tilde_psi`` is ``nan`` where the
    transform is undefined (sites whose pair lies outside the computed range).
    """

    sites: np.ndarray
    psi: np.ndarray
    tilde_psi: np.ndarray

    def at(self, k: int) -> complex:
        return self.psi[k - self.sites[0]]

    def tilde_at(self, k: int) -> complex:
        return self.tilde_psi[k - self.sites[0]]


def _tilde(z, theta_of, sites, psi, params):
    tilde = np.full_like(psi, np.nan)
    for i, k in enumerate(sites[:-1]):
        if k % 2 == 0 and i >= 1:
            th = theta_of(k)
            if th is not None:
                tilde[[i, i + 1]] = tilde_map(z, th, params) @ psi[[i - 1, i]]
    return tilde


def boundary_solution(z: complex, bc: BoundarySpec, phases: PhaseField, interval, from_end: str,
                      params: ModelParams) -> SolutionPair:
    """Solution of ``(U - z) phi = 0`` satisfying the boundary condition at one end.

    The interval ``[a, b]`` must start at an even site. The solution is
    normalised to ``phi(a) = 1`` (``from_end="left"``) or ``phi(b) = 1``
    (``"right"``) and tabulated on ``a-1 .. b+1``. The values at ``a-1`` and,
    for odd ``b``, ``b+1`` are the virtual continuations that make the bulk
    transfer recursion reproduce the boundary rows; ``phi(b+1)`` is ``nan``
    for even ``b``.
    """
    if z == 0:
        raise ValueError("boundary_solution: z must be nonzero")
    a, b = (int(v) for v in interval)
    if a % 2:
        raise ValueError("boundary_solution: interval must start at an even site")
    (fa, fb), = phases.box.intervals
    if fa > a or fb < b:
        raise ValueError("boundary_solution: phases do not cover the interval")
    r, t = params.r, params.t
    eta_a, eta_b = bc.etas(params)
    B = b if b % 2 == 0 else b + 1
    sites = np.arange(a - 1, b + 2)
    psi = np.zeros(len(sites), dtype=complex)
    if b % 2 == 0:
        psi[-1] = np.nan

    def th(k):
        return phases.theta[k - fa]

    def idx(k):
        return k - (a - 1)

    if from_end == "left":
        psi[idx(a)] = 1.0
        psi[idx(a - 1)] = (np.exp(1j * eta_a) - r) / t
        for k in range(a, B - 1, 2):
            T = transfer_matrix(z, th(k), th(k + 1), params)
            psi[[idx(k + 1), idx(k + 2)]] = T @ psi[[idx(k - 1), idx(k)]]
    elif from_end == "right":
        e = np.exp(1j * eta_b)
        if b % 2 == 0:
            psi[idx(b)] = 1.0
            psi[idx(b - 1)] = (z * np.exp(1j * th(b)) - r * e) / (t * e)
            top = b - 2
        else:
            psi[idx(b)] = 1.0
            psi[idx(b + 1)] = (r - e) / t
            top = b - 1
        for k in range(top, a - 1, -2):
            T = transfer_matrix(z, th(k), th(k + 1), params)
            psi[[idx(k - 1), idx(k)]] = np.linalg.solve(T, psi[[idx(k + 1), idx(k + 2)]])
    else:
        raise ValueError(f"from_end must be 'left' or 'right', got {from_end!r}")

    def theta_of(k):
        return th(k) if a <= k <= b else None

    return SolutionPair(sites, psi, _tilde(z, theta_of, sites, psi, params))


def green_via_solutions(params: ModelParams, phases: PhaseField, interval, z: complex, k: int, l: int,
                        bc: BoundarySpec | None = None, solutions=None) -> complex:
    """``G^{[a,b]}(k, l; z)`` from the two boundary solutions.

    For ``l in {2n, 2n+1}`` with ``W_n = phi~a_{2n+1} phi~b_{2n} - phi~a_{2n} phi~b_{2n+1}``
    and ``c_l = e^{i theta_l} / W_n``::

        G(k, l) = c_l phi~b_l phi^a_k   if k < l, or k = l even
        G(k, l) = c_l phi~a_l phi^b_k   if k > l, or k = l odd
    """
    bc = bc or BoundarySpec.eta(0.0)
    a, b = (int(v) for v in interval)
    if not (a <= k <= b and a <= l <= b):
        raise ValueError("green_via_solutions: sites outside the interval")
    if solutions is None:
        solutions = (boundary_solution(z, bc, phases, (a, b), "left", params),
                     boundary_solution(z, bc, phases, (a, b), "right", params))
    pa, pb = solutions
    n2 = l - (l % 2)
    W = pa.tilde_at(n2 + 1) * pb.tilde_at(n2) - pa.tilde_at(n2) * pb.tilde_at(n2 + 1)
    scale = max(abs(pa.tilde_at(n2 + 1) * pb.tilde_at(n2)), abs(pa.tilde_at(n2) * pb.tilde_at(n2 + 1)), 1e-300)
    if abs(W) < 1e-12 * scale:
        raise ZeroDivisionError("green_via_solutions: z is (numerically) an eigenvalue of U^[a,b]")
    c = np.exp(1j * phases.theta[l - phases.box.intervals[0][0]]) / W
    if k < l or (k == l and l % 2 == 0):
        return complex(c * pb.tilde_at(l) * pa.at(k))
    return complex(c * pa.tilde_at(l) * pb.at(k))


def green_matrix_via_solutions(params: ModelParams, phases: PhaseField, interval, z: complex,
                               bc: BoundarySpec | None = None) -> np.ndarray:
    bc = bc or BoundarySpec.eta(0.0)
    a, b = (int(v) for v in interval)
    sol = (boundary_solution(z, bc, phases, (a, b), "left", params),
           boundary_solution(z, bc, phases, (a, b), "right", params))
    n = b - a + 1
    G = np.empty((n, n), dtype=complex)
    for k in range(a, b + 1):
        for l in range(a, b + 1):
            G[k - a, l - a] = green_via_solutions(params, phases, (a, b), z, k, l, bc, sol)
    return G


def corner_green(params: ModelParams, phases: PhaseField, interval, z: complex) -> complex:
    """Closed form of ``G^{[2n,2m]}(2n, 2m; z)`` with ``eta = 0`` boundary conditions."""
    a, b = (int(v) for v in interval)
    if a % 2 or b % 2:
        raise ValueError("corner_green: interval must be [2n, 2m]")
    sol = boundary_solution(z, BoundarySpec.eta(0.0), phases, (a, b), "left", params)
    th = phases.theta[b - phases.box.intervals[0][0]]
    e = np.exp(1j * th)
    return complex(e / (params.t * sol.at(b - 1) + (params.r - z * e) * sol.at(b)))


def norm_decoupling_integral(z: complex, pair, dist: PhaseDistribution, s: float, params: ModelParams,
                             nodes: int = 400) -> float:
    """``int dmu(theta) |t phi_{2m-1} + (r - z e^{i theta}) phi_{2m}|^{-s}`` by Gauss-Legendre."""
    x, w = dist.quadrature(nodes)
    p1, p2 = pair
    vals = np.abs(params.t * p1 + (params.r - z * np.exp(1j * x)) * p2) ** (-s)
    return float(np.sum(w * vals))

"""Neumann spectra, top eigenvalues and their dependence on the phases."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .lattice import BandedUnitary, _inner_indices, anderson_operator, build_S_tensor
from .model import BoundarySpec, LatticeBox, ModelParams, PhaseDistribution, PhaseField, sample_phase_field
from .stats import parallel_map, sample_int_seed

C0 = (np.pi * (4 - np.pi)) ** 2 / 8
GAP_TOL = 1e-8
MONO_SLACK = 1e-10


def wrap(angle):
    """Map angles to ``(-pi, pi]``."""
    a = np.mod(np.asarray(angle, dtype=float) + np.pi, 2 * np.pi) - np.pi
    return np.where(a == -np.pi, np.pi, a)


@dataclass(frozen=True)
class SpectralSet:
    eigenvalues: np.ndarray
    args: np.ndarray

    @classmethod
    def from_args(cls, args) -> "SpectralSet":
        a = wrap(np.asarray(args, dtype=float))
        return cls(np.exp(1j * a), a)

    @classmethod
    def from_eigenvalues(cls, ev) -> "SpectralSet":
        ev = np.asarray(ev, dtype=complex)
        return cls(ev, wrap(np.angle(ev)))

    def __len__(self) -> int:
        return len(self.eigenvalues)


def neumann_args_1d(params: ModelParams, L: int) -> np.ndarray:
    """Eigenvalue arguments of ``S_N`` on ``[0, 2L-1]``: ``lambda_0``, ``0`` and ``+-lambda_k``."""
    if L < 2:
        raise ValueError("neumann spectrum: need L >= 2")
    k = np.arange(1, L)
    lam = np.arccos(params.r**2 - params.t**2 * np.cos(k * np.pi / L))
    return np.concatenate([[params.lambda0, 0.0], lam, -lam])


def neumann_spectrum_closed_form(params: ModelParams, L: int, d: int | None = None) -> SpectralSet:
    """Closed-form spectrum of ``S_N`` on ``[0, 2L-1]^d``: all sums of one-dimensional arguments."""
    d = params.d if d is None else d
    a1 = neumann_args_1d(params, L)
    total = np.zeros(1)
    for _ in range(d):
        total = (total[:, None] + a1[None, :]).ravel()
    return SpectralSet.from_args(total)


def eigensolver_spectrum(U) -> SpectralSet:
    M = U.dense() if isinstance(U, BandedUnitary) else np.asarray(U)
    return SpectralSet.from_eigenvalues(np.linalg.eigvals(M))


def multiset_distance(a, b) -> float:
    """Max deviation under the optimal one-to-one matching of two point sets."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        return np.inf
    cost = np.abs(a[:, None] - b[None, :])
    i, j = linear_sum_assignment(cost)
    return float(cost[i, j].max())


def band_edge_vector(L: int, d: int = 1, which: str = "edge") -> np.ndarray:
    """Eigenvectors of ``S_N`` on ``[0, 2L-1]^d`` with unimodular entries.

    ``"edge"``: ``(1, i, 1, i, ...)`` per axis, eigenvalue ``e^{i d lambda_0}``.
    ``"one"``: ``(i, 1, -i, -1, ...)`` per axis, eigenvalue ``1``.
    """
    if which == "edge":
        v = np.tile([1.0, 1j], L)
    elif which == "one":
        v = np.tile([1j, 1.0, -1j, -1.0], L)[: 2 * L]
    else:
        raise ValueError(f"band_edge_vector: unknown vector {which!r}")
    out = np.ones(1, dtype=complex)
    for _ in range(d):
        out = np.kron(out, v)
    return out


def band_edge_eigvec_check(params: ModelParams, L: int, d: int | None = None, which: str = "edge") -> float:
    """``||S_N phi - e^{i mu} phi|| / ||phi||`` for the vectors of :func:`band_edge_vector`."""
    d = params.d if d is None else d
    p = ModelParams(params.t, d)
    S = build_S_tensor(p, LatticeBox.neumann(L, d)).dense()
    phi = band_edge_vector(L, d, which)
    mu = np.exp(1j * d * params.lambda0) if which == "edge" else 1.0
    return float(np.linalg.norm(S @ phi - mu * phi) / np.linalg.norm(phi))


def spectral_gap(params: ModelParams, L: int, d: int | None = None) -> tuple[float, float]:
    """Distance from ``e^{i d lambda_0}`` to the rest of the Neumann spectrum on ``[0, 2L-1]^d``,
    and the lower bound ``c_0 t^2 / |Lambda|^{2/d}``."""
    d = params.d if d is None else d
    if d * params.lambda0 >= np.pi:
        raise ValueError("spectral_gap: edge eigenvalue degenerate (d * lambda0 >= pi)")
    spec = neumann_spectrum_closed_form(params, L, d)
    edge = np.exp(1j * d * params.lambda0)
    dist = np.abs(spec.eigenvalues - edge)
    gap = float(np.min(dist[dist > 1e-12]))
    vol = (2 * L) ** d
    return gap, C0 * params.t**2 / vol ** (2.0 / d)


def top_eigenvalue(U, cut: float | None = None) -> tuple[complex, float]:
    """Eigenvalue of largest argument, with the branch cut placed in the spectral gap.

    The cut defaults to ``pi - theta_max / 2`` when ``U`` carries nonnegative
    phases and ``2 d lambda_0 + theta_max < 2 pi``; otherwise the midpoint of
    the widest gap between consecutive eigenvalue arguments. The returned
    argument lies in ``(cut - 2 pi, cut]``.
    """
    M = U.dense() if isinstance(U, BandedUnitary) else np.asarray(U)
    if np.max(np.abs(M.conj().T @ M - np.eye(M.shape[0]))) > 1e-10:
        raise ValueError("top_eigenvalue: operator is not unitary")
    ev = np.linalg.eigvals(M)
    ang = np.angle(ev)
    if cut is None and isinstance(U, BandedUnitary) and U.params is not None and U.theta is not None:
        tm = float(np.max(U.theta)) if len(U.theta) else 0.0
        if np.min(U.theta) >= 0 and 2 * U.params.edge + tm < 2 * np.pi:
            cut = np.pi - tm / 2
    if cut is None:
        s = np.sort(ang)
        gaps = np.diff(np.concatenate([s, [s[0] + 2 * np.pi]]))
        i = int(np.argmax(gaps))
        cut = s[i] + gaps[i] / 2
    shifted = cut - np.mod(cut - ang, 2 * np.pi)
    i = int(np.argmax(shifted))
    arg = float(shifted[i])
    if isinstance(U, BandedUnitary) and U.params is not None and U.theta is not None and np.min(U.theta) >= 0:
        if arg > U.params.edge + 1e-10:
            raise ArithmeticError(f"top eigenvalue arg {arg} exceeds d*lambda0 = {U.params.edge}")
    return complex(ev[i]), arg


@dataclass(frozen=True)
class InterpolationFamily:
    """``U(alpha) = diag(e^{-i alpha theta_k}) S_N``."""

    phases: PhaseField
    S_N: BandedUnitary

    @classmethod
    def neumann(cls, params: ModelParams, phases: PhaseField, bc: BoundarySpec | None = None):
        return cls(phases, build_S_tensor(params, phases.box, bc))

    def matrix(self, alpha: float) -> np.ndarray:
        return np.exp(-1j * alpha * self.phases.theta)[:, None] * self.S_N.dense()

    def eig(self, alpha: float):
        w, V = np.linalg.eig(self.matrix(alpha))
        return w, V / np.linalg.norm(V, axis=0)


class TrackingError(RuntimeError):
    pass


def _top_index(w, theta) -> int:
    tm = float(np.max(theta)) if np.min(theta) >= 0 else 2 * np.pi
    cut = np.pi - tm / 2
    return int(np.argmax(cut - np.mod(cut - np.angle(w), 2 * np.pi)))


def _simple_gap(w, i) -> float:
    others = np.delete(w, i)
    return float(np.min(np.abs(others - w[i]))) if len(others) else np.inf


def feynman_hellmann_derivative(family: InterpolationFamily, alpha: float, vec=None) -> float:
    """``-sum_k theta_k |<e_k|phi(alpha)>|^2`` for the top eigenvector, or for the
    eigenvector of maximal overlap with ``vec``."""
    w, V = family.eig(alpha)
    i = _top_index(w, family.phases.theta) if vec is None else int(np.argmax(np.abs(vec.conj() @ V)))
    if _simple_gap(w, i) < GAP_TOL:
        raise ArithmeticError("feynman_hellmann_derivative: eigenvalue not simple")
    return float(-np.sum(family.phases.theta * np.abs(V[:, i]) ** 2))


def finite_difference_derivative(family: InterpolationFamily, alpha: float, h: float = 1e-5,
                                 vec=None) -> float:
    """Centred difference of the tracked eigenvalue argument."""
    w, V = family.eig(alpha)
    i = _top_index(w, family.phases.theta) if vec is None else int(np.argmax(np.abs(vec.conj() @ V)))
    ref = V[:, i]
    out = []
    for a in (alpha - h, alpha + h):
        wa, Va = family.eig(a)
        j = int(np.argmax(np.abs(ref.conj() @ Va)))
        out.append(np.angle(wa[j] / w[i]))
    return float((out[1] - out[0]) / (2 * h))


@dataclass(frozen=True)
class MonotonicityScan:
    alphas: np.ndarray
    args: np.ndarray
    skipped: tuple = ()
    min_overlap: float = 1.0

    @property
    def max_increase(self) -> float:
        d = np.diff(self.args)
        return float(d.max()) if len(d) else 0.0

    @property
    def non_increasing(self) -> bool:
        return self.max_increase <= MONO_SLACK


def monotonicity_scan(family: InterpolationFamily, alpha_grid, max_refine: int = 6) -> MonotonicityScan:
    """Argument of the top eigenvalue at ``alpha_grid[0]`` continued along the grid by maximal overlap.

    Steps with overlap below 0.5 are refined by bisection up to ``max_refine`` levels.
    Grid points where the tracked eigenvalue is within ``1e-8`` of another are
    reported in ``skipped``.
    """
    grid = np.asarray(alpha_grid, dtype=float)
    w, V = family.eig(grid[0])
    i = _top_index(w, family.phases.theta)
    vec, val = V[:, i], w[i]
    args = [float(np.angle(val))]
    skipped = []
    worst = 1.0

    def step(a0, a1, vec, val, depth):
        nonlocal worst
        wa, Va = family.eig(a1)
        ov = np.abs(vec.conj() @ Va)
        j = int(np.argmax(ov))
        if ov[j] < 0.5:
            if depth >= max_refine:
                raise TrackingError(f"overlap {ov[j]:.2f} < 0.5 between alpha={a0} and {a1}")
            am = 0.5 * (a0 + a1)
            vec, val, dm, _ = step(a0, am, vec, val, depth + 1)
            vec2, val2, d2, gap = step(am, a1, vec, val, depth + 1)
            return vec2, val2, dm + d2, gap
        worst = min(worst, float(ov[j]))
        return Va[:, j], wa[j], float(np.angle(wa[j] / val)), _simple_gap(wa, j)

    for k in range(1, len(grid)):
        vec, val, dth, gap = step(grid[k - 1], grid[k], vec, val, 0)
        args.append(args[-1] + dth)
        if gap < GAP_TOL:
            skipped.append(k)
    args = np.array(args)
    keep = np.setdiff1d(np.arange(len(grid)), skipped)
    return MonotonicityScan(grid[keep], args[keep], tuple(skipped), worst)


def partition_operator(params: ModelParams, theta, box: LatticeBox, parts, bc: BoundarySpec | None = None):
    """Dense direct sum of the Neumann operators ``D S_N`` on the boxes ``parts`` of ``box``."""
    out = np.zeros((box.volume, box.volume), dtype=complex)
    theta = np.asarray(theta)
    covered = np.zeros(box.volume, dtype=int)
    for part in parts:
        idx = _inner_indices(box, part)
        out[np.ix_(idx, idx)] = anderson_operator(params, PhaseField(part, theta[idx]), bc).dense()
        covered[idx] += 1
    if np.any(covered != 1):
        raise ValueError("partition_operator: parts do not tile the box")
    return out


def halve(box: LatticeBox, axis: int, cut: int):
    iv = list(box.intervals)
    a, b = iv[axis]
    if cut % 2 or cut - a < 4 or b - cut + 1 < 4:
        raise ValueError(f"cut {cut} must be even with at least 4 sites on each side of [{a}, {b}]")
    return (LatticeBox(tuple(iv[:axis] + [(a, cut - 1)] + iv[axis + 1:])),
            LatticeBox(tuple(iv[:axis] + [(cut, b)] + iv[axis + 1:])))


@dataclass(frozen=True)
class BracketingResult:
    arg_joined: float
    arg_split: float

    @property
    def holds(self) -> bool:
        return self.arg_joined <= self.arg_split + MONO_SLACK


def neumann_bracketing_check(params: ModelParams, phases: PhaseField, cut, axis: int = 0,
                             bc: BoundarySpec | None = None) -> BracketingResult:
    """Top arguments of ``U^{L0}`` and of ``U^{L1} (+) U^{L2}``.

    ``cut`` is an even site, or a list of ``(axis, cut)`` pairs applied in turn
    to split the box into several Neumann boxes.
    """
    box = phases.box
    if not box.is_neumann_compatible():
        raise ValueError("neumann_bracketing_check: box is not Neumann compatible")
    parts = [box]
    cuts = [(axis, cut)] if np.isscalar(cut) else list(cut)
    for ax, c in cuts:
        new = []
        for p in parts:
            a, b = p.intervals[ax]
            new.extend(halve(p, ax, c) if a < c <= b else (p,))
        parts = new
    tm = float(np.max(phases.theta))
    cut_angle = np.pi - tm / 2 if np.min(phases.theta) >= 0 else None
    joined = anderson_operator(params, phases, bc)
    split = partition_operator(params, phases.theta, box, parts, bc)
    return BracketingResult(top_eigenvalue(joined, cut_angle)[1], top_eigenvalue(split, cut_angle)[1])


@dataclass(frozen=True)
class LifshitzTrial:
    L: int
    b: float
    samples: int
    hits: int
    p_hat: float
    stderr: float
    meta: dict = field(default_factory=dict, compare=False)

    def row(self):
        return [self.L, repr(float(self.b)), self.samples, self.hits, repr(float(self.p_hat)), repr(float(self.stderr))]


def write_lifshitz_csv(path, trials) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["L", "b", "samples", "hits", "p_hat", "stderr"])
        w.writerows(t.row() for t in trials)


def _lifshitz_sample(job):
    params, dist, L, seed = job
    box = LatticeBox.cube(L, params.d)
    U = anderson_operator(params, sample_phase_field(dist, box, seed))
    return top_eigenvalue(U)[1]


def top_args(params: ModelParams, dist: PhaseDistribution, L: int, samples: int, seed: int,
             workers: int = 1, tag: str = "lifshitz") -> np.ndarray:
    """Top eigenvalue arguments of ``U^{Lambda_L}`` on the cube ``[-2L, 2L+1]^d``."""
    jobs = [(params, dist, L, sample_int_seed(seed, f"{tag}:{L}", i)) for i in range(samples)]
    return np.array(parallel_map(_lifshitz_sample, jobs, workers, chunksize=64))


def lifshitz_trial(params: ModelParams, dist: PhaseDistribution, L: int, b: float, samples: int, seed: int,
                   workers: int = 1) -> LifshitzTrial:
    """Frequency of ``|e^{i lambda(U^{Lambda_L})} - e^{i d lambda_0}| <= b / L^2``."""
    if b <= 0:
        raise ValueError("lifshitz_trial: b must be positive")
    if dist.lo < 0:
        raise ValueError("lifshitz_trial: phases must be nonnegative")
    args = top_args(params, dist, L, samples, seed, workers)
    hits = int(np.sum(np.abs(np.exp(1j * args) - np.exp(1j * params.edge)) <= b / L**2))
    p = hits / samples
    return LifshitzTrial(L, float(b), samples, hits, p, math.sqrt(p * (1 - p) / samples))

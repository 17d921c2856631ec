"""Parameters, lattice geometry and random phase fields for the unitary Anderson model."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ModelParams:
    """Coupling ``t`` of the free unitary ``S(t)`` in dimension ``d``.

    ``r = sqrt(1 - t^2)`` and the band edge ``lambda0 = arccos(r^2 - t^2)``
    are derived.
    """

    t: float
    d: int = 1
    r: float = field(init=False)
    lambda0: float = field(init=False)

    def __post_init__(self):
        if not (0.0 < self.t < 1.0):
            raise ValueError(f"ModelParams: t must lie in (0,1), got {self.t}")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"ModelParams: d must be a positive integer, got {self.d}")
        r = math.sqrt(1.0 - self.t * self.t)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "lambda0", math.acos(r * r - self.t * self.t))

    @property
    def edge(self) -> float:
        """Argument ``d * lambda0`` of the upper band edge of ``S``."""
        return self.d * self.lambda0


@dataclass(frozen=True)
class PhaseDistribution:
    """Law of the i.i.d. phases.

    ``kind="uniform"`` is uniform on ``[lo, hi]``. ``kind="piecewise"`` takes
    breakpoints ``edges`` and the (unnormalised) constant density on each piece.
    """

    lo: float = 0.0
    hi: float = TWO_PI
    kind: str = "uniform"
    edges: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "piecewise"):
            raise ValueError(f"PhaseDistribution: unknown kind {self.kind!r}")
        if not (0.0 <= self.lo < self.hi <= TWO_PI + 1e-12):
            raise ValueError(
                f"PhaseDistribution: support [{self.lo}, {self.hi}] not inside [0, 2pi]"
            )
        if self.kind == "piecewise":
            edges = np.asarray(self.edges, dtype=float)
            w = np.asarray(self.weights, dtype=float)
            if len(edges) != len(w) + 1 or len(w) == 0:
                raise ValueError("PhaseDistribution: need len(edges) == len(weights) + 1")
            if np.any(np.diff(edges) <= 0) or np.any(w < 0) or not np.any(w > 0):
                raise ValueError("PhaseDistribution: bad piecewise data")
            if abs(edges[0] - self.lo) > 1e-12 or abs(edges[-1] - self.hi) > 1e-12:
                raise ValueError("PhaseDistribution: edges must span [lo, hi]")

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = TWO_PI) -> "PhaseDistribution":
        return cls(lo=lo, hi=hi)

    @classmethod
    def piecewise(cls, edges: Sequence[float], weights: Sequence[float]) -> "PhaseDistribution":
        return cls(lo=float(edges[0]), hi=float(edges[-1]), kind="piecewise",
                   edges=tuple(map(float, edges)), weights=tuple(map(float, weights)))

    @property
    def theta_max(self) -> float:
        return self.hi

    def _piece_masses(self):
        edges = np.asarray(self.edges)
        w = np.asarray(self.weights)
        mass = w * np.diff(edges)
        return edges, w / mass.sum(), mass / mass.sum()

    def density(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        inside = (theta >= self.lo) & (theta <= self.hi)
        if self.kind == "uniform":
            return np.where(inside, 1.0 / (self.hi - self.lo), 0.0)
        edges, heights, _ = self._piece_masses()
        idx = np.clip(np.searchsorted(edges, theta, side="right") - 1, 0, len(heights) - 1)
        return np.where(inside, heights[idx], 0.0)

    @property
    def density_sup(self) -> float:
        if self.kind == "uniform":
            return 1.0 / (self.hi - self.lo)
        return float(self._piece_masses()[1].max())

    def cdf(self, theta) -> np.ndarray:
        theta = np.clip(np.asarray(theta, dtype=float), self.lo, self.hi)
        if self.kind == "uniform":
            return (theta - self.lo) / (self.hi - self.lo)
        edges, heights, mass = self._piece_masses()
        cum = np.concatenate([[0.0], np.cumsum(mass)])
        idx = np.clip(np.searchsorted(edges, theta, side="right") - 1, 0, len(heights) - 1)
        return cum[idx] + heights[idx] * (theta - edges[idx])

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        u = rng.random(size)
        if self.kind == "uniform":
            return self.lo + (self.hi - self.lo) * u
        edges, heights, mass = self._piece_masses()
        cum = np.concatenate([[0.0], np.cumsum(mass)])
        idx = np.clip(np.searchsorted(cum, u, side="right") - 1, 0, len(heights) - 1)
        return edges[idx] + (u - cum[idx]) / heights[idx]

    def quadrature(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Gauss-Legendre nodes and weights for integrals against the law."""
        x, w = np.polynomial.legendre.leggauss(n)
        if self.kind == "uniform":
            pieces = [(self.lo, self.hi, 1.0 / (self.hi - self.lo))]
        else:
            edges, heights, _ = self._piece_masses()
            pieces = [(edges[i], edges[i + 1], heights[i]) for i in range(len(heights))]
        nodes, weights = [], []
        for a, b, h in pieces:
            if h == 0:
                continue
            nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
            weights.append(0.5 * (b - a) * w * h)
        return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class LatticeBox:
    """Product of integer intervals ``[a_j, b_j]``.

    Sites are enumerated row-major over the axes in declared order (last axis
    fastest), which is also the index order of ``np.kron``.
    """

    intervals: tuple

    def __post_init__(self):
        iv = tuple((int(a), int(b)) for a, b in self.intervals)
        if not iv:
            raise ValueError("LatticeBox: need at least one axis")
        for a, b in iv:
            if b < a:
                raise ValueError(f"LatticeBox: empty interval [{a}, {b}]")
        object.__setattr__(self, "intervals", iv)

    @classmethod
    def interval(cls, a: int, b: int) -> "LatticeBox":
        return cls(((a, b),))

    @classmethod
    def cube(cls, L: int, d: int) -> "LatticeBox":
        """The cube ``[-2L, 2L+1]^d`` made of the 2x2 cells ``C_n`` with ``|n| <= L``."""
        return cls(((-2 * L, 2 * L + 1),) * d)

    @classmethod
    def neumann(cls, L: int, d: int = 1, start: int = 0) -> "LatticeBox":
        """Box ``[start, start + 2L - 1]^d``."""
        return cls(((start, start + 2 * L - 1),) * d)

    @property
    def d(self) -> int:
        return len(self.intervals)

    @property
    def shape(self) -> tuple:
        return tuple(b - a + 1 for a, b in self.intervals)

    @property
    def volume(self) -> int:
        return int(np.prod(self.shape))

    @property
    def lower(self) -> np.ndarray:
        return np.array([a for a, _ in self.intervals])

    def is_neumann_compatible(self) -> bool:
        return all(a % 2 == 0 and b % 2 == 1 and b >= a + 3 for a, b in self.intervals)

    def sites(self) -> np.ndarray:
        """All sites as an ``(volume, d)`` integer array in enumeration order."""
        grids = np.indices(self.shape).reshape(self.d, -1).T
        return grids + self.lower

    def index(self, site) -> int:
        site = np.atleast_1d(np.asarray(site, dtype=int))
        if site.shape != (self.d,):
            raise ValueError(f"site {site} has wrong dimension for a {self.d}-d box")
        if not self.contains(site):
            raise ValueError(f"site {tuple(site)} outside box {self.intervals}")
        return int(np.ravel_multi_index(tuple(site - self.lower), self.shape))

    def contains(self, site) -> bool:
        site = np.atleast_1d(np.asarray(site))
        return all(a <= s <= b for s, (a, b) in zip(site, self.intervals))

    def contains_box(self, other: "LatticeBox") -> bool:
        return other.d == self.d and all(
            a <= c and e <= b for (a, b), (c, e) in zip(self.intervals, other.intervals)
        )

    def mask(self, predicate: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        return np.asarray(predicate(self.sites()), dtype=bool)

    def cell_index(self) -> np.ndarray:
        """Index ``n`` of the 2x2 cell ``C_n`` containing each site."""
        return np.floor_divide(self.sites(), 2)

    def shifted(self, offset) -> "LatticeBox":
        offset = np.broadcast_to(np.asarray(offset, dtype=int), (self.d,))
        return LatticeBox(tuple((a + o, b + o) for (a, b), o in zip(self.intervals, offset)))


@dataclass(frozen=True)
class PhaseField:
    box: LatticeBox
    theta: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        if theta.size != self.box.volume:
            raise ValueError(
                f"PhaseField: {theta.size} phases for a box of {self.box.volume} sites"
            )
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def constant(cls, box: LatticeBox, value: float = 0.0) -> "PhaseField":
        return cls(box, np.full(box.volume, float(value)))

    def at(self, site) -> float:
        return float(self.theta[self.box.index(site)])

    def restrict(self, sub: LatticeBox) -> "PhaseField":
        if not self.box.contains_box(sub):
            raise ValueError("PhaseField.restrict: sub-box not contained in field box")
        idx = [self.box.index(s) for s in sub.sites()]
        return PhaseField(sub, self.theta[idx], self.seed)

    def scaled(self, alpha: float) -> "PhaseField":
        return PhaseField(self.box, alpha * self.theta, self.seed)

    def shifted(self, offset) -> "PhaseField":
        """Same phase values carried by the translated box."""
        return PhaseField(self.box.shifted(offset), self.theta, self.seed)


def sample_phase_field(dist: PhaseDistribution, box: LatticeBox, seed: int) -> PhaseField:
    """Draw one i.i.d. phase per site.

    Values are assigned by enumeration index from a generator seeded by
    ``seed``, so the same seed always yields the same field.
    """
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    return PhaseField(box, dist.sample(rng, box.volume), int(seed))


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary condition at the two ends of every axis.

    Each end is ``"neumann-upper"`` (``e^{i eta} = r + i t``),
    ``"neumann-lower"`` (``e^{i eta} = r - i t``) or a float angle ``eta``.
    """

    left: object = "neumann-upper"
    right: object = "neumann-upper"

    @classmethod
    def eta(cls, eta_left: float = 0.0, eta_right: float | None = None) -> "BoundarySpec":
        return cls(float(eta_left), float(eta_left if eta_right is None else eta_right))

    @classmethod
    def neumann(cls, lower: bool = False) -> "BoundarySpec":
        kind = "neumann-lower" if lower else "neumann-upper"
        return cls(kind, kind)

    @staticmethod
    def _resolve(cond, params: ModelParams) -> float:
        if cond == "neumann-upper":
            return math.atan2(params.t, params.r)
        if cond == "neumann-lower":
            return -math.atan2(params.t, params.r)
        if isinstance(cond, str):
            raise ValueError(f"BoundarySpec: unknown condition {cond!r}")
        return float(cond)

    def etas(self, params: ModelParams) -> tuple[float, float]:
        return self._resolve(self.left, params), self._resolve(self.right, params)

"""Seeding, order-independent reductions and log-linear decay fits."""

from __future__ import annotations

import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

NOISE_FLOOR = 1e-14


def sample_seed(master_seed: int, tag: str, index: int) -> np.random.SeedSequence:
    """Seed of sample ``index`` of experiment ``tag``; independent of scheduling."""
    return np.random.SeedSequence(int(master_seed), spawn_key=(zlib.crc32(tag.encode()), int(index)))


def sample_rng(master_seed: int, tag: str, index: int) -> np.random.Generator:
    return np.random.default_rng(sample_seed(master_seed, tag, index))


def sample_int_seed(master_seed: int, tag: str, index: int) -> int:
    return int(sample_seed(master_seed, tag, index).generate_state(1, np.uint64)[0])


def mean_stderr(values) -> tuple[float, float]:
    """Mean and standard error with compensated summation (axis 0)."""
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    if n == 0:
        raise ValueError("mean_stderr: no samples")
    if v.ndim == 1:
        m = math.fsum(v) / n
        if n == 1:
            return m, 0.0
        var = math.fsum((v - m) ** 2) / (n - 1)
        return m, math.sqrt(var / n)
    flat = v.reshape(n, -1)
    out = [mean_stderr(flat[:, j]) for j in range(flat.shape[1])]
    m = np.array([o[0] for o in out]).reshape(v.shape[1:])
    s = np.array([o[1] for o in out]).reshape(v.shape[1:])
    return m, s


def resolve_workers(workers: int | None) -> int:
    if workers is None or workers <= 0:
        return os.cpu_count() or 1
    return int(workers)


def parallel_map(fn, items, workers: int | None = 1, chunksize: int = 8) -> list:
    """``[fn(x) for x in items]``, optionally across processes; output order is that of ``items``."""
    items = list(items)
    workers = resolve_workers(workers)
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items, chunksize=max(1, chunksize)))


@dataclass(frozen=True)
class MomentEstimate:
    quantity: str
    value: float
    stderr: float
    samples: int
    s_exponent: float = float("nan")
    z: complex | None = None

    def __post_init__(self):
        if self.stderr < 0 or self.samples < 1:
            raise ValueError("MomentEstimate: need stderr >= 0 and samples >= 1")


@dataclass(frozen=True)
class DecayFit:
    """Fit ``value ~ C exp(-rate * dist)``."""

    rate: float
    prefactor: float
    r_squared: float
    rate_stderr: float
    n_points: int


def fit_log_linear(distances, values, floor: float = NOISE_FLOOR, mask=None) -> DecayFit:
    """Least squares on ``(n, log value)`` over points with ``value >= floor``."""
    x = np.asarray(distances, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = np.isfinite(y) & (y >= floor)
    if mask is not None:
        keep &= np.asarray(mask, dtype=bool)
    x, ly = x[keep], np.log(y[keep])
    n = len(x)
    if n < 2:
        return DecayFit(float("nan"), float("nan"), float("nan"), float("nan"), n)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    if n > 2:
        s2 = float(np.sum(resid**2)) / (n - 2)
        se = math.sqrt(s2 / float(np.sum((x - x.mean()) ** 2)))
    else:
        se = float("nan")
    return DecayFit(-float(coef[0]), float(np.exp(coef[1])), r2, se, n)


SAMPLE_CHUNK = 64


def _run_chunk(job):
    fn, payload, idx = job
    return fn(payload, idx)


def map_samples(fn, payload, samples: int, workers: int | None = 1, chunk: int = SAMPLE_CHUNK) -> np.ndarray:
    """Evaluate ``fn(payload, indices)`` over fixed chunks of ``range(samples)``.

    The chunking does not depend on ``workers`` and results are concatenated
    in index order, so the output is identical for any worker count.
    """
    chunks = [np.arange(i, min(i + chunk, samples)) for i in range(0, samples, chunk)]
    parts = parallel_map(_run_chunk, [(fn, payload, c) for c in chunks], workers, chunksize=1)
    return np.concatenate(parts, axis=0) if parts else np.empty(0)

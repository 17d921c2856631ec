"""Named experiments, their configuration and result persistence."""

from __future__ import annotations

import ast
import configparser
import csv
import datetime as _dt
import hashlib
import io
import itertools
import json
import math
import operator
import os
import shutil
import tempfile
import warnings
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from .model import LatticeBox, ModelParams, PhaseDistribution, sample_phase_field

OUTPUT_ENV = "UA_OUTPUT_DIR"
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3

# ---------------------------------------------------------------- value parsing

_OPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
        ast.Pow: operator.pow, ast.USub: operator.neg, ast.UAdd: operator.pos}


def _eval(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return node.value
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval(node.operand))
    raise ValueError("unsupported expression")


def parse_number(text: str) -> float:
    """Float or arithmetic expression in ``pi`` (``2*pi``, ``pi/3``)."""
    text = str(text).strip()
    try:
        return float(text)
    except ValueError:
        return float(_eval(ast.parse(text, mode="eval").body))


def parse_list(text: str) -> list:
    """Comma list of numbers, or ``start:stop:step`` with an inclusive stop."""
    text = str(text).strip()
    if not text:
        return []
    if ":" in text and "," not in text:
        a, b, *c = (parse_number(x) for x in text.split(":"))
        step = c[0] if c else 1
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        return [a + i * step for i in range(n)]
    return [parse_number(x) for x in text.split(",") if x.strip()]


# ---------------------------------------------------------------- config

@dataclass
class ExperimentConfig:
    """Flat experiment description; one INI section per group.

    ``z_abs`` and ``z_arg`` are lists whose product is the ``z`` grid;
    ``z_arg_count > 0`` replaces ``z_arg`` by an equally spaced grid on ``[0, 2pi)``.
    """

    experiment: str
    t: float = 0.5
    d: int = 1
    dist_kind: str = "uniform"
    lo: float = 0.0
    hi: float = 2 * math.pi
    edges: tuple = ()
    weights: tuple = ()
    L: int = 4
    Ls: tuple = (2, 4, 6, 8)
    box_sites: int = 200
    distances: tuple = tuple(range(4, 41, 4))
    N: int = 100
    n_steps: int = 200
    b: float = 16.0
    delta: float = 0.1
    z_abs: tuple = (1.001,)
    z_arg: tuple = (0.4,)
    z_arg_count: int = 0
    s: tuple = (0.1,)
    samples: int = 200
    seed: int = 0
    output_dir: str | None = None
    workers: int = 1
    budget: int = 64
    grid: dict = field(default_factory=dict)

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.t, self.d)

    @property
    def distribution(self) -> PhaseDistribution:
        if self.dist_kind == "piecewise":
            return PhaseDistribution.piecewise(self.edges, self.weights)
        return PhaseDistribution(self.lo, self.hi, self.dist_kind)

    def distribution_ok(self) -> bool:
        try:
            self.distribution
        except (ValueError, TypeError):
            return False
        return True

    def z_grid(self) -> np.ndarray:
        args = (2 * np.pi * np.arange(self.z_arg_count) / self.z_arg_count if self.z_arg_count > 0
                else np.asarray(self.z_arg, dtype=float))
        return np.array([a * np.exp(1j * g) for a in self.z_abs for g in args])

    def echo(self) -> dict:
        out = asdict(self)
        out["grid"] = {k: list(v) for k, v in self.grid.items()}
        return out


_SECTIONS = {
    "experiment": {"name": "experiment", "seed": "seed", "samples": "samples", "workers": "workers",
                   "output_dir": "output_dir"},
    "model": {"t": "t", "d": "d"},
    "distribution": {"kind": "dist_kind", "lo": "lo", "hi": "hi", "edges": "edges", "weights": "weights"},
    "geometry": {"L": "L", "Ls": "Ls", "box_sites": "box_sites", "distances": "distances", "N": "N",
                 "n_steps": "n_steps"},
    "spectral": {"z_abs": "z_abs", "z_arg": "z_arg", "z_arg_count": "z_arg_count", "s": "s", "b": "b",
                 "delta": "delta"},
}
_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    if kind == "str" or name in ("experiment", "dist_kind"):
        return raw.strip()
    if kind == "str | None":
        return raw.strip() or None
    if kind == "tuple":
        vals = parse_list(raw)
        return tuple(int(v) if name in ("Ls", "distances") else v for v in vals)
    if kind == "int":
        return int(parse_number(raw))
    return parse_number(raw)


def _set_path(cfg: ExperimentConfig, path: str, value) -> ExperimentConfig:
    section, _, key = path.rpartition(".")
    name = _SECTIONS.get(section, {}).get(key) if section else key
    if name is None or name not in _FIELD_TYPES:
        raise KeyError(f"unknown config key {path!r}")
    if _FIELD_TYPES[name] == "tuple" and not isinstance(value, (tuple, list)):
        value = (value,)
    elif _FIELD_TYPES[name] == "int":
        value = int(value)
    return replace(cfg, **{name: value})


def load_config(path_or_text: str) -> ExperimentConfig:
    """Read an INI config (path or literal text)."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if os.path.exists(path_or_text):
        with open(path_or_text) as fh:
            cp.read_file(fh)
    elif "\n" not in path_or_text and "[" not in path_or_text:
        raise FileNotFoundError(f"no such config file: {path_or_text}")
    else:
        cp.read_string(path_or_text)
    if not cp.has_option("experiment", "name"):
        raise KeyError("config needs [experiment] name")
    kw = {}
    for section in cp.sections():
        if section == "sweep":
            continue
        table = _SECTIONS.get(section)
        if table is None:
            raise KeyError(f"unknown config section [{section}]")
        for key, raw in cp.items(section):
            if key not in table:
                raise KeyError(f"unknown key {key!r} in [{section}]")
            kw[table[key]] = _coerce(table[key], raw)
    grid, budget = {}, None
    if cp.has_section("sweep"):
        for key, raw in cp.items("sweep"):
            if key == "budget":
                budget = int(parse_number(raw))
            else:
                grid[key] = tuple(parse_list(raw))
    cfg = ExperimentConfig(**kw, grid=grid)
    return replace(cfg, budget=budget) if budget is not None else cfg


# ---------------------------------------------------------------- validation

def validate(cfg: ExperimentConfig) -> list[str]:
    """Violated preconditions, each naming the component it comes from; empty if runnable."""
    v = []
    if cfg.experiment not in EXPERIMENTS:
        v.append(f"ExperimentConfig: unknown experiment {cfg.experiment!r} (known: {', '.join(EXPERIMENTS)})")
    if not 0 < cfg.t < 1:
        v.append(f"ModelParams: t ∉ (0,1) (got {cfg.t})")
    if cfg.d < 1:
        v.append("ModelParams: d must be a positive integer")
    try:
        cfg.distribution
    except (ValueError, TypeError) as exc:
        v.append(str(exc))
    if cfg.samples < 1:
        v.append("ExperimentConfig: samples must be >= 1")
    if cfg.workers < 1:
        v.append("ExperimentConfig: workers must be >= 1")
    if any(not 0 < s < 1 for s in cfg.s):
        v.append("MomentEstimate: s must lie in (0,1)")
    zs = cfg.z_grid()
    name = cfg.experiment
    if name in ("fractional-decay", "combes-thomas", "dynamical") and np.any(np.abs(np.abs(zs) - 1) < 1e-14):
        v.append("GreenQuery: |z| must differ from 1")
    if name in ("lyapunov", "ckm"):
        if cfg.d != 1:
            v.append("transfer-1d: d must be 1")
        if np.any(np.abs(zs) == 0):
            v.append("transfer_matrix: z must be nonzero")
    if name == "lyapunov" and (cfg.n_steps < 50 or cfg.samples < 100):
        v.append("lyapunov_estimate: need n_steps >= 50 and samples >= 100")
    if name == "ckm" and not 0 < cfg.delta < 1:
        v.append("ckm_moment: delta must lie in (0,1)")
    if name == "neumann-spectrum" and min(cfg.Ls or (0,)) < 2:
        v.append("neumann_spectrum_closed_form: L >= 2")
    if name == "lifshitz":
        if cfg.distribution_ok() and cfg.distribution.lo < 0:
            v.append("lifshitz_trial: phases must be nonnegative")
        if cfg.hi >= 2 * math.pi and cfg.dist_kind == "uniform":
            v.append("lifshitz_trial: distribution support must lie in [0, 2pi)")
        if cfg.b <= 0:
            v.append("lifshitz_trial: b must be positive")
        if min(cfg.Ls or (0,)) < 1:
            v.append("lifshitz_trial: L >= 1")
    if name == "second-moment" and np.any(np.abs(zs) >= 1):
        v.append("second_moment_ratio: need |z| < 1")
    if name in ("dynamical", "combes-thomas") and cfg.box_sites < 8:
        v.append("LatticeBox: box_sites too small")
    if name == "combes-thomas" and cfg.box_sites ** cfg.d > 4096:
        v.append("combes_thomas_profile: box exceeds the dense limit of 4096 sites")
    if name == "dynamical" and cfg.N < 1:
        v.append("dynamical_profile: N >= 1")
    if name == "fractional-decay" and (not cfg.distances or min(cfg.distances) < 0):
        v.append("decay_experiment: need nonnegative distances")
    if len(cfg.grid) > 3:
        v.append("sweep: at most 3 grid dimensions")
    runs = math.prod(len(x) for x in cfg.grid.values()) if cfg.grid else 0
    if runs > cfg.budget:
        v.append(f"sweep: {runs} runs exceed the budget of {cfg.budget}")
    for key in cfg.grid:
        try:
            _set_path(cfg, key, cfg.grid[key][0] if cfg.grid[key] else 0)
        except KeyError as exc:
            v.append(f"sweep: {exc.args[0]}")
    return v


# ---------------------------------------------------------------- experiments
# Each returns {csv name: (header, rows)}.

def _neumann_spectrum(cfg):
    from .lattice import build_S_tensor
    from .spectral import (band_edge_eigvec_check, eigensolver_spectrum, multiset_distance,
                           neumann_spectrum_closed_form, spectral_gap)

    p = cfg.params
    rows = []
    for L in cfg.Ls:
        S = build_S_tensor(p, LatticeBox.neumann(L, p.d))
        dev = multiset_distance(neumann_spectrum_closed_form(p, L).eigenvalues, eigensolver_spectrum(S).eigenvalues)
        gap, lb = spectral_gap(p, L) if p.edge < np.pi else (float("nan"), float("nan"))
        rows.append([p.t, p.d, L, S.size, _f(dev), _f(gap), _f(lb),
                     _f(band_edge_eigvec_check(p, L, which="edge")), _f(band_edge_eigvec_check(p, L, which="one"))])
    return {"neumann_spectrum.csv": (["t", "d", "L", "sites", "max_deviation", "gap", "gap_lower_bound",
                                      "edge_residual", "one_residual"], rows)}


def _lifshitz(cfg):
    from .spectral import lifshitz_trial

    trials = [lifshitz_trial(cfg.params, cfg.distribution, L, cfg.b, cfg.samples, cfg.seed, cfg.workers)
              for L in cfg.Ls]
    return {"lifshitz.csv": (["L", "b", "samples", "hits", "p_hat", "stderr"], [t.row() for t in trials])}


def _lyapunov(cfg):
    from .transfer import lyapunov_estimate

    rows = []
    for z in cfg.z_grid():
        e = lyapunov_estimate(z, cfg.distribution, cfg.n_steps, cfg.samples, cfg.seed, cfg.params)
        rows.append([_f(e.z.real), _f(e.z.imag), _f(e.gamma), _f(e.stderr), e.n_steps, e.n_samples])
    return {"lyapunov.csv": (["z_re", "z_im", "gamma", "stderr", "n", "samples"], rows)}


def _fractional_decay(cfg):
    from .moments import decay_experiment

    rows = []
    for z in cfg.z_grid():
        for s in cfg.s:
            prof = decay_experiment(cfg.params, cfg.distribution, cfg.d, z, s, cfg.distances, cfg.samples,
                                    cfg.seed, cfg.workers)
            for n, val, se in zip(prof.distances, prof.values, prof.stderr):
                rows.append([_f(z.real), _f(z.imag), s, int(n), _f(val), _f(se),
                             _f(prof.fitted_rate), _f(prof.fitted_prefactor), _f(prof.r_squared)])
    return {"fractional_decay.csv": (["z_re", "z_im", "s", "dist", "value", "stderr", "fitted_rate",
                                      "fitted_prefactor", "r_squared"], rows)}


def _dynamical(cfg):
    from .moments import TruncationWarning, dynamical_profile

    M = cfg.box_sites // 4
    box = LatticeBox(((-2 * M, 2 * M - 1),) * cfg.d)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        ap = dynamical_profile(cfg.params, cfg.distribution, box, 0, cfg.distances, cfg.N, cfg.samples, cfg.seed,
                               cfg.workers)
    rows = [[int(l), _f(a), _f(se), _f(ap.fit.rate), _f(ap.fit.prefactor),
             _f(ap.fit.r_squared), ap.N, int(ap.truncated)] for l, a, se in zip(ap.l_values, ap.amplitudes, ap.stderr)]
    return {"dynamical.csv": (["l", "amplitude", "stderr", "fitted_rate", "fitted_prefactor", "r_squared", "N",
                               "truncated"], rows)}


def _combes_thomas(cfg):
    from .lattice import anderson_operator
    from .resolvent import combes_thomas_profile

    M = cfg.box_sites // 4
    box = LatticeBox(((-2 * M, 2 * M - 1),) * cfg.d)
    U = anderson_operator(cfg.params, sample_phase_field(cfg.distribution, box, cfg.seed))
    rows = []
    for z in cfg.z_grid():
        res = combes_thomas_profile(U, z, np.zeros(cfg.d, dtype=int), M)
        env = res.envelope()
        for n, val, e in zip(res.profile.distances, res.profile.values, env):
            rows.append([_f(z.real), _f(z.imag), _f(res.dist), int(n), _f(val), _f(e),
                         _f(res.B_fit), _f(res.B_envelope), _f(res.profile.r_squared)])
    return {"combes_thomas.csv": (["z_re", "z_im", "dist_to_spectrum", "dist", "value", "envelope", "B_fit",
                                   "B_envelope", "r_squared"], rows)}


def _second_moment(cfg):
    from .moments import second_moment_ratio

    box = LatticeBox.neumann(max(2, cfg.box_sites // 2), cfg.d, start=-2 * (cfg.box_sites // 4))
    origin = np.zeros(cfg.d, dtype=int)
    rows = []
    for z in cfg.z_grid():
        for s in cfg.s:
            r = second_moment_ratio(cfg.params, cfg.distribution, box, z, origin, origin, s, cfg.samples, cfg.seed,
                                    cfg.workers)
            rows.append([_f(abs(z)), _f((np.angle(z))), s, _f(r.lhs), _f(r.rhs), _f(r.ratio),
                         _f(r.stderr), r.samples])
    return {"second_moment.csv": (["z_abs", "z_arg", "s", "lhs", "rhs", "ratio", "stderr", "samples"], rows)}


def _ckm(cfg):
    from .stats import fit_log_linear
    from .transfer import ckm_moment

    rows = []
    v = np.array([1.0, 0.0])
    for z in cfg.z_grid():
        ests = [ckm_moment(z, cfg.distribution, cfg.delta, int(n), cfg.samples, v, cfg.seed, cfg.params)
                for n in cfg.distances]
        fit = fit_log_linear(cfg.distances, [e.value for e in ests])
        for n, e in zip(cfg.distances, ests):
            rows.append([_f(z.real), _f(z.imag), int(n), _f(e.value), _f(e.stderr), e.samples, cfg.delta,
                         _f(-fit.rate), _f(fit.r_squared)])
    return {"ckm.csv": (["z_re", "z_im", "n", "value", "stderr", "samples", "delta", "log_slope", "r_squared"], rows)}


def identity_checks(t: float = 0.5, seed: int = 0) -> list[tuple[str, float, float]]:
    """Exact identities on small instances: ``(name, value, tolerance)``."""
    from .lattice import (anderson_operator, build_S_interval, build_S_tensor, build_U, split_operator,
                          splitting_data, splitting_vectors)
    from .model import BoundarySpec
    from .resolvent import geometric_resolvent_residual
    from .spectral import (InterpolationFamily, band_edge_eigvec_check, eigensolver_spectrum,
                           feynman_hellmann_derivative, finite_difference_derivative, multiset_distance,
                           neumann_spectrum_closed_form)
    from .transfer import green_matrix_via_solutions, transfer_matrix

    out = []
    rng = np.random.default_rng(seed)
    for d, Ls in ((1, range(2, 7)), (2, range(2, 4))):
        p = ModelParams(t, d)
        dev = max(multiset_distance(neumann_spectrum_closed_form(p, L).eigenvalues,
                                    eigensolver_spectrum(build_S_tensor(p, LatticeBox.neumann(L, d))).eigenvalues)
                  for L in Ls)
        out.append((f"neumann_spectrum_d{d}", dev, 1e-10))
    p = ModelParams(t)
    out.append(("edge_eigenvector", band_edge_eigvec_check(p, 4, which="edge"), 1e-12))
    out.append(("one_eigenvector", band_edge_eigvec_check(p, 4, which="one"), 1e-12))
    box = LatticeBox.interval(0, 15)
    ph = sample_phase_field(PhaseDistribution.uniform(0, 1), box, seed)
    sd = splitting_data(p, 8, ph)
    out.append(("splitting_beta", abs(np.exp(1j * sd.beta) - np.exp(-1j * p.lambda0)), 1e-12))
    psi, phi = splitting_vectors(p, box, 8)
    S0 = build_S_tensor(p, box).dense()
    S12 = split_operator(p, np.zeros(16), box, 8)
    out.append(("splitting_rank_one", float(np.max(np.abs(S0 - S12 - np.outer(psi, phi.conj())))), 1e-14))
    world = LatticeBox.interval(-40, 39)
    Uw = anderson_operator(p, sample_phase_field(PhaseDistribution.uniform(0, 1), world, seed))
    out.append(("geometric_resolvent", geometric_resolvent_residual(Uw, 3, 6, 1.5 * np.exp(1j * p.lambda0)), 1e-10))
    th, et = rng.uniform(0, 2 * np.pi, (2, 50))
    zs = np.exp(rng.uniform(-0.5, 0.5, 50) + 1j * rng.uniform(0, 2 * np.pi, 50))
    dets = np.array([np.linalg.det(transfer_matrix(z, a, b, p)) for z, a, b in zip(zs, th, et)])
    out.append(("transfer_determinant", float(np.max(np.abs(dets - np.exp(1j * (th - et))))), 1e-14))
    b20 = LatticeBox.interval(0, 19)
    ph20 = sample_phase_field(PhaseDistribution.uniform(), b20, seed)
    z = 1.3 * np.exp(0.7j)
    U20 = build_U(ph20, build_S_interval(p, (0, 19), BoundarySpec.eta(0.0)))
    Gd = np.linalg.inv(U20.dense() - z * np.eye(20))
    Gs = green_matrix_via_solutions(p, ph20, (0, 19), z)
    out.append(("green_via_solutions", float(np.max(np.abs(Gs - Gd) / np.abs(Gd))), 1e-8))
    worst = 0.0
    for i in range(10):
        fam = InterpolationFamily.neumann(p, sample_phase_field(PhaseDistribution.uniform(0, 1),
                                                                LatticeBox.neumann(5), seed + i))
        a = rng.uniform(0, 1)
        worst = max(worst, abs(feynman_hellmann_derivative(fam, a) - finite_difference_derivative(fam, a)))
    out.append(("feynman_hellmann", worst, 1e-6))
    out.append(("unitarity", Uw.unitarity_defect(), 1e-12))
    return out


def _identities(cfg):
    checks = identity_checks(cfg.t, cfg.seed)
    rows = [[n, _f(v), tol, int(v < tol)] for n, v, tol in checks]
    failed = [n for n, v, tol in checks if not v < tol]
    if failed:
        raise RuntimeError(f"identity checks failed: {', '.join(failed)}")
    return {"identities.csv": (["check", "value", "tolerance", "passed"], rows)}


EXPERIMENTS = {
    "neumann-spectrum": _neumann_spectrum,
    "lifshitz": _lifshitz,
    "lyapunov": _lyapunov,
    "fractional-decay": _fractional_decay,
    "dynamical": _dynamical,
    "combes-thomas": _combes_thomas,
    "identities-suite": _identities,
    "second-moment": _second_moment,
    "ckm": _ckm,
}


# ---------------------------------------------------------------- persistence

def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode()


def _f(x) -> str:
    """Shortest round-trip text of a float."""
    return repr(float(x))


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def resolve_output_dir(cfg: ExperimentConfig) -> str:
    return cfg.output_dir or os.environ.get(OUTPUT_ENV) or os.path.join(os.getcwd(), "results")


def _persist(cfg: ExperimentConfig, tables: dict, started: str, extra: dict | None = None) -> dict:
    out_dir = resolve_output_dir(cfg)
    os.makedirs(out_dir, exist_ok=True)
    stage = tempfile.mkdtemp(prefix=".staging-", dir=out_dir)
    written = []
    try:
        checksums = {}
        for name, (header, rows) in tables.items():
            data = _csv_bytes(header, rows)
            with open(os.path.join(stage, name), "wb") as fh:
                fh.write(data)
            checksums[name] = hashlib.sha256(data).hexdigest()
        manifest = {"config": cfg.echo(), "seed": cfg.seed, "started": started, "finished": _now(),
                    "code_version": f"artifact {__version__}", "outputs": checksums}
        if extra:
            manifest.update(extra)
        with open(os.path.join(stage, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        for name in tables:
            os.replace(os.path.join(stage, name), os.path.join(out_dir, name))
            written.append(name)
        os.replace(os.path.join(stage, "manifest.json"), os.path.join(out_dir, "manifest.json"))
        return manifest
    except BaseException:
        for name in written:
            try:
                os.remove(os.path.join(out_dir, name))
            except OSError:
                pass
        raise
    finally:
        shutil.rmtree(stage, ignore_errors=True)


class ValidationError(ValueError):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = violations


def run(cfg: ExperimentConfig) -> dict:
    """Validate, run the experiment and persist its CSVs and manifest; returns the manifest."""
    violations = validate(cfg)
    if violations:
        raise ValidationError(violations)
    started = _now()
    tables = EXPERIMENTS[cfg.experiment](cfg)
    return _persist(cfg, tables, started)


def sweep(cfg: ExperimentConfig) -> dict | None:
    """Run the experiment at every point of ``cfg.grid``; one CSV per output with grid columns prepended."""
    violations = validate(cfg)
    if violations:
        raise ValidationError(violations)
    keys = list(cfg.grid)
    points = list(itertools.product(*(cfg.grid[k] for k in keys))) if keys else []
    if not points:
        return None
    started = _now()
    base = replace(cfg, grid={})
    runs = []
    for point in points:
        c = base
        for k, val in zip(keys, point):
            c = _set_path(c, k, val)
        bad = validate(c)
        if bad:
            raise ValidationError([f"grid point {dict(zip(keys, point))}: {b}" for b in bad])
        runs.append((point, c))
    tables = {}
    for point, c in runs:
        for name, (header, rows) in EXPERIMENTS[c.experiment](c).items():
            h, acc = tables.setdefault(name, (keys + header, []))
            acc.extend([list(point) + list(r) for r in rows])
    return _persist(cfg, tables, started, {"grid_points": [dict(zip(keys, p)) for p in points]})

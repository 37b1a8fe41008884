"""Command-line driver for the optimal prediction experiments.

Every experiment writes one table (CSV or JSON) and a JSON run manifest next
to it.  Configuration precedence is: built-in defaults, then a ``key = value``
config file (``--config``), then command-line flags.

Exit status: 0 on success, 1 on invalid configuration, 2 on numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from .gaussian import ConditioningError, build_prior, condition
from .kernels import KernelError, KernelSet, collective_variables, fourier_kernels, gaussian_bump_kernels
from .lattice import DivergenceError, Grid, HamiltonianSpec
from .montecarlo import SamplerConfig, ensemble_truth, sample_conditioned, sample_unconditioned
from .opsolver import compute_c, evolve_fourier, evolve_gaussian_kernels
from .partition import (Partition, compute_b, empirical_two_point, fit_m0_to_correlation,
                        h1_second_moment, optimize_m0, scan_m0)
from .perturbation import DegenerateSeriesError

__all__ = ["ExperimentConfig", "ConfigError", "EXPERIMENTS", "run", "run_experiment",
           "parse_config_file", "main", "OUTPUT_DIR_ENV"]

OUTPUT_DIR_ENV = "OPTPREDICT_OUTPUT_DIR"
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2
REFERENCE_M0 = 1.055
CHAINS_PER_BLOCK = 50


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "partition-fit"
    n: int = 32
    N: int = 4
    m0: float | str | None = None      # None: experiment default
    b: float | str = "fit"
    T: float = 1.0
    sigma: float = math.pi
    centers: tuple = (math.pi / 8, 9 * math.pi / 8)
    dt: float = 1e-3
    t_end: float | None = None
    seed: int = 7
    n_samples: int = 2000
    order: int = 1
    kernel: str = "fourier"
    output: str | None = None
    format: str = "csv"
    workers: int = 1
    chains: int = 100
    burn_in: int = 1000
    thinning: int = 10
    proposal_scale: float = 0.5
    stride: int = 10
    v0: tuple | None = None

    # ------------------------------------------------------------------
    def resolved_m0(self):
        if self.m0 is None:
            return "fit" if self.experiment == "partition-fit" else REFERENCE_M0
        return self.m0

    def resolved_t_end(self):
        if self.t_end is not None:
            return self.t_end
        return 2.0 if self.kernel == "fourier" else 1.0

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {sorted(EXPERIMENTS)}")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.kernel not in ("fourier", "gaussian"):
            raise ConfigError("kernel must be 'fourier' or 'gaussian'")
        if self.kernel == "fourier" and self.experiment in ("moments-compare", "evolve", "ensemble-compare"):
            if self.N % 2 or not 0 < self.N <= self.n:
                raise ConfigError("Fourier kernels need an even N with 0 < N <= n")
        m0 = self.resolved_m0()
        if m0 != "fit" and not (isinstance(m0, (int, float)) and m0 > 0):
            raise ConfigError("m0 must be positive or 'fit'")
        if self.b != "fit" and not isinstance(self.b, (int, float)):
            raise ConfigError("b must be a number or 'fit'")
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if any(not 0 <= c < 2 * math.pi for c in self.centers):
            raise ConfigError("centers must lie in [0, 2 pi)")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.resolved_t_end() < 0:
            raise ConfigError("t_end must be non-negative")
        if self.n_samples < 1 or self.chains < 1 or self.workers < 1:
            raise ConfigError("n_samples, chains and workers must be >= 1")
        if self.burn_in < 0 or self.thinning < 1 or self.stride < 1:
            raise ConfigError("burn_in must be >= 0, thinning and stride >= 1")
        if not self.proposal_scale > 0:
            raise ConfigError("proposal_scale must be positive")
        if self.order not in (0, 1):
            raise ConfigError("order must be 0 or 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a non-negative 64-bit integer")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be 'csv' or 'json'")
        if self.v0 is not None and len(self.v0) != 2 * len(self.centers):
            raise ConfigError("v0 lists V^p then V^q, one value per center each")
        if self.experiment == "correlation-check" and self.n_samples < 1000:
            raise ConfigError("correlation-check needs n_samples >= 1000")

    def sampler(self, n_samples=None) -> SamplerConfig:
        ns = self.n_samples if n_samples is None else n_samples
        return SamplerConfig(seed=self.seed, proposal_scale=self.proposal_scale,
                             burn_in=self.burn_in, thinning=self.thinning, n_samples=ns,
                             n_chains=min(self.chains, ns), chains_per_block=CHAINS_PER_BLOCK,
                             workers=self.workers)

    def output_path(self) -> Path:
        if self.output:
            return Path(self.output)
        base = Path(os.environ.get(OUTPUT_DIR_ENV) or ".")
        return base / f"{self.experiment}.{self.format}"


# --------------------------------------------------------------------------
# helpers shared by experiments


@dataclass
class Table:
    columns: list
    rows: list
    summary: dict = field(default_factory=dict)


def _m0_value(cfg, grid):
    m0 = cfg.resolved_m0()
    return optimize_m0(grid, cfg.T) if m0 == "fit" else float(m0)


def _b_value(cfg, m0, grid):
    return compute_b(m0, grid, cfg.T).b if cfg.b == "fit" else float(cfg.b)


def _kernels(cfg, grid) -> KernelSet:
    if cfg.kernel == "fourier":
        return fourier_kernels(grid, cfg.N)
    return gaussian_bump_kernels(grid, cfg.centers, cfg.sigma)


def invariant_initial_values(spec: HamiltonianSpec, kernels: KernelSet, cfg: SamplerConfig):
    """Collective variables of one field drawn from the invariant measure."""
    one = replace(cfg, n_samples=1, n_chains=1, stream=1)
    u = sample_unconditioned(spec, one).samples[0]
    return collective_variables(kernels, u), u


def _gaussian_v0(cfg, spec, kernels):
    """``(V^p, V^q)`` from ``--v0`` or, by default, from an invariant sample."""
    if cfg.v0 is None:
        V, _ = invariant_initial_values(spec, kernels, cfg.sampler())
        return V.imag.copy(), V.real.copy()
    N = len(cfg.centers)
    return np.asarray(cfg.v0[:N], float), np.asarray(cfg.v0[N:], float)


def _exit_time(times, traj, mean, se, k=3.0, atol=1e-10):
    """First time any component leaves the ``k``-stderr band of the ensemble.

    ``atol`` absorbs rounding at ``t = 0`` where the band has zero width.
    """
    out = np.abs(traj - mean) > k * se + atol
    hit = np.flatnonzero(out.any(axis=1))
    return float(times[hit[0]]) if hit.size else math.inf


def _rms_in_time(traj, mean):
    return float(np.mean(np.sqrt(np.mean(np.abs(traj - mean) ** 2, axis=1))))


def _split_complex(values):
    v = np.asarray(values)
    if np.iscomplexobj(v):
        return np.concatenate([v.real, v.imag], axis=-1)
    return v


# --------------------------------------------------------------------------
# experiments


def exp_partition_fit(cfg: ExperimentConfig) -> Table:
    grid = Grid(cfg.n)
    m_scan, var = scan_m0(grid, cfg.T)
    m_opt = optimize_m0(grid, cfg.T)
    m0 = m_opt if cfg.resolved_m0() == "fit" else float(cfg.resolved_m0())
    bc = compute_b(m0, grid, cfg.T)
    summary = {
        "m0_opt": m_opt,
        "var_H1_at_opt": h1_second_moment(m_opt, grid, cfg.T),
        "m0_used": m0,
        "intermediate": bc.intermediate,
        "b": bc.b,
        "b_pi": bc.b_pi,
        "b_continuum": bc.b_continuum,
    }
    rows = [[float(m), float(v)] for m, v in zip(m_scan, var)]
    return Table(["m0_scan", "var_H1"], rows, summary)


def exp_correlation_check(cfg: ExperimentConfig) -> Table:
    grid = Grid(cfg.n)
    spec = HamiltonianSpec(grid, cfg.T)
    ss = sample_unconditioned(spec, cfg.sampler())
    emp, se = empirical_two_point(ss.samples, ss.chain)
    m_fit = fit_m0_to_correlation(ss.samples, grid, cfg.T)
    fit = build_prior(grid, m_fit, cfg.T).correlation()
    z = np.abs(emp - fit) / se
    rows = [[d, float(emp[d]), float(se[d]), float(fit[d])] for d in range(grid.n)]
    summary = {"m0_fit": m_fit, "max_abs_z": float(z.max()), "acceptance_rate": ss.acceptance_rate,
               "tau_int_sweeps": ss.tau_int, "n_samples": len(ss), "warnings": list(ss.warnings)}
    return Table(["separation", "empirical", "stderr", "fit"], rows, summary)


def exp_moments_compare(cfg: ExperimentConfig) -> Table:
    grid = Grid(cfg.n)
    spec = HamiltonianSpec(grid, cfg.T)
    kernels = _kernels(cfg, grid)
    m0 = _m0_value(cfg, grid)
    V0, _ = invariant_initial_values(spec, kernels, cfg.sampler())
    ss = sample_conditioned(spec, kernels, V0, cfg.sampler())
    cg = condition(build_prior(grid, m0, cfg.T), kernels, V0)
    mu = cg.mean
    var = np.diag(cg.cov).real
    u = ss.samples
    a2 = np.abs(u) ** 2
    a3 = (a2 * u).real
    from .montecarlo import _group_stderr
    mc2, se2 = a2.mean(axis=0), _group_stderr(a2, ss.chain)
    mc3, se3 = a3.mean(axis=0), _group_stderr(a3, ss.chain)
    reg2 = np.abs(mu) ** 2 + var
    reg3 = (np.abs(mu) ** 2 * mu + 2 * var * mu).real
    gal = kernels.grid.n * kernels.G.conj().T @ V0
    gal2 = np.abs(gal) ** 2
    gal3 = (np.abs(gal) ** 2 * gal).real
    rows = [[j, float(grid.x[j]), float(mc2[j]), float(se2[j]), float(reg2[j]), float(gal2[j]),
             float(mc3[j]), float(se3[j]), float(reg3[j]), float(gal3[j])] for j in range(grid.n)]
    rms_reg = float(np.sqrt(np.mean((reg2 - mc2) ** 2)))
    rms_gal = float(np.sqrt(np.mean((gal2 - mc2) ** 2)))
    summary = {
        "m0": m0,
        "V0_re": V0.real.tolist(), "V0_im": V0.imag.tolist(),
        "max_abs_z_second": float(np.max(np.abs(reg2 - mc2) / se2)),
        "max_abs_z_third": float(np.max(np.abs(reg3 - mc3) / se3)),
        "rms_second_regression": rms_reg,
        "rms_second_galerkin": rms_gal,
        "acceptance_rate": ss.acceptance_rate,
        "max_constraint_residual": float(np.abs(u @ kernels.G.T - V0).max()),
        "warnings": list(ss.warnings),
    }
    cols = ["site", "x", "second_mc", "second_stderr", "second_regression", "second_galerkin",
            "third_mc", "third_stderr", "third_regression", "third_galerkin"]
    return Table(cols, rows, summary)


def exp_c_scan(cfg: ExperimentConfig) -> Table:
    grid = Grid(cfg.n)
    m0 = _m0_value(cfg, grid)
    prior = build_prior(grid, m0, cfg.T)
    rows = []
    for N in range(2, cfg.n + 1, 2):
        rows.append([N, compute_c(prior, fourier_kernels(grid, N)).c])
    return Table(["N", "c"], rows, {"m0": m0, "T": cfg.T})


def _fourier_runs(cfg, grid, kernels, V0, m0):
    prior = build_prior(grid, m0, cfg.T)
    t_end = cfg.resolved_t_end()
    op = evolve_fourier(V0, prior, kernels, "OP_fourier", cfg.dt, t_end, cfg.stride)
    gal = evolve_fourier(V0, prior, kernels, "Galerkin", cfg.dt, t_end, cfg.stride)
    return op, gal, compute_c(prior, kernels).c


def _gaussian_runs(cfg, grid, kernels, Vp0, Vq0, m0, b):
    prior = build_prior(grid, m0, cfg.T)
    part = Partition(m0, b, grid, cfg.T)
    t_end = cfg.resolved_t_end()
    return [evolve_gaussian_kernels(Vp0, Vq0, prior, kernels, part, k, cfg.dt, t_end, cfg.stride)
            for k in (0, 1)]


def _variable_names(N):
    return [f"Vp{a + 1}" for a in range(N)] + [f"Vq{a + 1}" for a in range(N)]


def exp_evolve(cfg: ExperimentConfig) -> Table:
    grid = Grid(cfg.n)
    kernels = _kernels(cfg, grid)
    m0 = _m0_value(cfg, grid)
    if cfg.kernel == "fourier":
        spec = HamiltonianSpec(grid, cfg.T)
        V0, _ = invariant_initial_values(spec, kernels, cfg.sampler())
        op, gal, c = _fourier_runs(cfg, grid, kernels, V0, m0)
        rows = []
        for i, t in enumerate(op.times):
            for a, K in enumerate(kernels.modes):
                rows.append([float(t), int(K), float(op.values[i, a].real), float(op.values[i, a].imag),
                             float(gal.values[i, a].real), float(gal.values[i, a].imag)])
        return Table(["t", "mode", "op_re", "op_im", "galerkin_re", "galerkin_im"], rows,
                     {"m0": m0, "c": c, "V0_re": V0.real.tolist(), "V0_im": V0.imag.tolist()})
    b = _b_value(cfg, m0, grid)
    Vp0, Vq0 = _gaussian_v0(cfg, HamiltonianSpec(grid, cfg.T), kernels)
    traj = _gaussian_runs(cfg, grid, kernels, Vp0, Vq0, m0, b)[cfg.order]
    names = _variable_names(kernels.N)
    rows = [[float(t), names[a], float(traj.values[i, a])]
            for i, t in enumerate(traj.times) for a in range(len(names))]
    return Table(["t", "variable", "op"], rows,
                 {"m0": m0, "b": b, "order": cfg.order, "scheme": traj.scheme})


def exp_ensemble_compare(cfg: ExperimentConfig) -> Table:
    grid = Grid(cfg.n)
    kernels = _kernels(cfg, grid)
    m0 = _m0_value(cfg, grid)
    spec = HamiltonianSpec(grid, cfg.T)
    t_end = cfg.resolved_t_end()
    if cfg.kernel == "fourier":
        V0, _ = invariant_initial_values(spec, kernels, cfg.sampler())
        ens = ensemble_truth(spec, kernels, V0, cfg.sampler(), cfg.dt, t_end, cfg.stride)
        op, gal, c = _fourier_runs(cfg, grid, kernels, V0, m0)
        tr = ens.trajectory
        mean, se = tr.values, tr.stderr
        rows = []
        for i, t in enumerate(tr.times):
            for a, K in enumerate(kernels.modes):
                rows.append([float(t), int(K), float(mean[i, a].real), float(se[i, a].real),
                             float(op.values[i, a].real), float(gal.values[i, a].real)])
        m2, s2 = _split_complex(mean), _split_complex(se)
        o2, g2 = _split_complex(op.values), _split_complex(gal.values)
        summary = {
            "m0": m0, "c": c, "V0_re": V0.real.tolist(), "V0_im": V0.imag.tolist(),
            "rms_op": _rms_in_time(op.values, mean), "rms_galerkin": _rms_in_time(gal.values, mean),
            "exit_time_op": _exit_time(tr.times, o2, m2, s2),
            "exit_time_galerkin": _exit_time(tr.times, g2, m2, s2),
            "n_members": ens.n_samples, "excluded": ens.excluded,
            "acceptance_rate": ens.acceptance_rate,
        }
        cols = ["t", "mode", "ensemble_mean_re", "ensemble_stderr", "op_re", "galerkin_re"]
        return Table(cols, rows, summary)
    b = _b_value(cfg, m0, grid)
    Vp0, Vq0 = _gaussian_v0(cfg, spec, kernels)
    V0 = Vq0 + 1j * Vp0
    ens = ensemble_truth(spec, kernels, V0, cfg.sampler(), cfg.dt, t_end, cfg.stride)
    o0, o1 = _gaussian_runs(cfg, grid, kernels, Vp0, Vq0, m0, b)
    tr = ens.trajectory
    names = _variable_names(kernels.N)
    rows = [[float(t), names[a], float(tr.values[i, a]), float(tr.stderr[i, a]),
             float(o0.values[i, a]), float(o1.values[i, a])]
            for i, t in enumerate(tr.times) for a in range(len(names))]
    err0 = np.abs(o0.values[-1] - tr.values[-1])
    err1 = np.abs(o1.values[-1] - tr.values[-1])
    summary = {
        "m0": m0, "b": b, "T": cfg.T, "Vp0": Vp0.tolist(), "Vq0": Vq0.tolist(),
        "endpoint_error_order0": err0.tolist(), "endpoint_error_order1": err1.tolist(),
        "endpoint_abs_V": float(np.linalg.norm(tr.values[-1])),
        "n_members": ens.n_samples, "excluded": ens.excluded, "acceptance_rate": ens.acceptance_rate,
    }
    cols = ["t", "variable", "ensemble_mean", "ensemble_stderr", "op_order0", "op_order1"]
    return Table(cols, rows, summary)


EXPERIMENTS = {
    "partition-fit": exp_partition_fit,
    "correlation-check": exp_correlation_check,
    "moments-compare": exp_moments_compare,
    "c-scan": exp_c_scan,
    "evolve": exp_evolve,
    "ensemble-compare": exp_ensemble_compare,
}


# --------------------------------------------------------------------------
# config parsing and output


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_ALIASES = {"t-end": "t_end", "n-samples": "n_samples", "burn-in": "burn_in",
            "proposal-scale": "proposal_scale"}


def _floats(text):
    return tuple(float(x) for x in str(text).replace(",", " ").split())


def _coerce(key, value):
    """Turn a textual value into the type of config field ``key``."""
    if key in ("m0", "b"):
        return "fit" if str(value).strip().lower() == "fit" else float(value)
    if key in ("centers", "v0"):
        return _floats(value)
    if key in ("n", "N", "seed", "n_samples", "order", "workers", "chains", "burn_in",
               "thinning", "stride"):
        f = float(value)
        if f != int(f):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(f)
    if key in ("T", "sigma", "dt", "t_end", "proposal_scale"):
        return float(value)
    return str(value).strip()


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key.replace("-", "_"))
        if key not in _FIELDS or key == "experiment":
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(key, value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return out


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def render_table(table: Table, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(table.columns)
        for row in table.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()
    payload = {"columns": table.columns, "rows": table.rows, "summary": table.summary}
    return json.dumps(_jsonable(payload), indent=1, sort_keys=False) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _manifest(cfg, table, path, wall, started):
    from . import __version__
    config = asdict(cfg)
    config["m0"] = cfg.resolved_m0()
    config["t_end"] = cfg.resolved_t_end()
    return _jsonable({
        "experiment": cfg.experiment,
        "config": config,
        "seed": cfg.seed,
        "versions": {"optpredict": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "started_at": started,
        "wall_time_s": wall,
        "output": str(path),
        "columns": table.columns,
        "summary": table.summary,
    })


def manifest_path(path: Path) -> Path:
    return path.with_name(path.stem + ".manifest.json")


def run_experiment(cfg: ExperimentConfig) -> Table:
    cfg.validate()
    return EXPERIMENTS[cfg.experiment](cfg)


def run(cfg: ExperimentConfig) -> int:
    """Validate, run, and write outputs.  Returns the exit status."""
    try:
        cfg.validate()
        path = cfg.output_path()
        if path.parent and not path.parent.exists():
            raise ConfigError(f"output directory {path.parent} does not exist")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    try:
        table = EXPERIMENTS[cfg.experiment](cfg)
    except (KernelError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (DivergenceError, ConditioningError, DegenerateSeriesError, np.linalg.LinAlgError,
            ArithmeticError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    wall = time.perf_counter() - t0
    try:
        path.write_text(render_table(table, cfg.format), encoding="utf-8", newline="\n")
        manifest_path(path).write_text(
            json.dumps(_manifest(cfg, table, path, wall, started), indent=1) + "\n",
            encoding="utf-8", newline="\n")
    except OSError as exc:
        print(f"error: cannot write output {path}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(json.dumps(_jsonable(table.summary)))
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="optpredict", description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=sorted(EXPERIMENTS))
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("--n", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--m0", help="mass parameter or 'fit'")
    p.add_argument("--b", help="partition shift or 'fit'")
    p.add_argument("--T", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--centers", help="comma-separated kernel centers")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--order", type=int)
    p.add_argument("--kernel", choices=["fourier", "gaussian"])
    p.add_argument("--output")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--workers", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--thinning", type=int)
    p.add_argument("--proposal-scale", dest="proposal_scale", type=float)
    p.add_argument("--stride", type=int)
    p.add_argument("--v0", help="initial V^p then V^q for Gaussian kernels, comma-separated")
    return p


def config_from_args(argv=None) -> ExperimentConfig:
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        values.update(parse_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("config", "experiment") or value is None:
            continue
        try:
            values[key] = _coerce(key, value)
        except ValueError as exc:
            raise ConfigError(f"bad value for --{key}: {value!r}") from exc
    return ExperimentConfig(experiment=args.experiment, **values)


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())

"""Ensemble orchestration: run trajectories, merge statistics, write CSVs.

One experiment = K independent trajectories under one base seed (stream id
= trajectory index), statistics computed per run, then merged by index so
results do not depend on scheduling.  Output files follow the fixed CSV
schemas (`lag,cf,stderr`, `lag,kurt,stderr`, `bin_center,density`,
`tau,C_tau`) plus JSON summaries and an atomically written manifest.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import stats as st
from .bath import BathStatistics, check_compatibility, estimate_m, \
    run_fast_subsystem, sample_uniform_sphere
from .config import (CF_SPECS, DENSITY_SPECS, DESK, KURT_SPECS, PAPER,
                     ExperimentConfig, manifest_payload, write_manifest)
from .integrate import (BlowupError, FullTriadModel, StepperConfig,
                        integrate_trajectory)
from .model import (CoefficientSet, SystemState, builtin_paper_model,
                    projected_builtin_model)
from .reduced import ReducedParams, ReducedState, run_reduced
from .series import RngStream, TimeSeries


class NumericalFailure(RuntimeError):
    """Too many trajectories aborted (blow-up) for a meaningful ensemble."""


def resolve_coefficients(spec: str) -> CoefficientSet:
    """builtin -> projected tables (exact conservation); builtin-raw -> the
    printed tables verbatim; anything else is a JSON file path."""
    if spec == "builtin":
        return projected_builtin_model()
    if spec == "builtin-raw":
        return builtin_paper_model()
    return CoefficientSet.load(spec)


def stationary_std(gamma: float, sigma: float) -> float:
    return float(np.sqrt(sigma * sigma / (2.0 * gamma)))


def draw_initial_full(gen: np.random.Generator, gamma: float, sigma: float,
                      n: int) -> SystemState:
    """Stationary-law initial condition: the invariant measure of the full
    model is a product of identical centered Gaussians."""
    sd = stationary_std(gamma, sigma)
    x0 = sd * gen.standard_normal()
    y0 = sd * gen.standard_normal(n)
    return SystemState(x=float(x0), y=y0)


def draw_initial_reduced(gen: np.random.Generator, params: ReducedParams
                         ) -> ReducedState:
    """x from its Gaussian marginal; E as the squared norm of n stationary
    Gaussian amplitudes (the chi-squared-shaped stationary energy law)."""
    sd = stationary_std(params.gamma, params.sigma)
    x0 = sd * gen.standard_normal()
    g = sd * gen.standard_normal(params.n)
    return ReducedState(x=float(x0), E=float(np.dot(g, g)))


def energy_series(ts: TimeSeries) -> TimeSeries:
    """Diagnostic bath energy from the recorded fast modes of a full-model
    trajectory."""
    y_cols = [i for i, name in enumerate(ts.names) if name.startswith("y")]
    e = (np.asarray(ts.values)[:, y_cols] ** 2).sum(axis=1)
    return TimeSeries(dt_sample=ts.dt_sample, values=e, names=("E",),
                      t0=ts.t0, seed=ts.seed)


def _cf_spec_for(var: str) -> dict:
    return CF_SPECS.get(var, CF_SPECS["y"] if var.startswith("y")
                        else CF_SPECS["x"])


def _decimated(series: TimeSeries, target_dt: float) -> TimeSeries:
    factor = max(1, round(target_dt / series.dt_sample))
    return series.decimate(factor)


@dataclass
class TrajectoryStats:
    """Per-trajectory statistics, small enough to keep K of them around."""

    index: int
    var_x: float
    mean_e: float
    var_e: float
    cf: dict
    kurt: dict
    ct: dict
    density_counts: dict
    density_total: dict
    clamp_count: int = 0
    n_steps: int = 0


def _compute_trajectory_stats(index: int, columns: dict[str, TimeSeries],
                              kurt_vars: tuple[str, ...] = ("x", "E"),
                              ) -> TrajectoryStats:
    x_vals = columns["x"].values
    e_vals = columns["E"].values
    cf = {}
    ct = {}
    for var, series in columns.items():
        spec = _cf_spec_for(var)
        dec = _decimated(series, spec["sample_dt"])
        # short desk runs clip the lag window to keep 5x coverage
        max_lag = min(spec["max_lag"], dec.duration / 5.0)
        curve = st.correlation_function(dec, max_lag)
        cf[var] = curve
        ct[var] = st.correlation_time(curve)
    kurt = {}
    for var in kurt_vars:
        if var not in columns:
            continue
        spec = KURT_SPECS[var]
        dec = _decimated(columns[var], spec["sample_dt"])
        max_lag = min(spec["max_lag"], dec.duration / 5.0)
        kurt[var] = st.lagged_kurtosis(dec, max_lag)
    density_counts = {}
    density_total = {}
    for var in ("x", "E"):
        spec = DENSITY_SPECS[var]
        edges = np.linspace(spec["range"][0], spec["range"][1],
                            spec["bins"] + 1)
        counts, _ = np.histogram(columns[var].values, bins=edges)
        density_counts[var] = counts
        density_total[var] = len(columns[var].values)
    return TrajectoryStats(
        index=index, var_x=float(np.var(x_vals)),
        mean_e=float(np.mean(e_vals)), var_e=float(np.var(e_vals)),
        cf=cf, kurt=kurt, ct=ct, density_counts=density_counts,
        density_total=density_total)


def _run_one(config: ExperimentConfig, coeffs: CoefficientSet, k: int,
             traj_path: Path | None):
    """Integrate trajectory k and reduce it to statistics.  Returns None if
    the trajectory blew up."""
    stream = RngStream(seed=config.seed, stream_id=k)
    gen = stream.generator()
    dt = config.resolved_dt()
    stride = config.resolved_stride()
    scfg = StepperConfig(dt=dt, scheme=config.scheme, record_stride=stride)
    discard = config.transient_discard
    if discard is None:
        discard = max(10.0 / coeffs.gamma, 0.01 * config.T)

    clamp_count = 0
    if config.model == "full":
        params = coeffs.params(config.epsilon)
        model = FullTriadModel(params, coeffs)
        init = draw_initial_full(gen, coeffs.gamma, coeffs.sigma, coeffs.n)
        try:
            ts = integrate_trajectory(model, init, scfg, config.T, gen)
        except BlowupError:
            return None
        if traj_path is not None:
            ts.to_csv(traj_path)
        ts = ts.drop_initial(discard)
        columns = {"x": ts.column("x"), "E": energy_series(ts)}
        if config.with_y_stats:
            for j in range(1, coeffs.n + 1):
                columns[f"y{j}"] = ts.column(f"y{j}")
        n_steps = round(config.T / dt)
    elif config.model == "reduced":
        params = ReducedParams(coeffs.gamma, coeffs.sigma, coeffs.n,
                               float(config.M))
        init = draw_initial_reduced(gen, params)
        try:
            res = run_reduced(params, init, scfg, config.T, gen)
        except BlowupError:
            return None
        if traj_path is not None:
            res.series.to_csv(traj_path)
        ts = res.series.drop_initial(discard)
        columns = {"x": ts.column("x"), "E": ts.column("E")}
        clamp_count = res.clamp_count
        n_steps = res.n_steps
    else:
        raise ValueError("ensemble statistics run only the full or reduced "
                         "model; use estimate-m for the bath")
    tstats = _compute_trajectory_stats(k, columns)
    tstats.clamp_count = clamp_count
    tstats.n_steps = n_steps
    return tstats


@dataclass
class EnsembleResult:
    config: ExperimentConfig
    runs: list[TrajectoryStats]
    aborted: list[int]
    merged_cf: dict
    merged_kurt: dict
    ct: dict
    ct_spread: dict
    var_x: float
    mean_e: float
    var_e: float
    densities: dict
    l1: dict
    clamp_counts: list[int]

    @property
    def total_steps(self) -> int:
        return sum(r.n_steps for r in self.runs)


def simulate_ensemble(config: ExperimentConfig,
                      coeffs: CoefficientSet | None = None,
                      out_dir: Path | None = None) -> EnsembleResult:
    """Run the K-trajectory ensemble and merge statistics by index."""
    if coeffs is None:
        coeffs = resolve_coefficients(config.coeffs)
    traj_paths = [None] * config.K
    if config.save_trajectories and out_dir is not None:
        traj_paths = [out_dir / f"trajectory_{k:03d}.csv"
                      for k in range(config.K)]

    results: list = [None] * config.K
    if config.jobs > 1 and config.K > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            futs = {pool.submit(_run_one, config, coeffs, k, traj_paths[k]): k
                    for k in range(config.K)}
            for fut, k in futs.items():
                results[k] = fut.result()
    else:
        for k in range(config.K):
            results[k] = _run_one(config, coeffs, k, traj_paths[k])

    aborted = [k for k, r in enumerate(results) if r is None]
    runs = [r for r in results if r is not None]
    if len(aborted) > 0.2 * config.K or not runs:
        raise NumericalFailure(
            f"{len(aborted)}/{config.K} trajectories blew up")
    return merge_ensemble(config, coeffs, runs, aborted)


def merge_ensemble(config: ExperimentConfig, coeffs: CoefficientSet,
                   runs: list[TrajectoryStats],
                   aborted: list[int] | None = None) -> EnsembleResult:
    """Merge per-trajectory statistics.  Separated from the run loop so a
    stream subset of a larger ensemble can be re-merged (stream k of one
    base seed is the same trajectory in any ensemble size)."""
    aborted = aborted or []
    merged_cf = {}
    ct = {}
    ct_spread = {}
    for var in runs[0].cf:
        merged = st.ensemble_average([r.cf[var] for r in runs])
        merged_cf[var] = merged
        curve = st.CorrelationCurve(lags=merged.lags, values=merged.values,
                                    variance=1.0,
                                    stderr=merged.stderr
                                    if merged.stderr is not None
                                    else np.zeros_like(merged.values))
        ct[var] = st.correlation_time(curve)
        per_run = np.array([r.ct[var] for r in runs])
        ct_spread[var] = float(per_run.std(ddof=1) / np.sqrt(len(runs))) \
            if len(runs) > 1 else float("nan")
    merged_kurt = {var: st.ensemble_average([r.kurt[var] for r in runs])
                   for var in runs[0].kurt}

    densities = {}
    for var in runs[0].density_counts:
        spec = DENSITY_SPECS[var]
        edges = np.linspace(spec["range"][0], spec["range"][1],
                            spec["bins"] + 1)
        counts = np.sum([r.density_counts[var] for r in runs], axis=0)
        in_range = counts.sum()
        widths = np.diff(edges)
        density = counts / (in_range * widths) if in_range else counts * 0.0
        densities[var] = st.DensityEstimate(bin_edges=edges, density=density,
                                            count=int(in_range))

    params = coeffs.params(config.epsilon or 1.0)
    l1 = {
        "x": st.density_l1_distance(densities["x"],
                                    st.analytic_density_x(params)),
        "E": st.density_l1_distance(densities["E"],
                                    st.analytic_density_e(params)),
    }
    return EnsembleResult(
        config=config, runs=runs, aborted=aborted, merged_cf=merged_cf,
        merged_kurt=merged_kurt, ct=ct, ct_spread=ct_spread,
        var_x=float(np.mean([r.var_x for r in runs])),
        mean_e=float(np.mean([r.mean_e for r in runs])),
        var_e=float(np.mean([r.var_e for r in runs])),
        densities=densities, l1=l1,
        clamp_counts=[r.clamp_count for r in runs])


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def write_curve_csv(path: Path, lags, values, stderr,
                    value_name: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"lag,{value_name},stderr\n")
        se = stderr if stderr is not None else np.full(len(lags), np.nan)
        for l, v, s in zip(lags, values, se):
            fh.write(f"{_fmt(l)},{_fmt(v)},{_fmt(s)}\n")


def write_density_csv(path: Path, est: st.DensityEstimate) -> None:
    with open(path, "w") as fh:
        fh.write("bin_center,density\n")
        for c, d in zip(est.centers, est.density):
            fh.write(f"{_fmt(c)},{_fmt(d)}\n")


def write_analytic_density_csv(path: Path, pdf, grid) -> None:
    with open(path, "w") as fh:
        fh.write("bin_center,density\n")
        for c, d in zip(grid, pdf(grid)):
            fh.write(f"{_fmt(c)},{_fmt(d)}\n")


def write_bath_csv(path: Path, bath: BathStatistics) -> None:
    with open(path, "w") as fh:
        fh.write("tau,C_tau\n")
        for t, c in zip(bath.tau_grid, bath.C_curve):
            fh.write(f"{_fmt(t)},{_fmt(c)}\n")


def bath_summary(bath: BathStatistics) -> dict:
    return {
        "M": bath.M,
        "E_level": bath.E_level,
        "tau_max": bath.tau_max,
        "first_moments": list(bath.compatibility.first_moments)
        if bath.compatibility else [],
        "max_abs_mixed_moment": bath.compatibility.max_abs_mixed
        if bath.compatibility else None,
        "stderr_M": bath.stderr_M,
        "raw_area": bath.raw_area,
        "decayed": bath.decayed,
        "compatibility_passed": bath.compatibility.passed
        if bath.compatibility else None,
    }


def write_ensemble_outputs(result: EnsembleResult, out_dir: Path,
                           tag: str = "") -> list[str]:
    """Write merged CF/kurtosis/density CSVs; returns the file names."""
    out_dir.mkdir(parents=True, exist_ok=True)
    suffix = f"_{tag}" if tag else ""
    files = []
    for var, merged in result.merged_cf.items():
        name = f"cf_{var}{suffix}.csv"
        write_curve_csv(out_dir / name, merged.lags, merged.values,
                        merged.stderr, "cf")
        files.append(name)
    for var, merged in result.merged_kurt.items():
        name = f"kurt_{var}{suffix}.csv"
        write_curve_csv(out_dir / name, merged.lags, merged.values,
                        merged.stderr, "kurt")
        files.append(name)
    for var, est in result.densities.items():
        name = f"density_{var}{suffix}.csv"
        write_density_csv(out_dir / name, est)
        files.append(name)
    return files


def ensemble_summary(result: EnsembleResult) -> dict:
    cfg = result.config
    return {
        "model": cfg.model,
        "epsilon": cfg.epsilon,
        "T": cfg.T,
        "K": cfg.K,
        "dt": cfg.resolved_dt(),
        "seed": cfg.seed,
        "variance_x": result.var_x,
        "mean_E": result.mean_e,
        "variance_E": result.var_e,
        "ct": result.ct,
        "ct_stderr": result.ct_spread,
        "density_l1_vs_analytic": result.l1,
        "clamp_counts": result.clamp_counts,
        "total_steps": result.total_steps,
        "aborted_runs": result.aborted,
    }

"""Command-line interface.

Verbs: validate, estimate-m, simulate, reproduce, stats.  Exit codes:
0 success, 1 validation/tolerance failure, 2 usage or parse error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .bath import check_rescaling, estimate_m
from .config import (DESK, PAPER, ExperimentConfig, manifest_payload,
                     write_manifest)
from .harness import (NumericalFailure, bath_summary, ensemble_summary,
                      resolve_coefficients, simulate_ensemble,
                      write_bath_csv, write_ensemble_outputs)
from .integrate import BlowupError, IntegrationError
from .model import StructureError, project_to_conservative, \
    validate_conservation
from .reproduce import FIGURE_IDS, reproduce_figure
from .series import TimeSeries

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file mirroring ExperimentConfig")
    p.add_argument("--seed", type=int, default=0, help="base RNG seed")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallel trajectories")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--paper-scale", action="store_true",
                   help="published run lengths and ensemble sizes instead "
                        "of desk presets")
    p.add_argument("--coeffs", default="builtin",
                   help="builtin | builtin-raw | path to a coefficient "
                        "JSON file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="triadred",
        description="Simulate and validate the stochastic mode reduction "
                    "of a triad system with a conservative fast bath")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate",
                       help="check triad conservation constraints")
    _common_flags(p)
    p.add_argument("--tol", type=float, default=5e-4)
    p.add_argument("--projected", action="store_true",
                   help="repair constraints before validating")

    p = sub.add_parser("estimate-m",
                       help="bath constant from a microcanonical run")
    _common_flags(p)
    p.add_argument("--e-level", type=float, default=None,
                   help="energy shell (default: n)")
    p.add_argument("--levels", default=None,
                   help="comma-separated shells for a rescaling check")
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--tau-cap", type=float, default=5.0)

    p = sub.add_parser("simulate", help="ensemble run with statistics")
    _common_flags(p)
    p.add_argument("--model", choices=("full", "reduced"), required=False)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--m", type=float, default=None,
                   help="bath constant for the reduced model")
    p.add_argument("--m-from", default=None,
                   help="summary.json from estimate-m to read M from")
    p.add_argument("--save-trajectories", action="store_true")
    p.add_argument("--with-y-stats", action="store_true")

    p = sub.add_parser("reproduce",
                       help="emit the CSV bundle behind one published figure"
                            " or table")
    _common_flags(p)
    p.add_argument("--figure", choices=sorted(FIGURE_IDS), required=True)
    p.add_argument("--m", type=float, default=None)

    p = sub.add_parser("stats",
                       help="recompute statistics from saved trajectories")
    _common_flags(p)
    p.add_argument("--in", dest="in_dir", required=True,
                   help="directory containing trajectory_*.csv and "
                        "manifest.json")
    return ap


def _out_dir(args, default: str) -> Path:
    out = Path(args.out) if args.out else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_validate(args) -> int:
    try:
        cs = resolve_coefficients(args.coeffs)
    except (StructureError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: cannot read coefficients: {exc}", file=sys.stderr)
        return EXIT_USAGE
    xyy, yyy = cs.xyy, cs.yyy
    if args.projected:
        proj = project_to_conservative(xyy, yyy)
        xyy, yyy = proj.xyy, proj.yyy
    try:
        report = validate_conservation(xyy, yyy, cs.n, args.tol)
    except StructureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"{len(xyy)} xyy triads, {len(yyy)} yyy triads, "
          f"tol={args.tol:g}")
    print(f"max |residual| = {report.max_abs_residual:.3e}")
    if not report.passed:
        for label, res in report.residuals:
            if abs(res) > args.tol:
                print(f"  {label}: residual {res:.3e}")
        print("FAIL")
        return EXIT_TOLERANCE
    print("PASS")
    return EXIT_OK


def cmd_estimate_m(args) -> int:
    out = _out_dir(args, "runs/estimate-m")
    cs = resolve_coefficients(args.coeffs)
    T = args.T if args.T is not None else \
        (PAPER if args.paper_scale else DESK)["bath_T"]
    t0 = time.time()
    outputs = []
    if args.levels:
        levels = [float(v) for v in args.levels.split(",")]
        report = check_rescaling(cs.xyy, cs.yyy, n=cs.n, E_levels=levels,
                                 seed=args.seed, dt=args.dt, T=T,
                                 tau_cap=args.tau_cap)
        for level, stats in zip(report.levels, report.stats):
            name = f"bath_stats_E{level:g}.csv"
            write_bath_csv(out / name, stats)
            outputs.append(name)
        doc = {
            "levels": list(report.levels),
            "compensated_M": list(report.compensated),
            "compensated_stderr": list(report.compensated_stderr),
            "raw_areas": list(report.raw_areas),
            "ratios": {
                f"{report.levels[i]:g}/{report.levels[j]:g}": {
                    "measured": report.raw_ratio(i, j),
                    "expected": report.expected_ratio(i, j),
                }
                for i in range(len(report.levels))
                for j in range(i + 1, len(report.levels))
            },
            "passed": report.passed,
        }
        (out / "rescaling.json").write_text(json.dumps(doc, indent=2) + "\n")
        outputs.append("rescaling.json")
        print(json.dumps(doc, indent=2))
        rc = EXIT_OK if report.passed else EXIT_TOLERANCE
    else:
        from .series import RngStream
        stats = estimate_m(cs.xyy, cs.yyy, n=cs.n, E_level=args.e_level,
                           dt=args.dt, T=T, tau_cap=args.tau_cap,
                           rng=RngStream(seed=args.seed))
        write_bath_csv(out / "bath_stats.csv", stats)
        outputs.append("bath_stats.csv")
        doc = bath_summary(stats)
        (out / "summary.json").write_text(
            json.dumps(doc, indent=2, default=float) + "\n")
        outputs.append("summary.json")
        print(f"M = {stats.M:.6g} +- {stats.stderr_M:.2g} "
              f"(E_level={stats.E_level:g}, tau_max={stats.tau_max:g})")
        rc = EXIT_OK
    cfg = ExperimentConfig(model="fast", T=T, K=1, dt=args.dt,
                           seed=args.seed, coeffs=args.coeffs,
                           out_dir=str(out))
    write_manifest(out / "manifest.json", manifest_payload(
        cfg, seeds=[{"seed": args.seed, "stream": i}
                    for i in range(len(args.levels.split(","))
                                   if args.levels else 1)],
        outputs=outputs, wallclock=time.time() - t0,
        m_provenance=f"estimated(seed={args.seed})"))
    return rc


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_json_file(args.config)
        overrides = {}
        for key, val in (("model", args.model), ("epsilon", args.epsilon),
                         ("T", args.T), ("K", args.K), ("dt", args.dt),
                         ("M", args.m)):
            if val is not None:
                overrides[key] = val
        if args.seed:
            overrides["seed"] = args.seed
        if args.jobs != 1:
            overrides["jobs"] = args.jobs
        if args.save_trajectories:
            overrides["save_trajectories"] = True
        if args.with_y_stats:
            overrides["with_y_stats"] = True
        if overrides:
            doc = cfg.to_dict()
            doc.update(overrides)
            cfg = ExperimentConfig.from_dict(doc)
        return cfg
    if args.model is None:
        raise ValueError("either --config or --model is required")
    scale = PAPER if args.paper_scale else DESK
    model = args.model
    T = args.T if args.T is not None else (
        scale["T_full"] if model == "full" else scale["T_reduced"])
    K = args.K if args.K is not None else scale["K"]
    m_value = args.m
    m_source = "user"
    if m_value is None and args.m_from:
        doc = json.loads(Path(args.m_from).read_text())
        m_value = float(doc["M"])
        m_source = args.m_from
    return ExperimentConfig(
        model=model, T=T, K=K, epsilon=args.epsilon, dt=args.dt,
        seed=args.seed, coeffs=args.coeffs, M=m_value, M_source=m_source,
        jobs=args.jobs, save_trajectories=args.save_trajectories,
        with_y_stats=args.with_y_stats,
        out_dir=args.out or f"runs/{model}")


def cmd_simulate(args) -> int:
    try:
        cfg = _config_from_args(args)
    except (ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.model == "reduced" and cfg.M is None:
        print("error: reduced model needs --m or --m-from", file=sys.stderr)
        return EXIT_USAGE
    out = _out_dir(args, cfg.out_dir)
    t0 = time.time()
    result = simulate_ensemble(cfg, out_dir=out)
    files = write_ensemble_outputs(result, out)
    summary = ensemble_summary(result)
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, default=float) + "\n")
    files.append("summary.json")
    if cfg.save_trajectories:
        files += [f"trajectory_{k:03d}.csv" for k in range(cfg.K)
                  if k not in result.aborted]
    write_manifest(out / "manifest.json", manifest_payload(
        cfg, seeds=[{"seed": cfg.seed, "stream": k} for k in range(cfg.K)],
        outputs=files, wallclock=time.time() - t0,
        m_provenance=cfg.M_source if cfg.model == "reduced" else None,
        clamp_counts=result.clamp_counts, aborted=result.aborted))
    print(json.dumps(summary, indent=2, default=float))
    return EXIT_OK


def cmd_reproduce(args) -> int:
    out = _out_dir(args, f"runs/reproduce/{args.figure}")
    scale = "paper" if args.paper_scale else "desk"
    reproduce_figure(args.figure, out_dir=out, scale=scale, seed=args.seed,
                     jobs=args.jobs, m_value=args.m,
                     coeffs_spec=args.coeffs)
    print(f"wrote {args.figure} bundle to {out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    in_dir = Path(args.in_dir)
    manifest_path = in_dir / "manifest.json"
    if not manifest_path.exists():
        print(f"error: no manifest.json in {in_dir}", file=sys.stderr)
        return EXIT_USAGE
    manifest = json.loads(manifest_path.read_text())
    cfg = ExperimentConfig.from_dict(manifest["config"])
    trajs = sorted(in_dir.glob("trajectory_*.csv"))
    if not trajs:
        print(f"error: no trajectory_*.csv in {in_dir}", file=sys.stderr)
        return EXIT_USAGE
    from .harness import (TrajectoryStats, _compute_trajectory_stats,
                          energy_series)
    from . import stats as st
    out = _out_dir(args, str(in_dir))
    runs = []
    discard = cfg.transient_discard
    if discard is None:
        discard = max(10.0, 0.01 * cfg.T)
    for k, path in enumerate(trajs):
        ts = TimeSeries.from_csv(path).drop_initial(discard)
        if cfg.model == "full":
            columns = {"x": ts.column("x"), "E": energy_series(ts)}
            if cfg.with_y_stats:
                for name in ts.names:
                    if name.startswith("y"):
                        columns[name] = ts.column(name)
        else:
            columns = {"x": ts.column("x"), "E": ts.column("E")}
        runs.append(_compute_trajectory_stats(k, columns))
    files = []
    for var in runs[0].cf:
        merged = st.ensemble_average([r.cf[var] for r in runs])
        from .harness import write_curve_csv
        name = f"cf_{var}.csv"
        write_curve_csv(out / name, merged.lags, merged.values,
                        merged.stderr, "cf")
        files.append(name)
    print(f"recomputed statistics for {len(runs)} trajectories -> {out}")
    return EXIT_OK


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    handlers = {
        "validate": cmd_validate,
        "estimate-m": cmd_estimate_m,
        "simulate": cmd_simulate,
        "reproduce": cmd_reproduce,
        "stats": cmd_stats,
    }
    try:
        return handlers[args.command](args)
    except (StructureError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, BlowupError, IntegrationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

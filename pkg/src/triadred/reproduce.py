"""Recipes that emit the CSV bundles behind the published figures and the
correlation-time table, at desk scale by default."""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from . import stats as st
from .bath import estimate_m
from .config import (DENSITY_SPECS, DESK, PAPER, ExperimentConfig,
                     manifest_payload, write_manifest)
from .harness import (ensemble_summary, resolve_coefficients,
                      simulate_ensemble, write_analytic_density_csv,
                      write_curve_csv, write_density_csv)
from .series import RngStream

FIGURE_IDS = frozenset({"fig1", "cfx_full", "cfe_full", "pdf_E",
                        "cf_compare", "kurt_compare", "ct_table"})


def _eps_tag(eps: float) -> str:
    return f"{eps:g}"


def _resolve_m(m_value, coeffs, scale_cfg, seed) -> tuple[float, str]:
    if m_value is not None:
        return float(m_value), "user"
    bath = estimate_m(coeffs.xyy, coeffs.yyy, n=coeffs.n,
                      T=scale_cfg["bath_T"],
                      rng=RngStream(seed=seed, stream_id=1000))
    return bath.M, f"estimated(seed={seed},T={scale_cfg['bath_T']:g})"


def _run_full(coeffs_spec, eps, scale_cfg, seed, jobs, with_y=False):
    cfg = ExperimentConfig(model="full", epsilon=eps, T=scale_cfg["T_full"],
                           K=scale_cfg["K"], seed=seed, jobs=jobs,
                           coeffs=coeffs_spec, with_y_stats=with_y)
    return cfg, simulate_ensemble(cfg)


def _run_reduced(coeffs_spec, m, m_src, scale_cfg, seed, jobs):
    cfg = ExperimentConfig(model="reduced", T=scale_cfg["T_reduced"],
                           K=scale_cfg["K"], seed=seed, jobs=jobs,
                           coeffs=coeffs_spec, M=m, M_source=m_src)
    return cfg, simulate_ensemble(cfg)


def reproduce_figure(figure_id: str, *, out_dir: Path, scale: str = "desk",
                     seed: int = 0, jobs: int = 1, m_value=None,
                     coeffs_spec: str = "builtin") -> list[str]:
    """Compute and write the data bundle for one figure id.  Returns the
    list of files written (manifest included)."""
    if figure_id not in FIGURE_IDS:
        raise ValueError(f"unknown figure id {figure_id!r}; "
                         f"expected one of {sorted(FIGURE_IDS)}")
    scale_cfg = PAPER if scale == "paper" else DESK
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    coeffs = resolve_coefficients(coeffs_spec)
    t0 = time.time()
    files: list[str] = []
    configs: list[dict] = []
    m_prov = None

    def _write_curve(name, merged, col):
        write_curve_csv(out_dir / name, merged.lags, merged.values,
                        merged.stderr, col)
        files.append(name)

    if figure_id == "fig1":
        cfg, res = _run_full(coeffs_spec, 1.0, scale_cfg, seed, jobs,
                             with_y=True)
        configs.append(cfg.to_dict())
        for var in ("x", "E", "y2", "y7"):
            _write_curve(f"cf_{var}.csv", res.merged_cf[var], "cf")

    elif figure_id in ("cfx_full", "cfe_full"):
        var = "x" if figure_id == "cfx_full" else "E"
        for eps in scale_cfg["eps_sweep"]:
            cfg, res = _run_full(coeffs_spec, eps, scale_cfg, seed, jobs)
            configs.append(cfg.to_dict())
            _write_curve(f"cf_{var}_eps{_eps_tag(eps)}.csv",
                         res.merged_cf[var], "cf")

    elif figure_id == "pdf_E":
        for eps in scale_cfg["compare_eps"]:
            cfg, res = _run_full(coeffs_spec, eps, scale_cfg, seed, jobs)
            configs.append(cfg.to_dict())
            name = f"density_E_eps{_eps_tag(eps)}.csv"
            write_density_csv(out_dir / name, res.densities["E"])
            files.append(name)
        m, m_prov = _resolve_m(m_value, coeffs, scale_cfg, seed)
        cfg, res = _run_reduced(coeffs_spec, m, m_prov, scale_cfg, seed, jobs)
        configs.append(cfg.to_dict())
        write_density_csv(out_dir / "density_E_reduced.csv",
                          res.densities["E"])
        files.append("density_E_reduced.csv")
        lo, hi = DENSITY_SPECS["E"]["range"]
        grid = np.linspace(lo, hi, 261)
        params = coeffs.params(1.0)
        write_analytic_density_csv(out_dir / "density_E_analytic.csv",
                                   st.analytic_density_e(params), grid)
        files.append("density_E_analytic.csv")

    elif figure_id in ("cf_compare", "kurt_compare"):
        kind = "cf" if figure_id == "cf_compare" else "kurt"
        for eps in scale_cfg["compare_eps"]:
            cfg, res = _run_full(coeffs_spec, eps, scale_cfg, seed, jobs)
            configs.append(cfg.to_dict())
            merged = res.merged_cf if kind == "cf" else res.merged_kurt
            for var in ("x", "E"):
                _write_curve(f"{kind}_{var}_full_eps{_eps_tag(eps)}.csv",
                             merged[var], kind)
        m, m_prov = _resolve_m(m_value, coeffs, scale_cfg, seed)
        cfg, res = _run_reduced(coeffs_spec, m, m_prov, scale_cfg, seed, jobs)
        configs.append(cfg.to_dict())
        merged = res.merged_cf if kind == "cf" else res.merged_kurt
        for var in ("x", "E"):
            _write_curve(f"{kind}_{var}_reduced.csv", merged[var], kind)

    elif figure_id == "ct_table":
        columns = {}
        for eps in scale_cfg["eps_sweep"]:
            cfg, res = _run_full(coeffs_spec, eps, scale_cfg, seed, jobs,
                                 with_y=True)
            configs.append(cfg.to_dict())
            columns[eps] = res.ct
        variables = ["x", "E"] + [f"y{j}" for j in range(1, coeffs.n + 1)]
        eps_list = list(scale_cfg["eps_sweep"])
        with open(out_dir / "ct_table.csv", "w") as fh:
            fh.write("variable," + ",".join(
                f"ct_eps{_eps_tag(e)}" for e in eps_list) + "\n")
            for var in variables:
                row = ",".join(f"{columns[e][var]:.6g}" for e in eps_list)
                fh.write(f"{var},{row}\n")
        files.append("ct_table.csv")

    write_manifest(out_dir / "manifest.json", {
        "figure": figure_id,
        "scale": scale,
        "seed": seed,
        "m_provenance": m_prov,
        "runs": configs,
        "outputs": sorted(files),
        "wallclock_seconds": round(time.time() - t0, 3),
    })
    files.append("manifest.json")
    return files

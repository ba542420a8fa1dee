"""Render the simulation toolkit's CSV bundles into static figures.

Inputs are the `lag,cf,stderr`, `lag,kurt,stderr` and `bin_center,density`
files written by the simulation package's `reproduce` command.  Rendering
never touches the inputs and is deterministic for fixed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

FIGURE_IDS = ("fig1", "cfx_full", "cfe_full", "pdf_E", "cf_compare",
              "kurt_compare")


class RenderError(ValueError):
    """Bad figure request: unknown id, missing or inconsistent inputs."""


@dataclass(frozen=True)
class Curve:
    path: Path
    label: str
    x: np.ndarray
    y: np.ndarray
    stderr: np.ndarray | None


@dataclass(frozen=True)
class FigureSpec:
    """One renderable figure: id, resolved input files, output path."""

    figure_id: str
    in_dir: Path
    out_path: Path
    title: str = ""


def read_curve_csv(path: Path, label: str) -> Curve:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[0] == 0 or data.shape[1] < 2:
        raise RenderError(f"{path}: no data rows")
    stderr = None
    if len(header) >= 3 and data.shape[1] >= 3:
        stderr = data[:, 2]
        if np.all(np.isnan(stderr)):
            stderr = None
    return Curve(path=path, label=label, x=data[:, 0], y=data[:, 1],
                 stderr=stderr)


def check_shared_grid(curves: list[Curve]) -> None:
    """Overlaid curves must share their x grid exactly."""
    if not curves:
        raise RenderError("no input curves resolved")
    ref = curves[0]
    bad = [str(c.path) for c in curves[1:]
           if c.x.shape != ref.x.shape
           or not np.allclose(c.x, ref.x, rtol=1e-10, atol=1e-12)]
    if bad:
        raise RenderError(
            f"x-grid mismatch against {ref.path}: " + ", ".join(bad))


def _eps_label(path: Path) -> str:
    stem = path.stem
    if "eps" in stem:
        return "eps = " + stem.split("eps")[-1].replace("_", " ")
    if "reduced" in stem:
        return "reduced model"
    if "analytic" in stem:
        return "analytic"
    return stem


def _collect(in_dir: Path, pattern: str) -> list[Curve]:
    return [read_curve_csv(p, _eps_label(p))
            for p in sorted(in_dir.glob(pattern))]


def _plot_correlation_panel(ax, curves: list[Curve], ylabel: str,
                            band_sigma: float = 2.0) -> None:
    check_shared_grid(curves)
    for curve in curves:
        line, = ax.plot(curve.x, curve.y, label=curve.label)
        if curve.stderr is not None:
            ax.fill_between(curve.x, curve.y - band_sigma * curve.stderr,
                            curve.y + band_sigma * curve.stderr,
                            alpha=0.2, color=line.get_color())
    ax.set_xlabel("lag tau")
    ax.set_ylabel(ylabel)
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.legend()


def _render_fig1(spec: FigureSpec, fig) -> None:
    names = ["cf_x.csv", "cf_E.csv", "cf_y2.csv", "cf_y7.csv"]
    curves = []
    for name in names:
        path = spec.in_dir / name
        if not path.exists():
            raise RenderError(f"missing input {path}")
        label = name[3:-4].replace("_", "")
        curves.append(read_curve_csv(path, f"CF_{label}"))
    ax = fig.subplots()
    # mixed windows here (slow and fast variables), so no shared-grid
    # requirement; normalized curves share the y scale
    for curve in curves:
        ax.plot(curve.x, curve.y, label=curve.label)
    ax.set_xlim(0, min(curve.x[-1] for curve in curves) * 1.05)
    ax.set_xlabel("lag tau")
    ax.set_ylabel("normalized correlation")
    ax.axhline(0.0, color="gray", lw=0.5)
    ax.legend()


def _render_cf_sweep(spec: FigureSpec, fig, var: str) -> None:
    curves = _collect(spec.in_dir, f"cf_{var}_eps*.csv")
    if not curves:
        raise RenderError(f"no cf_{var}_eps*.csv files in {spec.in_dir}")
    ax = fig.subplots()
    _plot_correlation_panel(ax, curves, f"CF_{var}")


def _render_pdf_e(spec: FigureSpec, fig) -> None:
    hist_curves = _collect(spec.in_dir, "density_E_eps*.csv")
    reduced = spec.in_dir / "density_E_reduced.csv"
    if reduced.exists():
        hist_curves.append(read_curve_csv(reduced, "reduced model"))
    if not hist_curves:
        raise RenderError(f"no density_E_* files in {spec.in_dir}")
    check_shared_grid(hist_curves)
    ax = fig.subplots()
    for curve in hist_curves:
        ax.plot(curve.x, curve.y, drawstyle="steps-mid", label=curve.label)
    analytic = spec.in_dir / "density_E_analytic.csv"
    if analytic.exists():
        a = read_curve_csv(analytic, "analytic")
        ax.plot(a.x, a.y, "k--", label=a.label)
    ax.set_xlabel("E")
    ax.set_ylabel("density")
    ax.legend()


def _render_compare(spec: FigureSpec, fig, kind: str) -> None:
    axes = fig.subplots(1, 2)
    for ax, var in zip(axes, ("x", "E")):
        curves = _collect(spec.in_dir, f"{kind}_{var}_full_eps*.csv")
        reduced = spec.in_dir / f"{kind}_{var}_reduced.csv"
        if reduced.exists():
            curves.append(read_curve_csv(reduced, "reduced model"))
        if not curves:
            raise RenderError(
                f"no {kind}_{var}_* curves in {spec.in_dir}")
        ylabel = f"CF_{var}" if kind == "cf" else f"K_{var}"
        _plot_correlation_panel(ax, curves, ylabel)
        if kind == "kurt":
            ax.axhline(1.0, color="black", lw=0.8, ls=":",
                       label="Gaussian K = 1")
            ax.legend()


_RENDERERS = {
    "fig1": _render_fig1,
    "cfx_full": lambda spec, fig: _render_cf_sweep(spec, fig, "x"),
    "cfe_full": lambda spec, fig: _render_cf_sweep(spec, fig, "E"),
    "pdf_E": _render_pdf_e,
    "cf_compare": lambda spec, fig: _render_compare(spec, fig, "cf"),
    "kurt_compare": lambda spec, fig: _render_compare(spec, fig, "kurt"),
}


def render(spec: FigureSpec) -> Path:
    """Render one figure; returns the output path.  Inputs are read-only
    and rendering the same inputs twice produces the same image."""
    if spec.figure_id not in _RENDERERS:
        raise RenderError(f"unknown figure id {spec.figure_id!r}; "
                          f"expected one of {FIGURE_IDS}")
    if not spec.in_dir.is_dir():
        raise RenderError(f"input directory {spec.in_dir} does not exist")
    width = 11.0 if spec.figure_id in ("cf_compare", "kurt_compare") else 7.0
    fig = plt.figure(figsize=(width, 4.5))
    try:
        _RENDERERS[spec.figure_id](spec, fig)
        if spec.title:
            fig.suptitle(spec.title)
        fig.tight_layout()
        spec.out_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.out_path, dpi=130, metadata={"Software": None})
    finally:
        plt.close(fig)
    return spec.out_path

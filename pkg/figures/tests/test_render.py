import numpy as np
import pytest

from triadfig.cli import main
from triadfig.render import (FigureSpec, RenderError, check_shared_grid,
                             read_curve_csv, render)


def write_curve(path, lags, values, stderr=None, value_col="cf"):
    with open(path, "w") as fh:
        fh.write(f"lag,{value_col},stderr\n")
        se = stderr if stderr is not None else np.full(len(lags), np.nan)
        for l, v, s in zip(lags, values, se):
            fh.write(f"{l:.17g},{v:.17g},{s:.17g}\n")


def write_density(path, centers, density):
    with open(path, "w") as fh:
        fh.write("bin_center,density\n")
        for c, d in zip(centers, density):
            fh.write(f"{c:.17g},{d:.17g}\n")


@pytest.fixture
def cf_compare_bundle(tmp_path):
    lags = np.linspace(0, 5, 101)
    e_lags = np.linspace(0, 40, 81)
    for var, grid, rate in (("x", lags, 3.0), ("E", e_lags, 0.125)):
        base = np.exp(-rate * grid)
        se = np.full(len(grid), 0.01)
        write_curve(tmp_path / f"cf_{var}_full_eps0.25.csv", grid, base, se)
        write_curve(tmp_path / f"cf_{var}_reduced.csv", grid,
                    base * (1 + 0.005 * np.sin(grid)), se)
    return tmp_path


class TestReadCurve:
    def test_round_trip(self, tmp_path):
        lags = np.linspace(0, 1, 11)
        write_curve(tmp_path / "cf_x.csv", lags, np.exp(-lags))
        c = read_curve_csv(tmp_path / "cf_x.csv", "x")
        assert np.allclose(c.x, lags)
        assert c.stderr is None  # all-nan stderr column treated as absent

    def test_empty_file_rejected(self, tmp_path):
        (tmp_path / "cf_x.csv").write_text("lag,cf,stderr\n")
        with pytest.raises(Exception):
            read_curve_csv(tmp_path / "cf_x.csv", "x")


class TestGridChecks:
    def test_mismatch_lists_offending_file(self, tmp_path):
        a = tmp_path / "cf_x_full_eps0.25.csv"
        b = tmp_path / "cf_x_reduced.csv"
        write_curve(a, np.linspace(0, 5, 101), np.ones(101))
        write_curve(b, np.linspace(0, 5, 51), np.ones(51))
        with pytest.raises(RenderError, match="cf_x_reduced"):
            check_shared_grid([read_curve_csv(a, "a"),
                               read_curve_csv(b, "b")])

    def test_render_propagates_mismatch(self, tmp_path):
        lags = np.linspace(0, 5, 101)
        write_curve(tmp_path / "cf_x_eps1.csv", lags, np.exp(-lags))
        write_curve(tmp_path / "cf_x_eps0.5.csv", lags[:51],
                    np.exp(-lags[:51]))
        spec = FigureSpec("cfx_full", tmp_path, tmp_path / "out.png")
        with pytest.raises(RenderError, match="mismatch"):
            render(spec)


class TestRenderFigures:
    def test_empty_bundle_is_usage_error(self, tmp_path):
        spec = FigureSpec("cfx_full", tmp_path, tmp_path / "out.png")
        with pytest.raises(RenderError, match="no cf_x"):
            render(spec)

    def test_unknown_id_rejected(self, tmp_path):
        spec = FigureSpec("nope", tmp_path, tmp_path / "out.png")
        with pytest.raises(RenderError, match="unknown figure id"):
            render(spec)

    def test_cf_compare_renders(self, cf_compare_bundle, tmp_path):
        out = tmp_path / "img" / "cf_compare.png"
        spec = FigureSpec("cf_compare", cf_compare_bundle, out)
        assert render(spec) == out
        assert out.stat().st_size > 0

    def test_rendering_is_idempotent_and_read_only(self, cf_compare_bundle,
                                                   tmp_path):
        inputs = sorted(cf_compare_bundle.glob("*.csv"))
        before = [p.read_bytes() for p in inputs]
        out = tmp_path / "cf_compare.png"
        spec = FigureSpec("cf_compare", cf_compare_bundle, out)
        render(spec)
        first = out.read_bytes()
        render(spec)
        assert out.read_bytes() == first
        assert [p.read_bytes() for p in inputs] == before

    def test_kurt_compare_includes_reference_line(self, tmp_path):
        lags = np.linspace(0, 2, 41)
        for var in ("x", "E"):
            write_curve(tmp_path / f"kurt_{var}_full_eps0.25.csv", lags,
                        1.0 + 0.01 * np.exp(-lags), value_col="kurt")
            write_curve(tmp_path / f"kurt_{var}_reduced.csv", lags,
                        1.0 + 0.012 * np.exp(-lags), value_col="kurt")
        out = tmp_path / "kurt.png"
        render(FigureSpec("kurt_compare", tmp_path, out))
        assert out.exists()

    def test_pdf_bundle_with_analytic_overlay(self, tmp_path):
        centers = np.linspace(1.25, 63.75, 26)
        rho = np.exp(-((centers - 25.0) / 12.0) ** 2)
        rho /= np.trapezoid(rho, centers)
        write_density(tmp_path / "density_E_eps0.25.csv", centers, rho)
        write_density(tmp_path / "density_E_reduced.csv", centers, rho)
        grid = np.linspace(0, 65, 261)
        rho_a = np.exp(-((grid - 25.0) / 12.0) ** 2)
        write_density(tmp_path / "density_E_analytic.csv", grid,
                      rho_a / np.trapezoid(rho_a, grid))
        out = tmp_path / "pdf.png"
        render(FigureSpec("pdf_E", tmp_path, out))
        assert out.exists()

    def test_fig1_requires_all_variables(self, tmp_path):
        lags = np.linspace(0, 3, 61)
        write_curve(tmp_path / "cf_x.csv", lags, np.exp(-3 * lags))
        spec = FigureSpec("fig1", tmp_path, tmp_path / "fig1.png")
        with pytest.raises(RenderError, match="missing input"):
            render(spec)


class TestCli:
    def test_render_via_cli(self, cf_compare_bundle, tmp_path):
        out = tmp_path / "cli.png"
        rc = main(["--figure", "cf_compare", "--in",
                   str(cf_compare_bundle), "--out", str(out)])
        assert rc == 0
        assert out.exists()

    def test_bad_bundle_exit_code(self, tmp_path):
        rc = main(["--figure", "cf_compare", "--in", str(tmp_path),
                   "--out", str(tmp_path / "x.png")])
        assert rc == 2

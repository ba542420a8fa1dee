"""Stationary and two-point statistics for trajectory records.

Correlation functions use the biased (1/N) centered lag-product estimator
normalized to CF(0) = 1; correlation times integrate the normalized curve
to its first drop below a small threshold.  Lagged kurtosis is the ratio of
the raw fourth-order two-point moment to its Gaussian factorization, so it
is identically one for a centered Gaussian process.  Standard errors come
from contiguous origin blocks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from . import kernels
from .series import TimeSeries


class EstimatorError(ValueError):
    """An estimator's input is degenerate (zero variance, empty, ...)."""


class GridMismatchError(ValueError):
    """Curves to be merged do not share a lag/bin grid."""


class DecayWarning(UserWarning):
    """A correlation curve did not decay below threshold inside its window."""


@dataclass(frozen=True)
class CorrelationCurve:
    """Normalized autocorrelation on a uniform lag grid starting at 0."""

    lags: np.ndarray
    values: np.ndarray
    variance: float
    stderr: np.ndarray

    @property
    def dlag(self) -> float:
        return float(self.lags[1] - self.lags[0]) if len(self.lags) > 1 else 0.0


@dataclass(frozen=True)
class KurtosisCurve:
    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray


@dataclass(frozen=True)
class DensityEstimate:
    bin_edges: np.ndarray
    density: np.ndarray
    count: int

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)


def _scalar_values(series: TimeSeries) -> np.ndarray:
    v = np.asarray(series.values, dtype=float)
    if v.ndim != 1:
        raise ValueError("need a scalar series; extract a column first")
    return v


def _lag_setup(series: TimeSeries, max_lag: float, lag_stride: int):
    z = _scalar_values(series)
    dt = series.dt_sample
    if max_lag <= 0:
        raise ValueError("max_lag must be positive")
    if series.duration < 5.0 * max_lag:
        raise ValueError(
            f"series duration {series.duration:.4g} shorter than "
            f"5*max_lag = {5 * max_lag:.4g}")
    n_lags = int(np.floor(max_lag / (dt * lag_stride) + 1e-9)) + 1
    return z, dt, n_lags


def correlation_function(series: TimeSeries, max_lag: float, *,
                         lag_stride: int = 1,
                         n_blocks: int = 20) -> CorrelationCurve:
    """Normalized autocorrelation of a scalar series up to max_lag.

    The caller is responsible for discarding transients first.  lag_stride
    coarsens the lag grid (every lag_stride-th sample) without discarding
    origins.
    """
    z, dt, n_lags = _lag_setup(series, max_lag, lag_stride)
    w = z - z.mean()
    sums = kernels.lag_product_sums(w, w, n_lags, lag_stride)
    raw = sums / len(w)
    variance = raw[0]
    if variance <= 0.0:
        raise EstimatorError("zero variance; cannot normalize")
    blocks = kernels.blocked_lag_product_means(w, w, n_lags, lag_stride, 1,
                                               n_blocks)
    stderr = blocks.std(axis=0, ddof=1) / np.sqrt(n_blocks) / variance
    lags = np.arange(n_lags) * dt * lag_stride
    return CorrelationCurve(lags=lags, values=raw / variance,
                            variance=float(variance), stderr=stderr)


def correlation_time(curve: CorrelationCurve, *, threshold: float = 0.01,
                     convention: str = "area") -> float:
    """Integrated correlation time: area under the normalized curve up to
    its first drop below threshold (or the full window, with a warning).

    convention="inverse_area" returns the reciprocal instead; the tabulated
    values this package is compared against follow the plain area.
    """
    v = np.asarray(curve.values)
    if abs(v[0] - 1.0) > 1e-9:
        raise ValueError("curve must be normalized to CF(0) = 1")
    below = np.nonzero(v < threshold)[0]
    if len(below) == 0:
        warnings.warn(
            f"correlation curve never dropped below {threshold}; "
            "integrating the whole window", DecayWarning)
        stop = len(v) - 1
    else:
        stop = int(below[0])
    area = float(np.trapezoid(v[:stop + 1], dx=curve.dlag))
    if convention == "area":
        return area
    if convention == "inverse_area":
        return 1.0 / area
    raise ValueError(f"unknown convention {convention!r}")


def lagged_kurtosis(series: TimeSeries, max_lag: float, *,
                    lag_stride: int = 1,
                    n_blocks: int = 20) -> KurtosisCurve:
    """Gaussian-normalized fourth-order two-point moment
    <z^2(t) z^2(t+tau)> / ((<z^2>)^2 + 2 <z(t) z(t+tau)>^2),
    with raw (uncentered) moments; identically 1 for centered Gaussians."""
    z, dt, n_lags = _lag_setup(series, max_lag, lag_stride)
    z2 = z * z
    N = len(z)
    m22 = kernels.lag_product_sums(z2, z2, n_lags, lag_stride) / N
    craw = kernels.lag_product_sums(z, z, n_lags, lag_stride) / N
    m2 = z2.mean()
    denom = m2 * m2 + 2.0 * craw * craw
    if np.any(denom == 0.0):
        raise EstimatorError("zero denominator in kurtosis ratio")
    values = m22 / denom

    m22_b = kernels.blocked_lag_product_means(z2, z2, n_lags, lag_stride, 1,
                                              n_blocks)
    craw_b = kernels.blocked_lag_product_means(z, z, n_lags, lag_stride, 1,
                                               n_blocks)
    max_lag_samples = (n_lags - 1) * lag_stride
    n_origins = N - max_lag_samples
    block_len = n_origins // n_blocks
    m2_b = np.array([z2[b * block_len:(b + 1) * block_len].mean()
                     for b in range(n_blocks)])
    denom_b = m2_b[:, None] ** 2 + 2.0 * craw_b ** 2
    k_b = m22_b / denom_b
    stderr = k_b.std(axis=0, ddof=1) / np.sqrt(n_blocks)
    lags = np.arange(n_lags) * dt * lag_stride
    return KurtosisCurve(lags=lags, values=values, stderr=stderr)


def empirical_density(values, n_bins: int,
                      bin_range: tuple[float, float] | None = None
                      ) -> DensityEstimate:
    """Normalized histogram density (integrates to 1 over its range)."""
    v = np.asarray(values, dtype=float).ravel()
    if len(v) == 0:
        raise EstimatorError("empty sample")
    if n_bins < 2:
        raise ValueError("need at least 2 bins")
    density, edges = np.histogram(v, bins=n_bins, range=bin_range,
                                  density=True)
    if not np.any(density > 0):
        raise EstimatorError("no samples fall inside the bin range")
    count = int(len(v))
    return DensityEstimate(bin_edges=edges, density=density, count=count)


def analytic_density_x(params):
    """Stationary density of x: centered Gaussian with variance
    sigma^2/(2 gamma)."""
    var = params.sigma ** 2 / (2.0 * params.gamma)
    return sps.norm(loc=0.0, scale=np.sqrt(var)).pdf


def analytic_density_e(params):
    """Stationary density of the bath energy: s^{(n-2)/2} e^{-s gamma/sigma^2}
    normalized on [0, inf) (a Gamma(n/2) shape with scale sigma^2/gamma);
    mean n sigma^2 / (2 gamma)."""
    return sps.gamma(a=params.n / 2.0, scale=params.sigma ** 2 / params.gamma).pdf


def stationary_x_variance(params) -> float:
    return params.sigma ** 2 / (2.0 * params.gamma)


def stationary_e_mean(params) -> float:
    return params.n * params.sigma ** 2 / (2.0 * params.gamma)


def density_l1_distance(est: DensityEstimate, pdf) -> float:
    """L1 distance between a histogram density and an analytic density,
    counting analytic mass outside the binned range as missed."""
    covered = 0.0
    l1 = 0.0
    for lo, hi, rho in zip(est.bin_edges[:-1], est.bin_edges[1:], est.density):
        grid = np.linspace(lo, hi, 33)
        mass = float(np.trapezoid(pdf(grid), grid))
        covered += mass
        width = hi - lo
        l1 += abs(rho * width - mass)
    return l1 + max(0.0, 1.0 - covered)


@dataclass(frozen=True)
class MergedCurve:
    """Across-run mean of per-run curves with the spread of the mean."""

    lags: np.ndarray
    values: np.ndarray
    stderr: np.ndarray | None
    n_runs: int


def ensemble_average(curves) -> MergedCurve:
    """Merge per-run curves (correlation or kurtosis) on identical grids:
    pointwise mean plus across-run standard error (absent for one run)."""
    curves = list(curves)
    if not curves:
        raise ValueError("no curves to merge")
    lags0 = np.asarray(curves[0].lags)
    for c in curves[1:]:
        lg = np.asarray(c.lags)
        if lg.shape != lags0.shape or not np.allclose(lg, lags0, rtol=1e-12,
                                                      atol=1e-12):
            raise GridMismatchError("curves do not share a lag grid")
    vals = np.stack([np.asarray(c.values) for c in curves])
    mean = vals.mean(axis=0)
    if len(curves) == 1:
        stderr = None
    else:
        stderr = vals.std(axis=0, ddof=1) / np.sqrt(len(curves))
    return MergedCurve(lags=lags0, values=mean, stderr=stderr,
                       n_runs=len(curves))

"""Microcanonical machinery for the isolated fast bath.

The bath constant M is the time-integrated, coupling-weighted fourth-order
two-point moment of the fast modes on the energy shell E = n.  A single long
deterministic run supplies the two-point curve C(tau) by averaging over
shifted time origins; the area under the curve (up to a decay cutoff) is M.
Runs on other shells are converted through the exact rescaling
Q(E) = (E/n)^{3/2} * M.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .integrate import BLOWUP_THRESHOLD, BlowupError, pack_bath_triads
from .model import validate_conservation
from .series import RngStream, TimeSeries


class ErgodicityWarning(UserWarning):
    """Diagnostics suggest the bath run does not average as expected."""


class EnergyDriftError(RuntimeError):
    """Unrenormalized energy drift exceeded tolerance; reduce dt."""


def sample_uniform_sphere(n: int, e_target: float,
                          rng: np.random.Generator) -> np.ndarray:
    """Draw y uniformly on the sphere sum y_k^2 = e_target."""
    if n < 2:
        raise ValueError("need n >= 2")
    if e_target <= 0:
        raise ValueError("e_target must be positive")
    while True:
        g = rng.standard_normal(n)
        norm = np.linalg.norm(g)
        if norm > 0.0:
            return np.sqrt(e_target) * g / norm


@dataclass(frozen=True)
class FastRunResult:
    """Trajectory of an isolated-bath run plus conservation diagnostics."""

    series: TimeSeries
    max_rel_energy_drift: float
    renorm_count: int


def _run_bath_kernel(yyy, y0, dt, nsteps, record_stride, *, renormalize,
                     renorm_tol, s_weights=None):
    bt, bf1, bf2, bc = pack_bath_triads(yyy)
    if s_weights is None:
        sj = np.empty(0, dtype=np.int64)
        sk = np.empty(0, dtype=np.int64)
        sc = np.empty(0, dtype=float)
        record_s = False
    else:
        sj, sk, sc = s_weights
        record_s = True
    out = kernels.fast_bath_run(
        np.asarray(y0, dtype=float), bt, bf1, bf2, bc, sj, sk, sc,
        dt, nsteps, record_stride, kernels.SCHEME_RK5,
        renormalize, renorm_tol, record_s, BLOWUP_THRESHOLD)
    y_rec, s_rec, status, bad_step, max_drift, renorm_count, _ = out
    if status == kernels.STATUS_BLOWUP:
        raise BlowupError(f"bath trajectory blew up at step {bad_step}",
                          t=bad_step * dt)
    return y_rec, s_rec, max_drift, renorm_count


def run_fast_subsystem(yyy, init: np.ndarray, dt: float, T: float, *, n: int,
                       record_stride: int = 1, renormalize: bool = True,
                       renorm_tol: float = 1e-10, drift_tol: float = 1e-8,
                       seed_label: str = "") -> FastRunResult:
    """Integrate the isolated bath for duration T from the given point on
    its energy sphere.

    With renormalize=True (default) the state is rescaled back onto the
    initial shell whenever the relative energy drift exceeds renorm_tol.
    Without renormalization, drift beyond drift_tol raises EnergyDriftError
    (the fix is a smaller dt).
    """
    if T < dt:
        raise ValueError("T must be at least one time step")
    validate_structure(yyy, n)
    nsteps = int(np.floor(T / dt + 1e-9))
    y_rec, _, max_drift, renorm_count = _run_bath_kernel(
        yyy, init, dt, nsteps, record_stride,
        renormalize=renormalize, renorm_tol=renorm_tol)
    if not renormalize and max_drift > drift_tol:
        raise EnergyDriftError(
            f"relative energy drift {max_drift:.3e} exceeds {drift_tol:.1e}; "
            "reduce dt or enable renormalization")
    names = tuple(f"y{j}" for j in range(1, len(init) + 1))
    series = TimeSeries(dt_sample=dt * record_stride, values=y_rec,
                        names=names, seed=seed_label)
    return FastRunResult(series=series, max_rel_energy_drift=max_drift,
                         renorm_count=renorm_count)


def validate_structure(yyy, n: int) -> None:
    """Structural check of a yyy table (raises StructureError)."""
    validate_conservation((), yyy, n, tol=np.inf)


@dataclass(frozen=True)
class CompatibilityReport:
    """Time-averaged bath moments that must vanish for the reduction to be
    well posed: first moments <y_j> and mixed moments <y_j y_k>, j != k."""

    first_moments: np.ndarray
    first_stderr: np.ndarray
    mixed_moments: np.ndarray        # (n, n), diagonal zeroed
    mixed_stderr: np.ndarray
    tol: float
    passed: bool

    @property
    def max_abs_first(self) -> float:
        return float(np.max(np.abs(self.first_moments)))

    @property
    def max_abs_mixed(self) -> float:
        return float(np.max(np.abs(self.mixed_moments)))


def check_compatibility(run: TimeSeries, tol: float = 0.02,
                        n_blocks: int = 20) -> CompatibilityReport:
    """Verify that <y_j> and <y_j y_k> (j != k) vanish within
    max(tol, 4 block standard errors) each."""
    y = np.atleast_2d(np.asarray(run.values, dtype=float))
    if y.ndim != 2 or y.shape[0] < 2 * n_blocks:
        raise ValueError(
            f"run too short for {n_blocks}-block errors: {y.shape[0]} samples")
    nsamp, n = y.shape
    block_len = nsamp // n_blocks
    trimmed = y[:block_len * n_blocks]
    blocks = trimmed.reshape(n_blocks, block_len, n)

    first_b = blocks.mean(axis=1)                       # (B, n)
    first = first_b.mean(axis=0)
    first_se = first_b.std(axis=0, ddof=1) / np.sqrt(n_blocks)

    mixed_b = np.einsum("bsi,bsj->bij", blocks, blocks) / block_len
    mixed = mixed_b.mean(axis=0)
    mixed_se = mixed_b.std(axis=0, ddof=1) / np.sqrt(n_blocks)
    off = ~np.eye(n, dtype=bool)
    mixed = np.where(off, mixed, 0.0)
    mixed_se = np.where(off, mixed_se, 0.0)

    ok_first = np.abs(first) <= np.maximum(tol, 4.0 * first_se)
    ok_mixed = np.abs(mixed) <= np.maximum(tol, 4.0 * mixed_se)
    passed = bool(ok_first.all() and ok_mixed.all())
    return CompatibilityReport(first, first_se, mixed, mixed_se, tol, passed)


@dataclass(frozen=True)
class BathStatistics:
    """Two-point moment curve and the bath constant extracted from one
    microcanonical run."""

    M: float
    stderr_M: float
    E_level: float
    n: int
    tau_grid: np.ndarray
    C_curve: np.ndarray
    C_stderr: np.ndarray
    tau_max: float
    decayed: bool
    raw_area: float          # area at the run's own energy level
    raw_area_stderr: float
    compatibility: CompatibilityReport | None
    max_rel_energy_drift: float
    renorm_count: int
    seed_label: str = ""

    def curve_series(self) -> TimeSeries:
        return TimeSeries(dt_sample=float(self.tau_grid[1] - self.tau_grid[0])
                          if len(self.tau_grid) > 1 else 1.0,
                          values=self.C_curve, names=("C_tau",),
                          seed=self.seed_label)


def _decay_cutoff(curve: np.ndarray, threshold: float, window: int) -> int | None:
    """First index where |curve| stays below threshold for `window`
    consecutive samples; None if it never does."""
    below = np.abs(curve) < threshold
    run = 0
    for i, b in enumerate(below):
        run = run + 1 if b else 0
        if run >= window:
            return i - window + 1
    return None


def estimate_m(xyy, yyy, *, n: int, E_level: float | None = None,
               dt: float = 1e-3, T: float = 25_000.0, tau_cap: float = 5.0,
               lag_stride: int = 2, origin_stride: int = 10,
               n_blocks: int = 20, cutoff_frac: float = 0.005,
               cutoff_window: int = 50, moment_stride: int = 10,
               rng: RngStream | np.random.Generator | None = None,
               check_moments: bool = True) -> BathStatistics:
    """Estimate the bath constant from one long run on the shell E_level
    (default: the shell E = n on which the constant is defined).

    The coupling-weighted pair sum s(t) = sum_rows a_xyy * y_j(t) * y_k(t)
    is recorded every step; C(tau) = <s(t) s(t+tau)> is averaged over time
    origins spaced origin_stride steps apart, and the area under C up to the
    decay cutoff gives the raw area.  Off-shell runs are compensated by
    (n/E_level)^{3/2}.  Standard errors come from n_blocks contiguous origin
    blocks.
    """
    if E_level is None:
        E_level = float(n)
    if E_level <= 0:
        raise ValueError("E_level must be positive")
    validate_conservation(xyy, yyy, n, tol=np.inf)

    if isinstance(rng, RngStream):
        seed_label = rng.label()
        gen = rng.generator()
    elif rng is None:
        stream = RngStream(seed=0)
        seed_label = stream.label()
        gen = stream.generator()
    else:
        gen = rng
        seed_label = ""

    y0 = sample_uniform_sphere(n, E_level, gen)
    nsteps = int(np.floor(T / dt + 1e-9))
    s_weights = (
        np.array([t.j - 1 for t in xyy], dtype=np.int64),
        np.array([t.k - 1 for t in xyy], dtype=np.int64),
        np.array([t.a_xyy for t in xyy], dtype=float),
    )
    y_rec, s_rec, max_drift, renorm_count = _run_bath_kernel(
        yyy, y0, dt, nsteps, moment_stride,
        renormalize=True, renorm_tol=1e-10, s_weights=s_weights)

    n_lags = int(np.floor(tau_cap / (dt * lag_stride))) + 1
    max_lag_samples = (n_lags - 1) * lag_stride
    if max_lag_samples >= len(s_rec) // 2:
        raise ValueError("tau_cap too large for the run length")
    block_means = kernels.blocked_lag_product_means(
        s_rec, s_rec, n_lags, lag_stride, origin_stride, n_blocks)
    curve = block_means.mean(axis=0)
    curve_se = block_means.std(axis=0, ddof=1) / np.sqrt(n_blocks)
    tau_grid = np.arange(n_lags) * dt * lag_stride

    c0 = curve[0]
    if c0 <= 0.0 and len(xyy) > 0:
        warnings.warn("nonpositive C(0); bath statistics look degenerate",
                      ErgodicityWarning)
    if c0 == 0.0:
        cut = 0
        decayed = True
    else:
        cut = _decay_cutoff(curve, cutoff_frac * abs(c0), cutoff_window)
        decayed = cut is not None
        if cut is None:
            warnings.warn(
                f"C(tau) not decayed below {cutoff_frac:.3%} of C(0) by "
                f"tau={tau_cap}; integrating the full window (tail "
                f"|C|={abs(curve[-1]):.3e})", ErgodicityWarning)
            cut = n_lags - 1
    tau_max = float(tau_grid[cut])

    sl = slice(0, cut + 1)
    dtau = dt * lag_stride
    raw_area = float(np.trapezoid(curve[sl], dx=dtau)) if cut > 0 else 0.0
    area_blocks = np.array([np.trapezoid(block_means[b, sl], dx=dtau)
                            for b in range(n_blocks)]) if cut > 0 else \
        np.zeros(n_blocks)
    raw_se = float(area_blocks.std(ddof=1) / np.sqrt(n_blocks))

    comp_factor = (n / E_level) ** 1.5
    m_value = raw_area * comp_factor
    m_se = raw_se * comp_factor
    if m_value < 0.0:
        warnings.warn(
            f"estimated bath constant is negative ({m_value:.4g}); "
            "averaging is likely insufficient or the bath is not ergodic",
            ErgodicityWarning)

    comp = None
    if check_moments:
        names = tuple(f"y{j}" for j in range(1, n + 1))
        y_series = TimeSeries(dt_sample=dt * moment_stride, values=y_rec,
                              names=names, seed=seed_label)
        comp = check_compatibility(y_series, n_blocks=n_blocks)
        if not comp.passed:
            warnings.warn(
                "bath moment averages violate the vanishing-moment "
                f"conditions (max |<y>|={comp.max_abs_first:.3g}, "
                f"max |<y y>|={comp.max_abs_mixed:.3g})", ErgodicityWarning)

    return BathStatistics(
        M=m_value, stderr_M=m_se, E_level=float(E_level), n=n,
        tau_grid=tau_grid, C_curve=curve, C_stderr=curve_se,
        tau_max=tau_max, decayed=decayed, raw_area=raw_area,
        raw_area_stderr=raw_se, compatibility=comp,
        max_rel_energy_drift=max_drift, renorm_count=renorm_count,
        seed_label=seed_label)


@dataclass(frozen=True)
class RescalingReport:
    """Compensated bath-constant estimates across energy shells.  The
    compensated values must agree within statistics if the shell-rescaling
    law holds."""

    levels: tuple[float, ...]
    stats: tuple[BathStatistics, ...]
    compensated: np.ndarray
    compensated_stderr: np.ndarray
    raw_areas: np.ndarray
    passed: bool

    def raw_ratio(self, i: int, j: int) -> float:
        """Measured Q(E_i)/Q(E_j), to compare against (E_i/E_j)^{3/2}."""
        return float(self.raw_areas[i] / self.raw_areas[j])

    def expected_ratio(self, i: int, j: int) -> float:
        return float((self.levels[i] / self.levels[j]) ** 1.5)


def check_rescaling(xyy, yyy, *, n: int, E_levels, seed: int = 0,
                    **estimate_kwargs) -> RescalingReport:
    """Estimate the bath constant on each shell and test that the
    compensated values agree pairwise within 2 combined standard errors."""
    levels = tuple(float(e) for e in E_levels)
    if len(levels) < 2:
        raise ValueError("need at least two energy levels")
    stats = []
    for idx, level in enumerate(levels):
        stream = RngStream(seed=seed, stream_id=idx)
        stats.append(estimate_m(xyy, yyy, n=n, E_level=level, rng=stream,
                                **estimate_kwargs))
    comp = np.array([s.M for s in stats])
    comp_se = np.array([s.stderr_M for s in stats])
    raw = np.array([s.raw_area for s in stats])
    passed = True
    for i in range(len(levels)):
        for j in range(i + 1, len(levels)):
            tol = 2.0 * np.hypot(comp_se[i], comp_se[j])
            if abs(comp[i] - comp[j]) > tol and tol > 0.0:
                passed = False
    return RescalingReport(levels=levels, stats=tuple(stats),
                           compensated=comp, compensated_stderr=comp_se,
                           raw_areas=raw, passed=passed)

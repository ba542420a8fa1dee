"""Deterministic and stochastic time stepping.

The workhorse scheme is a fixed-step split composition: a fifth-order
Runge-Kutta substep for the drift followed by an Euler noise increment.
Generic single-step functions operate on plain vectors and callables; long
runs of the three concrete models dispatch to compiled kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import CoefficientSet, ModelParams, SystemState
from .series import RngStream, TimeSeries

BLOWUP_THRESHOLD = 1e12

SCHEMES = {
    "rk5_euler": kernels.SCHEME_RK5,
    "rk2_euler": kernels.SCHEME_RK2,
    "euler_maruyama": kernels.SCHEME_EULER,
}


class IntegrationError(RuntimeError):
    """Stepping failed; carries the failure time and offending state."""

    def __init__(self, message: str, t: float | None = None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class BlowupError(IntegrationError):
    """A state component left the sane range (|z| > 1e12 or non-finite)."""


@dataclass(frozen=True)
class StepperConfig:
    """Fixed-step integration settings."""

    dt: float
    scheme: str = "rk5_euler"
    record_stride: int = 1

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; "
                             f"expected one of {sorted(SCHEMES)}")


# Dormand-Prince fifth-order stage coefficients (generic single-step path;
# the kernels carry their own copy).
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
)
_DP_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)


def rk5_step(drift, state: np.ndarray, dt: float, t: float = 0.0) -> np.ndarray:
    """One explicit fifth-order Runge-Kutta step of z' = drift(z).

    Local error O(dt^6) on smooth problems.  Raises IntegrationError if the
    drift returns a non-finite value.
    """
    z = np.asarray(state, dtype=float)
    ks = []
    for stage in range(6):
        zs = z if stage == 0 else z + dt * sum(
            a * k for a, k in zip(_DP_A[stage], ks))
        dz = np.asarray(drift(zs), dtype=float)
        if not np.all(np.isfinite(dz)):
            raise IntegrationError("non-finite drift", t=t, state=zs)
        ks.append(dz)
    return z + dt * sum(b * k for b, k in zip(_DP_B, ks) if b != 0.0)


def rk2_step(drift, state: np.ndarray, dt: float) -> np.ndarray:
    """Explicit midpoint step (second order)."""
    z = np.asarray(state, dtype=float)
    k1 = np.asarray(drift(z), dtype=float)
    k2 = np.asarray(drift(z + 0.5 * dt * k1), dtype=float)
    return z + dt * k2


def split_step_sde(det_drift, noise_amplitudes, state: np.ndarray, dt: float,
                   rng: np.random.Generator, scheme: str = "rk5_euler"
                   ) -> np.ndarray:
    """One SDE step: deterministic substep, then additive Gaussian noise.

    noise_amplitudes(z) returns a (d, m) matrix; the step adds
    amplitudes @ (sqrt(dt) * xi) with xi a fresh standard-normal m-vector.
    The composite scheme has strong order dt.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    z = np.asarray(state, dtype=float)
    if scheme == "rk5_euler":
        z1 = rk5_step(det_drift, z, dt)
    elif scheme == "rk2_euler":
        z1 = rk2_step(det_drift, z, dt)
    elif scheme == "euler_maruyama":
        z1 = z + dt * np.asarray(det_drift(z), dtype=float)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    amps = np.atleast_2d(np.asarray(noise_amplitudes(z1), dtype=float))
    xi = rng.standard_normal(amps.shape[1])
    z2 = z1 + amps @ (math.sqrt(dt) * xi)
    if not np.all(np.isfinite(z2)):
        raise IntegrationError("non-finite state after noise step", state=z2)
    return z2


def _pack_triads(coeffs: CoefficientSet, epsilon: float):
    """Flatten triad tables into 0-based index/value arrays for the kernels,
    folding the 1/eps and 1/eps^2 factors into the coefficients.  State
    packing is [x, y_1..y_n], so fast-mode index j maps to slot j."""
    inv_e = 1.0 / epsilon
    inv_e2 = inv_e * inv_e
    axj = np.array([t.j for t in coeffs.xyy], dtype=np.int64)
    axk = np.array([t.k for t in coeffs.xyy], dtype=np.int64)
    axc = np.array([inv_e * t.a_xyy for t in coeffs.xyy])
    ayt, ayf, ayc = [], [], []
    for t in coeffs.xyy:
        ayt.extend([t.j, t.k])
        ayf.extend([t.k, t.j])
        ayc.extend([inv_e * t.a_j, inv_e * t.a_k])
    bt, bf1, bf2, bc = [], [], [], []
    for t in coeffs.yyy:
        bt.extend([t.i, t.j, t.k])
        bf1.extend([t.j, t.k, t.i])
        bf2.extend([t.k, t.i, t.j])
        bc.extend([inv_e2 * t.b_ijk, inv_e2 * t.b_jki, inv_e2 * t.b_kij])
    return (axj, axk, axc,
            np.array(ayt, dtype=np.int64), np.array(ayf, dtype=np.int64),
            np.array(ayc, dtype=float),
            np.array(bt, dtype=np.int64), np.array(bf1, dtype=np.int64),
            np.array(bf2, dtype=np.int64), np.array(bc, dtype=float))


def pack_bath_triads(yyy, scale: float = 1.0):
    """Flatten yyy rows into 0-based arrays for the isolated-bath kernel."""
    bt, bf1, bf2, bc = [], [], [], []
    for t in yyy:
        bt.extend([t.i - 1, t.j - 1, t.k - 1])
        bf1.extend([t.j - 1, t.k - 1, t.i - 1])
        bf2.extend([t.k - 1, t.i - 1, t.j - 1])
        bc.extend([scale * t.b_ijk, scale * t.b_jki, scale * t.b_kij])
    return (np.array(bt, dtype=np.int64), np.array(bf1, dtype=np.int64),
            np.array(bf2, dtype=np.int64), np.array(bc, dtype=float))


@dataclass(frozen=True)
class FullTriadModel:
    """Slow variable + fast bath with stochastic forcing on x."""

    params: ModelParams
    coeffs: CoefficientSet

    def state_names(self) -> tuple[str, ...]:
        return ("x",) + tuple(f"y{j}" for j in range(1, self.params.n + 1))


@dataclass(frozen=True)
class FastBathModel:
    """Isolated deterministic fast bath on its own timescale."""

    n: int
    yyy: tuple

    def state_names(self) -> tuple[str, ...]:
        return tuple(f"y{j}" for j in range(1, self.n + 1))


@dataclass(frozen=True)
class ReducedTriadModel:
    """Closed (x, E) system produced by eliminating the fast modes."""

    gamma: float
    sigma: float
    n: int
    M: float

    def state_names(self) -> tuple[str, ...]:
        return ("x", "E")


def n_steps(T: float, dt: float) -> int:
    """floor(T/dt) robust to float representation of the quotient."""
    return int(math.floor(T / dt + 1e-9))


def _resolve_rng(rng) -> tuple[np.random.Generator, str]:
    if isinstance(rng, RngStream):
        return rng.generator(), rng.label()
    return rng, ""


def integrate_trajectory(model, init, config: StepperConfig, T: float,
                         rng) -> TimeSeries:
    """Run one trajectory of a concrete model for duration T.

    Records the state every record_stride steps, initial state included.
    rng may be an RngStream (provenance recorded) or a bare Generator.
    Raises BlowupError if any component exceeds 1e12 in magnitude.
    """
    if T < config.dt:
        raise ValueError("T must be at least one time step")
    gen, seed_label = _resolve_rng(rng)
    nsteps = n_steps(T, config.dt)
    scheme = SCHEMES[config.scheme]

    if isinstance(model, FullTriadModel):
        if not isinstance(init, SystemState):
            raise TypeError("full model requires a SystemState initial value")
        arrs = _pack_triads(model.coeffs, model.params.epsilon)
        rec, status, bad = kernels.full_model_run(
            float(init.x), np.asarray(init.y, dtype=float),
            model.params.gamma, model.params.sigma, *arrs,
            config.dt, nsteps, config.record_stride, scheme, gen,
            BLOWUP_THRESHOLD)
        t0 = init.t
    elif isinstance(model, FastBathModel):
        y0 = init.y if isinstance(init, SystemState) else np.asarray(init)
        bt, bf1, bf2, bc = pack_bath_triads(model.yyy)
        empty_i = np.empty(0, dtype=np.int64)
        empty_f = np.empty(0, dtype=float)
        rec, _, status, bad, _, _, _ = kernels.fast_bath_run(
            np.asarray(y0, dtype=float), bt, bf1, bf2, bc,
            empty_i, empty_i, empty_f, config.dt, nsteps,
            config.record_stride, scheme, False, 0.0, False,
            BLOWUP_THRESHOLD)
        t0 = init.t if isinstance(init, SystemState) else 0.0
    elif isinstance(model, ReducedTriadModel):
        x0 = float(init.x)
        e0 = float(init.E)
        rec, _, status, bad = kernels.reduced_model_run(
            x0, e0, model.gamma, model.sigma, float(model.n), model.M,
            config.dt, nsteps, config.record_stride, scheme, gen,
            BLOWUP_THRESHOLD)
        t0 = getattr(init, "t", 0.0)
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")

    if status == kernels.STATUS_BLOWUP:
        t_bad = t0 + bad * config.dt
        raise BlowupError(
            f"trajectory blew up at t={t_bad:.6g} (step {bad}); "
            f"component magnitude exceeded {BLOWUP_THRESHOLD:.0e}",
            t=t_bad)
    return TimeSeries(dt_sample=config.dt * config.record_stride,
                      values=rec, names=model.state_names(), t0=t0,
                      seed=seed_label)

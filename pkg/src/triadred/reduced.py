"""The closed (x, E) system obtained by eliminating the fast modes.

Drift and diffusion depend on the bath only through the single constant M.
The noise is rank-one in its second column: one Wiener increment is shared
between x and E with the E row exactly -2x times the x row, so the
interaction terms conserve x^2 + E pathwise just as the full model does.
E is a squared amplitude and is clamped at zero after each step; clamp
events are counted and reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .integrate import (BLOWUP_THRESHOLD, BlowupError, SCHEMES,
                        StepperConfig, n_steps)
from .series import RngStream, TimeSeries


@dataclass(frozen=True)
class ReducedParams:
    """Constants of the reduced model: gamma/sigma/n inherited from the full
    model, plus the bath constant M (estimated or user-supplied)."""

    gamma: float
    sigma: float
    n: int
    M: float

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.sigma < 0:
            # sigma = 0 is admitted: with M = 0 it leaves the bare decay
            # x(t) = x(0) e^{-gamma t}, a useful degenerate check
            raise ValueError("sigma must be nonnegative")
        if self.n < 2:
            raise ValueError("need at least two fast modes")
        if self.M < 0:
            raise ValueError("bath constant must be nonnegative")
        if not math.isfinite(self.M):
            raise ValueError("bath constant must be finite")


@dataclass(frozen=True)
class ReducedState:
    x: float
    E: float
    t: float = 0.0

    def __post_init__(self) -> None:
        if self.E < 0:
            raise ValueError("E must be nonnegative")


def reduced_drift(state: ReducedState, params: ReducedParams
                  ) -> tuple[float, float]:
    """Deterministic drift (dx/dt, dE/dt) of the reduced system.

    The x-coupling terms cancel in pairs against 2x * drift_x, leaving
    drift_E + 2x*(drift_x + gamma*x) = -2M (E/n)^{3/2} identically.
    """
    if state.E < 0:
        raise ValueError("E must be nonnegative")
    n = params.n
    inv_n15 = 1.0 / (n * math.sqrt(n))
    se = math.sqrt(state.E)
    dx = -params.gamma * state.x - (n + 1) * params.M * state.x * se * inv_n15
    de = (-2.0 * params.M * state.E * se * inv_n15
          + 2.0 * (n + 1) * params.M * state.x * state.x * se * inv_n15)
    return dx, de


def reduced_diffusion(state: ReducedState, params: ReducedParams
                      ) -> np.ndarray:
    """Noise amplitude matrix, rows (x, E) by columns (W1, W2).

    The W2 column is rank one: the E entry is -2x times the x entry, and
    both vanish as E -> 0.
    """
    if state.E < 0:
        raise ValueError("E must be nonnegative")
    u = state.E / params.n
    amp = math.sqrt(2.0 * params.M) * u ** 0.75
    return np.array([[params.sigma, amp],
                     [0.0, -2.0 * state.x * amp]])


def step_reduced(state: ReducedState, params: ReducedParams, dt: float,
                 rng: np.random.Generator) -> tuple[ReducedState, bool]:
    """One split step: fifth-order deterministic substep, then the Euler
    noise increment with the shared second draw, then the E >= 0 clamp.

    Returns (new_state, clamped).  Matches the compiled long-run kernel
    draw-for-draw.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    rec, clamps, status, bad = kernels.reduced_model_run(
        state.x, state.E, params.gamma, params.sigma, float(params.n),
        params.M, dt, 1, 1, kernels.SCHEME_RK5, rng, BLOWUP_THRESHOLD)
    if status != kernels.STATUS_OK:
        raise BlowupError("reduced step produced a non-finite state",
                          t=state.t + dt)
    new = ReducedState(x=float(rec[1, 0]), E=float(rec[1, 1]),
                       t=state.t + dt)
    return new, clamps > 0


@dataclass(frozen=True)
class ReducedRunResult:
    series: TimeSeries
    clamp_count: int
    n_steps: int

    @property
    def clamp_rate(self) -> float:
        return self.clamp_count / max(self.n_steps, 1)


def run_reduced(params: ReducedParams, init: ReducedState,
                config: StepperConfig, T: float,
                rng: RngStream | np.random.Generator) -> ReducedRunResult:
    """Integrate the reduced system for duration T, recording (x, E) every
    record_stride steps and counting E-clamp events."""
    if T < config.dt:
        raise ValueError("T must be at least one time step")
    if isinstance(rng, RngStream):
        gen = rng.generator()
        seed_label = rng.label()
    else:
        gen = rng
        seed_label = ""
    nsteps = n_steps(T, config.dt)
    rec, clamps, status, bad = kernels.reduced_model_run(
        init.x, init.E, params.gamma, params.sigma, float(params.n),
        params.M, config.dt, nsteps, config.record_stride,
        SCHEMES[config.scheme], gen, BLOWUP_THRESHOLD)
    if status == kernels.STATUS_BLOWUP:
        t_bad = init.t + bad * config.dt
        raise BlowupError(f"reduced trajectory blew up at t={t_bad:.6g}",
                          t=t_bad)
    series = TimeSeries(dt_sample=config.dt * config.record_stride,
                        values=rec, names=("x", "E"), t0=init.t,
                        seed=seed_label)
    return ReducedRunResult(series=series, clamp_count=int(clamps),
                            n_steps=nsteps)

"""Experiment configuration, scale presets, and run manifests."""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

# Time steps matched to the scale-separation parameter: smaller epsilon
# means faster bath dynamics and a proportionally finer step.
DT_BY_EPSILON = {1.0: 1e-4, 0.5: 2.5e-5, 0.25: 2e-5, 0.1: 1e-6}

DEFAULT_DT_REDUCED = 1e-5
DEFAULT_DT_FAST = 1e-3

# Desk scale: runs that finish in minutes on a laptop, with statistics
# tolerances widened accordingly.  Paper scale restores the published run
# lengths and ensemble sizes.
DESK = {
    "T_full": 2000.0,
    "T_reduced": 2000.0,
    "K": 4,
    "eps_sweep": (1.0, 0.5),
    "compare_eps": (0.25,),
    "bath_T": 25_000.0,
}
PAPER = {
    "T_full": 40_000.0,
    "T_reduced": 100_000.0,
    "K": 10,
    "eps_sweep": (1.0, 0.5, 0.25, 0.1),
    "compare_eps": (0.25, 0.1),
    "bath_T": 25_000.0,
}

# Statistics windows per variable class: (decimation target dt, max lag,
# lag grid stride) for correlation curves.
CF_SPECS = {
    "x": {"sample_dt": 5e-3, "max_lag": 5.0},
    "E": {"sample_dt": 5e-2, "max_lag": 60.0},
    "y": {"sample_dt": 2e-3, "max_lag": 2.0},
}
KURT_SPECS = {
    "x": {"sample_dt": 5e-3, "max_lag": 2.0},
    "E": {"sample_dt": 5e-2, "max_lag": 30.0},
}
DENSITY_SPECS = {
    "x": {"bins": 40, "range": (-8.0, 8.0)},
    "E": {"bins": 26, "range": (0.0, 65.0)},
}


def default_dt(model: str, epsilon: float | None) -> float:
    if model == "full":
        if epsilon is None:
            raise ValueError("full model needs epsilon")
        if epsilon in DT_BY_EPSILON:
            return DT_BY_EPSILON[epsilon]
        # conservative fallback: scale the epsilon=1 step by epsilon^2
        return 1e-4 * epsilon * epsilon
    if model == "reduced":
        return DEFAULT_DT_REDUCED
    if model == "fast":
        return DEFAULT_DT_FAST
    raise ValueError(f"unknown model {model!r}")


def default_record_stride(model: str, dt: float) -> int:
    """Record full-model states every ~1e-3 time units; every step for the
    bath; every ~1e-3 for the reduced system."""
    if model == "fast":
        return 1
    return max(1, round(1e-3 / dt))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a simulation command."""

    model: str                       # full | fast | reduced
    T: float
    K: int = 1
    epsilon: float | None = None
    dt: float | None = None
    record_stride: int | None = None
    scheme: str = "rk5_euler"
    seed: int = 0
    coeffs: str = "builtin"          # builtin | builtin-raw | <path>
    M: float | None = None           # reduced model only
    M_source: str = "user"           # user | estimated | <path>
    E_level: float | None = None     # fast model only
    jobs: int = 1
    out_dir: str = "runs/out"
    save_trajectories: bool = False
    with_y_stats: bool = False
    transient_discard: float | None = None   # None -> max(10/gamma, 0.01*T)

    def resolved_dt(self) -> float:
        return self.dt if self.dt is not None else default_dt(self.model,
                                                              self.epsilon)

    def resolved_stride(self) -> int:
        if self.record_stride is not None:
            return self.record_stride
        return default_record_stride(self.model, self.resolved_dt())

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(ExperimentConfig)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return ExperimentConfig(**doc)

    @staticmethod
    def from_json_file(path: str | Path) -> "ExperimentConfig":
        return ExperimentConfig.from_dict(json.loads(Path(path).read_text()))

    def __post_init__(self) -> None:
        if self.model not in ("full", "fast", "reduced"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.model == "full" and self.epsilon is None:
            raise ValueError("full model needs epsilon")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


def write_manifest(path: str | Path, payload: dict) -> None:
    """Write a manifest atomically (temp file + rename)."""
    path = Path(path)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True,
                              default=_json_default) + "\n")
    os.replace(tmp, path)


def _json_default(obj):
    import numpy as np
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def manifest_payload(config: ExperimentConfig, *, seeds: list[dict],
                     outputs: list[str], wallclock: float,
                     m_provenance: str | None = None,
                     clamp_counts: list[int] | None = None,
                     aborted: list[int] | None = None) -> dict:
    from . import __version__
    return {
        "config": config.to_dict(),
        "code_version": __version__,
        "m_provenance": m_provenance,
        "wallclock_seconds": round(wallclock, 3),
        "per_run_seeds": seeds,
        "clamp_counts": clamp_counts or [],
        "aborted_runs": aborted or [],
        "outputs": sorted(outputs),
        "created_unix": time.time(),
    }

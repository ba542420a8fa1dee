"""Uniformly sampled trajectory records and seeded RNG streams."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream: (seed, stream_id) pins the whole draw
    sequence bit-for-bit on a given platform.  Ensembles give each
    trajectory its own stream_id under a shared seed."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=(self.stream_id,))
        return np.random.default_rng(ss)

    def label(self) -> str:
        return f"{self.seed}/{self.stream_id}"


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled scalar or fixed-width vector record.

    values has shape (N,) for a scalar series or (N, d) with one column per
    name.  seed records RNG provenance as a free-form label.
    """

    dt_sample: float
    values: np.ndarray
    names: tuple[str, ...]
    t0: float = 0.0
    seed: str = ""

    def __post_init__(self) -> None:
        v = np.asarray(self.values)
        if v.ndim not in (1, 2) or v.shape[0] < 1:
            raise ValueError("values must be a nonempty 1-D or 2-D array")
        width = 1 if v.ndim == 1 else v.shape[1]
        if len(self.names) != width:
            raise ValueError(f"{len(self.names)} names for {width} columns")
        if self.dt_sample <= 0:
            raise ValueError("dt_sample must be positive")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def duration(self) -> float:
        return (len(self) - 1) * self.dt_sample

    def times(self) -> np.ndarray:
        return self.t0 + self.dt_sample * np.arange(len(self))

    def column(self, name: str) -> "TimeSeries":
        """Extract one named column as a scalar series."""
        if self.values.ndim == 1:
            if name != self.names[0]:
                raise KeyError(name)
            return self
        idx = self.names.index(name)
        return replace(self, values=self.values[:, idx], names=(name,))

    def decimate(self, factor: int) -> "TimeSeries":
        """Keep every factor-th sample (including the first)."""
        if factor < 1:
            raise ValueError("factor must be >= 1")
        if factor == 1:
            return self
        return replace(self, values=self.values[::factor],
                       dt_sample=self.dt_sample * factor)

    def drop_initial(self, duration: float) -> "TimeSeries":
        """Discard samples from the first `duration` time units (transient)."""
        skip = int(np.ceil(duration / self.dt_sample))
        skip = min(skip, len(self) - 1)
        if skip <= 0:
            return self
        return replace(self, values=self.values[skip:],
                       t0=self.t0 + skip * self.dt_sample)

    def to_csv(self, path: str | Path) -> None:
        """Write `t,<names...>` rows at full double precision."""
        v = self.values if self.values.ndim == 2 else self.values[:, None]
        t = self.times()
        with open(path, "w") as fh:
            fh.write("t," + ",".join(self.names) + "\n")
            for i in range(v.shape[0]):
                row = ",".join(f"{x:.17g}" for x in v[i])
                fh.write(f"{t[i]:.17g},{row}\n")

    @staticmethod
    def from_csv(path: str | Path, seed: str = "") -> "TimeSeries":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        if header[0] != "t" or len(header) < 2:
            raise ValueError(f"{path}: expected header 't,<names...>'")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        t = data[:, 0]
        if len(t) > 1:
            dt = t[1] - t[0]
        else:
            dt = 1.0
        vals = data[:, 1:]
        if vals.shape[1] == 1:
            vals = vals[:, 0]
        return TimeSeries(dt_sample=float(dt), values=vals,
                          names=tuple(header[1:]), t0=float(t[0]), seed=seed)

"""Triad model data types, built-in interaction tables, and conservation checks.

The model couples one stochastically forced slow variable x to n fast modes
y_1..y_n through quadratic triad interactions.  Two families of couplings
exist: xyy triads (exchange energy between x and a pair of fast modes) and
yyy triads (redistribute energy inside the fast bath).  Each triad's three
coefficients sum to zero, which makes the interactions conserve x^2 + sum y^2
and the bath-only interactions conserve sum y^2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np


class StructureError(ValueError):
    """A coefficient table is structurally malformed (bad indices, bad n)."""


@dataclass(frozen=True)
class XyyTriad:
    """One slow-fast interaction: couples x with the fast pair (y_j, y_k).

    a_xyy multiplies y_j*y_k in the x equation, a_j multiplies x*y_k in the
    y_j equation, a_k multiplies x*y_j in the y_k equation.  Mode indices are
    1-based, matching the coefficient tables.
    """

    j: int
    k: int
    a_xyy: float
    a_j: float
    a_k: float

    def residual(self) -> float:
        """Energy-conservation defect a_xyy + a_j + a_k (zero for exact tables)."""
        return self.a_xyy + self.a_j + self.a_k

    def label(self) -> str:
        return f"xyy({self.j},{self.k})"


@dataclass(frozen=True)
class YyyTriad:
    """One bath-internal interaction among the fast modes (y_i, y_j, y_k).

    b_ijk multiplies y_j*y_k in the y_i equation, cyclically for the others.
    """

    i: int
    j: int
    k: int
    b_ijk: float
    b_jki: float
    b_kij: float

    def residual(self) -> float:
        return self.b_ijk + self.b_jki + self.b_kij

    def label(self) -> str:
        return f"yyy({self.i},{self.j},{self.k})"


@dataclass(frozen=True)
class ModelParams:
    """Full-model constants: damping gamma, noise amplitude sigma,
    scale-separation parameter epsilon, fast-mode count n."""

    gamma: float
    sigma: float
    epsilon: float
    n: int

    def __post_init__(self) -> None:
        if self.gamma <= 0 or self.sigma <= 0 or self.epsilon <= 0:
            raise ValueError("gamma, sigma, epsilon must be positive")
        if self.n < 2:
            raise ValueError("need at least two fast modes")


@dataclass(frozen=True)
class SystemState:
    """Slow variable x plus fast vector y at time t.  y is treated as
    immutable after construction."""

    x: float
    y: np.ndarray
    t: float = 0.0

    def energy(self) -> float:
        return fast_energy(self.y)


@dataclass(frozen=True)
class CoefficientSet:
    """A complete interaction table with the model constants it was built for.

    Mirrors the JSON document format used for on-disk coefficient files.
    """

    gamma: float
    sigma: float
    n: int
    xyy: tuple[XyyTriad, ...]
    yyy: tuple[YyyTriad, ...]

    def params(self, epsilon: float) -> ModelParams:
        return ModelParams(self.gamma, self.sigma, epsilon, self.n)

    def to_json(self) -> str:
        doc = {
            "gamma": self.gamma,
            "sigma": self.sigma,
            "n": self.n,
            "xyy": [
                {"j": t.j, "k": t.k, "a_xyy": t.a_xyy, "a_j": t.a_j, "a_k": t.a_k}
                for t in self.xyy
            ],
            "yyy": [
                {"i": t.i, "j": t.j, "k": t.k,
                 "b_ijk": t.b_ijk, "b_jki": t.b_jki, "b_kij": t.b_kij}
                for t in self.yyy
            ],
        }
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "CoefficientSet":
        doc = json.loads(text)
        try:
            xyy = tuple(
                XyyTriad(int(r["j"]), int(r["k"]),
                         float(r["a_xyy"]), float(r["a_j"]), float(r["a_k"]))
                for r in doc["xyy"]
            )
            yyy = tuple(
                YyyTriad(int(r["i"]), int(r["j"]), int(r["k"]),
                         float(r["b_ijk"]), float(r["b_jki"]), float(r["b_kij"]))
                for r in doc["yyy"]
            )
            return CoefficientSet(float(doc["gamma"]), float(doc["sigma"]),
                                  int(doc["n"]), xyy, yyy)
        except (KeyError, TypeError) as exc:
            raise StructureError(f"malformed coefficient document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @staticmethod
    def load(path: str | Path) -> "CoefficientSet":
        return CoefficientSet.from_json(Path(path).read_text())


# Interaction tables for the reference 10-mode configuration.
# Each row is exactly one summand in the equations of motion (no implicit
# symmetrization), so the per-row zero-sum constraint is the whole story.
_XYY_TABLE = (
    (1, 2, 1.2, -0.55, -0.65),
    (8, 9, 0.525, 0.25, -0.775),
    (4, 10, 1.35, -0.725, -0.625),
    (5, 6, 1.125, -0.5, -0.625),
    (3, 7, 1.35, -0.725, -0.625),
    (1, 10, 0.525, 0.25, -0.775),
    (2, 4, 1.2, -0.55, -0.65),
    (5, 8, 1.125, -0.5, -0.625),
    (7, 9, 0.875, -0.3, -0.575),
    (3, 6, 1.25, -0.625, -0.625),
)

_YYY_TABLE = (
    (1, 2, 3, 2.0, 2.5, -4.5),
    (1, 2, 4, 4.2426, 2.8284, -7.071),
    (1, 2, 9, -1.2247, 2.9393, -1.7146),
    (1, 2, 10, 2.1166, 2.9103, -5.0269),
    (1, 3, 4, 1.7321, 2.5981, -4.3302),
    (1, 5, 6, 3.8013, 4.9193, -8.7206),
    (1, 9, 10, 3.9598, -2.2627, -1.6971),
    (2, 3, 4, -2.0, 4.0, -2.0),
    (2, 5, 6, -4.5, 2.1, 2.4),
    (2, 9, 10, 1.7393, 1.4230, -3.1623),
    (3, 7, 8, 1.1608, 2.3217, -3.4825),
    (4, 7, 8, -1.7321, -2.0785, 3.8106),
    (5, 6, 7, 2.9566, 2.0912, -5.0478),
    (5, 6, 8, -2.6192, -1.4966, 4.1158),
    (5, 7, 8, 4.6476, 2.7111, -7.3587),
    (5, 6, 9, -3.0, -1.8, 4.8),
    (5, 6, 10, 1.8554, 2.2677, -4.1231),
    (6, 7, 8, 4.6669, 2.9698, -7.6367),
    (8, 9, 10, 3.923, 2.3974, -6.3204),
)

BUILTIN_GAMMA = 1.0
BUILTIN_SIGMA = 2.236
BUILTIN_N = 10


def builtin_paper_model() -> CoefficientSet:
    """Reference configuration: gamma=1, sigma=2.236, n=10, with the 10 xyy
    and 19 yyy interaction rows of the published tables."""
    xyy = tuple(XyyTriad(*row) for row in _XYY_TABLE)
    yyy = tuple(YyyTriad(*row) for row in _YYY_TABLE)
    return CoefficientSet(BUILTIN_GAMMA, BUILTIN_SIGMA, BUILTIN_N, xyy, yyy)


@dataclass(frozen=True)
class ValidationReport:
    """Per-triad conservation residuals and the overall verdict."""

    residuals: tuple[tuple[str, float], ...]
    tol: float
    passed: bool

    @property
    def max_abs_residual(self) -> float:
        return max((abs(r) for _, r in self.residuals), default=0.0)


def _check_structure(xyy: tuple[XyyTriad, ...] | list[XyyTriad],
                     yyy: tuple[YyyTriad, ...] | list[YyyTriad],
                     n: int) -> None:
    for t in xyy:
        if not (1 <= t.j <= n and 1 <= t.k <= n):
            raise StructureError(f"{t.label()}: mode index outside [1, {n}]")
        if t.j == t.k:
            raise StructureError(f"{t.label()}: indices must be distinct")
    for t in yyy:
        if not (1 <= t.i <= n and 1 <= t.j <= n and 1 <= t.k <= n):
            raise StructureError(f"{t.label()}: mode index outside [1, {n}]")
        if len({t.i, t.j, t.k}) != 3:
            raise StructureError(f"{t.label()}: indices must be distinct")


def validate_conservation(xyy, yyy, n: int, tol: float) -> ValidationReport:
    """Check every triad's zero-sum constraint to within tol.

    Raises StructureError for out-of-range or repeated indices; constraint
    violations are reported, not raised.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    _check_structure(xyy, yyy, n)
    residuals = tuple((t.label(), t.residual()) for t in (*xyy, *yyy))
    passed = all(abs(r) <= tol for _, r in residuals)
    return ValidationReport(residuals=residuals, tol=tol, passed=passed)


@dataclass(frozen=True)
class ProjectionResult:
    xyy: tuple[XyyTriad, ...]
    yyy: tuple[YyyTriad, ...]
    max_change: float


def project_to_conservative(xyy, yyy) -> ProjectionResult:
    """Shift each triad's coefficients by residual/3 so the zero-sum
    constraints hold to machine precision.  Idempotent."""
    new_xyy = []
    max_change = 0.0
    for t in xyy:
        d = t.residual() / 3.0
        max_change = max(max_change, abs(d))
        new_xyy.append(XyyTriad(t.j, t.k, t.a_xyy - d, t.a_j - d, t.a_k - d))
    new_yyy = []
    for t in yyy:
        d = t.residual() / 3.0
        max_change = max(max_change, abs(d))
        new_yyy.append(YyyTriad(t.i, t.j, t.k,
                                t.b_ijk - d, t.b_jki - d, t.b_kij - d))
    return ProjectionResult(tuple(new_xyy), tuple(new_yyy), max_change)


def projected_builtin_model() -> CoefficientSet:
    """Built-in tables with conservation constraints repaired to machine
    precision.  Experiments default to this variant."""
    base = builtin_paper_model()
    proj = project_to_conservative(base.xyy, base.yyy)
    return CoefficientSet(base.gamma, base.sigma, base.n, proj.xyy, proj.yyy)


def fast_energy(y: np.ndarray) -> float:
    """Bath energy E = sum of squared fast-mode amplitudes."""
    y = np.asarray(y, dtype=float)
    return float(np.dot(y, y))


def full_drift(state: SystemState, params: ModelParams,
               xyy, yyy) -> tuple[float, np.ndarray]:
    """Deterministic drift of the full model: (dx/dt, dy/dt).

    dx/dt = (1/eps) * sum_rows a_xyy*y_j*y_k - gamma*x; each y equation
    accumulates its (1/eps) x-coupling terms and (1/eps^2) bath terms, one
    summand per table row.  The stochastic forcing sigma*dW on x is not
    included here.
    """
    x = state.x
    y = np.asarray(state.y, dtype=float)
    if y.shape != (params.n,):
        raise ValueError(f"state.y must have length n={params.n}")
    inv_e = 1.0 / params.epsilon
    inv_e2 = inv_e * inv_e
    dx = -params.gamma * x
    dy = np.zeros_like(y)
    for t in xyy:
        j, k = t.j - 1, t.k - 1
        dx += inv_e * t.a_xyy * y[j] * y[k]
        dy[j] += inv_e * t.a_j * x * y[k]
        dy[k] += inv_e * t.a_k * x * y[j]
    for t in yyy:
        i, j, k = t.i - 1, t.j - 1, t.k - 1
        dy[i] += inv_e2 * t.b_ijk * y[j] * y[k]
        dy[j] += inv_e2 * t.b_jki * y[k] * y[i]
        dy[k] += inv_e2 * t.b_kij * y[i] * y[j]
    return dx, dy


def fast_drift(y: np.ndarray, yyy) -> np.ndarray:
    """Drift of the isolated fast bath on its own timescale (yyy terms only)."""
    y = np.asarray(y, dtype=float)
    dy = np.zeros_like(y)
    for t in yyy:
        i, j, k = t.i - 1, t.j - 1, t.k - 1
        dy[i] += t.b_ijk * y[j] * y[k]
        dy[j] += t.b_jki * y[k] * y[i]
        dy[k] += t.b_kij * y[i] * y[j]
    return dy

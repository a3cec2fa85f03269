"""Causal boundary signals on a uniform time grid.

A :class:`CausalSignal` holds samples of a real function on ``t_k = k*dt``,
``k = 0..n-1``; the function is taken to be identically zero for ``t < 0``.
The admissible input class is the set of such functions that are
continuous at ``t = 0`` and have a square integrable time derivative; the
norm on that class is ``||g||_2 + ||g'||_2``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from .errors import DomainError, InputError

__all__ = [
    "TimeGrid",
    "CausalSignal",
    "GammaReport",
    "validate_gamma",
    "w12_norm",
    "l2_norm",
    "differentiate",
    "builtin_signal",
    "BUILTIN_SIGNALS",
    "read_signal_csv",
    "write_signal_csv",
]

DEFAULT_TOL = 1e-6
TAIL_FRACTION = 0.05


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_k = k*dt`` for ``k = 0..n-1``."""

    dt: float
    n: int

    def __post_init__(self):
        if not (isinstance(self.dt, (int, float)) and math.isfinite(self.dt) and self.dt > 0):
            raise InputError(f"time step must be a positive finite number, got {self.dt!r}")
        if int(self.n) != self.n or self.n < 2:
            raise InputError(f"time grid needs at least 2 samples, got {self.n!r}")
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "n", int(self.n))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n) * self.dt

    @property
    def horizon(self) -> float:
        """Last sample time ``(n-1)*dt``."""
        return (self.n - 1) * self.dt

    def index_of(self, t: float, rtol: float = 1e-9) -> int:
        """Index of ``t`` on the grid; raises if ``t`` is not a grid point."""
        k = round(t / self.dt)
        if not 0 <= k < self.n or abs(k * self.dt - t) > rtol * max(abs(t), self.dt):
            raise DomainError(f"t={t!r} is not a point of the time grid (dt={self.dt}, n={self.n})")
        return int(k)


@dataclass(frozen=True, eq=False)
class CausalSignal:
    """Samples of a real function that vanishes for negative times."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.shape[0] != self.grid.n:
            raise InputError(f"expected {self.grid.n} samples, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, f: Callable[[np.ndarray], np.ndarray], grid: TimeGrid) -> CausalSignal:
        return cls(grid, np.asarray(f(grid.times), dtype=float))

    @classmethod
    def zeros(cls, grid: TimeGrid) -> CausalSignal:
        return cls(grid, np.zeros(grid.n))

    def _check_same_grid(self, other: CausalSignal):
        if other.grid != self.grid:
            raise InputError("signals live on different time grids")

    def __add__(self, other: CausalSignal) -> CausalSignal:
        self._check_same_grid(other)
        return CausalSignal(self.grid, self.values + other.values)

    def __sub__(self, other: CausalSignal) -> CausalSignal:
        self._check_same_grid(other)
        return CausalSignal(self.grid, self.values - other.values)

    def __mul__(self, alpha: float) -> CausalSignal:
        return CausalSignal(self.grid, alpha * self.values)

    __rmul__ = __mul__

    def __call__(self, t):
        """Linear interpolation, zero for ``t < 0`` and beyond the last sample."""
        t = np.asarray(t, dtype=float)
        return np.interp(t, self.grid.times, self.values, left=0.0, right=0.0)

    def modulated(self, rate: float) -> CausalSignal:
        """The signal multiplied by ``exp(rate*t)``."""
        return CausalSignal(self.grid, self.values * np.exp(rate * self.grid.times))


@dataclass(frozen=True)
class GammaReport:
    is_member: bool
    l2_norm: float
    deriv_l2_norm: float
    w12_norm: float
    rejection_reason: str | None = None

    def as_text(self) -> str:
        rows = [
            ("is_member", str(self.is_member).lower()),
            ("l2_norm", f"{self.l2_norm:.17g}"),
            ("deriv_l2_norm", f"{self.deriv_l2_norm:.17g}"),
            ("w12_norm", f"{self.w12_norm:.17g}"),
            ("rejection_reason", self.rejection_reason or ""),
        ]
        return "".join(f"{k} = {v}\n" for k, v in rows)


def _trapezoid_sq(values: np.ndarray, dx: float) -> float:
    return float(trapezoid(values * values, dx=dx))


def l2_norm(sig: CausalSignal) -> float:
    """Trapezoidal L2 norm over ``[0, T]``."""
    return math.sqrt(_trapezoid_sq(sig.values, sig.grid.dt))


def differentiate(sig: CausalSignal) -> CausalSignal:
    """Centred second-order difference; second-order one-sided at both ends."""
    if sig.grid.n < 3:
        raise InputError("differentiation needs at least 3 samples")
    return CausalSignal(sig.grid, np.gradient(sig.values, sig.grid.dt, edge_order=2))


def validate_gamma(sig: CausalSignal, tol: float = DEFAULT_TOL) -> GammaReport:
    """Decide whether a sampled signal belongs to the admissible input class.

    Three checks, all relative to the signal's own scale:

    1. continuity of the zero extension: ``|g(0)| <= tol * max|g|``;
    2. the finite-difference derivative is finite in L2;
    3. tail decay: the trailing 5% of the samples carry at most
       ``tol`` of the total squared L2 mass (finite-horizon stand-in for
       square integrability on the half-line).
    """
    if sig.grid.n < 3:
        raise InputError("membership check needs at least 3 samples")
    v = sig.values
    if not np.all(np.isfinite(v)):
        return GammaReport(False, math.nan, math.nan, math.nan, "non-finite samples")

    dt = sig.grid.dt
    l2 = math.sqrt(_trapezoid_sq(v, dt))
    dl2 = math.sqrt(_trapezoid_sq(differentiate(sig).values, dt))
    scale = float(np.max(np.abs(v)))

    reason = None
    if abs(v[0]) > tol * scale:
        reason = f"g(0)={v[0]:.6g}≠0"
    elif not math.isfinite(dl2):
        reason = "derivative is not square integrable"
    else:
        n_tail = max(1, math.ceil(TAIL_FRACTION * sig.grid.n))
        tail = float(np.sum(v[-n_tail:] ** 2)) * dt
        total = float(np.sum(v**2)) * dt
        if tail > tol * total:
            reason = f"tail mass fraction {tail / total:.3g} exceeds {tol:g}; signal does not decay on the grid"

    if reason is not None:
        return GammaReport(False, l2, dl2, l2 + dl2, reason)
    return GammaReport(True, l2, dl2, l2 + dl2)


def w12_norm(sig: CausalSignal, tol: float = DEFAULT_TOL) -> float:
    report = validate_gamma(sig, tol)
    if not report.is_member:
        raise DomainError(f"signal is not admissible: {report.rejection_reason}")
    return report.w12_norm


def _bump(t: np.ndarray, centre: float = 2.0, half_width: float = 1.0) -> np.ndarray:
    s = (t - centre) / half_width
    out = np.zeros_like(t)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


BUILTIN_SIGNALS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "exp-sin": lambda t: np.exp(-t) * np.sin(t),
    "ramp-decay": lambda t: t * np.exp(-t),
    "bump": _bump,
    "zero": np.zeros_like,
}


def builtin_signal(name: str, grid: TimeGrid) -> CausalSignal:
    """Named generator; ``exp-sin:k`` gives ``exp(-t) sin(k t)``."""
    base, _, arg = name.partition(":")
    if arg:
        if base != "exp-sin":
            raise InputError(f"only exp-sin takes a frequency argument, got {name!r}")
        try:
            k = float(arg)
        except ValueError:
            raise InputError(f"bad frequency in {name!r}") from None
        return CausalSignal.from_function(lambda t: np.exp(-t) * np.sin(k * t), grid)
    try:
        f = BUILTIN_SIGNALS[name]
    except KeyError:
        raise InputError(f"unknown builtin signal {name!r}; choose from {sorted(BUILTIN_SIGNALS)}") from None
    return CausalSignal.from_function(f, grid)


def read_signal_csv(path: str | Path, rtol: float = 1e-9) -> CausalSignal:
    """Parse a ``t,value`` CSV with a header row and a uniform grid from 0."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t", "value"]:
        raise InputError(f"{path}: expected header 't,value'")
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc
    if data.shape[0] < 2:
        raise InputError(f"{path}: need at least two samples")
    t = data[:, 0]
    if t[0] != 0.0:
        raise InputError(f"{path}: first sample must be at t=0, got {t[0]}")
    steps = np.diff(t)
    dt = (t[-1] - t[0]) / (len(t) - 1)
    if np.any(steps <= 0):
        raise InputError(f"{path}: times must be strictly increasing")
    if np.max(np.abs(steps - dt)) > rtol * dt or np.max(np.abs(t - dt * np.arange(len(t)))) > rtol * max(t[-1], dt):
        raise InputError(f"{path}: time grid is not uniform")
    return CausalSignal(TimeGrid(dt, len(t)), data[:, 1])


def write_signal_csv(sig: CausalSignal, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "value"])
        for t, v in zip(sig.grid.times, sig.values):
            w.writerow([repr(float(t)), repr(float(v))])

"""Killed drifted Brownian motion and the duality with the boundary problem.

The process is ``y(t) = y(0) + beta*t + sigma*w(t)`` absorbed at 0, with a
deterministic weight ``exp(kappa*t)``.  Dividing the equation by ``a`` and
matching generators gives ``beta = b/a``, ``sigma = sqrt(2/a)``,
``kappa = c/a``.

For ``u_g`` solving the boundary problem with ``k0 = 1, k1 = 0``, optional
stopping of ``exp(kappa t) u_g(y(t), t)`` at ``min(tau, T)`` gives

    E[exp(kappa tau) g(tau); tau < T] + integral p(x,T) u_g(x,T) dx = E[u_g(y(0), 0)],

so the first-passage functional on the left equals ``-integral p(x,T) u_g(x,T) dx``
exactly when ``u_g(., 0)`` vanishes.  :func:`duality_check` reports the three
computable pieces and the initial-time term ``ic_defect`` separately.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit
from scipy.integrate import trapezoid
from scipy.special import ndtr

from .errors import DomainError, InputError, UnsupportedConfigurationError
from .signal import CausalSignal
from .solver import FrequencySolution, SpaceGrid
from .spectral import FrequencyGrid
from .symbolkit import CoefficientSet, require_strict

__all__ = [
    "PointMass",
    "TabulatedDensity",
    "ProcessParams",
    "PathSamples",
    "DualityReport",
    "sample_first_passage",
    "fpt_density",
    "absorption_probability",
    "survival_probability",
    "absorbed_transition_density",
    "killed_density",
    "duality_check",
    "write_histogram_csv",
]

DEFAULT_STEPS = 2**12
BLOCK_SIZE = 2**14
# bridge crossing probabilities below exp(-40) are not sampled
_BRIDGE_EXPONENT_CAP = 40.0


@dataclass(frozen=True)
class PointMass:
    a0: float

    def __post_init__(self):
        if not (math.isfinite(self.a0) and self.a0 >= 0):
            raise InputError(f"initial point must be finite and >= 0, got {self.a0!r}")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, float(self.a0))

    def expect(self, f) -> float:
        """``E f(a)`` for a vectorised ``f``."""
        return float(np.asarray(f(np.array([self.a0])))[0])


@dataclass(frozen=True, eq=False)
class TabulatedDensity:
    """Density samples on an increasing grid in ``[0, inf)``, mixed by trapezoid rule."""

    x: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        d = np.asarray(self.density, dtype=float)
        if x.ndim != 1 or x.shape != d.shape or x.size < 2:
            raise InputError("density table needs matching 1-d arrays with at least 2 points")
        if x[0] < 0 or np.any(np.diff(x) <= 0) or np.any(d < 0):
            raise InputError("density table must be nonnegative on an increasing grid in [0, inf)")
        mass = trapezoid(d, x)
        if not mass > 0:
            raise InputError("density table has zero mass")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "density", d / mass)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        cells = 0.5 * (self.density[1:] + self.density[:-1]) * np.diff(self.x)
        cdf = np.concatenate([[0.0], np.cumsum(cells)])
        return np.interp(rng.random(size), cdf / cdf[-1], self.x)

    def expect(self, f) -> float:
        return float(trapezoid(np.asarray(f(self.x)) * self.density, self.x))


@dataclass(frozen=True)
class ProcessParams:
    beta: float
    sigma: float
    kappa: float
    T: float
    rho: PointMass | TabulatedDensity

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InputError(f"volatility must be positive, got {self.sigma!r}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise InputError(f"horizon must be positive, got {self.T!r}")
        if not (math.isfinite(self.beta) and math.isfinite(self.kappa)):
            raise InputError("drift and killing rate must be finite")

    @classmethod
    def from_coefficients(cls, coeffs: CoefficientSet, T: float, rho) -> ProcessParams:
        if coeffs.k1 != 0 or coeffs.k0 == 0:
            raise UnsupportedConfigurationError("the process dual is only available for Dirichlet data (k1 = 0)")
        if coeffs.a <= 0:
            raise DomainError("a must be positive")
        return cls(coeffs.b / coeffs.a, math.sqrt(2.0 / coeffs.a), coeffs.c / coeffs.a, T, rho)


@dataclass(frozen=True, eq=False)
class PathSamples:
    """First-passage times (``inf`` if the path survives to ``T``) and terminal positions (``nan`` if absorbed)."""

    tau: np.ndarray = field(repr=False)
    y_T: np.ndarray = field(repr=False)
    T: float
    h: float

    @property
    def n_paths(self) -> int:
        return self.tau.size

    @property
    def absorbed(self) -> np.ndarray:
        return np.isfinite(self.tau)


@njit(cache=True, nogil=True)
def _simulate_block(rng, a0s, beta, sigma, h, n_steps, tau_out, y_out):
    sqh = sigma * math.sqrt(h)
    drift = beta * h
    scale = 2.0 / (sigma * sigma * h)
    for i in range(a0s.size):
        y = a0s[i]
        if y <= 0.0:
            tau_out[i] = 0.0
            y_out[i] = np.nan
            continue
        tau = np.inf
        for k in range(n_steps):
            y_new = y + drift + sqh * rng.standard_normal()
            if y_new <= 0.0:
                tau = (k + y / (y - y_new)) * h
                break
            expo = scale * y * y_new
            if expo < _BRIDGE_EXPONENT_CAP:
                if rng.random() < math.exp(-expo):
                    tau = (k + 0.5) * h
                    break
            y = y_new
        tau_out[i] = tau
        y_out[i] = y if tau == np.inf else np.nan


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, block])))


def sample_first_passage(
    params: ProcessParams,
    seed: int,
    n_paths: int,
    *,
    n_steps: int = DEFAULT_STEPS,
    threads: int = 1,
    block_size: int = BLOCK_SIZE,
) -> PathSamples:
    """Simulate absorbed paths on ``[0, T]`` with step ``h = T/n_steps``.

    Gaussian increments are exact for constant drift and volatility.  Between
    grid points a path that stays positive is absorbed with the Brownian
    bridge crossing probability ``exp(-2 y_k y_{k+1} / (sigma^2 h))``, which
    removes the O(sqrt(h)) bias of grid-only detection.  A crossing found
    this way is dated at the middle of the step; a sign change is dated by
    linear interpolation.

    Block ``j`` of ``block_size`` paths draws from its own stream seeded by
    ``(seed, j)``, so the output depends only on ``(seed, n_paths,
    block_size)`` and not on ``threads``.
    """
    if int(n_paths) != n_paths or n_paths < 1:
        raise InputError(f"n_paths must be a positive integer, got {n_paths!r}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise InputError(f"n_steps must be a positive integer, got {n_steps!r}")
    if int(seed) != seed or seed < 0:
        raise InputError(f"seed must be a nonnegative integer, got {seed!r}")
    h = params.T / n_steps
    tau = np.empty(n_paths)
    y_T = np.empty(n_paths)

    def run(block: int) -> None:
        lo = block * block_size
        hi = min(lo + block_size, n_paths)
        rng = _block_rng(int(seed), block)
        a0s = np.asarray(params.rho.sample(rng, hi - lo), dtype=float)
        if np.any(a0s < 0):
            raise InputError("initial law produced negative positions")
        _simulate_block(rng, a0s, params.beta, params.sigma, h, int(n_steps), tau[lo:hi], y_T[lo:hi])

    blocks = range((n_paths + block_size - 1) // block_size)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, blocks))
    else:
        for b in blocks:
            run(b)
    return PathSamples(tau, y_T, params.T, h)


# --------------------------------------------------------------------------
# closed forms


def absorption_probability(a0: float, beta: float, sigma: float) -> float:
    """``P(tau < inf)`` for the motion started at ``a0 > 0``."""
    if beta <= 0:
        return 1.0
    return math.exp(-2.0 * a0 * beta / sigma**2)


def _fpt(a0, beta, sigma, t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a0 / (sigma * np.sqrt(2.0 * np.pi * t**3)) * np.exp(-((a0 + beta * t) ** 2) / (2.0 * sigma**2 * t))
    return np.where(t > 0, out, 0.0)


def fpt_density(a0: float, params: ProcessParams, t):
    """Density of the first passage to 0 from ``a0 > 0``."""
    if not a0 > 0:
        raise DomainError("first-passage density needs a0 > 0")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise DomainError("first-passage density is defined for t > 0")
    out = _fpt(a0, params.beta, params.sigma, t_arr)
    return float(out) if out.ndim == 0 else out


def survival_probability(a0: float, beta: float, sigma: float, T: float) -> float:
    """``P(tau >= T)``; the integral of the absorbed transition density over ``x > 0``."""
    s = sigma * math.sqrt(T)
    return float(ndtr((a0 + beta * T) / s) - math.exp(-2.0 * a0 * beta / sigma**2) * ndtr((beta * T - a0) / s))


def absorbed_transition_density(x, a0, beta: float, sigma: float, T: float):
    """Method of images: density at ``x`` of the motion from ``a0`` absorbed at 0."""
    x = np.asarray(x, dtype=float)
    a0 = np.asarray(a0, dtype=float)
    var = sigma * sigma * T
    norm = 1.0 / math.sqrt(2.0 * math.pi * var)
    direct = np.exp(-((x - a0 - beta * T) ** 2) / (2.0 * var))
    image = np.exp(-2.0 * a0 * beta / sigma**2 - (x + a0 - beta * T) ** 2 / (2.0 * var))
    return norm * (direct - image)


def killed_density(params: ProcessParams, x, T: float | None = None):
    """``p(x, T) = exp(kappa T) * E_rho[q(x, T | a)]``."""
    T = params.T if T is None else T
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("killed density is defined on x >= 0")
    rho = params.rho
    if isinstance(rho, PointMass):
        q = absorbed_transition_density(x, rho.a0, params.beta, params.sigma, T)
    else:
        q = trapezoid(
            absorbed_transition_density(x[..., None], rho.x, params.beta, params.sigma, T) * rho.density, rho.x, axis=-1
        )
    out = math.exp(params.kappa * T) * q
    return np.where(x > 0, out, 0.0)


# --------------------------------------------------------------------------
# duality


@dataclass(frozen=True)
class DualityReport:
    lhs_mc: float
    lhs_stderr: float
    lhs_quadrature: float
    rhs: float
    z_score: float  # |lhs_mc - rhs| / lhs_stderr
    ic_defect: float  # E_rho[u_g(a, 0)]; the identity needs it to vanish
    n_paths: int
    seed: int

    def as_text(self) -> str:
        return "".join(f"{k} = {_fmt(getattr(self, k))}\n" for k in self.__dataclass_fields__)

    def csv_header(self) -> str:
        return ",".join(self.__dataclass_fields__) + "\n"

    def csv_row(self) -> str:
        return ",".join(_fmt(getattr(self, k)) for k in self.__dataclass_fields__) + "\n"


def _fmt(v) -> str:
    return str(v) if isinstance(v, int) else f"{v:.17g}"


def _support_edge(params: ProcessParams, T: float) -> float:
    rho = params.rho
    top = rho.a0 if isinstance(rho, PointMass) else float(rho.x[-1])
    return top + max(params.beta, 0.0) * T + 12.0 * params.sigma * math.sqrt(T)


def duality_check(
    g: CausalSignal,
    coeffs: CoefficientSet,
    rho,
    T: float,
    seed: int,
    n_paths: int,
    *,
    dx: float = 1e-2,
    fgrid: FrequencyGrid | None = None,
    n_steps: int = DEFAULT_STEPS,
    threads: int = 1,
    samples: PathSamples | None = None,
) -> DualityReport:
    """Evaluate both sides of the first-passage duality for one input ``g``.

    (a) solve the boundary problem for ``g``; (b) take ``Psi = u_g(., T)``;
    (c) ``rhs = -integral p(x,T) Psi(x) dx``.  The left side is estimated by
    Monte Carlo (``lhs_mc``) and by quadrature against the first-passage
    density (``lhs_quadrature``).  Pass ``samples`` to reuse one set of paths
    across several inputs.
    """
    require_strict(coeffs)
    params = ProcessParams.from_coefficients(coeffs, T, rho)
    k_T = g.grid.index_of(T)
    model = FrequencySolution(g, coeffs, fgrid)

    x_max = max(2.0 * math.log(1e12) / coeffs.b, _support_edge(params, T))
    xgrid = SpaceGrid(dx, int(math.ceil(x_max / dx)) + 1)
    psi = model.profile(xgrid, T)
    p = killed_density(params, xgrid.xs, T)
    rhs = -float(trapezoid(p * psi.values, dx=dx))
    initial = model.profile(xgrid, 0.0)
    ic_defect = rho.expect(initial)

    t = g.grid.times[: k_T + 1]
    gv = g.values[: k_T + 1] / coeffs.k0
    if isinstance(rho, PointMass):
        passage = _fpt(rho.a0, params.beta, params.sigma, t)
    else:
        passage = trapezoid(_fpt(rho.x[:, None], params.beta, params.sigma, t) * rho.density[:, None], rho.x, axis=0)
    lhs_quad = float(trapezoid(np.exp(params.kappa * t) * gv * passage, t))

    if samples is None:
        samples = sample_first_passage(params, seed, n_paths, n_steps=n_steps, threads=threads)
    elif samples.T != T:
        raise InputError("path samples were drawn for a different horizon")
    hit = samples.tau < T
    vals = np.zeros(samples.n_paths)
    th = samples.tau[hit]
    vals[hit] = np.exp(params.kappa * th) * g(th) / coeffs.k0
    lhs_mc = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(samples.n_paths)) if samples.n_paths > 1 else math.inf
    diff = abs(lhs_mc - rhs)
    if stderr > 0:
        z = diff / stderr
    else:
        z = 0.0 if diff == 0 else math.inf
    return DualityReport(lhs_mc, stderr, lhs_quad, rhs, z, ic_defect, samples.n_paths, int(seed))


def write_histogram_csv(values, edges, path: str | Path) -> None:
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=np.asarray(edges, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])

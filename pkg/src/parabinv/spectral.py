"""Unitary Fourier transform of causal signals and Laplace evaluation.

Convention::

    V(iw) = (2*pi)**-0.5 * integral exp(-i*w*t) v(t) dt
    V(p)  = (2*pi)**-0.5 * integral_0^inf exp(-p*t) v(t) dt,   Re p >= 0

Frequency grids are odd-sized and centred on ``w = 0`` so that the
conjugate-symmetry relation ``V(-iw) = conj(V(iw))`` can be checked sample by
sample.  The signal is zero-padded to the FFT length ``m``; samples of an
inverse transform that fall outside ``[0, T]`` (the padding region, which is
where negative times wrap to) are reported separately as ``outside_norm``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError, InputError
from .signal import CausalSignal, TimeGrid

__all__ = [
    "FrequencyGrid",
    "Spectrum",
    "Reconstruction",
    "forward_transform",
    "inverse_transform",
    "reconstruct",
    "laplace_at",
    "synthesize_half",
    "next_odd_fast_len",
    "write_spectrum_csv",
]

SQRT_2PI = math.sqrt(2.0 * math.pi)


def next_odd_fast_len(target: int) -> int:
    """Smallest odd integer ``>= target`` of the form ``3^i 5^j 7^k``."""
    best = None
    p3 = 1
    while p3 < 3 * target:
        p5 = p3
        while p5 < 3 * target:
            p7 = p5
            while p7 < 3 * target:
                if p7 >= target and (best is None or p7 < best):
                    best = p7
                p7 *= 7
            p5 *= 5
        p3 *= 3
    return best


@dataclass(frozen=True)
class FrequencyGrid:
    """Symmetric grid ``w_j = j*d_omega`` for ``j = -(m-1)/2 .. (m-1)/2``."""

    d_omega: float
    m: int

    def __post_init__(self):
        if not (math.isfinite(self.d_omega) and self.d_omega > 0):
            raise InputError(f"frequency step must be positive, got {self.d_omega!r}")
        if int(self.m) != self.m or self.m < 1 or self.m % 2 == 0:
            raise InputError(f"frequency grid size must be a positive odd integer, got {self.m!r}")
        object.__setattr__(self, "d_omega", float(self.d_omega))
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def for_time_grid(cls, tgrid: TimeGrid, pad: float = 2.0) -> FrequencyGrid:
        """FFT-matched grid for ``tgrid`` with the signal zero-padded by ``pad``."""
        if pad < 1:
            raise InputError("padding factor must be >= 1")
        m = next_odd_fast_len(max(int(math.ceil(pad * tgrid.n)), tgrid.n) + 1)
        return cls(2.0 * math.pi / (m * tgrid.dt), m)

    @property
    def half(self) -> int:
        return (self.m - 1) // 2

    @property
    def omega_max(self) -> float:
        return self.d_omega * self.half

    @property
    def omegas(self) -> np.ndarray:
        return (np.arange(self.m) - self.half) * self.d_omega

    @property
    def nonneg_omegas(self) -> np.ndarray:
        """The ``w >= 0`` half, starting at 0."""
        return np.arange(self.half + 1) * self.d_omega


@dataclass(frozen=True, eq=False)
class Spectrum:
    grid: FrequencyGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.grid.m,):
            raise InputError(f"expected {self.grid.m} spectral samples, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def conjugate_asymmetry(self) -> float:
        """``max |V(-iw) - conj V(iw)|`` relative to ``max |V|`` (0 for V = 0)."""
        scale = float(np.max(np.abs(self.values)))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.values[::-1] - np.conj(self.values)))) / scale

    def l2_norm(self) -> float:
        """Riemann-sum L2 norm in ``dw``; matches the time-domain norm on FFT grids."""
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.grid.d_omega)

    def __add__(self, other: Spectrum) -> Spectrum:
        if other.grid != self.grid:
            raise InputError("spectra live on different frequency grids")
        return Spectrum(self.grid, self.values + other.values)

    def __mul__(self, alpha) -> Spectrum:
        return Spectrum(self.grid, alpha * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class Reconstruction:
    signal: CausalSignal
    imag_residue: float  # L2 norm of the imaginary part on [0, T]
    outside_norm: float  # L2 norm of the real part in the padding region


def _check_pair(tgrid: TimeGrid, fgrid: FrequencyGrid) -> None:
    nyquist = math.pi / tgrid.dt
    if fgrid.omega_max > nyquist * (1 + 1e-12):
        raise ConfigurationError(f"omega_max={fgrid.omega_max:g} exceeds the Nyquist limit pi/dt={nyquist:g}")
    if fgrid.m < tgrid.n:
        raise ConfigurationError(f"frequency grid ({fgrid.m}) shorter than the time grid ({tgrid.n})")
    if abs(fgrid.d_omega * fgrid.m * tgrid.dt - 2.0 * math.pi) > 1e-9 * 2.0 * math.pi:
        raise ConfigurationError("frequency grid is not the FFT grid of the time grid; use FrequencyGrid.for_time_grid")


def _endpoint_terms(sig: CausalSignal, z: np.ndarray) -> np.ndarray:
    # trapezoid half weight at t=0 plus the Euler-Maclaurin derivative term, f(t) = exp(-z t) v(t)
    v = sig.values
    dt = sig.grid.dt
    dv0 = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt)
    return -0.5 * v[0] + dt / 12.0 * (dv0 - z * v[0])


def forward_transform(
    sig: CausalSignal, fgrid: FrequencyGrid | None = None, *, endpoint_correction: bool = False
) -> Spectrum:
    """Sampled unitary Fourier transform ``dt/sqrt(2 pi) * sum_k exp(-i w t_k) v_k``.

    With ``endpoint_correction=True`` the Riemann sum is replaced by the
    trapezoidal rule with an Euler-Maclaurin correction at ``t = 0``, which is
    fourth order for signals that are smooth on ``[0, T]`` even when
    ``v(0) != 0``.  The uncorrected sum is what :func:`inverse_transform`
    inverts exactly.
    """
    if fgrid is None:
        fgrid = FrequencyGrid.for_time_grid(sig.grid)
    _check_pair(sig.grid, fgrid)
    buf = np.zeros(fgrid.m)
    buf[: sig.grid.n] = sig.values
    values = np.fft.fftshift(np.fft.fft(buf)) * (sig.grid.dt / SQRT_2PI)
    if endpoint_correction:
        if sig.grid.n < 3:
            raise InputError("endpoint correction needs at least 3 samples")
        values = values + (sig.grid.dt / SQRT_2PI) * _endpoint_terms(sig, 1j * fgrid.omegas)
    return Spectrum(fgrid, values)


def reconstruct(spec: Spectrum, tgrid: TimeGrid) -> Reconstruction:
    """Inverse transform without symmetry checks, with diagnostics."""
    _check_pair(tgrid, spec.grid)
    w = np.fft.ifft(np.fft.ifftshift(spec.values)) * (SQRT_2PI / tgrid.dt)
    n = tgrid.n
    inside = w[:n]
    imag = math.sqrt(float(np.sum(inside.imag**2)) * tgrid.dt)
    outside = math.sqrt(float(np.sum(w[n:].real ** 2)) * tgrid.dt)
    return Reconstruction(CausalSignal(tgrid, inside.real), imag, outside)


def inverse_transform(spec: Spectrum, tgrid: TimeGrid, tol: float = 1e-10) -> CausalSignal:
    """Real causal signal on ``tgrid`` whose sampled transform is ``spec``.

    Raises :class:`DomainError` when the spectrum is not conjugate symmetric
    to within ``tol`` (relative), since it cannot come from a real signal.
    """
    asym = spec.conjugate_asymmetry()
    if asym > tol:
        raise DomainError(f"spectrum is not conjugate symmetric (relative defect {asym:.3g} > {tol:g})")
    rec = reconstruct(spec, tgrid)
    scale = math.sqrt(float(np.sum(rec.signal.values**2)) * tgrid.dt)
    if rec.imag_residue > max(tol * scale, 1e-300):
        raise DomainError(f"imaginary residue {rec.imag_residue:.3g} exceeds {tol:g} of the signal norm")
    return rec.signal


def synthesize_half(half: np.ndarray, tgrid: TimeGrid, fgrid: FrequencyGrid, *, window: bool = True) -> np.ndarray:
    """Real inverse transform from the ``w >= 0`` half of a Hermitian spectrum.

    ``half`` has shape ``(..., (m+1)/2)``; the imaginary part of the ``w = 0``
    bin is ignored.  Returns the ``[0, T]`` window (or the full period when
    ``window=False``).
    """
    out = np.fft.irfft(half, n=fgrid.m, axis=-1) * (SQRT_2PI / tgrid.dt)
    return out[..., : tgrid.n] if window else out


def laplace_at(sig: CausalSignal, p: complex, *, endpoint_correction: bool = False) -> complex:
    """Direct-quadrature Laplace transform at ``p`` in the closed right half-plane."""
    p = complex(p)
    if p.real < 0:
        raise DomainError(f"Laplace transform evaluated at Re p = {p.real} < 0")
    t = sig.grid.times
    total = complex(np.sum(np.exp(-p * t) * sig.values))
    if endpoint_correction:
        total += complex(_endpoint_terms(sig, np.asarray(p)))
    return total * sig.grid.dt / SQRT_2PI


def write_spectrum_csv(spec: Spectrum, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega", "re", "im"])
        for om, v in zip(spec.grid.omegas, spec.values):
            w.writerow([repr(float(om)), repr(float(v.real)), repr(float(v.imag))])

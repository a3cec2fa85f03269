"""Coefficients, characteristic roots and sup-norm constants.

The transformed equation ``a*p*U + U'' + b*U' + c*U = 0`` has characteristic
roots ``lambda = -b/2 -+ sqrt(mu - a*p)`` with ``mu = b**2/4 - c``.  The
square root is the principal one (``Re >= 0``, cut on the negative real
axis).  Points exactly on the cut, i.e. real ``p`` when ``mu - a*p < 0``,
take the limit from ``Im p -> 0+``: ``sqrt(mu - a*p) = -i*sqrt(a*p - mu)``.
With this choice ``lambda1`` is the mode that decays at least like
``exp(-b*x/2)``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AdmissibilityError, DegeneracyError, DomainError
from .spectral import FrequencyGrid

__all__ = [
    "CoefficientSet",
    "Verdict",
    "Admissibility",
    "RootPair",
    "HardyBounds",
    "check_admissible",
    "require_strict",
    "sqrt_term",
    "roots_at",
    "roots_on_axis",
    "hardy_bounds",
    "lambda2_crossover",
    "write_roots_csv",
]

DEGENERACY_FLOOR = 1e-14


@dataclass(frozen=True)
class CoefficientSet:
    """Constants ``a, b, c, k0, k1`` of the boundary-value problem."""

    a: float
    b: float
    c: float
    k0: float
    k1: float

    def __post_init__(self):
        for name in ("a", "b", "c", "k0", "k1"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise DomainError(f"coefficient {name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def mu(self) -> float:
        return self.b * self.b / 4.0 - self.c

    @property
    def is_strict(self) -> bool:
        return check_admissible(self).verdict is Verdict.STRICT

    def shifted(self, M: float) -> CoefficientSet:
        return CoefficientSet(self.a, self.b, self.c + M, self.k0, self.k1)

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.a, self.b, self.c, self.k0, self.k1)


class Verdict(enum.Enum):
    STRICT = "strict"
    NEEDS_SHIFT = "needs-shift"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Admissibility:
    verdict: Verdict
    m_min: float | None = None  # any shift M > m_min restores strictness
    reason: str | None = None


def check_admissible(coeffs: CoefficientSet) -> Admissibility:
    a, b, k0, k1 = coeffs.a, coeffs.b, coeffs.k0, coeffs.k1
    if a <= 0:
        return Admissibility(Verdict.REJECTED, reason="a ≤ 0")
    if b <= 0:
        return Admissibility(Verdict.REJECTED, reason="b ≤ 0")
    # sign tests rather than products, which underflow for tiny values
    if k0 == 0 and k1 == 0:
        return Admissibility(Verdict.REJECTED, reason="k0²+k1² = 0")
    if (k0 > 0 and k1 > 0) or (k0 < 0 and k1 < 0):
        return Admissibility(Verdict.REJECTED, reason="k0·k1 > 0")
    if coeffs.mu < 0:
        return Admissibility(Verdict.STRICT)
    return Admissibility(Verdict.NEEDS_SHIFT, m_min=coeffs.mu, reason=f"b²/4 - c = {coeffs.mu:g} ≥ 0")


def require_strict(coeffs: CoefficientSet) -> None:
    adm = check_admissible(coeffs)
    if adm.verdict is Verdict.REJECTED:
        raise AdmissibilityError(f"inadmissible coefficients: {adm.reason}")
    if adm.verdict is Verdict.NEEDS_SHIFT:
        raise AdmissibilityError(f"coefficients need an exponential shift M > {adm.m_min:g} ({adm.reason})")


def sqrt_term(coeffs: CoefficientSet, p) -> np.ndarray:
    """``sqrt(mu - a*p)`` with the branch described in the module docstring."""
    p = np.asarray(p, dtype=complex)
    if np.any(p.real < 0):
        raise DomainError("roots are only defined for Re p >= 0")
    z = coeffs.mu - coeffs.a * p
    s = np.sqrt(z)
    on_cut = (z.imag == 0) & (z.real < 0)
    if np.any(on_cut):
        s = np.where(on_cut, -1j * np.sqrt(np.abs(z.real)), s)
    return s


@dataclass(frozen=True)
class RootPair:
    p: complex
    lambda1: complex
    lambda2: complex


def roots_at(coeffs: CoefficientSet, p: complex) -> RootPair:
    s = complex(sqrt_term(coeffs, p))
    half_b = coeffs.b / 2.0
    return RootPair(complex(p), -half_b - s, -half_b + s)


def roots_on_axis(coeffs: CoefficientSet, omegas) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``(lambda1, lambda2)`` at ``p = i*omega``."""
    s = sqrt_term(coeffs, 1j * np.asarray(omegas, dtype=float))
    half_b = coeffs.b / 2.0
    return -half_b - s, -half_b + s


@dataclass(frozen=True)
class HardyBounds:
    inv_diff: float
    l1_over_diff: float
    l2_over_diff: float
    inv_k: float
    l1_over_k_weighted: float
    n_total: float
    weighted: bool  # True when the last term carries the (1+|w|)^(-1/2) weight


def hardy_bounds(coeffs: CoefficientSet, fgrid: FrequencyGrid) -> HardyBounds:
    """Suprema over the sampled imaginary axis of the multipliers in the estimate.

    For ``k1 == 0`` the ratio ``lambda1/k0`` grows like ``sqrt(a|w|)``, so the
    last term is reported with the weight ``(1+|w|)**-0.5``; otherwise the
    plain supremum is used.
    """
    require_strict(coeffs)
    w = fgrid.omegas
    l1, l2 = roots_on_axis(coeffs, w)
    diff = l1 - l2
    kden = coeffs.k0 + coeffs.k1 * l1
    if np.min(np.abs(kden)) < DEGENERACY_FLOOR:
        raise DegeneracyError("k0 + k1*lambda1 vanishes on the frequency grid")
    if np.min(np.abs(diff)) < DEGENERACY_FLOOR:
        raise DegeneracyError("lambda1 - lambda2 vanishes on the frequency grid")
    weighted = coeffs.k1 == 0
    last = np.abs(l1 / kden)
    if weighted:
        last = last / np.sqrt(1.0 + np.abs(w))
    terms = [
        float(np.max(np.abs(1.0 / diff))),
        float(np.max(np.abs(l1 / diff))),
        float(np.max(np.abs(l2 / diff))),
        float(np.max(np.abs(1.0 / kden))),
        float(np.max(last)),
    ]
    return HardyBounds(*terms, n_total=float(sum(terms)), weighted=weighted)


def lambda2_crossover(coeffs: CoefficientSet, delta: float = 0.0) -> float:
    """Smallest ``omega >= 0`` with ``Re lambda2(i*omega) >= delta``.

    ``Re sqrt(mu - i*a*w)`` increases monotonically in ``|w|``, so the
    threshold has a closed form.  Diagnostic only.
    """
    require_strict(coeffs)
    r = coeffs.b / 2.0 + delta
    if r <= 0:
        return 0.0
    mu = coeffs.mu
    modulus = 2.0 * r * r - mu  # |mu - i a w| at the crossing
    return math.sqrt(max(modulus * modulus - mu * mu, 0.0)) / coeffs.a


def write_roots_csv(coeffs: CoefficientSet, omegas, path: str | Path) -> None:
    omegas = np.asarray(omegas, dtype=float)
    l1, l2 = roots_on_axis(coeffs, omegas)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega", "re_l1", "im_l1", "re_l2", "im_l2"])
        for row in zip(omegas, l1.real, l1.imag, l2.real, l2.imag):
            w.writerow([repr(float(v)) for v in row])

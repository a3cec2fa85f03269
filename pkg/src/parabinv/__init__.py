"""Frequency-domain solver for the quarter-plane parabolic boundary problem.

Submodules
----------
signal      causal boundary inputs and their Sobolev norms
spectral    unitary Fourier/Laplace transforms on FFT grids
symbolkit   coefficient checks, characteristic roots, multiplier bounds
solver      the solution operator, norms, residuals, shifted and reversed solves
stochastic  killed drifted Brownian motion and the first-passage duality
cli         configuration-driven runs
"""

from .errors import (
    AdmissibilityError,
    ConfigurationError,
    DegeneracyError,
    DomainError,
    InputError,
    NumericalError,
    ParabinvError,
    UnsupportedConfigurationError,
)
from .signal import CausalSignal, TimeGrid, builtin_signal, validate_gamma
from .solver import SpaceGrid, fd_forward_oracle, solve, solve_shifted, solve_streaming
from .spectral import FrequencyGrid, forward_transform, inverse_transform
from .symbolkit import CoefficientSet, check_admissible

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "ConfigurationError",
    "DegeneracyError",
    "DomainError",
    "InputError",
    "NumericalError",
    "ParabinvError",
    "UnsupportedConfigurationError",
    "CausalSignal",
    "TimeGrid",
    "builtin_signal",
    "validate_gamma",
    "SpaceGrid",
    "fd_forward_oracle",
    "solve",
    "solve_shifted",
    "solve_streaming",
    "FrequencyGrid",
    "forward_transform",
    "inverse_transform",
    "CoefficientSet",
    "check_admissible",
]

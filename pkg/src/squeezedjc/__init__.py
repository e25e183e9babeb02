"""Jaynes-Cummings dynamics for an atom exchanging squeezed coherent photons."""

from __future__ import annotations

__version__ = "0.1.0"

from ._accel import backend_name
from .dynamics import (
    JointState,
    TimeSeries,
    amplitudes_analytic,
    evolve,
    evolve_ultrastrong,
    ground_prob,
    ground_prob_jcm,
    hamiltonian_matrix,
    longtime_average,
    nonrwa_residual,
    rabi_freq,
)
from .errors import ConfigError, ConvergenceError, DomainError, TruncationError, TruncationWarning
from .fock_oracle import FockMatrix, FockVector, TruncationSpec, bn_numeric
from .specfun import SeriesResult, SignedLogValue, compensated_sum, hyp_poly, log_factorial
from .states import AmplitudeSeries, ModelParams, bn_aligned, bn_general, build_series, gamma_param

__all__ = [
    "AmplitudeSeries",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "FockMatrix",
    "FockVector",
    "JointState",
    "ModelParams",
    "SeriesResult",
    "SignedLogValue",
    "TimeSeries",
    "TruncationError",
    "TruncationSpec",
    "TruncationWarning",
    "amplitudes_analytic",
    "backend_name",
    "bn_aligned",
    "bn_general",
    "bn_numeric",
    "build_series",
    "compensated_sum",
    "evolve",
    "evolve_ultrastrong",
    "gamma_param",
    "ground_prob",
    "ground_prob_jcm",
    "hamiltonian_matrix",
    "hyp_poly",
    "log_factorial",
    "longtime_average",
    "nonrwa_residual",
    "rabi_freq",
]

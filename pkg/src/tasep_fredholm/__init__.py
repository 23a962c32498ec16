"""Transition probabilities of TASEP and PushASEP as Fredholm determinants."""

from .fredholm import F_t, ObservationSpec, WindowPlan, assemble_kernel, delta_k, dK_dt, fredholm_det
from .lattice import TASEP, ConvergenceError, ContourConfig, RateParams
from .walk import ParticleConfig

__all__ = [
    "F_t",
    "ObservationSpec",
    "WindowPlan",
    "assemble_kernel",
    "delta_k",
    "dK_dt",
    "fredholm_det",
    "TASEP",
    "ConvergenceError",
    "ContourConfig",
    "RateParams",
    "ParticleConfig",
]

"""Simulated tempering for mixtures of log-concave components, plus an exact
finite-chain lab for spectral gap, s-conductance, and state-decomposition
checks."""

from ._backend import backend_name, get_backend
from .ladder import (DesignReport, F_overlap, Ladder, build_ladder,
                     design_report, gaussian_closed_forms, overlap_diagnostics,
                     step_sizes)
from .targets import (LocalPotential, MixtureSpec, component_log_density,
                      conditional_label_weights, diag_quadratic_potential,
                      mixture_gradient, mixture_potential, quadratic_potential,
                      two_mode_spec)
from .tempering import (AugState, ChainTrace, TemperingConfig, TemperingState,
                        TraceRecord, aux_joint_step, default_init, run_chain,
                        st_step, stream)

__version__ = "0.1.0"

__all__ = [
    "AugState", "ChainTrace", "DesignReport", "F_overlap", "Ladder",
    "LocalPotential", "MixtureSpec", "TemperingConfig", "TemperingState",
    "TraceRecord", "aux_joint_step", "backend_name", "build_ladder",
    "component_log_density", "conditional_label_weights", "default_init",
    "design_report", "diag_quadratic_potential", "gaussian_closed_forms",
    "get_backend", "mixture_gradient", "mixture_potential",
    "overlap_diagnostics", "quadratic_potential", "run_chain", "st_step",
    "step_sizes", "stream", "two_mode_spec",
]

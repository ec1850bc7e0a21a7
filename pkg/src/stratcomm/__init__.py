"""Stackelberg equilibria, strategic rate-distortion and uncoded transmission
for quadratic-Gaussian strategic communication with side information."""

__version__ = "0.1.0"

from .equilibrium import (
    EquilibriumReport,
    closed_form_equilibrium,
    encoder_objective,
    solve_stackelberg,
    transmitter_si_audit,
)
from .gaussian_core import (
    DistortionPair,
    ModelParams,
    conditional,
    lincomb_cov,
    mutual_information,
    validate_model,
)
from .noisy_jscc import (
    ChannelParams,
    LinearStrategyPair,
    capacity,
    construct_matched_params,
    goblick_mappings,
    linear_si_strategies,
    matching_condition,
    optimality_audit,
    strategic_uncoded_no_si,
)
from .sim import SimResult, deviation_audit, sample_source, simulate_game
from .solver import ScalarMinResult, minimize_scalar
from .strategic_rd import (
    RDPoint,
    beta_star,
    rate_loss_audit,
    rd_point_no_si,
    wz_curve,
    wz_distortions,
    wz_rate,
    wz_sigma_s2,
)

__all__ = [
    "__version__",
    "EquilibriumReport",
    "closed_form_equilibrium",
    "encoder_objective",
    "solve_stackelberg",
    "transmitter_si_audit",
    "DistortionPair",
    "ModelParams",
    "conditional",
    "lincomb_cov",
    "mutual_information",
    "validate_model",
    "ChannelParams",
    "LinearStrategyPair",
    "capacity",
    "construct_matched_params",
    "goblick_mappings",
    "linear_si_strategies",
    "matching_condition",
    "optimality_audit",
    "strategic_uncoded_no_si",
    "SimResult",
    "deviation_audit",
    "sample_source",
    "simulate_game",
    "ScalarMinResult",
    "minimize_scalar",
    "RDPoint",
    "beta_star",
    "rate_loss_audit",
    "rd_point_no_si",
    "wz_curve",
    "wz_distortions",
    "wz_rate",
    "wz_sigma_s2",
]

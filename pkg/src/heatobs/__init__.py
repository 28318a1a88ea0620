"""heatobs: spectral semilinear heat solver on a periodic box with a
verification harness for observation, interpolation, and stability estimates."""

from .dynamics import (
    NonlinearitySpec,
    Trajectory,
    lipschitz_on_ball,
    picard_solve,
    smoothing_check,
    solve_linear_potential,
    solve_semilinear,
    sup_norm_bound,
)
from .errors import HeatObsError
from .estimates import (
    SolutionPair,
    backward_bound_check,
    chi_bound_check,
    chi_trace,
    conditional_stability_check,
    fit_beta_C,
    global_interpolation_check,
    gronwall_superlinear_check,
    local_energy_Ej,
    make_pair,
    observation_estimate_check,
    unique_continuation_probe,
)
from .frequency import (
    CutoffFamily,
    FrequencyTrace,
    ProofConstants,
    convexity_bookkeeping,
    cutoff_family,
    frequency,
    frequency_trace,
    gaussian_weight,
    log_convexity_check,
    theta_estimate,
)
from .grid import Field, GridSpec, gradient, lp_norm, masked_l2, sobolev_norm
from .obsregion import ObservationRegion, ball_mask, build_region, thickness
from .reporting import EstimateReport
from .semigroup import heat_kernel, heat_propagate, lp_lq_check

__version__ = "0.1.0"

__all__ = [
    "CutoffFamily",
    "EstimateReport",
    "Field",
    "FrequencyTrace",
    "GridSpec",
    "HeatObsError",
    "NonlinearitySpec",
    "ObservationRegion",
    "ProofConstants",
    "SolutionPair",
    "Trajectory",
    "backward_bound_check",
    "ball_mask",
    "build_region",
    "chi_bound_check",
    "chi_trace",
    "conditional_stability_check",
    "convexity_bookkeeping",
    "cutoff_family",
    "fit_beta_C",
    "frequency",
    "frequency_trace",
    "gaussian_weight",
    "global_interpolation_check",
    "gradient",
    "gronwall_superlinear_check",
    "heat_kernel",
    "heat_propagate",
    "lipschitz_on_ball",
    "local_energy_Ej",
    "log_convexity_check",
    "lp_lq_check",
    "lp_norm",
    "make_pair",
    "masked_l2",
    "observation_estimate_check",
    "picard_solve",
    "smoothing_check",
    "sobolev_norm",
    "solve_linear_potential",
    "solve_semilinear",
    "sup_norm_bound",
    "theta_estimate",
    "thickness",
    "unique_continuation_probe",
]

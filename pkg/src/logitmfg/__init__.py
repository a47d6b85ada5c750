"""Generalized logit dynamics and finite-horizon mean field games with Tsallis-deformed softmax kernels."""
from .errors import *  # noqa: F401,F403
from .tsallis import TsallisParams, exp_q, ln_q, phi_cost, theta_bar
from .grid import (
    DensityField,
    GridSpec,
    PopulationSpec,
    ValueField,
    avg_norm_diff,
    downsample_cell_average,
    init_density,
    make_grid,
    max_norm_diff,
)
from .utility import (
    FishingParams,
    TourismParams,
    UtilityModel,
    constant_utility,
    eval_utility_grid,
    fishing_utility,
    potential_value,
    tourism_utility,
    utility_bound_L,
)
from .gld import GldConfig, GldResult, gld_step, gld_transition_kernel, solve_gld_stationary
from .mfg import (
    IterationLog,
    MfgConfig,
    MfgResult,
    cfl_limits,
    extract_turnpike_slice,
    fp_forward_step,
    hjb_backward_step,
    optimal_control_kernel,
    solve_mfg,
)
from .config import RunConfig, parse_config, serialize_config
from .experiments import convergence_study, delta_sweep, scenario_sweep

__version__ = "0.1.0"

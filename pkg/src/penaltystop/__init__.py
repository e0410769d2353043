"""Penalty-method solvers for optimal stopping on Markov-chain lattices."""

__version__ = "0.1.0"

import warnings

# numba probes for TBB on first parallel launch; the fallback layers are fine
warnings.filterwarnings("ignore", message="The TBB threading layer")

from .chain import ConfigurationError, TransitionKernel, add_jumps, build_diffusion_chain, sample_path, sample_paths
from .lattice import (
    Label, RegionGrid, StateGrid, TimeGrid, above, below, build_region, classify, everywhere, interval,
)
from .oracle import OracleResult, control_enum, random_instance, snell_backward
from .payoff import BoundaryConvention, Mode, PayoffSpec, effective_F, functional_value
from .penalty_solver import (
    ConvergenceError,
    MonotonicityError,
    PenaltyConfig,
    PenaltyProblem,
    ValueField,
    beta_sweep,
    solve_finite_horizon,
    solve_fixed_point,
)
from .policy import StoppingRegion, build_region_eps, estimate_exit_tail, evaluate_policy
from .reference import BrownianExample, closed_form_l, sup_l, verify_example

__all__ = [
    "BoundaryConvention", "BrownianExample", "above", "below", "everywhere", "interval", "ConfigurationError", "ConvergenceError", "Label", "Mode",
    "MonotonicityError", "OracleResult", "PayoffSpec", "PenaltyConfig", "PenaltyProblem", "RegionGrid",
    "StateGrid", "StoppingRegion", "TimeGrid", "TransitionKernel", "ValueField", "add_jumps", "beta_sweep",
    "build_diffusion_chain", "build_region", "build_region_eps", "classify", "closed_form_l", "control_enum",
    "effective_F", "estimate_exit_tail", "evaluate_policy", "functional_value", "random_instance",
    "sample_path", "sample_paths", "snell_backward", "solve_finite_horizon", "solve_fixed_point", "sup_l",
    "verify_example",
]

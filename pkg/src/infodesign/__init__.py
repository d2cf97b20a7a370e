"""Optimal input design for parameter estimation in discrete-time systems.

Maximizes the trace of the Fisher information carried by noisy
observations over a finite horizon, by backward induction on a grid over
the augmented state (system state plus parameter sensitivities), then
rolls out the resulting policy.
"""

from .errors import BudgetError, ConfigError, DomainError, NumericError
from .grids import GridAxis, GridSpec, nearest_node, read_table_binary, write_table_binary, write_table_csv
from .models import FlyModel, ParameterVector, SystemModel, fly_jacobians, fly_step
from .observations import (
    GaussianModel,
    ObservationModel,
    PoissonTrapModel,
    gaussian_fisher_info,
    poisson_fisher_info,
    trap_info,
)
from .oracle import (
    MonteCarloFisher,
    OracleReport,
    exhaustive_search,
    fd_sensitivity,
    monte_carlo_fisher,
    poisson_info_series,
)
from .sensitivity import (
    AugmentedState,
    InformationMatrix,
    Trajectory,
    propagate,
    simulate,
    stage_reward,
    total_fisher_information,
    trace_objective,
    trajectory_objective,
)
from .solver import (
    DesignResult,
    InductionResult,
    InputGrid,
    PolicyTable,
    ValueTable,
    auto_grid_bounds,
    backward_induction,
    interpolate,
    rollout,
    solve,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedState",
    "BudgetError",
    "ConfigError",
    "DesignResult",
    "DomainError",
    "FlyModel",
    "GaussianModel",
    "GridAxis",
    "GridSpec",
    "InductionResult",
    "InformationMatrix",
    "InputGrid",
    "MonteCarloFisher",
    "NumericError",
    "ObservationModel",
    "OracleReport",
    "ParameterVector",
    "PoissonTrapModel",
    "PolicyTable",
    "SystemModel",
    "Trajectory",
    "ValueTable",
    "auto_grid_bounds",
    "backward_induction",
    "exhaustive_search",
    "fd_sensitivity",
    "fly_jacobians",
    "fly_step",
    "gaussian_fisher_info",
    "interpolate",
    "monte_carlo_fisher",
    "nearest_node",
    "poisson_fisher_info",
    "poisson_info_series",
    "propagate",
    "read_table_binary",
    "rollout",
    "simulate",
    "solve",
    "stage_reward",
    "total_fisher_information",
    "trace_objective",
    "trajectory_objective",
    "trap_info",
    "write_table_binary",
    "write_table_csv",
]

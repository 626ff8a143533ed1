"""Two-route traffic model in which a fraction of drivers follow a routing app.

The package covers the density ODE and its integrator, closed-form and numeric
equilibria, penetration-rate thresholds, efficiency analysis and sweeps,
numerical property checks, scenario files and a command-line interface.
"""

from .analysis import (
    J_at_alpha,
    RegimeClassification,
    RegimeError,
    SweepResult,
    dJ_dalpha,
    grenoble_scenario,
    make_grid,
    performance_J,
    regime_classify,
    sweep,
    symmetric_scenario,
)
from .equilibrium import (
    ConvergenceError,
    EquilibriumReport,
    InconsistencyError,
    active_equilibrium,
    affine_candidates,
    alpha_threshold,
    effective_capacity,
    general_equilibrium,
    ratio_at_equilibrium,
    thresholds,
)
from .integrate import Trajectory, integrate, steady_state, steady_states
from .model import (
    AssumptionError,
    DomainError,
    RouteMode,
    RouteParams,
    RoutingRule,
    Scenario,
    classify_mode,
    demand_fn,
    routing_ratios,
    supply,
    validate_scenario,
    vector_field,
)
from .plots import emit_svg
from .scenario_io import bundled_scenario, parse_scenario, write_scenario
from .verify import PropertyReport, run_checks

__version__ = "0.1.0"

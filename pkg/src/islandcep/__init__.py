"""Two-stage stochastic capacity expansion planning for island power systems."""

from .errors import CepError, ModelBuildError, ScenarioError, SolverError, ValidationError
from .investment import InvestmentPlan, build_investment_stage, build_linking_constraints
from .milp import ModelInstance, SolveOptions, SolveResult, relax_integrality, solve
from .scenarios import (
    FuelPriceRule,
    OutageModel,
    ScenarioDay,
    TimeSeries,
    build_scenario_set,
    fuel_price,
    generate_outage_series,
    scale_load,
)
from .system import (
    Bus,
    FuelId,
    FuelSpec,
    HeatRateCurve,
    Line,
    PlannerConfig,
    PowerSystem,
    RenewableGenerator,
    SiteLimit,
    StartupCategory,
    StorageUnit,
    ThermalGenerator,
    expand_candidate_catalog,
    validate_system,
)
from .uc import DispatchSolution, solve_operational

__version__ = "0.1.0"

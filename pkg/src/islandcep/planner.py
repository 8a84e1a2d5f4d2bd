"""Extensive-form assembly, plan evaluation and plan reports."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import ModelBuildError, ScenarioError, SolverError
from .investment import (
    FirstStage,
    InvestmentPlan,
    build_investment_stage,
    capacity_summary,
    plan_costs,
    plan_from_values,
)
from .milp import LinExpr, ModelInstance, SolveOptions, SolveResult, solve
from .scenarios import ScenarioDay, check_scenario_set
from .system import PowerSystem
from .uc import DispatchSolution, ScenarioSubproblem, build_subproblem, solve_operational

log = logging.getLogger(__name__)


def annual_scale(system: PowerSystem) -> float:
    """Multiplier turning a probability-weighted daily cost into a yearly one."""
    return system.config.periods_per_year * system.config.period_hours


def estimate_variables(system: PowerSystem, scenarios: Sequence[ScenarioDay]) -> int:
    """Variable count of the extensive form, computed without building it."""
    per_hour = 0
    for g in system.thermal_generators:
        per_hour += 8 + (3 if g.is_dual_fuel else 0) + (0 if g.existing else 1)
    per_hour += len(system.renewable_generators) + 5 * len(system.storage_units)
    per_hour += sum(1 for b in system.buses if b.in_service) + 1
    if system.config.network_mode == "pipe_and_bubble":
        per_hour += sum(1 for ln in system.lines if ln.in_service)
    n_existing = sum(1 for g in system.thermal_generators if g.existing)
    total = len(system.candidate_thermal) + len(system.candidate_renewable)
    total += len(system.candidate_storage) + len(system.retirable)
    for sc in scenarios:
        total += per_hour * sc.hours + n_existing * sc.n_days
    return total


@dataclass
class ExtensiveForm:
    """All scenarios in one model sharing a single first stage."""

    model: ModelInstance
    system: PowerSystem
    scenarios: list[ScenarioDay]
    first_stage: FirstStage
    subproblems: list[ScenarioSubproblem]
    scale: float

    def second_stage(self) -> LinExpr:
        expr = LinExpr()
        for sc, sub in zip(self.scenarios, self.subproblems):
            expr += (self.scale * sc.probability / sc.n_days) * sub.cost
        return expr


def assemble_extensive_form(
    system: PowerSystem,
    scenarios: Sequence[ScenarioDay],
    *,
    network_mode: str | None = None,
    utilization: bool | None = None,
    variable_cap: int | None = None,
) -> ExtensiveForm:
    """Build ``C1 + T_rep * tau * sum_w rho_w C2_w`` over all scenarios.

    Multi-day (stitched) scenarios have their operating cost divided by the
    number of days so the annualization stays per day.

    Raises:
        ModelBuildError: ``ef_too_large`` when the estimated variable count
            exceeds the cap; decompose with progressive hedging instead.
    """
    scenarios = list(scenarios)
    check_scenario_set(scenarios)
    cap = system.config.ef_variable_cap if variable_cap is None else variable_cap
    est = estimate_variables(system, scenarios)
    if est > cap:
        raise ModelBuildError(
            "ef_too_large",
            f"extensive form needs ~{est:,} variables (cap {cap:,}); use the progressive hedging mode",
        )
    model = ModelInstance("extensive_form")
    fs = build_investment_stage(model, system)
    subs = [
        build_subproblem(model, system, sc, fs, network_mode=network_mode, utilization=utilization)
        for sc in scenarios
    ]
    ef = ExtensiveForm(model, system, scenarios, fs, subs, annual_scale(system))
    model.set_objective(fs.cost + ef.second_stage())
    log.info("extensive form: %d variables, %d constraints, %d scenarios",
             model.num_variables, model.num_constraints, len(scenarios))
    return ef


@dataclass
class EFSolution:
    plan: InvestmentPlan
    status: str
    objective: float
    best_bound: float
    first_stage_cost: float
    second_stage_cost: float
    result: SolveResult
    ef: ExtensiveForm

    @property
    def gap(self) -> float:
        return self.result.gap


def solve_extensive_form(system: PowerSystem, scenarios: Sequence[ScenarioDay],
                         options: SolveOptions | None = None, **kwargs) -> EFSolution:
    ef = assemble_extensive_form(system, scenarios, **kwargs)
    res = solve(ef.model, options)
    if not res.ok:
        raise SolverError(res.status, f"extensive form: {res.message}", res)
    plan = plan_from_values(system, ef.first_stage, res.values)
    return EFSolution(
        plan=plan,
        status=res.status,
        objective=res.objective,
        best_bound=res.best_bound,
        first_stage_cost=ef.first_stage.cost.value(res.values),
        second_stage_cost=ef.second_stage().value(res.values),
        result=res,
        ef=ef,
    )


@dataclass
class PlanReport:
    """Annualized cost breakdown and reliability metrics of a plan.

    Costs are $/y. ``investment_cost`` covers capital and fixed O&M of new
    builds; ``fom_existing`` covers the existing fleet that is kept;
    ``penalty_cost`` is the annualized shed, reserve and utilization
    penalties, so ``overall_cost`` equals the planning objective.
    ``expected_daily_shed`` (MWh) and ``expected_lolh`` (h) are per day.
    """

    plan: InvestmentPlan
    investment_cost: float
    retirement_cost: float
    fom_existing: float
    production_cost: float
    penalty_cost: float
    overall_cost: float
    new_gen: float
    new_storage: float
    retired: float
    expected_daily_shed: float
    expected_lolh: float
    min_reserves: float
    horizon_lolh: float = 0.0
    horizon_hours: int = 0
    failed_scenarios: list[str] = field(default_factory=list)
    scenarios: list[dict] = field(default_factory=list)

    @property
    def first_stage_cost(self) -> float:
        return self.investment_cost + self.retirement_cost + self.fom_existing

    @property
    def ok(self) -> bool:
        return not self.failed_scenarios

    def to_dict(self) -> dict:
        d = asdict(self)
        d["plan"] = self.plan.to_dict()
        return d

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))


def evaluate_plan(
    system: PowerSystem,
    plan: InvestmentPlan,
    scenarios: Sequence[ScenarioDay],
    options: SolveOptions | None = None,
    *,
    workers: int = 1,
    network_mode: str | None = None,
    utilization: bool | None = None,
) -> PlanReport:
    """Fix the first stage to ``plan``, solve every scenario and aggregate.

    Scenario failures are recorded in ``failed_scenarios`` and make the cost
    fields NaN rather than raising.
    """
    scenarios = list(scenarios)
    if not scenarios:
        raise ScenarioError("no_scenarios", "nothing to evaluate")

    def run(sc: ScenarioDay):
        try:
            return solve_operational(system, sc, plan, options, network_mode=network_mode, utilization=utilization)
        except SolverError as err:
            log.error("scenario %s failed: %s", sc.id, err)
            return err

    if workers > 1 and len(scenarios) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, scenarios))
    else:
        results = [run(sc) for sc in scenarios]
    return aggregate_report(system, plan, scenarios, results)


def aggregate_report(system: PowerSystem, plan: InvestmentPlan, scenarios: Sequence[ScenarioDay],
                     results: Sequence[DispatchSolution | Exception]) -> PlanReport:
    scale = annual_scale(system)
    costs = plan_costs(system, plan)
    caps = capacity_summary(system, plan)
    prod = pen = shed = lolh = 0.0
    min_res = math.inf
    failed, rows = [], []
    horizon_lolh, horizon_hours = 0.0, 0
    for sc, sol in zip(scenarios, results):
        if not isinstance(sol, DispatchSolution):
            failed.append(sc.id)
            continue
        w = float(sc.probability) / sol.n_days
        prod += w * sol.production_cost
        pen += w * sol.penalty_cost
        shed += w * sol.load_shed
        lolh += w * sol.lolh
        horizon_lolh += sol.lolh
        horizon_hours += sc.hours
        min_res = min(min_res, sol.min_reserve)
        rows.append(sol.metrics())
    nan = float("nan")
    production = scale * prod if not failed else nan
    penalty = scale * pen if not failed else nan
    return PlanReport(
        plan=plan,
        investment_cost=float(costs.investment),
        retirement_cost=float(costs.retirement),
        fom_existing=float(costs.fom_existing),
        production_cost=production,
        penalty_cost=penalty,
        overall_cost=float(costs.total + production + penalty),
        new_gen=float(caps["new_gen"]),
        new_storage=float(caps["new_storage"]),
        retired=float(caps["retired"]),
        expected_daily_shed=shed if not failed else nan,
        expected_lolh=lolh if not failed else nan,
        min_reserves=min_res if rows else nan,
        horizon_lolh=horizon_lolh,
        horizon_hours=horizon_hours,
        failed_scenarios=failed,
        scenarios=rows,
    )

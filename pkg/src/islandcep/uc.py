"""Second-stage unit commitment and economic dispatch for one scenario.

Commitment uses the three-binary (on/start/stop) formulation with cyclic
day boundaries, Damci-Kurt ramping rows, tiered start-up costs, storage with
cyclic state of charge, a transport network (or copper plate), a system
reserve margin with a capped shortfall and a convex heat-rate epigraph with
dual-fuel switching and finite fuel supplies.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ModelBuildError, SolverError
from .investment import FirstStage, InvestmentPlan, build_linking_constraints, fixed_first_stage
from .milp import BINARY, LinExpr, ModelInstance, SolveOptions, SolveResult, VariableRef, quicksum, solve
from .scenarios import ScenarioDay, stitch_days
from .system import PowerSystem, RenewableGenerator, ThermalGenerator

log = logging.getLogger(__name__)

LOLH_THRESHOLD = 1e-6


@dataclass
class ScenarioSubproblem:
    """One scenario's second-stage variables inside ``model``.

    Variable families are dicts keyed by ``(element id, hour)``; ``tag`` (the
    scenario id) is appended to every variable and row name so several
    scenarios can share one model.
    """

    system: PowerSystem
    scenario: ScenarioDay
    model: ModelInstance
    first_stage: FirstStage
    network_mode: str
    utilization: bool
    tag: str = ""
    T: int = 0
    u: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    w: dict = field(default_factory=dict)
    p: dict = field(default_factory=dict)
    pbar: dict = field(default_factory=dict)
    ux: dict = field(default_factory=dict)
    csu: dict = field(default_factory=dict)
    f: dict = field(default_factory=dict)
    fp: dict = field(default_factory=dict)
    fs: dict = field(default_factory=dict)
    up: dict = field(default_factory=dict)
    us: dict = field(default_factory=dict)
    p_ren: dict = field(default_factory=dict)
    soc: dict = field(default_factory=dict)
    ch: dict = field(default_factory=dict)
    dis: dict = field(default_factory=dict)
    e: dict = field(default_factory=dict)
    d: dict = field(default_factory=dict)
    flow: dict = field(default_factory=dict)
    shed: dict = field(default_factory=dict)
    sigma_r: dict = field(default_factory=dict)
    sigma_util: dict = field(default_factory=dict)
    production: LinExpr = field(default_factory=LinExpr)
    shed_cost: LinExpr = field(default_factory=LinExpr)
    reserve_cost: LinExpr = field(default_factory=LinExpr)
    util_cost: LinExpr = field(default_factory=LinExpr)

    @property
    def cost(self) -> LinExpr:
        """Operational cost of the scenario (production plus penalties)."""
        return self.production + self.shed_cost + self.reserve_cost + self.util_cost

    def demand(self, bus: str) -> np.ndarray:
        return self.scenario.demand.get(bus, np.zeros(self.T))

    def reserve_req(self) -> np.ndarray:
        return self.scenario.reserve_req

    def eta(self, gen) -> np.ndarray:
        """Hourly availability factor for a generator, validated to [0, 1]."""
        av = self.scenario.availability
        if gen.id in av:
            eta = av[gen.id]
        elif isinstance(gen, ThermalGenerator):
            eta = np.full(self.T, 1.0 if gen.existing else self.system.config.candidate_derate)
        elif isinstance(gen, RenewableGenerator) and gen.donor in av:
            eta = av[gen.donor]
        else:
            raise ModelBuildError("missing_availability", f"{gen.id} in scenario {self.scenario.id}")
        if len(eta) != self.T or np.any(eta < 0) or np.any(eta > 1):
            raise ModelBuildError("bad_availability", f"{gen.id}: availability must lie in [0, 1]")
        return eta

    def n(self, *parts):
        return (*parts, self.tag)


def _register_variables(sub: ScenarioSubproblem) -> None:
    m, sys_, T = sub.model, sub.system, sub.T
    for g in sys_.thermal_generators:
        for t in range(T):
            k = (g.id, t)
            sub.u[k] = m.add_variable(sub.n("u", g.id, t), BINARY)
            sub.v[k] = m.add_variable(sub.n("v", g.id, t), BINARY)
            sub.w[k] = m.add_variable(sub.n("w", g.id, t), BINARY)
            sub.p[k] = m.add_variable(sub.n("p", g.id, t))
            sub.pbar[k] = m.add_variable(sub.n("pbar", g.id, t))
            sub.csu[k] = m.add_variable(sub.n("csu", g.id, t))
            sub.f[k] = m.add_variable(sub.n("f", g.id, t))
            sub.fp[k] = m.add_variable(sub.n("fp", g.id, t))
            if g.is_dual_fuel:
                sub.fs[k] = m.add_variable(sub.n("fs", g.id, t))
                sub.up[k] = m.add_variable(sub.n("up", g.id, t), BINARY)
                sub.us[k] = m.add_variable(sub.n("us", g.id, t), BINARY)
            if not g.existing:
                dom = "continuous" if sys_.config.relax_ux else BINARY
                sub.ux[k] = m.add_variable(sub.n("ux", g.id, t), dom, 0.0, 1.0)
    for g in sys_.renewable_generators:
        for t in range(T):
            sub.p_ren[g.id, t] = m.add_variable(sub.n("p", g.id, t))
    for s in sys_.storage_units:
        for t in range(T):
            k = (s.id, t)
            sub.soc[k] = m.add_variable(sub.n("soc", s.id, t))
            sub.ch[k] = m.add_variable(sub.n("ch", s.id, t))
            sub.dis[k] = m.add_variable(sub.n("dis", s.id, t))
            sub.e[k] = m.add_variable(sub.n("e", s.id, t), BINARY)
            sub.d[k] = m.add_variable(sub.n("d", s.id, t), BINARY)
    for b in sys_.buses:
        if not b.in_service:
            continue
        dem = sub.demand(b.id)
        for t in range(T):
            sub.shed[b.id, t] = m.add_variable(sub.n("shed", b.id, t), hi=float(dem[t]))
    rm = sub.reserve_req()
    for t in range(T):
        sub.sigma_r[t] = m.add_variable(sub.n("sigma_r", t), hi=float(rm[t]))


def build_commitment_constraints(sub: ScenarioSubproblem) -> None:
    """Logical on/start/stop rows (cyclic) and minimum up/down times.

    Besides ``u_t - u_{t-1} = v_t - w_t`` the rows ``v_t <= u_t`` and
    ``w_t <= 1 - u_t`` are added so start and stop indicators are fully
    determined by the status trajectory. Up/down windows start at the second
    hour and are clipped at the end of the horizon.
    """
    m, T = sub.model, sub.T
    for g in sub.system.thermal_generators:
        u, v, w = (lambda t: sub.u[g.id, t]), (lambda t: sub.v[g.id, t]), (lambda t: sub.w[g.id, t])
        for t in range(T):
            m.add_constraint(sub.n("logic", g.id, t), u(t) - u((t - 1) % T) - v(t) + w(t), "==", 0)
            m.add_constraint(sub.n("v_le_u", g.id, t), v(t) - u(t), "<=", 0)
            m.add_constraint(sub.n("w_le_1mu", g.id, t), w(t) + u(t), "<=", 1)
        if g.min_up > T or g.min_down > T:
            log.warning("%s: min up/down time exceeds the %d h horizon; status held constant", g.id, T)
            for t in range(1, T):
                m.add_constraint(sub.n("const_status", g.id, t), u(t) - u(t - 1), "==", 0)
            continue
        for t in range(1, T):
            for t2 in range(t + 1, min(T, t + g.min_up)):
                m.add_constraint(sub.n("min_up", g.id, t, t2), u(t) - u(t - 1) - u(t2), "<=", 0)
            for t2 in range(t + 1, min(T, t + g.min_down)):
                m.add_constraint(sub.n("min_down", g.id, t, t2), u(t - 1) - u(t) + u(t2), "<=", 1)


def build_dispatch_limits(sub: ScenarioSubproblem) -> None:
    """Output and headroom bounds; candidate limits come from the linking rows."""
    m, T = sub.model, sub.T
    for g in sub.system.thermal_generators:
        eta = sub.eta(g)
        for t in range(T):
            u, p, pbar = sub.u[g.id, t], sub.p[g.id, t], sub.pbar[g.id, t]
            cap = float(eta[t] * g.capacity)
            m.add_constraint(sub.n("pmax", g.id, t), p - cap * u, "<=", 0)
            if g.existing:
                m.add_constraint(sub.n("pmin", g.id, t), p - g.min_power * u, ">=", 0)
            m.set_bounds(pbar, 0.0, cap)
            m.add_constraint(sub.n("pbar_ge_p", g.id, t), pbar - p, ">=", 0)
    for g in sub.system.renewable_generators:
        eta = sub.eta(g)
        if g.existing:
            for t in range(T):
                m.set_bounds(sub.p_ren[g.id, t], 0.0, float(eta[t] * g.capacity))


def build_ramping_constraints(sub: ScenarioSubproblem) -> None:
    m, T = sub.model, sub.T
    for g in sub.system.thermal_generators:
        pmin, ru, rd, su, sd = g.min_power, g.RU, g.RD, g.SU, g.SD
        for t in range(1, T):
            p0, p1 = sub.p[g.id, t - 1], sub.p[g.id, t]
            u0, u1 = sub.u[g.id, t - 1], sub.u[g.id, t]
            v1, w1 = sub.v[g.id, t], sub.w[g.id, t]
            m.add_constraint(
                sub.n("ramp_up", g.id, t),
                p1 - p0 - (su - pmin - ru) * v1 - (pmin + ru) * u1 + pmin * u0, "<=", 0,
            )
            m.add_constraint(
                sub.n("ramp_down", g.id, t),
                p0 - p1 - (sd - pmin - rd) * w1 - (pmin + rd) * u0 + pmin * u1, "<=", 0,
            )


def history_on(status_hours: float, hours_before: int) -> int:
    """Whether the unit was on ``hours_before`` hours before the horizon (1 = the last hour)."""
    if status_hours > 0:
        return 1 if hours_before <= status_hours else 0
    if status_hours < 0:
        return 0 if hours_before <= -status_hours else 1
    return 0


def build_startup_costs(sub: ScenarioSubproblem) -> None:
    """``csu_t >= C_h (u_t - sum of u over the previous L_h hours)`` per category.

    A category with a zero offline threshold looks back one hour.
    """
    m, T = sub.model, sub.T
    for g in sub.system.thermal_generators:
        hist = g.initial_status
        for h, cat in enumerate(g.startup_categories):
            if cat.cost == 0:
                continue
            L = max(1, int(math.ceil(cat.min_hours_offline)))
            for t in range(T):
                lhs = sub.csu[g.id, t] - cat.cost * sub.u[g.id, t]
                rhs = 0.0
                for i in range(1, L + 1):
                    if t - i >= 0:
                        lhs += cat.cost * sub.u[g.id, t - i]
                    else:
                        rhs -= cat.cost * history_on(hist, i - t)
                m.add_constraint(sub.n("startup", g.id, h, t), lhs, ">=", rhs)


def build_storage_constraints(sub: ScenarioSubproblem) -> None:
    m, T, tau = sub.model, sub.T, sub.system.config.period_hours
    for s in sub.system.storage_units:
        big = s.capacity if s.existing else s.capacity * sub.system.max_units(s)
        for t in range(T):
            k = (s.id, t)
            if s.existing:
                m.set_bounds(sub.soc[k], 0.0, s.duration * s.capacity)
            m.add_constraint(sub.n("ch_max", s.id, t), sub.ch[k] - big * sub.e[k], "<=", 0)
            m.add_constraint(sub.n("dis_max", s.id, t), sub.dis[k] - big * sub.d[k], "<=", 0)
            m.add_constraint(sub.n("excl", s.id, t), sub.e[k] + sub.d[k], "<=", 1)
            prev = sub.soc[s.id, (t - 1) % T]
            m.add_constraint(
                sub.n("soc", s.id, t),
                sub.soc[k] - prev - tau * s.eff_charge * sub.ch[k] + (tau / s.eff_discharge) * sub.dis[k],
                "==", 0,
            )


def _injections(sub: ScenarioSubproblem, bus: str | None, t: int) -> LinExpr:
    sys_ = sub.system
    expr = LinExpr()
    for g in sys_.thermal_generators:
        if bus is None or g.bus == bus:
            expr += sub.p[g.id, t]
    for g in sys_.renewable_generators:
        if bus is None or g.bus == bus:
            expr += sub.p_ren[g.id, t]
    for s in sys_.storage_units:
        if bus is None or s.bus == bus:
            expr += sub.dis[s.id, t] - sub.ch[s.id, t]
    return expr


def build_network_constraints(sub: ScenarioSubproblem, mode: str | None = None) -> None:
    """Transport-model bus balances, or one copper-plate balance per hour."""
    m, T, sys_ = sub.model, sub.T, sub.system
    mode = mode or sub.network_mode
    in_service = {b.id for b in sys_.buses if b.in_service}
    if mode == "copperplate":
        for t in range(T):
            load = sum(float(sub.demand(b)[t]) for b in in_service)
            lhs = _injections(sub, None, t) + quicksum(sub.shed[b, t] for b in sorted(in_service))
            m.add_constraint(sub.n("balance", t), lhs, "==", load)
        return
    if mode != "pipe_and_bubble":
        raise ModelBuildError("unknown_network_mode", mode)
    lines = [ln for ln in sys_.lines if ln.in_service]
    for ln in lines:
        for b in (ln.from_bus, ln.to_bus):
            if b not in in_service:
                raise ModelBuildError("line_out_of_service_bus", f"{ln.id} references {b}")
        for t in range(T):
            sub.flow[ln.id, t] = m.add_variable(sub.n("flow", ln.id, t), lo=-ln.thermal_limit, hi=ln.thermal_limit)
    for b in sys_.buses:
        if not b.in_service:
            continue
        for t in range(T):
            lhs = _injections(sub, b.id, t) + sub.shed[b.id, t]
            for ln in lines:
                if ln.to_bus == b.id:
                    lhs += sub.flow[ln.id, t]
                elif ln.from_bus == b.id:
                    lhs -= sub.flow[ln.id, t]
            m.add_constraint(sub.n("balance", b.id, t), lhs, "==", float(sub.demand(b.id)[t]))


def reserve_supply(sub: ScenarioSubproblem, t: int) -> LinExpr:
    """Supply side of the reserve row without the shortfall variable."""
    sys_ = sub.system
    expr = LinExpr()
    for g in sys_.thermal_generators:
        expr += sub.pbar[g.id, t]
    for g in sys_.renewable_generators:
        expr += sub.p_ren[g.id, t]
    for s in sys_.storage_units:
        expr += sub.dis[s.id, t] - sub.ch[s.id, t]
    for b in sys_.buses:
        if b.in_service:
            expr += sub.shed[b.id, t]
    return expr


def build_reserve_constraints(sub: ScenarioSubproblem) -> None:
    """``sum D + RM <= headroom + renewables + net storage + shed + sigma_r``, ``sigma_r <= RM``."""
    m, T = sub.model, sub.T
    rm = sub.reserve_req()
    total = sub.scenario.total_demand() if sub.scenario.demand else np.zeros(T)
    for t in range(T):
        m.add_constraint(sub.n("reserve", t), reserve_supply(sub, t) + sub.sigma_r[t], ">=", float(total[t] + rm[t]))


def build_fuel_constraints(sub: ScenarioSubproblem) -> None:
    m, T, sys_ = sub.model, sub.T, sub.system
    tau = sys_.config.period_hours
    supply = sub.scenario.fuel_supply
    use: dict = {}
    for g in sys_.thermal_generators:
        fuels = [g.primary_fuel] + ([g.secondary_fuel] if g.is_dual_fuel else [])
        for fid in fuels:
            if fid not in supply:
                raise ModelBuildError("missing_fuel_supply", f"{g.id} burns {fid.key}, absent from scenario {sub.scenario.id}")
        fmax = g.heat_rate.max_fuel_rate
        segs = g.heat_rate.segments()
        for t in range(T):
            k = (g.id, t)
            u, p, f, fp = sub.u[k], sub.p[k], sub.f[k], sub.fp[k]
            for j, (a, b) in enumerate(segs):
                m.add_constraint(sub.n("hr", g.id, j, t), f - a * p - b * u, ">=", 0)
            if g.is_dual_fuel:
                fs, up, us = sub.fs[k], sub.up[k], sub.us[k]
                m.add_constraint(sub.n("fuel_split", g.id, t), f - fp - fs, "==", 0)
                m.add_constraint(sub.n("status_split", g.id, t), u - up - us, "==", 0)
                m.add_constraint(sub.n("fp_max", g.id, t), fp - fmax * up, "<=", 0)
                m.add_constraint(sub.n("fs_max", g.id, t), fs - fmax * us, "<=", 0)
                use.setdefault(g.secondary_fuel, []).append(fs)
            else:
                m.add_constraint(sub.n("fuel_split", g.id, t), f - fp, "==", 0)
                m.add_constraint(sub.n("fp_max", g.id, t), fp - fmax * u, "<=", 0)
            use.setdefault(g.primary_fuel, []).append(fp)
    for fid in sorted(use):
        cap = supply.get(fid)
        if cap is None:
            continue
        m.add_constraint(sub.n("fuel_supply", fid.key), tau * quicksum(use[fid]), "<=", cap)


def build_operational_objective(sub: ScenarioSubproblem) -> None:
    """Collect production cost and the three penalty terms on ``sub``."""
    sys_, T, cfg = sub.system, sub.T, sub.system.config
    prod = LinExpr()
    for g in sys_.renewable_generators:
        if g.vom:
            for t in range(T):
                prod += g.vom * sub.p_ren[g.id, t]
    for g in sys_.thermal_generators:
        pp = sys_.fuel(g.primary_fuel).price
        ps = sys_.fuel(g.secondary_fuel).price if g.is_dual_fuel else 0.0
        for t in range(T):
            k = (g.id, t)
            prod += g.vom * sub.p[k] + pp * sub.fp[k] + sub.csu[k]
            if g.is_dual_fuel:
                prod += ps * sub.fs[k]
    for s in sys_.storage_units:
        c = s.vom + s.discharge_cost
        if c:
            for t in range(T):
                prod += c * sub.dis[s.id, t]
    sub.production = prod
    sub.shed_cost = cfg.voll * quicksum(sub.shed.values())
    sub.reserve_cost = cfg.reserve_penalty * quicksum(sub.sigma_r.values())
    sub.util_cost = cfg.util_penalty * quicksum(sub.sigma_util.values())


def build_subproblem(
    model: ModelInstance,
    system: PowerSystem,
    scenario: ScenarioDay,
    first_stage: FirstStage,
    *,
    network_mode: str | None = None,
    utilization: bool | None = None,
    tag: str | None = None,
) -> ScenarioSubproblem:
    """Register every second-stage family for ``scenario`` in ``model``."""
    cfg = system.config
    sub = ScenarioSubproblem(
        system=system,
        scenario=scenario,
        model=model,
        first_stage=first_stage,
        network_mode=network_mode or cfg.network_mode,
        utilization=cfg.utilization_enabled if utilization is None else utilization,
        tag=scenario.id if tag is None else tag,
        T=scenario.hours,
    )
    if sub.T < 1:
        raise ModelBuildError("empty_horizon", scenario.id)
    _register_variables(sub)
    build_commitment_constraints(sub)
    build_dispatch_limits(sub)
    build_ramping_constraints(sub)
    build_startup_costs(sub)
    build_storage_constraints(sub)
    build_network_constraints(sub)
    build_reserve_constraints(sub)
    build_fuel_constraints(sub)
    build_linking_constraints(sub, first_stage)
    build_operational_objective(sub)
    return sub


# ---------------------------------------------------------------------------
# Solutions and metrics
# ---------------------------------------------------------------------------


@dataclass
class DispatchSolution:
    """Solved operations of one scenario with derived metrics.

    Costs are totals over the scenario horizon; ``series`` maps a family
    name to per-element hourly arrays.
    """

    scenario_id: str
    status: str
    objective: float
    production_cost: float
    shed_cost: float
    reserve_cost: float
    util_cost: float
    load_shed: float
    lolh: float
    min_reserve: float
    fuel_use: dict
    series: dict
    n_days: int = 1
    gap: float = 0.0
    best_bound: float = float("nan")

    @property
    def penalty_cost(self) -> float:
        return self.shed_cost + self.reserve_cost + self.util_cost

    def metrics(self) -> dict:
        return {
            "scenario": self.scenario_id,
            "status": self.status,
            "objective": self.objective,
            "production_cost": self.production_cost,
            "shed_cost": self.shed_cost,
            "reserve_cost": self.reserve_cost,
            "util_cost": self.util_cost,
            "load_shed_mwh": self.load_shed,
            "lolh_hours": self.lolh,
            "min_reserve_mw": self.min_reserve,
            "fuel_use_mmbtu": {k.key: v for k, v in sorted(self.fuel_use.items())},
            "days": self.n_days,
        }


_FAMILIES = ("u", "v", "w", "p", "pbar", "csu", "f", "fp", "fs", "up", "us", "ux",
             "p_ren", "soc", "ch", "dis", "e", "d", "flow", "shed")


def extract_solution(sub: ScenarioSubproblem, values, status: str = "optimal", gap: float = 0.0,
                     best_bound: float = float("nan")) -> DispatchSolution:
    """Compute metrics for ``sub`` from a full variable-value vector."""
    vals = np.asarray(values, dtype=float)
    T, tau = sub.T, sub.system.config.period_hours

    def val(ref: VariableRef) -> float:
        return float(vals[ref.index])

    series: dict[str, dict[str, np.ndarray]] = {}
    for fam in _FAMILIES:
        out: dict[str, np.ndarray] = {}
        for (eid, t), ref in getattr(sub, fam).items():
            out.setdefault(eid, np.zeros(T))[t] = val(ref)
        if out:
            series[fam] = out
    series["sigma_r"] = {"system": np.array([val(sub.sigma_r[t]) for t in range(T)])}

    shed_by_hour = np.zeros(T)
    for (_, t), ref in sub.shed.items():
        shed_by_hour[t] += val(ref)
    rm = sub.reserve_req()
    provided = rm - series["sigma_r"]["system"]
    fuel_use: dict = {}
    for g in sub.system.thermal_generators:
        for t in range(T):
            fuel_use[g.primary_fuel] = fuel_use.get(g.primary_fuel, 0.0) + tau * val(sub.fp[g.id, t])
            if g.is_dual_fuel:
                fuel_use[g.secondary_fuel] = fuel_use.get(g.secondary_fuel, 0.0) + tau * val(sub.fs[g.id, t])
    production = sub.production.value(vals)
    shed_c, res_c, util_c = sub.shed_cost.value(vals), sub.reserve_cost.value(vals), sub.util_cost.value(vals)
    return DispatchSolution(
        scenario_id=sub.scenario.id,
        status=status,
        objective=production + shed_c + res_c + util_c,
        production_cost=production,
        shed_cost=shed_c,
        reserve_cost=res_c,
        util_cost=util_c,
        load_shed=float(tau * shed_by_hour.sum()),
        lolh=float(tau * np.count_nonzero(shed_by_hour > LOLH_THRESHOLD)),
        min_reserve=float(max(0.0, provided.min())) if T else 0.0,
        fuel_use=fuel_use,
        series=series,
        n_days=sub.scenario.n_days,
        gap=gap,
        best_bound=best_bound,
    )


def operational_model(system: PowerSystem, scenario: ScenarioDay, plan: InvestmentPlan | None = None,
                      **kwargs) -> ScenarioSubproblem:
    """Standalone model for ``scenario`` with the first stage fixed to ``plan``."""
    model = ModelInstance(f"ops_{scenario.id}")
    fs = fixed_first_stage(model, system, plan or InvestmentPlan())
    sub = build_subproblem(model, system, scenario, fs, **kwargs)
    model.set_objective(sub.cost)
    return sub


def solve_operational(system: PowerSystem, scenario: ScenarioDay, fixed_plan: InvestmentPlan | None = None,
                      options: SolveOptions | None = None, **kwargs) -> DispatchSolution:
    """Solve one scenario's operations for a fixed investment plan.

    Raises:
        SolverError: if no feasible solution was found. The model always has
            slack through load shedding and reserve shortfall, so infeasibility
            indicates a modelling error.
    """
    sub = operational_model(system, scenario, fixed_plan, **kwargs)
    res = solve(sub.model, options)
    _require_solution(res, scenario.id)
    sol = extract_solution(sub, res.values, res.status, res.gap, res.best_bound)
    log.info("scenario %s: %s cost %.6g shed %.4g MWh", scenario.id, res.status, sol.objective, sol.load_shed)
    return sol


def solve_stitched(system: PowerSystem, days: Sequence[ScenarioDay], fixed_plan: InvestmentPlan | None = None,
                   options: SolveOptions | None = None, **kwargs) -> DispatchSolution:
    """Solve consecutive days as one horizon with pooled fuel supply."""
    return solve_operational(system, stitch_days(days), fixed_plan, options, **kwargs)


def _require_solution(res: SolveResult, sid: str) -> None:
    if res.status == "infeasible":
        raise SolverError("infeasible", f"scenario {sid} is infeasible; this indicates a model build bug", res)
    if not res.ok:
        raise SolverError(res.status, f"scenario {sid}: {res.message}", res)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def write_dispatch_csv(sol: DispatchSolution, path: str | Path) -> None:
    """One row per hour, one column per ``family:element``."""
    cols = []
    for fam in sorted(sol.series):
        for eid in sorted(sol.series[fam]):
            cols.append((f"{fam}:{eid}", sol.series[fam][eid]))
    T = len(cols[0][1]) if cols else 0
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["hour"] + [c for c, _ in cols])
        for t in range(T):
            wr.writerow([t] + [f"{arr[t]:.9g}" for _, arr in cols])


def write_metrics_json(solutions: Sequence[DispatchSolution], path: str | Path) -> None:
    Path(path).write_text(json.dumps([s.metrics() for s in solutions], indent=2))


def with_mode(system: PowerSystem, **config_changes) -> PowerSystem:
    return system.replace(config=dataclasses.replace(system.config, **config_changes))

"""First-stage investment variables, costs, site limits and stage linking."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

from .errors import ModelBuildError, ValidationError
from .milp import BINARY, CONTINUOUS, LinExpr, ModelInstance, VariableRef, quicksum
from .system import PowerSystem, RenewableGenerator, StorageUnit, ThermalGenerator, existing_capacity, limit_members

if TYPE_CHECKING:
    from .uc import ScenarioSubproblem

log = logging.getLogger(__name__)


@dataclass
class InvestmentPlan:
    """First-stage decisions.

    Thermal builds and retirements are 0/1; renewable and storage builds are
    in units of the candidate's ``capacity`` (MW = units * capacity).
    """

    thermal_builds: dict[str, int] = field(default_factory=dict)
    renewable_builds: dict[str, float] = field(default_factory=dict)
    storage_builds: dict[str, float] = field(default_factory=dict)
    retirements: dict[str, int] = field(default_factory=dict)

    def value(self, key: tuple[str, str]) -> float:
        kind, eid = key
        if kind == "retire":
            return float(self.retirements.get(eid, 0))
        for d in (self.thermal_builds, self.renewable_builds, self.storage_builds):
            if eid in d:
                return float(d[eid])
        return 0.0

    def key(self) -> tuple:
        """Hashable canonical form (zero entries dropped)."""
        items = []
        for name in ("thermal_builds", "renewable_builds", "storage_builds", "retirements"):
            for k, v in sorted(getattr(self, name).items()):
                if abs(v) > 1e-12:
                    items.append((name, k, round(float(v), 9)))
        return tuple(items)

    def to_dict(self) -> dict:
        return {
            "thermal_builds": {k: int(v) for k, v in sorted(self.thermal_builds.items())},
            "renewable_builds": {k: float(v) for k, v in sorted(self.renewable_builds.items())},
            "storage_builds": {k: float(v) for k, v in sorted(self.storage_builds.items())},
            "retirements": {k: int(v) for k, v in sorted(self.retirements.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InvestmentPlan":
        return cls(
            thermal_builds={k: int(round(v)) for k, v in d.get("thermal_builds", {}).items()},
            renewable_builds={k: float(v) for k, v in d.get("renewable_builds", {}).items()},
            storage_builds={k: float(v) for k, v in d.get("storage_builds", {}).items()},
            retirements={k: int(round(v)) for k, v in d.get("retirements", {}).items()},
        )

    @classmethod
    def from_vector(cls, system: PowerSystem, vec) -> "InvestmentPlan":
        plan = cls()
        for (kind, eid), v in zip(first_stage_keys(system), vec):
            if kind == "retire":
                plan.retirements[eid] = int(round(v))
                continue
            elem = system.element(eid)
            if isinstance(elem, ThermalGenerator):
                plan.thermal_builds[eid] = int(round(v))
            elif isinstance(elem, StorageUnit):
                plan.storage_builds[eid] = max(0.0, round(float(v), 9))
            else:
                plan.renewable_builds[eid] = max(0.0, round(float(v), 9))
        return plan

    def vector(self, system: PowerSystem) -> list[float]:
        return [self.value(k) for k in first_stage_keys(system)]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "InvestmentPlan":
        return cls.from_dict(json.loads(Path(path).read_text()))


def candidates(system: PowerSystem) -> list:
    return [*system.candidate_thermal, *system.candidate_renewable, *system.candidate_storage]


def first_stage_keys(system: PowerSystem) -> list[tuple[str, str]]:
    """Canonical order of first-stage decisions: builds, then retirements."""
    return [("build", c.id) for c in candidates(system)] + [("retire", g.id) for g in system.retirable]


def is_binary_key(system: PowerSystem, key: tuple[str, str]) -> bool:
    kind, eid = key
    return kind == "retire" or isinstance(system.element(eid), ThermalGenerator)


@dataclass
class FirstStage:
    """Refs to the first-stage variables inside one model and the cost C1."""

    build: dict[str, VariableRef]
    retire: dict[str, VariableRef]
    cost: LinExpr

    def ref(self, key: tuple[str, str]) -> VariableRef:
        kind, eid = key
        return self.retire[eid] if kind == "retire" else self.build[eid]

    def refs(self, system: PowerSystem) -> list[VariableRef]:
        return [self.ref(k) for k in first_stage_keys(system)]


def build_investment_stage(model: ModelInstance, system: PowerSystem) -> FirstStage:
    """Add build/retire variables, site-limit rows and the first-stage cost.

    The cost is the annual sum of new-build capital and FOM, retirement costs
    with the FOM saved by retiring, and the FOM of the remaining fleet.
    """
    build: dict[str, VariableRef] = {}
    for c in candidates(system):
        if isinstance(c, ThermalGenerator):
            build[c.id] = model.add_variable(("x", c.id), BINARY)
        else:
            build[c.id] = model.add_variable(("x", c.id), CONTINUOUS, 0.0, system.max_units(c))
    retire = {g.id: model.add_variable(("xret", g.id), BINARY) for g in system.retirable}

    for lim in system.site_limits:
        if lim.max_capacity is None:
            continue
        members = limit_members(system, lim)
        room = lim.max_capacity - existing_capacity(system, lim)
        if room < -1e-9:
            raise ModelBuildError("site_limit_violated", f"existing fleet exceeds limit at {lim.bus}/{lim.tech_class}")
        cands = [e for e in members if not e.existing]
        if cands:
            model.add_constraint(
                ("site", lim.bus, lim.kind, lim.tech_class),
                quicksum(e.capacity * build[e.id] for e in cands), "<=", room,
            )

    cost = LinExpr()
    for c in candidates(system):
        cost += c.capacity * (c.capex_annualized + c.fom) * build[c.id]
    for g in system.thermal_generators:
        if not g.existing:
            continue
        if g.id in retire:
            x = retire[g.id]
            cost += g.retirement_cost_value * x + g.fom * g.capacity * (1 - x)
        else:
            cost += g.fom * g.capacity
    for e in (*system.renewable_generators, *system.storage_units):
        if e.existing:
            cost += e.fom * e.capacity
    return FirstStage(build, retire, cost)


def validate_plan(system: PowerSystem, plan: InvestmentPlan, tol: float = 1e-9) -> list[str]:
    """Problems with ``plan`` against the system's candidates and site limits."""
    problems = []
    cand_ids = {c.id for c in candidates(system)}
    ret_ids = {g.id for g in system.retirable}
    for d in (plan.thermal_builds, plan.renewable_builds, plan.storage_builds):
        for k, v in d.items():
            if k not in cand_ids:
                problems.append(f"unknown candidate {k}")
            elif v < -tol:
                problems.append(f"negative build {k}")
            elif v > system.max_units(system.element(k)) + tol:
                problems.append(f"build {k} exceeds its bound")
    for k, v in plan.thermal_builds.items():
        if v not in (0, 1):
            problems.append(f"thermal build {k} not binary")
    for k, v in plan.retirements.items():
        if k not in ret_ids:
            problems.append(f"{k} is not retirable")
        elif v not in (0, 1):
            problems.append(f"retirement {k} not binary")
    for lim in system.site_limits:
        if lim.max_capacity is None:
            continue
        total = sum(
            e.capacity * (1.0 if e.existing else plan.value(("build", e.id)))
            for e in limit_members(system, lim)
        )
        if total > lim.max_capacity + max(tol, 1e-9 * lim.max_capacity):
            problems.append(f"site limit {lim.bus}/{lim.kind}/{lim.tech_class} exceeded")
    return problems


def fixed_first_stage(model: ModelInstance, system: PowerSystem, plan: InvestmentPlan) -> FirstStage:
    """First stage with every variable fixed to ``plan``."""
    problems = validate_plan(system, plan, tol=1e-6)
    if problems:
        raise ValidationError("invalid_plan", "; ".join(problems))
    fs = build_investment_stage(model, system)
    for key in first_stage_keys(system):
        ref = fs.ref(key)
        v = min(max(plan.value(key), ref.lo), ref.hi)
        model.fix(ref, v)
    return fs


@dataclass
class PlanCosts:
    investment: float
    retirement: float
    fom_existing: float

    @property
    def total(self) -> float:
        return self.investment + self.retirement + self.fom_existing


def plan_costs(system: PowerSystem, plan: InvestmentPlan) -> PlanCosts:
    """Evaluate the first-stage cost of ``plan`` directly from the data."""
    inv = sum(c.capacity * (c.capex_annualized + c.fom) * plan.value(("build", c.id)) for c in candidates(system))
    ret = 0.0
    fom = 0.0
    for g in system.thermal_generators:
        if not g.existing:
            continue
        x = plan.retirements.get(g.id, 0) if g.retirable else 0
        ret += g.retirement_cost_value * x
        fom += g.fom * g.capacity * (1 - x)
    for e in (*system.renewable_generators, *system.storage_units):
        if e.existing:
            fom += e.fom * e.capacity
    return PlanCosts(inv, ret, fom)


def plan_from_values(system: PowerSystem, fs: FirstStage, values) -> InvestmentPlan:
    vec = [float(values[r.index]) for r in fs.refs(system)]
    return InvestmentPlan.from_vector(system, vec)


def capacity_summary(system: PowerSystem, plan: InvestmentPlan) -> dict[str, float]:
    """New generation, new storage and retired MW."""
    new_gen = sum(
        c.capacity * plan.value(("build", c.id))
        for c in (*system.candidate_thermal, *system.candidate_renewable)
    )
    new_sto = sum(s.capacity * plan.value(("build", s.id)) for s in system.candidate_storage)
    retired = sum(g.capacity for g in system.retirable if plan.retirements.get(g.id, 0))
    return {"new_gen": new_gen, "new_storage": new_sto, "retired": retired}


# ---------------------------------------------------------------------------
# Linking
# ---------------------------------------------------------------------------


def build_linking_constraints(sub: "ScenarioSubproblem", fs: FirstStage) -> None:
    """Tie second-stage variables of ``sub`` to the first-stage decisions.

    Adds installed-capacity bounds and the McCormick minimum-power rows for
    candidates, retirement forcing, candidate storage bounds and the daily
    minimum-utilization rows (with their shortfall variables) for existing
    thermal units.
    """
    m, sys_, T, tag = sub.model, sub.system, sub.T, sub.tag
    for g in sys_.candidate_thermal:
        x = fs.build[g.id]
        eta = sub.eta(g)
        for t in range(T):
            u, p, pbar, ux = sub.u[g.id, t], sub.p[g.id, t], sub.pbar[g.id, t], sub.ux[g.id, t]
            cap = eta[t] * g.capacity
            m.add_constraint(("link_p", g.id, t, tag), p - cap * x, "<=", 0)
            m.add_constraint(("link_pbar", g.id, t, tag), pbar - cap * x, "<=", 0)
            m.add_constraint(("pmin_ux", g.id, t, tag), p - g.min_power * ux, ">=", 0)
            m.add_constraint(("mc_x", g.id, t, tag), ux - x, "<=", 0)
            m.add_constraint(("mc_u", g.id, t, tag), ux - u, "<=", 0)
            m.add_constraint(("mc_xu", g.id, t, tag), ux - x - u, ">=", -1)

    for g in sys_.retirable:
        xr = fs.retire[g.id]
        eta = sub.eta(g)
        for t in range(T):
            m.add_constraint(("retire_u", g.id, t, tag), sub.u[g.id, t] + xr, "<=", 1)
            m.add_constraint(("retire_pbar", g.id, t, tag), sub.pbar[g.id, t] + eta[t] * g.capacity * xr, "<=", eta[t] * g.capacity)

    for g in sys_.candidate_renewable:
        x = fs.build[g.id]
        eta = sub.eta(g)
        for t in range(T):
            m.add_constraint(("link_p", g.id, t, tag), sub.p_ren[g.id, t] - eta[t] * g.capacity * x, "<=", 0)

    for s in sys_.candidate_storage:
        x = fs.build[s.id]
        for t in range(T):
            m.add_constraint(("link_soc", s.id, t, tag), sub.soc[s.id, t] - s.duration * s.capacity * x, "<=", 0)
            m.add_constraint(("link_ch", s.id, t, tag), sub.ch[s.id, t] - s.capacity * x, "<=", 0)
            m.add_constraint(("link_dis", s.id, t, tag), sub.dis[s.id, t] - s.capacity * x, "<=", 0)

    if not sub.utilization:
        return
    hours = 24 if T % 24 == 0 else T
    for g in sys_.thermal_generators:
        if not g.existing:
            continue
        target = g.kappa * g.capacity * hours
        for d in range(T // hours):
            sig = m.add_variable(("sigma_util", g.id, d, tag))
            sub.sigma_util[g.id, d] = sig
            lhs = quicksum(sub.p[g.id, t] for t in range(d * hours, (d + 1) * hours)) + sig
            if g.id in fs.retire:
                lhs += target * fs.retire[g.id]
            m.add_constraint(("util", g.id, d, tag), lhs, ">=", target)

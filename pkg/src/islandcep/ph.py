"""Progressive hedging over representative-day scenarios.

Each scenario owns a full copy of the first stage. Iterations alternate
between independent scenario solves (with multiplier and proximal terms),
a consensus average and a multiplier update. Lagrangian lower bounds and
rounded incumbents certify the final gap.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import SolverError, ValidationError
from .investment import (
    FirstStage,
    InvestmentPlan,
    build_investment_stage,
    first_stage_keys,
    is_binary_key,
    validate_plan,
)
from .milp import LinExpr, ModelInstance, SolveOptions, VariableRef, quicksum, solve
from .planner import PlanReport, annual_scale, evaluate_plan, solve_extensive_form
from .scenarios import ScenarioDay, check_scenario_set
from .system import PowerSystem, StorageUnit, ThermalGenerator, limit_members
from .uc import build_subproblem

log = logging.getLogger(__name__)


@dataclass
class PHOptions:
    """Progressive hedging settings.

    ``rho`` for a first-stage entry defaults to ``rho_scale`` times the
    magnitude of its first-stage cost coefficient; ``rho_by_family`` (keys
    ``thermal``, ``renewable``, ``storage``, ``retire``) sets absolute values
    per family instead. ``rho_growth`` multiplies every rho after each
    iteration.
    """

    rho_scale: float = 1.0
    rho_by_family: dict[str, float] = field(default_factory=dict)
    rho_growth: float = 1.0
    max_iterations: int = 200
    convergence_tol: float = 1e-4
    subproblem_mip_gap: float = 1e-4
    time_limit: float | None = None
    bound_interval: int = 5
    seed: int = 0
    workers: int = 1
    threads: int = 1
    checkpoint_every: int = 0
    out_dir: str | Path | None = None
    prox_segments: int = 8

    def validate(self) -> None:
        if self.max_iterations < 1:
            raise ValidationError("no_iterations", "max_iterations must be at least 1")
        if not self.convergence_tol > 0:
            raise ValidationError("bad_tolerance", "convergence_tol must be positive")
        if not self.rho_scale > 0 or any(v <= 0 for v in self.rho_by_family.values()):
            raise ValidationError("bad_rho", "rho must be positive")
        if self.bound_interval < 1 or self.prox_segments < 1:
            raise ValidationError("bad_option", "bound_interval and prox_segments must be >= 1")

    def solve_options(self, time_left: float | None = None) -> SolveOptions:
        return SolveOptions(mip_gap=self.subproblem_mip_gap, time_limit=time_left,
                            threads=self.threads, seed=self.seed)


@dataclass
class PHState:
    keys: list[tuple[str, str]]
    rho: list[float]
    iteration: int = 0
    xbar: list[float] = field(default_factory=list)
    weights: dict[str, list[float]] = field(default_factory=dict)
    x: dict[str, list[float]] = field(default_factory=dict)
    incumbent: InvestmentPlan | None = None
    incumbent_objective: float = math.inf
    lower_bound: float = -math.inf
    deviation: float = math.inf
    converged: bool = False
    termination: str = ""
    history: list[dict] = field(default_factory=list)
    report: PlanReport | None = None

    @property
    def gap(self) -> float:
        if self.incumbent is None or not math.isfinite(self.lower_bound):
            return math.inf
        return max(0.0, self.incumbent_objective - self.lower_bound) / max(abs(self.incumbent_objective), 1e-12)

    def to_dict(self) -> dict:
        return {
            "keys": [list(k) for k in self.keys],
            "rho": self.rho,
            "iteration": self.iteration,
            "xbar": self.xbar,
            "weights": {k: self.weights[k] for k in sorted(self.weights)},
            "x": {k: self.x[k] for k in sorted(self.x)},
            "incumbent": self.incumbent.to_dict() if self.incumbent else None,
            "incumbent_objective": _num(self.incumbent_objective),
            "lower_bound": _num(self.lower_bound),
            "deviation": _num(self.deviation),
            "converged": self.converged,
            "termination": self.termination,
            "history": self.history,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PHState":
        return cls(
            keys=[tuple(k) for k in d["keys"]],
            rho=list(d["rho"]),
            iteration=int(d["iteration"]),
            xbar=list(d["xbar"]),
            weights={k: list(v) for k, v in d["weights"].items()},
            x={k: list(v) for k, v in d.get("x", {}).items()},
            incumbent=InvestmentPlan.from_dict(d["incumbent"]) if d.get("incumbent") else None,
            incumbent_objective=_unnum(d["incumbent_objective"], math.inf),
            lower_bound=_unnum(d["lower_bound"], -math.inf),
            deviation=_unnum(d.get("deviation"), math.inf),
            converged=bool(d.get("converged", False)),
            termination=d.get("termination", ""),
            history=list(d.get("history", [])),
        )


def _num(x: float):
    return x if math.isfinite(x) else None


def _unnum(x, default: float) -> float:
    return default if x is None else float(x)


def save_checkpoint(state: PHState, path: str | Path) -> None:
    Path(path).write_text(json.dumps(state.to_dict(), indent=1, sort_keys=True))


def load_checkpoint(path: str | Path) -> PHState:
    return PHState.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Scenario models
# ---------------------------------------------------------------------------


@dataclass
class _ScenarioModel:
    scenario: ScenarioDay
    model: ModelInstance
    first_stage: FirstStage
    refs: list[VariableRef]
    base: LinExpr
    prox_q: dict[int, VariableRef]


def _family(system: PowerSystem, key) -> str:
    kind, eid = key
    if kind == "retire":
        return "retire"
    elem = system.element(eid)
    if isinstance(elem, ThermalGenerator):
        return "thermal"
    return "storage" if isinstance(elem, StorageUnit) else "renewable"


def default_rho(system: PowerSystem, opts: PHOptions) -> list[float]:
    """Cost-proportional rho: ``rho_scale * |first-stage cost coefficient|``."""
    out = []
    for key in first_stage_keys(system):
        fam = _family(system, key)
        if fam in opts.rho_by_family:
            out.append(float(opts.rho_by_family[fam]))
            continue
        kind, eid = key
        elem = system.element(eid)
        if kind == "retire":
            coef = elem.retirement_cost_value - elem.fom * elem.capacity
        else:
            coef = elem.capacity * (elem.capex_annualized + elem.fom)
        out.append(opts.rho_scale * (abs(coef) if coef else 1.0))
    return out


def _build_scenario_model(system: PowerSystem, sc: ScenarioDay, opts: PHOptions) -> _ScenarioModel:
    model = ModelInstance(f"ph_{sc.id}")
    fs = build_investment_stage(model, system)
    sub = build_subproblem(model, system, sc, fs)
    base = fs.cost + (annual_scale(system) / sc.n_days) * sub.cost
    refs = fs.refs(system)
    prox_q = {}
    for i, (key, ref) in enumerate(zip(first_stage_keys(system), refs)):
        if is_binary_key(system, key) or ref.hi <= 0:
            continue
        q = model.add_variable(("prox_q", key[1]))
        bps = np.linspace(0.0, ref.hi, opts.prox_segments + 1)
        for k in range(opts.prox_segments):
            a, b = float(bps[k]), float(bps[k + 1])
            model.add_constraint(("prox_secant", key[1], k), q - (a + b) * ref, ">=", -a * b)
        prox_q[i] = q
    return _ScenarioModel(sc, model, fs, refs, base, prox_q)


def _objective(sm: _ScenarioModel, w: Sequence[float] | None, xbar: Sequence[float] | None,
               rho: Sequence[float] | None) -> LinExpr:
    obj = sm.base.copy()
    if w is not None:
        for ref, wi in zip(sm.refs, w):
            if wi:
                obj.add_term(ref, wi)
    if xbar is not None:
        for i, (ref, xb, r) in enumerate(zip(sm.refs, xbar, rho)):
            half = 0.5 * r
            if i in sm.prox_q:
                obj.add_term(sm.prox_q[i], half)
                obj.add_term(ref, -2.0 * half * xb)
            else:
                obj.add_term(ref, half * (1.0 - 2.0 * xb))
            obj.constant += half * xb * xb
    return obj


@dataclass
class _SolveOut:
    sid: str
    x: list[float]
    objective: float
    bound: float


def _solve_one(sm: _ScenarioModel, obj: LinExpr, sopts: SolveOptions, system: PowerSystem) -> _SolveOut:
    sm.model.set_objective(obj)
    res = solve(sm.model, sopts)
    if not res.ok:
        raise SolverError(res.status, f"PH subproblem {sm.scenario.id}: {res.message}", res)
    x = []
    for key, ref in zip(first_stage_keys(system), sm.refs):
        v = float(res.values[ref.index])
        x.append(float(round(v)) + 0.0 if ref.is_binary else min(max(v, ref.lo), ref.hi) + 0.0)
    return _SolveOut(sm.scenario.id, x, res.objective, res.best_bound)


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


class _Runner:
    def __init__(self, system: PowerSystem, scenarios: list[ScenarioDay], opts: PHOptions):
        self.system, self.scenarios, self.opts = system, scenarios, opts
        self.keys = first_stage_keys(system)
        self.binary = [is_binary_key(system, k) for k in self.keys]
        self.prob = {sc.id: sc.probability for sc in scenarios}
        self.models = {sc.id: _build_scenario_model(system, sc, opts) for sc in scenarios}
        self.start = time.monotonic()
        self.eval_cache: dict[tuple, PlanReport | None] = {}

    def time_left(self) -> float | None:
        if self.opts.time_limit is None:
            return None
        return self.opts.time_limit - (time.monotonic() - self.start)

    def out_of_time(self) -> bool:
        left = self.time_left()
        return left is not None and left <= 0

    def solve_all(self, objectives: dict[str, LinExpr]) -> dict[str, _SolveOut]:
        sopts = self.opts.solve_options(self.time_left())
        ids = sorted(objectives)

        def job(sid):
            return _solve_one(self.models[sid], objectives[sid], sopts, self.system)

        if self.opts.workers > 1 and len(ids) > 1:
            with ThreadPoolExecutor(max_workers=self.opts.workers) as pool:
                outs = list(pool.map(job, ids))
        else:
            outs = [job(sid) for sid in ids]
        return {o.sid: o for o in outs}

    def evaluate(self, plan: InvestmentPlan) -> PlanReport | None:
        key = plan.key()
        if key not in self.eval_cache:
            rep = evaluate_plan(self.system, plan, self.scenarios,
                                SolveOptions(mip_gap=self.opts.subproblem_mip_gap, threads=self.opts.threads,
                                             seed=self.opts.seed),
                                workers=self.opts.workers)
            self.eval_cache[key] = rep if rep.ok else None
        return self.eval_cache[key]


def _weighted_sum(runner: _Runner, values: dict[str, float]) -> float:
    return math.fsum(runner.prob[sid] * values[sid] for sid in sorted(values))


def compute_lower_bound(state: PHState, runner: _Runner) -> float:
    """Lagrangian bound: probability-weighted subproblem bounds with weights and no proximal term."""
    n = len(state.keys)
    for i in range(n):
        s = math.fsum(runner.prob[sid] * state.weights[sid][i] for sid in sorted(state.weights))
        scale = max(1.0, max(abs(state.weights[sid][i]) for sid in state.weights))
        if abs(s) > 1e-9 * scale:
            raise AssertionError(f"weights do not average to zero for {state.keys[i]}: {s}")
    objs = {sid: _objective(sm, state.weights[sid], None, None) for sid, sm in runner.models.items()}
    outs = runner.solve_all(objs)
    return _weighted_sum(runner, {sid: o.bound for sid, o in outs.items()})


def round_plan(system: PowerSystem, xbar: Sequence[float]) -> InvestmentPlan | None:
    """Round binaries at 0.5 (ties up), clip and scale continuous builds into the site caps.

    Site caps violated by rounded binaries are repaired by dropping the
    rounded-up builds with the lowest consensus value first.
    """
    keys = first_stage_keys(system)
    vals = {}
    for key, v in zip(keys, xbar):
        if is_binary_key(system, key):
            vals[key] = 1.0 if v >= 0.5 else 0.0
        else:
            vals[key] = min(max(float(v), 0.0), system.max_units(system.element(key[1])))
    xb = dict(zip(keys, xbar))

    for _ in range(len(system.site_limits) + 1):
        changed = False
        for lim in system.site_limits:
            if lim.max_capacity is None:
                continue
            members = limit_members(system, lim)
            fixed = sum(e.capacity for e in members if e.existing)
            binary = [e for e in members if not e.existing and isinstance(e, ThermalGenerator)]
            cont = [e for e in members if not e.existing and not isinstance(e, ThermalGenerator)]
            used_bin = sum(e.capacity * vals[("build", e.id)] for e in binary)
            used_cont = sum(e.capacity * vals[("build", e.id)] for e in cont)
            room = lim.max_capacity - fixed
            if used_bin > room + 1e-9:
                for e in sorted(binary, key=lambda e: (xb[("build", e.id)], e.id)):
                    if used_bin <= room + 1e-9:
                        break
                    if vals[("build", e.id)] == 1.0:
                        vals[("build", e.id)] = 0.0
                        used_bin -= e.capacity
                        changed = True
            if used_bin + used_cont > room + 1e-9 and used_cont > 0:
                factor = max(0.0, room - used_bin) / used_cont
                for e in cont:
                    vals[("build", e.id)] *= factor * (1 - 1e-12)
                changed = True
        if not changed:
            break
    plan = InvestmentPlan.from_vector(system, [vals[k] for k in keys])
    return None if validate_plan(system, plan, tol=1e-6) else plan


def find_incumbent(state: PHState, runner: _Runner) -> tuple[InvestmentPlan, float] | None:
    plan = round_plan(runner.system, state.xbar)
    if plan is None:
        return None
    rep = runner.evaluate(plan)
    if rep is None:
        return None
    return plan, rep.overall_cost


def _write_trace(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iteration", "deviation", "lower_bound", "incumbent", "wall_time"])
        for r in rows:
            wr.writerow([r["iteration"], r["deviation"], r["lower_bound"], r["incumbent"], f"{r['wall_time']:.3f}"])


def run_ph(system: PowerSystem, scenarios: Sequence[ScenarioDay], options: PHOptions | None = None,
           state: PHState | None = None) -> PHState:
    """Run progressive hedging to consensus, the iteration cap or the time cap.

    A single scenario is solved directly as an extensive form. ``state``
    resumes from a checkpoint.

    Raises:
        ValidationError: ``no_iterations`` when ``max_iterations < 1``.
        SolverError: a subproblem failed; the partial state is written to
            ``ph_checkpoint.json`` when ``out_dir`` is set.
    """
    opts = options or PHOptions()
    opts.validate()
    scenarios = sorted(scenarios, key=lambda s: s.id)
    check_scenario_set(scenarios)
    out_dir = Path(opts.out_dir) if opts.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    if len(scenarios) == 1:
        return _single_scenario(system, scenarios, opts)

    runner = _Runner(system, scenarios, opts)
    if state is None:
        state = PHState(keys=runner.keys, rho=default_rho(system, opts))
        state.weights = {sc.id: [0.0] * len(runner.keys) for sc in scenarios}
    elif state.keys != runner.keys:
        raise ValidationError("checkpoint_mismatch", "checkpoint does not match the case's first stage")
    trace: list[dict] = []

    try:
        while state.iteration < opts.max_iterations:
            if runner.out_of_time():
                state.termination = "time_limit"
                break
            it = state.iteration + 1
            first = it == 1 and not state.xbar
            objs = {
                sid: _objective(sm, None if first else state.weights[sid],
                                None if first else state.xbar, None if first else state.rho)
                for sid, sm in runner.models.items()
            }
            outs = runner.solve_all(objs)
            if first:
                # no multipliers or proximal term yet: this is the wait-and-see bound
                state.lower_bound = max(state.lower_bound, _weighted_sum(runner, {s: o.bound for s, o in outs.items()}))

            n = len(runner.keys)
            xbar = [math.fsum(runner.prob[sid] * outs[sid].x[i] for sid in sorted(outs)) for i in range(n)]
            dev = max((abs(outs[sid].x[i] - xbar[i]) for sid in outs for i in range(n)), default=0.0)
            for sid in sorted(outs):
                w = state.weights[sid]
                for i in range(n):
                    w[i] += state.rho[i] * (outs[sid].x[i] - xbar[i])
            for i in range(n):
                mean = math.fsum(runner.prob[sid] * state.weights[sid][i] for sid in sorted(state.weights))
                for sid in state.weights:
                    state.weights[sid][i] -= mean
            state.xbar, state.deviation, state.iteration = xbar, dev, it
            state.x = {sid: outs[sid].x for sid in sorted(outs)}
            if opts.rho_growth != 1.0:
                state.rho = [r * opts.rho_growth for r in state.rho]

            inc = find_incumbent(state, runner)
            if inc is not None and inc[1] < state.incumbent_objective:
                state.incumbent, state.incumbent_objective = inc
            if n and (dev <= opts.convergence_tol or it % opts.bound_interval == 0) and not first:
                state.lower_bound = max(state.lower_bound, compute_lower_bound(state, runner))

            row = {"iteration": it, "deviation": dev, "lower_bound": _num(state.lower_bound),
                   "incumbent": _num(state.incumbent_objective)}
            state.history.append(row)
            trace.append({**row, "wall_time": time.monotonic() - runner.start})
            log.info("PH %d: deviation %.3g bound %.9g incumbent %.9g", it, dev, state.lower_bound,
                     state.incumbent_objective)
            if out_dir and opts.checkpoint_every and it % opts.checkpoint_every == 0:
                save_checkpoint(state, out_dir / "ph_checkpoint.json")
            if dev <= opts.convergence_tol:
                state.converged, state.termination = True, "converged"
                break
        else:
            state.termination = state.termination or "iteration_limit"
    except SolverError:
        state.termination = "subproblem_failure"
        if out_dir:
            save_checkpoint(state, out_dir / "ph_checkpoint.json")
            _write_trace(out_dir / "ph_trace.csv", trace)
        raise

    if state.incumbent is not None:
        state.report = runner.evaluate(state.incumbent)
    if out_dir:
        _write_trace(out_dir / "ph_trace.csv", trace)
        save_checkpoint(state, out_dir / "ph_checkpoint.json")
    log.info("PH finished (%s) after %d iterations, gap %.4g", state.termination, state.iteration, state.gap)
    return state


def _single_scenario(system: PowerSystem, scenarios: list[ScenarioDay], opts: PHOptions) -> PHState:
    sol = solve_extensive_form(system, scenarios, opts.solve_options(opts.time_limit))
    keys = first_stage_keys(system)
    state = PHState(keys=keys, rho=default_rho(system, opts))
    vec = sol.plan.vector(system)
    state.iteration = 1
    state.xbar = vec
    state.x = {scenarios[0].id: vec}
    state.weights = {scenarios[0].id: [0.0] * len(keys)}
    state.incumbent, state.incumbent_objective = sol.plan, sol.objective
    state.lower_bound = sol.best_bound
    state.deviation = 0.0
    state.converged, state.termination = True, "extensive_form"
    state.history.append({"iteration": 1, "deviation": 0.0, "lower_bound": sol.best_bound, "incumbent": sol.objective})
    state.report = evaluate_plan(system, sol.plan, scenarios, opts.solve_options())
    if opts.out_dir:
        _write_trace(Path(opts.out_dir) / "ph_trace.csv", [{**state.history[0], "wall_time": 0.0}])
        save_checkpoint(state, Path(opts.out_dir) / "ph_checkpoint.json")
    return state

"""Command-line entry point: case loading, run orchestration and reports.

A case directory holds ``system.json`` plus either a prebuilt
``scenarios.json`` or raw inputs (``loads.csv`` with per-bus columns,
optional ``availability.csv``, ``outages.json`` and ``fuel_scenario.json``).
An optional ``case.json`` carries the case name, candidate counts, master
seed, day selection and weights. Bundled cases can be named directly
(``island3`` or ``examples/island3``).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import __version__
from .errors import CepError, ModelBuildError, ScenarioError, SolverError, ValidationError
from .investment import InvestmentPlan, validate_plan
from .milp import SolveOptions
from .ph import PHOptions, run_ph
from .planner import PlanReport, aggregate_report, evaluate_plan, solve_extensive_form
from .scenarios import (
    HENRY_HUB_EXISTING,
    HENRY_HUB_FUTURE,
    FuelScenario,
    ScenarioDay,
    apply_fuel_prices,
    build_scenario_set,
    check_scenario_set,
    default_price_rules,
    read_fuel_scenario_json,
    read_outages_json,
    read_scenarios_json,
    read_series_csv,
    scale_scenarios,
    scenarios_to_json,
)
from .system import (
    PowerSystem,
    check_system,
    expand_candidate_catalog,
    filter_candidates,
    load_system,
    system_to_dict,
    without_expansion,
)
from .uc import DispatchSolution, extract_solution, solve_operational, solve_stitched, with_mode, write_dispatch_csv

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER = 0, 2, 3
COMMANDS = ("validate", "simulate", "simulate-stitched", "solve-ef", "solve-ph", "evaluate", "report")
NETWORK_FLAGS = {"copperplate": "copperplate", "pipe": "pipe_and_bubble"}
BUILTIN_FUEL_SCENARIOS = {"existing": HENRY_HUB_EXISTING, "future": HENRY_HUB_FUTURE, "future+": HENRY_HUB_FUTURE}

# write_report column order; costs in $/y, capacities in MW
REPORT_COLUMNS = (
    "case_id", "gap_pct", "investment_cost", "production_cost", "overall_cost",
    "min_reserves", "new_gen", "new_storage", "retired",
    "expected_daily_shed", "expected_lolh",
)


# ---------------------------------------------------------------------------
# Case loading
# ---------------------------------------------------------------------------


@dataclass
class CaseBundle:
    """A validated system and scenario set ready to run."""

    name: str
    path: Path
    system: PowerSystem
    scenarios: list[ScenarioDay]
    mode: str = "cep"
    options: dict = field(default_factory=dict)


def resolve_case_path(case: str | Path) -> Path:
    """Return the case directory, falling back to the bundled cases."""
    path = Path(case)
    if path.is_dir():
        return path
    bundled = resources.files("islandcep") / "cases" / path.name
    if bundled.is_dir():
        return Path(str(bundled))
    raise ValidationError("missing_file", f"case directory not found: {case}")


def _fuel_scenario(path: Path, name: str | None) -> FuelScenario | None:
    """Resolve ``--fuel-scenario``: a name in the case file, a built-in name, or a file path."""
    case_file = path / "fuel_scenario.json"
    if name is not None and name not in BUILTIN_FUEL_SCENARIOS:
        file = Path(name)
        if not file.is_file():
            raise ValidationError("missing_file", f"fuel scenario file not found: {name}")
        return read_fuel_scenario_json(file)
    if case_file.is_file():
        return read_fuel_scenario_json(case_file, name)
    if name is None:
        return None
    return FuelScenario(name, {}, BUILTIN_FUEL_SCENARIOS[name], default_price_rules())


def _check_ids(system: PowerSystem, scenarios: Sequence[ScenarioDay]) -> None:
    buses = {b.id for b in system.buses if b.in_service}
    elements = {e.id for e in system.generators} | {s.id for s in system.storage_units}
    for sc in scenarios:
        for bus in sc.demand:
            if bus not in buses:
                raise ScenarioError("load_at_unknown_bus", f"scenario {sc.id}: demand column for unknown bus {bus}")
        for eid in sc.availability:
            if eid not in elements:
                raise ScenarioError("unknown_element", f"scenario {sc.id}: availability for unknown element {eid}")


def load_case(
    case: str | Path,
    *,
    mode: str = "cep",
    network: str | None = None,
    fuel_scenario: str | None = None,
    load_scale: float = 1.0,
    renewables_only: bool = False,
    no_new_thermal_before: int | None = None,
) -> CaseBundle:
    """Load, transform and validate a case directory.

    Raises:
        ValidationError: missing files or invalid system data; ``violations``
            lists every failed rule.
        ScenarioError: ``no_scenarios``, ``load_at_unknown_bus`` and other
            scenario-set problems.
    """
    path = resolve_case_path(case)
    system_file = path / "system.json"
    if not system_file.is_file():
        raise ValidationError("missing_file", f"{system_file} not found")
    meta = json.loads((path / "case.json").read_text()) if (path / "case.json").is_file() else {}
    name = meta.get("name", path.name)
    try:
        system = load_system(system_file, path / "limits.json")
    except (TypeError, KeyError) as err:
        raise ValidationError("schema_mismatch", f"{system_file}: {err}") from err
    check_system(system)

    fuel = _fuel_scenario(path, fuel_scenario or meta.get("fuel_scenario"))
    if fuel is not None:
        system = apply_fuel_prices(system, fuel.price_rules, fuel.index_price)
    if network is not None:
        system = with_mode(system, network_mode=NETWORK_FLAGS.get(network, network))

    if (path / "scenarios.json").is_file():
        raw = json.loads((path / "scenarios.json").read_text())
        if not raw:
            raise ScenarioError("no_scenarios", f"{path / 'scenarios.json'} is empty")
        scenarios = read_scenarios_json(path / "scenarios.json")
        if fuel is not None and fuel.supply:
            log.warning("fuel supplies in %s are ignored for prebuilt scenarios", fuel.name)
    elif (path / "loads.csv").is_file():
        loads = read_series_csv(path / "loads.csv")
        avail = read_series_csv(path / "availability.csv", "pu") if (path / "availability.csv").is_file() else {}
        outages = read_outages_json(path / "outages.json") if (path / "outages.json").is_file() else {}
        scenarios = build_scenario_set(
            system, loads, avail, outages,
            fuel_scenario=fuel.supply if fuel is not None else None,
            day_selection=meta.get("days"),
            weights=meta.get("weights"),
            master_seed=int(meta.get("master_seed", 0)),
        )
    else:
        raise ValidationError("missing_file", f"{path} has neither scenarios.json nor loads.csv")
    _check_ids(system, scenarios)
    if load_scale != 1.0:
        scenarios = scale_scenarios(scenarios, load_scale)

    if mode == "no-expansion":
        system = without_expansion(system)
    elif mode == "cep":
        system = expand_candidate_catalog(system, meta.get("candidate_counts"))
        system = filter_candidates(system, renewables_only=renewables_only, year=no_new_thermal_before)
    else:
        raise ValidationError("unknown_mode", mode)
    check_system(system)
    check_scenario_set(scenarios)
    return CaseBundle(name, path, system, scenarios, mode, {
        "network": system.config.network_mode,
        "fuel_scenario": fuel.name if fuel is not None else None,
        "load_scale": load_scale,
        "renewables_only": renewables_only,
        "no_new_thermal_before": no_new_thermal_before,
    })


# ---------------------------------------------------------------------------
# Manifest and reports
# ---------------------------------------------------------------------------


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def content_hash(bundle: CaseBundle) -> str:
    """Git-style blob hash of the canonicalized effective inputs."""
    body = _canonical({
        "system": system_to_dict(bundle.system),
        "scenarios": scenarios_to_json(bundle.scenarios),
        "mode": bundle.mode,
        "options": bundle.options,
    }).encode()
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()


@dataclass
class RunManifest:
    case_path: str
    case_name: str
    command: str
    mode: str
    input_hash: str
    seed: int
    flags: dict
    started: str
    finished: str = ""
    engine_version: str = __version__

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True))


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True))


def _money(x: float, unit: float) -> str:
    return "n/a" if x is None or not math.isfinite(x) else f"{x / unit:,.2f}"


def summary_table(rows: Sequence[dict], investment: bool) -> str:
    """Human-readable summary in M$/y (and B$/y for overall cost)."""
    head = ["case", "production (M$/y)", "daily shed (MWh)", "LOLH (h/day)", "min reserves (MW)"]
    if investment:
        head += ["investment (M$/y)", "overall (B$/y)", "new gen (MW)", "new storage (MW)", "retired (MW)", "gap"]
    lines = [head]
    for r in rows:
        line = [
            r["case_id"], _money(r["production_cost"], 1e6), f"{r['expected_daily_shed']:.2f}",
            f"{r['expected_lolh']:.2f}", f"{r['min_reserves']:.1f}",
        ]
        if investment:
            gap = r.get("gap_pct")
            line += [
                _money(r["investment_cost"], 1e6), _money(r["overall_cost"], 1e9), f"{r['new_gen']:.1f}",
                f"{r['new_storage']:.1f}", f"{r['retired']:.1f}",
                "n/a" if gap is None else f"{gap:.2f}%",
            ]
        lines.append(line)
    widths = [max(len(str(row[i])) for row in lines) for i in range(len(head))]
    return "\n".join("  ".join(str(c).rjust(w) for c, w in zip(row, widths)) for row in lines)


def result_row(case_id: str, report: PlanReport, gap: float | None) -> dict:
    row = {k: getattr(report, k) for k in REPORT_COLUMNS if hasattr(report, k)}
    row["case_id"] = case_id
    row["gap_pct"] = None if gap is None or not math.isfinite(gap) else 100.0 * gap
    return {k: row.get(k) for k in REPORT_COLUMNS}


def write_report(results: Sequence[dict], out_dir: str | Path, stem: str = "report") -> tuple[Path, Path]:
    """Write one CSV row per case (2 decimals) and a full-precision JSON mirror.

    Raises:
        ValidationError: ``no_results`` when ``results`` is empty.
        OSError: the output directory is not writable.
    """
    if not results:
        raise ValidationError("no_results", "nothing to report")
    rows = sorted(({k: r.get(k) for k in REPORT_COLUMNS} for r in results), key=lambda r: str(r["case_id"]))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(REPORT_COLUMNS)
        for r in rows:
            wr.writerow([_csv_cell(r[k]) for k in REPORT_COLUMNS])
    json_path.write_text(json.dumps(rows, indent=2))
    return csv_path, json_path


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.2f}"
    return str(v)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _solve_options(args) -> SolveOptions:
    opts = SolveOptions(threads=args.threads, seed=args.seed)
    if args.mip_gap is not None:
        opts.mip_gap = args.mip_gap
    if args.time_limit is not None:
        opts.time_limit = args.time_limit
    return opts.resolved()


def _report_for_dispatch(bundle: CaseBundle, sols: Sequence[DispatchSolution],
                         scenarios: Sequence[ScenarioDay]) -> PlanReport:
    return aggregate_report(bundle.system, InvestmentPlan(), scenarios, sols)


def _write_dispatch(out: Path, sols: Sequence[DispatchSolution]) -> None:
    _dump([s.metrics() for s in sols], out / "metrics.json")
    with open(out / "metrics.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["scenario", "production_cost", "penalty_cost", "load_shed_mwh", "lolh_hours", "min_reserve_mw"])
        for s in sols:
            wr.writerow([s.scenario_id, f"{s.production_cost:.6f}", f"{s.penalty_cost:.6f}",
                         f"{s.load_shed:.6f}", f"{s.lolh:g}", f"{s.min_reserve:.6f}"])
    for s in sols:
        write_dispatch_csv(s, out / f"dispatch_{s.scenario_id}.csv")


def cmd_validate(bundle: CaseBundle, args, out: Path) -> dict:
    n_cand = len(bundle.system.candidate_thermal) + len(bundle.system.candidate_renewable)
    n_cand += len(bundle.system.candidate_storage)
    print(f"{bundle.name}: {len(bundle.system.buses)} buses, {len(bundle.system.generators)} generators, "
          f"{len(bundle.system.storage_units)} storage units, {n_cand} candidates, "
          f"{len(bundle.scenarios)} scenarios: ok")
    return {}


def cmd_simulate(bundle: CaseBundle, args, out: Path) -> dict:
    system = without_expansion(bundle.system) if args.plan is None else bundle.system
    plan = InvestmentPlan.load(args.plan) if args.plan else None
    sols = [solve_operational(system, sc, plan, _solve_options(args)) for sc in bundle.scenarios]
    _write_dispatch(out, sols)
    report = aggregate_report(system, plan or InvestmentPlan(), bundle.scenarios, sols)
    report.save(out / "plan_report.json")
    return result_row(bundle.name, report, None)


def cmd_simulate_stitched(bundle: CaseBundle, args, out: Path) -> dict:
    system = without_expansion(bundle.system) if args.plan is None else bundle.system
    plan = InvestmentPlan.load(args.plan) if args.plan else None
    days = sorted(bundle.scenarios, key=lambda s: (s.date or dt.date.min, s.id))
    sol = solve_stitched(system, days, plan, _solve_options(args))
    _write_dispatch(out, [sol])
    stitched = dataclasses.replace(days[0], id=sol.scenario_id, probability=1.0)
    report = aggregate_report(system, plan or InvestmentPlan(), [stitched], [sol])
    report.save(out / "plan_report.json")
    return result_row(bundle.name, report, None)


def cmd_solve_ef(bundle: CaseBundle, args, out: Path) -> dict:
    sol = solve_extensive_form(bundle.system, bundle.scenarios, _solve_options(args))
    dispatch = [
        extract_solution(sub, sol.result.values, sol.status, sol.gap, sol.best_bound)
        for sub in sol.ef.subproblems
    ]
    report = aggregate_report(bundle.system, sol.plan, bundle.scenarios, dispatch)
    sol.plan.save(out / "plan.json")
    report.save(out / "plan_report.json")
    _write_dispatch(out, dispatch)
    return result_row(bundle.name, report, sol.gap)


def cmd_solve_ph(bundle: CaseBundle, args, out: Path) -> dict:
    opts = PHOptions(seed=args.seed, threads=args.threads, workers=args.workers, out_dir=out,
                     time_limit=args.time_limit)
    if args.max_iterations is not None:
        opts.max_iterations = args.max_iterations
    if args.mip_gap is not None:
        opts.subproblem_mip_gap = args.mip_gap
    state = run_ph(bundle.system, bundle.scenarios, opts)
    if state.incumbent is None or state.report is None:
        raise SolverError("no_incumbent", f"progressive hedging stopped ({state.termination}) without a feasible plan")
    state.incumbent.save(out / "plan.json")
    state.report.save(out / "plan_report.json")
    _dump({
        "iterations": state.iteration,
        "termination": state.termination,
        "converged": state.converged,
        "lower_bound": state.lower_bound if math.isfinite(state.lower_bound) else None,
        "incumbent_objective": state.incumbent_objective,
        "gap": state.gap,
    }, out / "ph_summary.json")
    return result_row(bundle.name, state.report, state.gap)


def cmd_evaluate(bundle: CaseBundle, args, out: Path) -> dict:
    if args.plan is None:
        raise ValidationError("missing_plan", "evaluate needs --plan PLAN.json")
    plan = InvestmentPlan.load(args.plan)
    problems = validate_plan(bundle.system, plan)
    if problems:
        raise ValidationError("invalid_plan", "; ".join(problems))
    report = evaluate_plan(bundle.system, plan, bundle.scenarios, _solve_options(args), workers=args.workers)
    if not report.ok:
        raise SolverError("scenario_failure", ", ".join(report.failed_scenarios))
    report.save(out / "plan_report.json")
    return result_row(bundle.name, report, None)


HANDLERS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "simulate-stitched": cmd_simulate_stitched,
    "solve-ef": cmd_solve_ef,
    "solve-ph": cmd_solve_ph,
    "evaluate": cmd_evaluate,
}


def cmd_report(args) -> int:
    """Collect ``result.json`` from run directories into one table."""
    rows = []
    for d in args.inputs:
        f = Path(d) / "result.json"
        if not f.is_file():
            raise ValidationError("missing_file", f"{f} not found")
        rows.append(json.loads(f.read_text()))
    csv_path, _ = write_report(rows, args.out or ".")
    print(summary_table(sorted(rows, key=lambda r: str(r["case_id"])), investment=True))
    print(f"wrote {csv_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="islandcep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "report":
            p.add_argument("inputs", nargs="+", help="run directories holding result.json")
            p.add_argument("--out", default=None)
            continue
        p.add_argument("case", help="case directory or bundled case name")
        p.add_argument("--mode", choices=("cep", "no-expansion"), default="cep")
        p.add_argument("--network", choices=tuple(NETWORK_FLAGS), default=None)
        p.add_argument("--mip-gap", type=float, default=None)
        p.add_argument("--time-limit", type=float, default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None)
        p.add_argument("--case-id", default=None, help="row label in reports (default: case name)")
        p.add_argument("--fuel-scenario", default=None, help="existing, future, future+ or a JSON file")
        p.add_argument("--load-scale", type=float, default=1.0)
        p.add_argument("--renewables-only", action="store_true")
        p.add_argument("--no-new-thermal-before", type=int, default=None, metavar="YEAR")
        p.add_argument("--max-iterations", type=int, default=None)
        p.add_argument("--plan", default=None)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """Run one command; returns the process exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return cmd_report(args)
        if args.command == "solve-ph":
            PHOptions(max_iterations=args.max_iterations if args.max_iterations is not None else 1).validate()
        started = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
        bundle = load_case(
            args.case, mode=args.mode, network=args.network, fuel_scenario=args.fuel_scenario,
            load_scale=args.load_scale, renewables_only=args.renewables_only,
            no_new_thermal_before=args.no_new_thermal_before,
        )
        if args.case_id:
            bundle.name = args.case_id
        out = Path(args.out or f"runs/{bundle.name}-{args.command}")
        out.mkdir(parents=True, exist_ok=True)
        flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "verbose")}
        manifest = RunManifest(str(bundle.path), bundle.name, args.command, bundle.mode, content_hash(bundle),
                               args.seed, flags, started)
        row = HANDLERS[args.command](bundle, args, out)
        manifest.finished = dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")
        manifest.save(out / "manifest.json")
        if row:
            _dump(row, out / "result.json")
            print(summary_table([row], investment=args.command in ("solve-ef", "solve-ph", "evaluate")))
        return EXIT_OK
    except (ValidationError, ScenarioError, ModelBuildError) as err:
        print(f"error: {err}", file=sys.stderr)
        for v in getattr(err, "violations", []):
            print(f"  - {v}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as err:
        print(f"solver error: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except CepError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run(argv))

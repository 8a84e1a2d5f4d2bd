import csv
import json
import math

import pytest

from islandcep import ph
from islandcep.errors import SolverError, ValidationError
from islandcep.investment import InvestmentPlan
from islandcep.milp import SolveOptions
from islandcep.planner import solve_extensive_form
from islandcep.ph import (
    PHOptions,
    PHState,
    default_rho,
    load_checkpoint,
    round_plan,
    run_ph,
    save_checkpoint,
)
from islandcep.system import SiteLimit

from toys import cep_toy

EXACT = SolveOptions(mip_gap=1e-9, mip_abs_gap=1e-6)
# cost-proportional rho at full scale makes the two toy scenarios swap the
# new unit back and forth; a tenth of it settles in a couple dozen iterations
TOY_OPTS = dict(rho_scale=0.1, max_iterations=200)


def conflicting():
    # the mild day does best without the new unit, the peaky day wants it
    return cep_toy((120.0, 190.0), hours=8)


@pytest.fixture(scope="module")
def ef_oracle():
    s, days = conflicting()
    return solve_extensive_form(s, days, EXACT).objective


@pytest.fixture(scope="module")
def ph_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("ph")
    s, days = conflicting()
    state = run_ph(s, days, PHOptions(out_dir=out, **TOY_OPTS))
    return state, out


# -- options ----------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs, code",
    [
        (dict(max_iterations=0), "no_iterations"),
        (dict(convergence_tol=0.0), "bad_tolerance"),
        (dict(rho_scale=-1.0), "bad_rho"),
        (dict(rho_by_family={"thermal": 0.0}), "bad_rho"),
        (dict(bound_interval=0), "bad_option"),
    ],
)
def test_option_guardrails(kwargs, code):
    with pytest.raises(ValidationError) as err:
        PHOptions(**kwargs).validate()
    assert err.value.code == code


def test_run_rejects_zero_iterations():
    s, days = conflicting()
    with pytest.raises(ValidationError) as err:
        run_ph(s, days, PHOptions(max_iterations=0))
    assert err.value.code == "no_iterations"


def test_default_rho_is_cost_proportional():
    s, _ = conflicting()
    rho = default_rho(s, PHOptions())
    # new1, pv_new, bess_new, retire g2
    assert rho[0] == pytest.approx(80 * (60_000 + 15_000))
    assert rho[1] == pytest.approx(50 * (60_000 + 20_000))
    assert rho[3] == pytest.approx(abs(0.1 * 30_000 * 40 - 30_000 * 40))
    scaled = default_rho(s, PHOptions(rho_scale=0.5))
    assert scaled == pytest.approx([0.5 * r for r in rho])
    fam = default_rho(s, PHOptions(rho_by_family={"storage": 7.0}))
    assert fam[2] == 7.0 and fam[0] == rho[0]


# -- rounding ---------------------------------------------------------------


@pytest.mark.parametrize("xbar, expected", [(0.6, 1), (0.5, 1), (0.49, 0), (0.0, 0), (1.0, 1)])
def test_binary_rounding_threshold(xbar, expected):
    s, _ = conflicting()
    plan = round_plan(s, [xbar, 0.0, 0.0, 0.0])
    assert plan.thermal_builds["new1"] == expected


def test_continuous_entries_clipped_to_bounds():
    s, _ = conflicting()
    plan = round_plan(s, [0.0, 7.5, -0.2, 0.0])
    assert plan.renewable_builds["pv_new"] == 3.0
    assert plan.storage_builds["bess_new"] == 0.0


def test_rounding_scales_continuous_into_site_cap():
    s, _ = conflicting()
    s.site_limits = [SiteLimit("b1", "solar", 100.0)]
    plan = round_plan(s, [0.0, 3.0, 0.0, 0.0])
    assert 50.0 * plan.renewable_builds["pv_new"] <= 100.0 + 1e-6


def test_rounding_repairs_binary_cap_violation():
    s, _ = conflicting()
    s.site_limits = [SiteLimit("b1", "ALL", 200.0)]  # g1 + g2 leave 60 MW, new1 needs 80
    plan = round_plan(s, [0.7, 0.0, 0.0, 0.0])
    assert plan is not None
    assert plan.thermal_builds["new1"] == 0


# -- algorithm --------------------------------------------------------------


def test_identical_scenarios_converge_at_once():
    s, days = cep_toy((150.0, 150.0), hours=8)
    opts = PHOptions(**TOY_OPTS)
    state = run_ph(s, days, opts)
    assert state.converged and state.iteration == 1
    assert state.gap <= opts.subproblem_mip_gap


def test_single_scenario_delegates_to_extensive_form():
    s, days = cep_toy((190.0,), hours=8)
    state = run_ph(s, days, PHOptions(subproblem_mip_gap=1e-9))
    ef = solve_extensive_form(s, days, EXACT)
    assert state.termination == "extensive_form"
    assert state.incumbent_objective == pytest.approx(ef.objective, rel=1e-6)
    assert state.incumbent.key() == ef.plan.key()


def test_conflicting_preferences_reach_consensus(ph_run):
    state, _ = ph_run
    assert state.converged
    assert state.iteration <= 200
    # the first iteration disagreed on the new unit, so weights moved off zero
    assert state.history[0]["deviation"] >= 0.5
    assert any(abs(w) > 0 for ws in state.weights.values() for w in ws)


def test_certificate_brackets_ef(ph_run, ef_oracle):
    state, _ = ph_run
    assert state.lower_bound <= ef_oracle * (1 + 1e-6)
    assert ef_oracle <= state.incumbent_objective * (1 + 1e-6)
    assert state.incumbent_objective <= 1.01 * ef_oracle


def test_bounds_are_monotone(ph_run):
    state, _ = ph_run
    lbs = [h["lower_bound"] for h in state.history if h["lower_bound"] is not None]
    incs = [h["incumbent"] for h in state.history if h["incumbent"] is not None]
    assert all(b >= a for a, b in zip(lbs, lbs[1:]))
    assert all(b <= a for a, b in zip(incs, incs[1:]))
    assert state.gap >= 0


def test_weights_average_to_zero(ph_run):
    state, _ = ph_run
    for i in range(len(state.keys)):
        total = math.fsum(0.5 * state.weights[sid][i] for sid in state.weights)
        assert abs(total) <= 1e-9 * max(1.0, max(abs(w[i]) for w in state.weights.values()))


def test_report_matches_incumbent(ph_run):
    state, _ = ph_run
    assert state.report is not None
    assert state.report.overall_cost == pytest.approx(state.incumbent_objective)


def test_trace_and_checkpoint_written(ph_run):
    state, out = ph_run
    with open(out / "ph_trace.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["iteration", "deviation", "lower_bound", "incumbent", "wall_time"]
    assert len(rows) == state.iteration
    ck = json.loads((out / "ph_checkpoint.json").read_text())
    assert ck["iteration"] == state.iteration
    assert "wall_time" not in json.dumps(ck)


def test_checkpoint_round_trip(tmp_path, ph_run):
    state, _ = ph_run
    save_checkpoint(state, tmp_path / "ck.json")
    back = load_checkpoint(tmp_path / "ck.json")
    assert back.to_dict() == state.to_dict()
    assert back.incumbent.key() == state.incumbent.key()


def test_fresh_state_serializes_infinities(tmp_path):
    state = PHState(keys=[("build", "x")], rho=[1.0])
    save_checkpoint(state, tmp_path / "ck.json")
    back = load_checkpoint(tmp_path / "ck.json")
    assert back.lower_bound == -math.inf and back.incumbent_objective == math.inf


def test_resume_matches_uninterrupted_run(tmp_path):
    s, days = conflicting()
    straight = run_ph(s, days, PHOptions(**{**TOY_OPTS, "max_iterations": 6}))
    first = run_ph(s, days, PHOptions(**{**TOY_OPTS, "max_iterations": 3}))
    resumed = run_ph(s, days, PHOptions(**{**TOY_OPTS, "max_iterations": 6}),
                     state=PHState.from_dict(json.loads(json.dumps(first.to_dict()))))
    assert resumed.history == straight.history
    assert resumed.xbar == straight.xbar


def test_runs_are_deterministic():
    s, days = conflicting()
    a = run_ph(s, days, PHOptions(**{**TOY_OPTS, "max_iterations": 4}))
    b = run_ph(s, days, PHOptions(**{**TOY_OPTS, "max_iterations": 4, "workers": 2}))
    assert a.history == b.history
    assert a.weights == b.weights


def test_subproblem_failure_dumps_state(tmp_path, monkeypatch):
    s, days = conflicting()
    real, calls = ph._solve_one, []

    def flaky(*args, **kwargs):
        calls.append(1)
        if len(calls) > 2:
            raise SolverError("error", "injected failure")
        return real(*args, **kwargs)

    monkeypatch.setattr(ph, "_solve_one", flaky)
    with pytest.raises(SolverError):
        run_ph(s, days, PHOptions(out_dir=tmp_path, **TOY_OPTS))
    ck = load_checkpoint(tmp_path / "ph_checkpoint.json")
    assert ck.termination == "subproblem_failure"
    assert ck.iteration == 1


def test_time_limit_stops_early():
    s, days = conflicting()
    state = run_ph(s, days, PHOptions(**{**TOY_OPTS, "time_limit": 1e-9}))
    assert state.termination == "time_limit"
    assert state.iteration == 0


def test_incumbent_is_a_valid_plan(ph_run):
    state, _ = ph_run
    assert isinstance(state.incumbent, InvestmentPlan)
    assert state.incumbent.to_dict()["thermal_builds"]["new1"] in (0, 1)

import dataclasses
import json

import pytest

from islandcep.errors import ValidationError
from islandcep.system import (
    ALL,
    Bus,
    FuelId,
    HeatRateCurve,
    SiteLimit,
    TECHNOLOGY_COSTS,
    check_system,
    default_catalog,
    expand_candidate_catalog,
    filter_candidates,
    load_system,
    save_system,
    system_from_dict,
    system_to_dict,
    validate_system,
    without_expansion,
)

from toys import GAS, battery, solar, system, thermal


def three_bus():
    s = system(
        thermals=[thermal("g1", "b1", 150, 30), thermal("g2", "b2", 60, 6, retirable=True, fom=1000.0)],
        renewables=[solar("pv1", "b3")],
        storage=[battery("bat1", "b2")],
        buses=("b1", "b2", "b3"),
        lines=[("l12", "b1", "b2", 100.0), ("l23", "b2", "b3", 80.0)],
    )
    s.buses = [Bus("b1", 0.5), Bus("b2", 0.3), Bus("b3", 0.2)]
    s.catalog = default_catalog("NG@toy")
    return s


def rules(system_):
    return [v.rule for v in validate_system(system_)]


def test_well_formed_toy_has_no_violations():
    assert validate_system(three_bus()) == []


def test_load_fraction_sum():
    s = three_bus()
    s.buses[0].load_fraction = 0.48
    v = validate_system(s)
    assert [x.rule for x in v] == ["load_fraction_sum"]


def test_startup_below_min_power():
    s = three_bus()
    s.thermal_generators[1] = dataclasses.replace(s.thermal_generators[1], min_power=10.0, startup_limit=5.0)
    assert "startup_below_min_power" in rules(s)


@pytest.mark.parametrize(
    "change, rule",
    [
        (dict(min_power=200.0), "min_power_range"),
        (dict(min_up=0), "min_up_below_one"),
        (dict(primary_fuel=FuelId("NG", "nowhere")), "unknown_fuel"),
        (dict(heat_rate=HeatRateCurve([(30.0, 400.0), (90.0, 900.0), (150.0, 1300.0)])), "heat_rate_not_convex"),
        (dict(heat_rate=HeatRateCurve([(0.0, 0.0), (150.0, 1500.0)])), "heat_rate_domain"),
        (dict(bus="b9"), "unknown_bus"),
    ],
)
def test_thermal_rules(change, rule):
    s = three_bus()
    s.thermal_generators[0] = dataclasses.replace(s.thermal_generators[0], **change)
    assert rule in rules(s)


def test_violations_are_collected_not_raised():
    s = three_bus()
    s.buses[0].load_fraction = 0.1
    s.lines[0].thermal_limit = -1
    assert {"load_fraction_sum", "line_limit_nonpositive"} <= set(rules(s))
    with pytest.raises(ValidationError) as err:
        check_system(s)
    assert len(err.value.violations) >= 2


def test_site_limit_below_existing():
    s = three_bus()
    s.site_limits = [SiteLimit("b3", "solar", 10.0)]
    assert "site_limit_below_existing" in rules(s)


def test_default_kappa_and_retirement_cost():
    big, small = thermal("a", capacity=150), thermal("b", capacity=149.9)
    assert big.kappa == 0.5 and small.kappa == 0.05
    g = thermal("c", capacity=100, fom=90_000.0)
    assert g.retirement_cost_value == pytest.approx(0.1 * 90_000.0 * 100)


def test_initial_status_defaults_to_coldest_category():
    g = thermal(startup=[(2, 500.0), (8, 2000.0)])
    assert g.initial_status == -8


def test_heat_rate_segments_and_evaluate():
    hr = HeatRateCurve([(10.0, 120.0), (50.0, 500.0), (100.0, 1100.0)])
    assert hr.segments() == [(9.5, 25.0), (12.0, -100.0)]
    assert hr.evaluate(50.0) == pytest.approx(500.0)
    assert hr.max_fuel_rate == 1100.0


def test_expand_two_h_class_copies():
    s = expand_candidate_catalog(three_bus(), {"cc_h": {"b1": 2}})
    cands = s.candidate_thermal
    assert [c.id for c in cands] == ["cc_h_b1_0", "cc_h_b1_1"]
    assert all(c.capacity == 522.2 for c in cands)


def test_expand_bess_unit():
    s = expand_candidate_catalog(three_bus(), {"bess": {"b2": 1}})
    (b,) = s.candidate_storage
    assert (b.capacity, b.duration, b.id) == (150.0, 4.0, "bess_b2")


def test_expand_zero_counts_only_adds_site_candidates():
    base = three_bus()
    base.site_limits = [SiteLimit("b3", "solar", 500.0), SiteLimit("b1", "rice_small", 0.0)]
    s = expand_candidate_catalog(base, {"cc_h": {"b1": 0}})
    assert s.candidate_thermal == []
    assert [g.id for g in s.candidate_renewable] == ["solar_b3"]
    assert s.candidate_renewable[0].donor == "pv1"
    assert s.thermal_generators == base.thermal_generators


@pytest.mark.parametrize(
    "counts, code",
    [({"fusion": {"b1": 1}}, "unknown_tech_class"), ({"rice_small": {"b1": 1}}, "bus_not_eligible")],
)
def test_expand_errors(counts, code):
    base = three_bus()
    base.site_limits = [SiteLimit("b1", "rice_small", 0.0)]
    with pytest.raises(ValidationError) as err:
        expand_candidate_catalog(base, counts)
    assert err.value.code == code


def test_all_site_limit_members():
    base = three_bus()
    base.site_limits = [SiteLimit("b2", ALL, 200.0)]
    assert validate_system(base) == []


def test_catalog_costs_table():
    assert TECHNOLOGY_COSTS["cc_h"][1:4] == (522.2, 59107.38, 15397.35)
    assert TECHNOLOGY_COSTS["bess"][1] == 150.0


def test_filter_candidates():
    s = expand_candidate_catalog(three_bus(), {"cc_h": {"b1": 1}, "rice_small": {"b2": 1}, "wind": {"b3": 1}})
    assert {g.id for g in filter_candidates(s, renewables_only=True).candidate_thermal} == set()
    gated = filter_candidates(s, year=2029)
    assert [g.id for g in gated.candidate_thermal] == ["rice_small_b2_0"]
    assert gated.candidate_renewable == []
    assert without_expansion(s).candidate_thermal == []
    assert without_expansion(s).retirable == []


def test_json_round_trip(tmp_path):
    s = three_bus()
    s.site_limits = [SiteLimit("b3", "solar", 300.0)]
    path = tmp_path / "system.json"
    save_system(s, path)
    back = load_system(path)
    assert system_to_dict(back) == system_to_dict(s)
    assert back.thermal_generators[0].primary_fuel == GAS


def test_json_average_heat_rate():
    data = json.loads(json.dumps(system_to_dict(three_bus())))
    data["thermal_generators"][0]["heat_rate"] = {"average": 9.0}
    s = system_from_dict(data)
    assert s.thermal_generators[0].heat_rate.breakpoints == [(30.0, 270.0), (150.0, 1350.0)]

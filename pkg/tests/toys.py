"""Small hand-built systems shared by the test modules."""

from __future__ import annotations

import numpy as np

from islandcep.scenarios import ScenarioDay
from islandcep.system import (
    Bus,
    FuelId,
    FuelSpec,
    HeatRateCurve,
    Line,
    PlannerConfig,
    PowerSystem,
    RenewableGenerator,
    StartupCategory,
    StorageUnit,
    ThermalGenerator,
)

GAS = FuelId("NG", "toy")
OIL = FuelId("diesel", "toy")


def thermal(gid="g1", bus="b1", capacity=100.0, pmin=10.0, hr=10.0, fuel=GAS, startup=None, **kw) -> ThermalGenerator:
    curve = hr if isinstance(hr, HeatRateCurve) else HeatRateCurve.from_average(hr, pmin, capacity)
    cats = [StartupCategory(*c) for c in (startup or [])]
    return ThermalGenerator(id=gid, bus=bus, capacity=capacity, min_power=pmin, heat_rate=curve,
                            primary_fuel=fuel, startup_categories=cats, **kw)


def system(thermals=(), renewables=(), storage=(), buses=("b1",), lines=(), prices=None, **cfg) -> PowerSystem:
    prices = prices or {GAS: 5.0, OIL: 15.0}
    cfg.setdefault("reserve_margin", 0.0)
    cfg.setdefault("utilization_enabled", False)
    return PowerSystem(
        buses=[Bus(b, 1.0 / len(buses)) for b in buses],
        lines=[Line(*ln) for ln in lines],
        thermal_generators=list(thermals),
        renewable_generators=list(renewables),
        storage_units=list(storage),
        fuels=[FuelSpec(f, p) for f, p in prices.items()],
        config=PlannerConfig(**cfg),
    )


def day(sys_: PowerSystem, demand, availability=None, supply=None, reserve=None, sid="d0", prob=1.0) -> ScenarioDay:
    """Scenario with ``demand`` on the first bus (or a bus->series dict)."""
    if not isinstance(demand, dict):
        demand = {sys_.buses[0].id: demand}
    T = len(next(iter(demand.values())))
    fuel_supply = {f.id: None for f in sys_.fuels}
    fuel_supply.update(supply or {})
    if reserve is None:
        reserve = sys_.config.reserve_series(T)
    return ScenarioDay(sid, prob, demand, availability or {}, fuel_supply, np.asarray(reserve, dtype=float))


def solar(gid="pv1", bus="b1", capacity=50.0, **kw) -> RenewableGenerator:
    return RenewableGenerator(gid, bus, capacity, tech="solar", **kw)


def battery(sid="bat1", bus="b1", capacity=20.0, duration=4.0, **kw) -> StorageUnit:
    return StorageUnit(sid, bus, capacity, duration, **kw)


def cep_toy(peaks=(150.0, 150.0), hours=24, **cfg):
    """One-bus expansion toy: an existing gas unit, a retirable oil unit and three candidates.

    Returns the system and one scenario per entry of ``peaks``.
    """
    existing = thermal("g1", capacity=100, pmin=20, hr=10.0, fom=20_000.0)
    oil = thermal("g2", capacity=40, pmin=0, hr=12.0, fuel=OIL, fom=30_000.0, retirable=True)
    cand = thermal("new1", capacity=80, pmin=16, hr=7.0, existing=False, fom=15_000.0, capex_annualized=60_000.0)
    pv = RenewableGenerator("pv_new", "b1", 50.0, existing=False, fom=20_000.0, capex_annualized=60_000.0,
                            max_units=3)
    bess = StorageUnit("bess_new", "b1", 25.0, 4.0, existing=False, eff_charge=0.92, eff_discharge=0.92,
                       fom=30_000.0, capex_annualized=90_000.0, max_units=2)
    cfg.setdefault("reserve_margin", 10.0)
    s = system(thermals=[existing, oil, cand], renewables=[pv], storage=[bess], **cfg)
    h = np.arange(hours) % 24
    shape = 0.6 + 0.4 * np.exp(-((h - 19) / 3.0) ** 2)
    sun = np.clip(np.sin((h - 6) / 12 * np.pi), 0, None)
    days = [
        day(s, list(pk * shape), availability={"pv_new": sun, "new1": np.full(hours, 0.85)},
            sid=f"s{i}", prob=1.0 / len(peaks))
        for i, pk in enumerate(peaks)
    ]
    return s, days

"""Scenario construction: hourly series, forced outages, fuel supplies and prices.

A scenario is one representative day (or, in stitched mode, a run of
consecutive days) carrying everything the operational model needs besides
the static system description.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ScenarioError, ValidationError
from .system import FuelId, PowerSystem

log = logging.getLogger(__name__)

HOURS_PER_DAY = 24
MASK64 = (1 << 64) - 1


# ---------------------------------------------------------------------------
# Time series
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Hourly series. ``values`` is ``base * scale``.

    Keeping the cumulative scale separate makes repeated scaling compose
    exactly: scaling by ``a`` then ``b`` yields the same floats as scaling by
    ``a*b`` once.
    """

    id: str
    base: np.ndarray
    unit: str = "MW"
    start: dt.date | None = None
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))

    @property
    def values(self) -> np.ndarray:
        return self.base if self.scale == 1.0 else self.base * self.scale

    def __len__(self):
        return len(self.base)

    @property
    def n_days(self) -> int:
        return len(self.base) // HOURS_PER_DAY

    def validate(self) -> None:
        v = self.values
        if len(v) == 0 or len(v) % HOURS_PER_DAY:
            raise ValidationError("series_length", f"{self.id}: {len(v)} hours is not a whole number of days")
        if not np.all(np.isfinite(v)):
            raise ValidationError("series_not_finite", self.id)
        if self.unit == "factor" and (v.min() < 0 or v.max() > 1):
            raise ValidationError("factor_range", self.id)
        if self.unit == "MW" and v.min() < 0:
            raise ValidationError("negative_load", self.id)

    def day(self, index: int) -> np.ndarray:
        return self.values[index * HOURS_PER_DAY:(index + 1) * HOURS_PER_DAY].copy()

    def day_index(self, day: dt.date | int) -> int:
        if isinstance(day, int):
            idx = day
        elif self.start is None:
            raise ScenarioError("no_start_date", f"series {self.id} has no start date")
        else:
            idx = (day - self.start).days
        if not 0 <= idx < self.n_days:
            raise ScenarioError("date_outside_coverage", f"{day} not covered by {self.id}")
        return idx


def scale_load(base: TimeSeries, factor: float) -> TimeSeries:
    """Multiply a series by ``factor`` (> 0) at every hour."""
    if not factor > 0:
        raise ValidationError("bad_factor", f"load scale must be positive, got {factor}")
    return dataclasses.replace(base, scale=base.scale * factor)


# ---------------------------------------------------------------------------
# Forced outages
# ---------------------------------------------------------------------------


class SplitMix64:
    """SplitMix64 generator (Steele, Lea and Flood), returning 64-bit integers."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def randbelow(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next()
            if r < limit:
                return r % n


def stable_hash(text: str) -> int:
    """64-bit FNV-1a hash; unlike ``hash()`` it does not vary between runs."""
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def derive_seed(master_seed: int, generator_id: str) -> int:
    return SplitMix64(int(master_seed) ^ stable_hash(generator_id)).next()


@dataclass
class OutageModel:
    """Forced-outage parameters for one generator.

    ``planned_outages`` are inclusive ``(start, end)`` hour pairs measured from
    the start of the series.
    """

    generator: str
    forced_outage_rate: float
    outage_duration: int = 40
    planned_outages: list[tuple[int, int]] = field(default_factory=list)
    seed: int | None = None

    def __post_init__(self):
        if not 0 <= self.forced_outage_rate < 1:
            raise ValidationError("outage_rate_range", f"{self.generator}: rate must be in [0, 1)")
        if self.outage_duration < 1:
            raise ValidationError("outage_duration_range", self.generator)


def generate_outage_series(model: OutageModel, horizon_hours: int, max_restarts: int = 200) -> np.ndarray:
    """Sample a 0/1 availability series with the model's forced-outage rate.

    ``round(rate * H / D)`` blocks of ``D`` hours are placed uniformly at
    random, never overlapping or touching each other or a planned outage.
    Starts range over the whole horizon, so the final block may be cut off.
    Planned outages are then written as zeros.
    """
    H, D = int(horizon_hours), int(model.outage_duration)
    if H < D:
        raise ScenarioError("horizon_too_short", f"{H} h horizon shorter than {D} h outage")
    series = np.ones(H)
    blocked = np.zeros(H + 2, dtype=bool)  # index i + 1 is hour i; padded both ends
    for start, end in model.planned_outages:
        lo, hi = max(0, int(start)), min(H - 1, int(end))
        if lo > hi:
            continue
        series[lo:hi + 1] = 0.0
        blocked[lo + 1:hi + 2] = True
    n_blocks = int(round(model.forced_outage_rate * H / D))
    if n_blocks == 0:
        return series

    free_hours = H - int(np.count_nonzero(series == 0))
    if n_blocks * D + (n_blocks - 1) > free_hours:
        raise ScenarioError("rate_unachievable", f"{model.generator}: {n_blocks} blocks of {D} h do not fit")

    seed = model.seed if model.seed is not None else derive_seed(0, model.generator)
    rng = SplitMix64(seed)
    for _ in range(max_restarts):
        occ = blocked.copy()
        starts = []
        for _b in range(n_blocks):
            for _try in range(4 * H):
                s = rng.randbelow(H)
                e = min(s + D, H)
                # occ is offset by one; a block [s, e) must not touch occupied hours
                if not occ[s:e + 2].any():
                    occ[s + 1:e + 1] = True
                    starts.append(s)
                    break
            else:
                break
        if len(starts) == n_blocks:
            for s in starts:
                series[s:min(s + D, H)] = 0.0
            return series
    raise ScenarioError("rate_unachievable", f"{model.generator}: could not place {n_blocks} outage blocks")


# ---------------------------------------------------------------------------
# Fuel prices
# ---------------------------------------------------------------------------

HENRY_HUB_EXISTING = 2.24
HENRY_HUB_FUTURE = 3.15
TRUCKING_ADDER = round(250.0 / 860.0, 2)  # $250 per truckload of 860 MMBtu


@dataclass
class FuelPriceRule:
    fuel: FuelId
    form: str = "constant"
    constant: float = 0.0
    slope: float = 0.0
    intercept: float = 0.0
    adder: float = 0.0


def fuel_price(rule: FuelPriceRule, index_price: float = 0.0) -> float:
    """Evaluate a price rule in $/MMBtu against a gas index price."""
    if rule.form == "constant":
        price = rule.constant + rule.adder
    elif rule.form == "affine_on_index":
        if index_price < 0:
            raise ValidationError("negative_index_price", str(index_price))
        price = rule.intercept + rule.slope * index_price + rule.adder
    else:
        raise ValidationError("unknown_price_form", rule.form)
    if price < 0:
        raise ValidationError("negative_price", f"{rule.fuel}: {price}")
    return price


def default_price_rules() -> list[FuelPriceRule]:
    """Location-specific fuel price rules for the Puerto Rico fleet."""

    def ng(loc, intercept, adder=0.0):
        return FuelPriceRule(FuelId("NG", loc), "affine_on_index", slope=1.15, intercept=intercept, adder=adder)

    def const(kind, loc, value):
        return FuelPriceRule(FuelId(kind, loc), "constant", constant=value)

    return [
        ng("San Juan", 6.5),
        ng("Palo Seco", 7.60),
        ng("Palo Seco trucked", 7.60, TRUCKING_ADDER),
        ng("EcoElectrica", 5.5),
        ng("Costa Sur", 5.5),
        ng("Energiza", 7.95),
        const("bunker", "San Juan", 12.67),
        const("bunker", "Palo Seco", 12.65),
        const("bunker", "Aguirre", 13.63),
        const("bunker", "Costa Sur", 12.98),
        const("diesel", "ALL", 17.0),
        const("NG", "generic", 11.90),
        const("bunker", "generic", 14.30),
        const("coal", "ALL", 7.49),
    ]


def apply_fuel_prices(system: PowerSystem, rules: Iterable[FuelPriceRule], index_price: float) -> PowerSystem:
    """Return a copy of ``system`` whose fuel prices follow ``rules``."""
    by_fuel = {r.fuel: r for r in rules}
    fuels = [
        dataclasses.replace(f, price=fuel_price(by_fuel[f.id], index_price)) if f.id in by_fuel else f
        for f in system.fuels
    ]
    return system.replace(fuels=fuels)


# ---------------------------------------------------------------------------
# Scenario days
# ---------------------------------------------------------------------------


@dataclass
class ScenarioDay:
    """Operating conditions for one scenario.

    ``fuel_supply`` is the MMBtu available over the scenario's whole horizon
    (one day, or the stitched run of days); ``None`` means unlimited.
    """

    id: str
    probability: float
    demand: dict[str, np.ndarray]
    availability: dict[str, np.ndarray]
    fuel_supply: dict[FuelId, float | None]
    reserve_req: np.ndarray
    date: dt.date | None = None

    def __post_init__(self):
        self.demand = {k: np.asarray(v, dtype=float) for k, v in self.demand.items()}
        self.availability = {k: np.asarray(v, dtype=float) for k, v in self.availability.items()}
        self.fuel_supply = {FuelId.parse(k): (None if v is None else float(v)) for k, v in self.fuel_supply.items()}
        self.reserve_req = np.asarray(self.reserve_req, dtype=float)

    @property
    def hours(self) -> int:
        return len(self.reserve_req)

    @property
    def n_days(self) -> int:
        return max(1, self.hours // HOURS_PER_DAY)

    def total_demand(self) -> np.ndarray:
        total = np.zeros(self.hours)
        for v in self.demand.values():
            total += v
        return total

    def validate(self) -> None:
        if not 0 < self.probability <= 1 + 1e-12:
            raise ValidationError("probability_range", self.id)
        for k, v in self.demand.items():
            if len(v) != self.hours or np.any(v < 0):
                raise ValidationError("bad_demand", f"{self.id}/{k}")
        for k, v in self.availability.items():
            if len(v) != self.hours or np.any(v < 0) or np.any(v > 1):
                raise ValidationError("bad_availability", f"{self.id}/{k}")


def check_scenario_set(days: Sequence[ScenarioDay]) -> None:
    if not days:
        raise ScenarioError("no_scenarios", "scenario set is empty")
    for d in days:
        d.validate()
    ids = [d.id for d in days]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate_scenario_id", ",".join(sorted(ids)))
    total = sum(d.probability for d in days)
    if abs(total - 1.0) > 1e-9:
        raise ValidationError("probability_sum", f"sum={total:.12g}")


def _distribute(system: PowerSystem, total: TimeSeries) -> dict[str, TimeSeries]:
    out = {}
    for b in system.buses:
        if b.in_service and b.load_fraction > 0:
            out[b.id] = TimeSeries(b.id, total.values * b.load_fraction, "MW", total.start)
    return out


def build_scenario_set(
    system: PowerSystem,
    loads: Mapping[str, TimeSeries] | TimeSeries,
    availabilities: Mapping[str, TimeSeries] | None = None,
    outage_models: Mapping[str, OutageModel] | Iterable[OutageModel] | None = None,
    fuel_scenario: Mapping | None = None,
    day_selection: Sequence[dt.date | int] | None = None,
    weights: Sequence[float] | None = None,
    master_seed: int = 0,
) -> list[ScenarioDay]:
    """Slice the input series into one :class:`ScenarioDay` per selected day.

    Args:
        loads: Per-bus MW series, or one system series split by load fraction.
        availabilities: Hourly factors keyed by generator id. Required for
            existing renewables; optional derates for thermal units.
        outage_models: Forced/planned outage models for existing thermal units.
        fuel_scenario: Total supply (MMBtu) over the series horizon per fuel;
            ``None`` entries mean unlimited. Missing fuels fall back to the
            system's per-day supply.
        day_selection: Dates (or day indices); all days when omitted.
        weights: Scenario probabilities; uniform when omitted.
        master_seed: Seeds outage models that carry no seed of their own.
    """
    availabilities = dict(availabilities or {})
    if isinstance(outage_models, Mapping):
        outages = dict(outage_models)
    else:
        outages = {m.generator: m for m in (outage_models or [])}
    if isinstance(loads, TimeSeries):
        loads = _distribute(system, loads)
    if not loads:
        raise ScenarioError("missing_series", "no load series")
    for s in (*loads.values(), *availabilities.values()):
        s.validate()
    ref = next(iter(loads.values()))
    horizon = len(ref)
    for s in (*loads.values(), *availabilities.values()):
        if len(s) != horizon:
            raise ScenarioError("series_length_mismatch", s.id)

    in_service = {b.id for b in system.buses if b.in_service}
    for bus in loads:
        if bus not in in_service:
            raise ScenarioError("load_at_unknown_bus", bus)

    if day_selection is None:
        day_selection = list(range(ref.n_days))
    if not day_selection:
        raise ScenarioError("no_scenarios", "empty day selection")
    n = len(day_selection)
    if weights is None:
        weights = [1.0 / n] * n
    if len(weights) != n or abs(sum(weights) - 1.0) > 1e-9 or min(weights) <= 0:
        raise ValidationError("bad_weights", "weights must be positive, one per day, summing to 1")

    # full-horizon thermal availability (outages are sampled over the horizon, not per day)
    thermal_avail: dict[str, np.ndarray] = {}
    for g in system.thermal_generators:
        if not g.existing:
            continue
        series = np.ones(horizon)
        if g.id in outages:
            m = outages[g.id]
            if m.seed is None:
                m = dataclasses.replace(m, seed=derive_seed(master_seed, g.id))
            series = generate_outage_series(m, horizon)
        if g.id in availabilities:
            series = series * availabilities[g.id].values
        thermal_avail[g.id] = series
    for gid in outages:
        if gid not in thermal_avail:
            log.warning("outage model for %s ignored: not an existing thermal unit", gid)

    renew_avail: dict[str, TimeSeries] = {}
    for g in system.renewable_generators:
        src = availabilities.get(g.id)
        if src is None and g.donor is not None:
            src = availabilities.get(g.donor)
        if src is None:
            raise ScenarioError("missing_series", f"no availability series for renewable {g.id}")
        renew_avail[g.id] = src

    horizon_days = ref.n_days
    supply: dict[FuelId, float | None] = {f.id: f.supply_per_day for f in system.fuels}
    for key, total in (fuel_scenario or {}).items():
        supply[FuelId.parse(key)] = None if total is None else float(total) / horizon_days
    reserve = np.asarray(system.config.reserve_series(HOURS_PER_DAY), dtype=float)
    derate = system.config.candidate_derate

    days = []
    for day, w in zip(day_selection, weights):
        idx = ref.day_index(day)
        sl = slice(idx * HOURS_PER_DAY, (idx + 1) * HOURS_PER_DAY)
        date = ref.start + dt.timedelta(days=idx) if ref.start is not None else None
        avail = {gid: s[sl].copy() for gid, s in thermal_avail.items()}
        for g in system.candidate_thermal:
            avail[g.id] = np.full(HOURS_PER_DAY, derate)
        for gid, s in renew_avail.items():
            avail[gid] = s.day(idx)
        days.append(ScenarioDay(
            id=date.isoformat() if date is not None else f"d{idx:03d}",
            probability=float(w),
            demand={b: s.day(idx) for b, s in loads.items()},
            availability=avail,
            fuel_supply=dict(supply),
            reserve_req=reserve.copy(),
            date=date,
        ))
    check_scenario_set(days)
    return days


def stitch_days(days: Sequence[ScenarioDay], scenario_id: str = "stitched") -> ScenarioDay:
    """Concatenate consecutive days into one multi-day scenario with pooled fuel supply."""
    if not days:
        raise ScenarioError("no_scenarios", "nothing to stitch")
    keys_d = sorted(set().union(*(d.demand for d in days)))
    keys_a = sorted(set().union(*(d.availability for d in days)))

    def cat(getter, key):
        return np.concatenate([getter(d).get(key, np.zeros(d.hours)) for d in days])

    supply: dict[FuelId, float | None] = {}
    for fid in sorted(set().union(*(d.fuel_supply for d in days))):
        vals = [d.fuel_supply.get(fid) for d in days]
        supply[fid] = None if any(v is None for v in vals) else float(sum(vals))
    return ScenarioDay(
        id=scenario_id,
        probability=1.0,
        demand={k: cat(lambda d: d.demand, k) for k in keys_d},
        availability={k: cat(lambda d: d.availability, k) for k in keys_a},
        fuel_supply=supply,
        reserve_req=np.concatenate([d.reserve_req for d in days]),
        date=days[0].date,
    )


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------


def read_series_csv(path: str | Path, unit: str = "MW") -> dict[str, TimeSeries]:
    """Read ``timestamp,<col>,<col>...`` hourly CSV into one series per column.

    The first column holds ISO timestamps (or plain hour numbers, in which
    case the series carry no start date).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ScenarioError("missing_series", f"{path} is empty")
    header, body = rows[0], rows[1:]
    start = None
    try:
        start = dt.datetime.fromisoformat(body[0][0]).date()
    except (ValueError, IndexError):
        pass
    data = np.array([[float(x) for x in r[1:]] for r in body], dtype=float).reshape(len(body), len(header) - 1)
    return {col: TimeSeries(col, data[:, j], unit, start) for j, col in enumerate(header[1:])}


def read_outages_json(path: str | Path) -> dict[str, OutageModel]:
    raw = json.loads(Path(path).read_text())
    items = raw.get("outages", raw) if isinstance(raw, dict) else raw
    out = {}
    for d in items:
        d = dict(d)
        d["planned_outages"] = [tuple(p) for p in d.get("planned_outages", [])]
        out[d["generator"]] = OutageModel(**d)
    return out


@dataclass
class FuelScenario:
    """One named fuel scenario: total supplies over the horizon and price rules."""

    name: str
    supply: dict[FuelId, float | None]
    index_price: float = HENRY_HUB_EXISTING
    price_rules: list[FuelPriceRule] = field(default_factory=list)


def read_fuel_scenario_json(path: str | Path, name: str | None = None) -> FuelScenario:
    raw = json.loads(Path(path).read_text())
    scenarios = raw.get("scenarios", raw)
    if name is None:
        name = "existing" if "existing" in scenarios else sorted(scenarios)[0]
    if name not in scenarios:
        raise ScenarioError("unknown_fuel_scenario", name)
    d = scenarios[name]
    rules = [
        FuelPriceRule(**{**r, "fuel": FuelId.parse(r["fuel"])}) for r in d.get("prices", [])
    ]
    supply = {FuelId.parse(k): v for k, v in d.get("supply", {}).items()}
    return FuelScenario(name, supply, float(d.get("index_price", HENRY_HUB_EXISTING)), rules)


def scenarios_to_json(days: Sequence[ScenarioDay]) -> list[dict]:
    return [
        {
            "id": d.id,
            "date": d.date.isoformat() if d.date else None,
            "probability": d.probability,
            "demand": {k: v.tolist() for k, v in sorted(d.demand.items())},
            "availability": {k: v.tolist() for k, v in sorted(d.availability.items())},
            "fuel_supply": {k.key: v for k, v in sorted(d.fuel_supply.items())},
            "reserve_req": d.reserve_req.tolist(),
        }
        for d in days
    ]


def scenarios_from_json(items: list[dict]) -> list[ScenarioDay]:
    days = []
    for d in items:
        date = d.get("date")
        days.append(ScenarioDay(
            id=d["id"],
            probability=float(d["probability"]),
            demand=d["demand"],
            availability=d.get("availability", {}),
            fuel_supply=d.get("fuel_supply", {}),
            reserve_req=d["reserve_req"],
            date=dt.date.fromisoformat(date) if date else None,
        ))
    check_scenario_set(days)
    return days


def write_scenarios_json(days: Sequence[ScenarioDay], path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenarios_to_json(days), indent=1))


def read_scenarios_json(path: str | Path) -> list[ScenarioDay]:
    return scenarios_from_json(json.loads(Path(path).read_text()))


def scale_scenarios(days: Sequence[ScenarioDay], factor: float) -> list[ScenarioDay]:
    """Scale every scenario's demand by ``factor``."""
    if not factor > 0:
        raise ValidationError("bad_factor", str(factor))
    return [dataclasses.replace(d, demand={k: v * factor for k, v in d.demand.items()}) for d in days]

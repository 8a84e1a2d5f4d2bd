"""Power-system data model: buses, lines, fuels, generators, storage, limits.

All quantities are plain floats in MW, MWh, hours, $ and MMBtu. Unlimited
capacities or supplies are ``None``. Objects are treated as immutable once a
:class:`PowerSystem` has been built; helpers return modified copies.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ValidationError

FUEL_KINDS = ("NG", "bunker", "diesel", "coal", "other")
RENEWABLE_TECHS = ("solar", "wind", "hydro", "other")
NETWORK_MODES = ("copperplate", "pipe_and_bubble")
ALL = "ALL"


@dataclass(frozen=True, order=True)
class FuelId:
    """A fuel kind at a location, e.g. ``FuelId("NG", "San Juan")``."""

    kind: str
    location: str

    @property
    def key(self) -> str:
        return f"{self.kind}@{self.location}"

    @classmethod
    def parse(cls, text: "str | FuelId") -> "FuelId":
        if isinstance(text, FuelId):
            return text
        kind, _, loc = str(text).partition("@")
        return cls(kind, loc)

    def __str__(self):
        return self.key


@dataclass
class Bus:
    id: str
    load_fraction: float = 0.0
    in_service: bool = True


@dataclass
class Line:
    id: str
    from_bus: str
    to_bus: str
    thermal_limit: float
    in_service: bool = True


@dataclass
class FuelSpec:
    id: FuelId
    price: float
    supply_per_day: float | None = None


@dataclass
class StartupCategory:
    """Start-up cost tier used once the unit has been offline ``min_hours_offline``."""

    min_hours_offline: float
    cost: float


@dataclass
class HeatRateCurve:
    """Convex piecewise-linear fuel input (MMBtu/h) against output (MW)."""

    breakpoints: list[tuple[float, float]]

    @classmethod
    def from_average(cls, heat_rate: float, min_power: float, max_power: float) -> "HeatRateCurve":
        """Two-point curve through ``(Pmin, HR*Pmin)`` and ``(Pmax, HR*Pmax)``."""
        return cls([(float(min_power), heat_rate * min_power), (float(max_power), heat_rate * max_power)])

    @property
    def max_fuel_rate(self) -> float:
        return max(f for _, f in self.breakpoints)

    def segments(self) -> list[tuple[float, float]]:
        """``(slope, intercept)`` of each segment, so ``f >= slope*p + intercept*u``."""
        bps = self.breakpoints
        if len(bps) == 1:
            return [(0.0, bps[0][1])]
        out = []
        for (p0, f0), (p1, f1) in zip(bps, bps[1:]):
            slope = (f1 - f0) / (p1 - p0)
            out.append((slope, f0 - slope * p0))
        return out

    def evaluate(self, p: float) -> float:
        return max(a * p + b for a, b in self.segments())


@dataclass
class ThermalGenerator:
    """Existing or candidate thermal unit.

    ``capacity`` is the nameplate for existing units and the unit size for
    candidates. Ramp and start-up/shut-down limits default to the capacity
    (non-binding) when omitted.
    """

    id: str
    bus: str
    capacity: float
    min_power: float
    heat_rate: HeatRateCurve
    primary_fuel: FuelId
    existing: bool = True
    min_up: int = 1
    min_down: int = 1
    ramp_up: float | None = None
    ramp_down: float | None = None
    startup_limit: float | None = None
    shutdown_limit: float | None = None
    startup_categories: list[StartupCategory] = field(default_factory=list)
    secondary_fuel: FuelId | None = None
    vom: float = 0.0
    fom: float = 0.0
    capex_annualized: float = 0.0
    retirable: bool = False
    retirement_cost: float | None = None
    min_utilization: float | None = None
    initial_status_hours: float | None = None
    tech_class: str = "thermal"
    earliest_year: int | None = None

    @property
    def RU(self) -> float:
        return self.capacity if self.ramp_up is None else self.ramp_up

    @property
    def RD(self) -> float:
        return self.capacity if self.ramp_down is None else self.ramp_down

    @property
    def SU(self) -> float:
        return self.capacity if self.startup_limit is None else self.startup_limit

    @property
    def SD(self) -> float:
        return self.capacity if self.shutdown_limit is None else self.shutdown_limit

    @property
    def kappa(self) -> float:
        """Minimum utilization factor; 0.5 for units of 150 MW or more, else 0.05."""
        if self.min_utilization is not None:
            return self.min_utilization
        return 0.5 if self.capacity >= 150.0 else 0.05

    @property
    def retirement_cost_value(self) -> float:
        """Annual retirement cost; defaults to 10% of the unit's annual FOM."""
        if self.retirement_cost is not None:
            return self.retirement_cost
        return 0.10 * self.fom * self.capacity

    @property
    def initial_status(self) -> float:
        """Signed hours on (+) or off (-) before the horizon.

        Defaults to off for the longest start-up lookback, so the first start
        is priced at the coldest category.
        """
        if self.initial_status_hours is not None:
            return self.initial_status_hours
        longest = max((c.min_hours_offline for c in self.startup_categories), default=1.0)
        return -max(1.0, float(math.ceil(longest)))

    @property
    def is_dual_fuel(self) -> bool:
        return self.secondary_fuel is not None


@dataclass
class RenewableGenerator:
    """Variable renewable plant; candidates may borrow an existing plant's profile via ``donor``."""

    id: str
    bus: str
    capacity: float
    existing: bool = True
    tech: str = "solar"
    vom: float = 0.0
    fom: float = 0.0
    capex_annualized: float = 0.0
    tech_class: str | None = None
    donor: str | None = None
    max_units: float | None = None
    earliest_year: int | None = None

    @property
    def klass(self) -> str:
        return self.tech_class or self.tech


@dataclass
class StorageUnit:
    id: str
    bus: str
    capacity: float
    duration: float
    existing: bool = True
    eff_charge: float = 1.0
    eff_discharge: float = 1.0
    vom: float = 0.0
    discharge_cost: float = 0.0
    fom: float = 0.0
    capex_annualized: float = 0.0
    tech_class: str = "bess"
    max_units: float | None = None
    earliest_year: int | None = None


@dataclass
class SiteLimit:
    """Cap on installed MW of ``tech_class`` (or ``ALL``) of one ``kind`` at a bus."""

    bus: str
    tech_class: str
    max_capacity: float | None
    kind: str = "generator"


@dataclass
class PlannerConfig:
    voll: float = 30_000.0
    reserve_penalty: float = 2_000.0
    util_penalty: float = 2_000.0
    reserve_margin: float | list[float] = 900.0
    period_hours: float = 1.0
    periods_per_year: float = 365.0
    network_mode: str = "copperplate"
    candidate_derate: float = 0.85
    utilization_enabled: bool = True
    relax_ux: bool = False
    default_max_units: float = 10.0
    ef_variable_cap: int = 5_000_000
    ph: dict = field(default_factory=dict)

    def reserve_series(self, hours: int) -> list[float]:
        rm = self.reserve_margin
        if isinstance(rm, (int, float)):
            return [float(rm)] * hours
        rm = [float(x) for x in rm]
        if len(rm) == hours:
            return rm
        if hours % len(rm) == 0:
            return rm * (hours // len(rm))
        raise ValueError(f"reserve margin series of length {len(rm)} does not tile {hours} hours")


Candidate = ThermalGenerator | RenewableGenerator | StorageUnit


@dataclass
class PowerSystem:
    buses: list[Bus]
    lines: list[Line] = field(default_factory=list)
    thermal_generators: list[ThermalGenerator] = field(default_factory=list)
    renewable_generators: list[RenewableGenerator] = field(default_factory=list)
    storage_units: list[StorageUnit] = field(default_factory=list)
    fuels: list[FuelSpec] = field(default_factory=list)
    site_limits: list[SiteLimit] = field(default_factory=list)
    config: PlannerConfig = field(default_factory=PlannerConfig)
    catalog: dict[str, Candidate] = field(default_factory=dict)

    # convenience views -----------------------------------------------------
    def bus(self, bus_id: str) -> Bus:
        return next(b for b in self.buses if b.id == bus_id)

    def fuel(self, fuel_id) -> FuelSpec:
        fid = FuelId.parse(fuel_id)
        for f in self.fuels:
            if f.id == fid:
                return f
        raise KeyError(fid.key)

    @property
    def generators(self) -> list:
        return [*self.thermal_generators, *self.renewable_generators]

    def element(self, elem_id: str):
        for e in (*self.thermal_generators, *self.renewable_generators, *self.storage_units):
            if e.id == elem_id:
                return e
        raise KeyError(elem_id)

    @property
    def candidate_thermal(self) -> list[ThermalGenerator]:
        return [g for g in self.thermal_generators if not g.existing]

    @property
    def candidate_renewable(self) -> list[RenewableGenerator]:
        return [g for g in self.renewable_generators if not g.existing]

    @property
    def candidate_storage(self) -> list[StorageUnit]:
        return [s for s in self.storage_units if not s.existing]

    @property
    def retirable(self) -> list[ThermalGenerator]:
        return [g for g in self.thermal_generators if g.existing and g.retirable]

    def max_units(self, cand) -> float:
        """Upper bound on a continuous build variable (units of ``capacity``)."""
        if isinstance(cand, ThermalGenerator):
            return 1.0
        bound = cand.max_units if cand.max_units is not None else math.inf
        kind = "storage" if isinstance(cand, StorageUnit) else "generator"
        klass = cand.tech_class if isinstance(cand, StorageUnit) else cand.klass
        for lim in self.site_limits:
            if lim.max_capacity is None or lim.bus != cand.bus or lim.kind != kind:
                continue
            if lim.tech_class not in (ALL, klass):
                continue
            existing = existing_capacity(self, lim)
            bound = min(bound, max(0.0, lim.max_capacity - existing) / cand.capacity)
        if math.isinf(bound):
            bound = self.config.default_max_units
        return bound

    def replace(self, **changes) -> "PowerSystem":
        return dataclasses.replace(self, **changes)


def element_class(elem) -> str:
    if isinstance(elem, RenewableGenerator):
        return elem.klass
    return elem.tech_class


def limit_members(system: PowerSystem, lim: SiteLimit):
    """Existing and candidate elements counted by a site limit."""
    pool = system.storage_units if lim.kind == "storage" else system.generators
    return [e for e in pool if e.bus == lim.bus and lim.tech_class in (ALL, element_class(e))]


def existing_capacity(system: PowerSystem, lim: SiteLimit) -> float:
    return sum(e.capacity for e in limit_members(system, lim) if e.existing)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, order=True)
class Violation:
    element_id: str
    rule: str
    message: str = ""

    def __str__(self):
        return f"{self.element_id}: {self.rule}" + (f" ({self.message})" if self.message else "")


def validate_system(system: PowerSystem) -> list[Violation]:
    """Check every documented invariant; return violations sorted by (id, rule)."""
    out: list[Violation] = []

    def bad(eid, rule, msg=""):
        out.append(Violation(str(eid), rule, msg))

    # ids
    seen: dict[str, int] = {}
    for e in (*system.buses,):
        seen[e.id] = seen.get(e.id, 0) + 1
    for eid, n in seen.items():
        if n > 1:
            bad(eid, "duplicate_id", "bus")
    seen = {}
    for e in (*system.lines, *system.thermal_generators, *system.renewable_generators, *system.storage_units):
        seen[e.id] = seen.get(e.id, 0) + 1
    for eid, n in seen.items():
        if n > 1:
            bad(eid, "duplicate_id")

    bus_ids = {b.id for b in system.buses}
    in_service = {b.id for b in system.buses if b.in_service}
    total = 0.0
    for b in system.buses:
        if b.load_fraction < 0:
            bad(b.id, "load_fraction_negative")
        if b.in_service:
            total += b.load_fraction
        elif b.load_fraction > 0:
            bad(b.id, "load_on_out_of_service_bus")
    if abs(total - 1.0) > 1e-9:
        bad("buses", "load_fraction_sum", f"sum={total:.12g}")

    for ln in system.lines:
        if ln.from_bus == ln.to_bus:
            bad(ln.id, "line_same_bus")
        if not ln.thermal_limit > 0:
            bad(ln.id, "line_limit_nonpositive")
        for b in (ln.from_bus, ln.to_bus):
            if b not in bus_ids:
                bad(ln.id, "unknown_bus", b)
            elif ln.in_service and b not in in_service:
                bad(ln.id, "line_out_of_service_bus", b)

    fuel_ids = [f.id for f in system.fuels]
    for fid in set(fuel_ids):
        if fuel_ids.count(fid) > 1:
            bad(fid.key, "duplicate_fuel")
    for f in system.fuels:
        if f.id.kind not in FUEL_KINDS:
            bad(f.id.key, "unknown_fuel_kind")
        if f.price < 0:
            bad(f.id.key, "fuel_price_negative")
        if f.supply_per_day is not None and f.supply_per_day < 0:
            bad(f.id.key, "fuel_supply_negative")
    known_fuels = set(fuel_ids)

    for g in system.thermal_generators:
        _validate_thermal(g, bad, known_fuels)
    for g in system.renewable_generators:
        if not g.capacity > 0:
            bad(g.id, "capacity_nonpositive")
        if g.tech not in RENEWABLE_TECHS:
            bad(g.id, "unknown_tech")
    for s in system.storage_units:
        if not s.capacity > 0:
            bad(s.id, "capacity_nonpositive")
        if not s.duration > 0:
            bad(s.id, "storage_duration_nonpositive")
        if not (0 < s.eff_charge <= 1 and 0 < s.eff_discharge <= 1):
            bad(s.id, "storage_efficiency_range")
    for e in (*system.thermal_generators, *system.renewable_generators, *system.storage_units):
        if e.bus not in bus_ids:
            bad(e.id, "unknown_bus", e.bus)
        elif e.bus not in in_service:
            bad(e.id, "element_at_out_of_service_bus", e.bus)
    for g in system.renewable_generators:
        if g.donor is not None and not any(r.id == g.donor for r in system.renewable_generators):
            bad(g.id, "unknown_donor", g.donor)

    for lim in system.site_limits:
        tag = f"limit:{lim.bus}:{lim.kind}:{lim.tech_class}"
        if lim.bus not in bus_ids:
            bad(tag, "unknown_bus", lim.bus)
        if lim.max_capacity is not None and existing_capacity(system, lim) > lim.max_capacity + 1e-9:
            bad(tag, "site_limit_below_existing")

    cfg = system.config
    for name in ("voll", "reserve_penalty", "util_penalty"):
        if getattr(cfg, name) < 0:
            bad("config", f"{name}_negative")
    if not cfg.period_hours > 0:
        bad("config", "period_hours_nonpositive")
    if not cfg.periods_per_year > 0:
        bad("config", "periods_per_year_nonpositive")
    if cfg.network_mode not in NETWORK_MODES:
        bad("config", "unknown_network_mode", cfg.network_mode)
    if not 0 <= cfg.candidate_derate <= 1:
        bad("config", "candidate_derate_range")
    return sorted(set(out))


def _validate_thermal(g: ThermalGenerator, bad, known_fuels):
    if not g.capacity > 0:
        bad(g.id, "capacity_nonpositive")
    if not 0 <= g.min_power <= g.capacity:
        bad(g.id, "min_power_range")
    if g.SU < g.min_power:
        bad(g.id, "startup_below_min_power")
    if g.SD < g.min_power:
        bad(g.id, "shutdown_below_min_power")
    if g.min_up < 1:
        bad(g.id, "min_up_below_one")
    if g.min_down < 1:
        bad(g.id, "min_down_below_one")
    if g.RU < 0 or g.RD < 0:
        bad(g.id, "ramp_negative")
    if g.retirable and not g.existing:
        bad(g.id, "retirable_not_existing")
    if g.secondary_fuel is not None and g.secondary_fuel == g.primary_fuel:
        bad(g.id, "secondary_equals_primary")
    for f in (g.primary_fuel, g.secondary_fuel):
        if f is not None and f not in known_fuels:
            bad(g.id, "unknown_fuel", f.key)
    if not 0 <= g.kappa <= 1:
        bad(g.id, "min_utilization_range")
    cats = g.startup_categories
    for a, b in zip(cats, cats[1:]):
        if not b.min_hours_offline > a.min_hours_offline:
            bad(g.id, "startup_categories_order")
        if b.cost < a.cost:
            bad(g.id, "startup_cost_decreasing")
    for c in cats:
        if c.min_hours_offline < 0 or c.cost < 0:
            bad(g.id, "startup_category_negative")
    bps = g.heat_rate.breakpoints
    if not bps:
        bad(g.id, "heat_rate_empty")
        return
    if any(f < 0 for _, f in bps):
        bad(g.id, "heat_rate_negative")
    if any(p1 <= p0 for (p0, _), (p1, _) in zip(bps, bps[1:])):
        bad(g.id, "heat_rate_not_increasing")
        return
    if abs(bps[0][0] - g.min_power) > 1e-6 or abs(bps[-1][0] - g.capacity) > 1e-6:
        bad(g.id, "heat_rate_domain")
    slopes = [a for a, _ in g.heat_rate.segments()]
    if any(s1 < s0 - 1e-9 for s0, s1 in zip(slopes, slopes[1:])):
        bad(g.id, "heat_rate_not_convex")


def check_system(system: PowerSystem) -> PowerSystem:
    """Raise :class:`ValidationError` listing all violations, else return ``system``."""
    v = validate_system(system)
    if v:
        raise ValidationError("invalid_system", "; ".join(map(str, v)), v)
    return system


# ---------------------------------------------------------------------------
# Candidate catalog
# ---------------------------------------------------------------------------

# (class, kind, unit MW, annualized capex $/MW-y, FOM $/MW-y, VOM $/MWh, lifetime y, earliest year)
TECHNOLOGY_COSTS = {
    "cc_h": ("thermal", 522.2, 59107.38, 15397.35, 2.00, 40, 2031),
    "cc_f": ("thermal", 348.7, 67215.43, 19219.32, 2.25, 40, 2031),
    "sc_f": ("thermal", 212.9, 53535.52, 14232.85, 6.46, 40, None),
    "aero_large": ("thermal", 103.9, 81282.88, 38418.73, 3.74, 40, 2027),
    "aero_small": ("thermal", 93.9, 91892.67, 42877.69, 3.17, 40, 2027),
    "rice_large": ("thermal", 111.5, 100970.29, 37632.44, 3.63, 30, 2027),
    "rice_small": ("thermal", 111.0, 98857.86, 37393.57, 3.58, 30, 2027),
    "wind": ("renewable", 200.0, 92400.88, 35719.80, 0.00, 25, 2030),
    "solar": ("renewable", 100.0, 70590.04, 24784.05, 0.00, 35, 2027),
    "bess": ("storage", 150.0, 122022.17, 41637.20, 0.00, 20, 2027),
}

# Generic operating characteristics for new thermal units: (Pmin fraction,
# ramp fraction per hour, min up, min down, heat rate MMBtu/MWh, start cost $/MW).
_THERMAL_OPERATING = {
    "cc_h": (0.40, 0.50, 4, 4, 6.4, 60.0),
    "cc_f": (0.40, 0.50, 4, 4, 6.7, 60.0),
    "sc_f": (0.30, 1.00, 1, 1, 9.9, 40.0),
    "aero_large": (0.25, 1.00, 1, 1, 9.4, 20.0),
    "aero_small": (0.25, 1.00, 1, 1, 9.8, 20.0),
    "rice_large": (0.20, 1.00, 1, 1, 8.5, 10.0),
    "rice_small": (0.20, 1.00, 1, 1, 8.6, 10.0),
}

STORAGE_DURATION_H = {"bess": 4.0}


def default_catalog(fuel: FuelId | str = "NG@new") -> dict[str, Candidate]:
    """Candidate templates with 2024-USD cost assumptions for new units.

    Costs come from :data:`TECHNOLOGY_COSTS`; thermal operating parameters are
    generic values from :data:`_THERMAL_OPERATING` and should be replaced with
    case data where available.
    """
    fuel = FuelId.parse(fuel)
    out: dict[str, Candidate] = {}
    for cls, (kind, mw, capex, fom, vom, _life, year) in TECHNOLOGY_COSTS.items():
        if kind == "thermal":
            pmin_f, ramp_f, ut, dt, hr, su = _THERMAL_OPERATING[cls]
            pmin = round(pmin_f * mw, 6)
            out[cls] = ThermalGenerator(
                id=cls, bus="", capacity=mw, min_power=pmin, existing=False,
                heat_rate=HeatRateCurve.from_average(hr, pmin, mw), primary_fuel=fuel,
                min_up=ut, min_down=dt, ramp_up=ramp_f * mw, ramp_down=ramp_f * mw,
                startup_limit=max(pmin, ramp_f * mw), shutdown_limit=max(pmin, ramp_f * mw),
                startup_categories=[StartupCategory(1, su * mw)],
                vom=vom, fom=fom, capex_annualized=capex, tech_class=cls, earliest_year=year,
            )
        elif kind == "renewable":
            out[cls] = RenewableGenerator(
                id=cls, bus="", capacity=mw, existing=False, tech=cls, vom=vom, fom=fom,
                capex_annualized=capex, tech_class=cls, earliest_year=year,
            )
        else:
            out[cls] = StorageUnit(
                id=cls, bus="", capacity=mw, duration=STORAGE_DURATION_H[cls], existing=False,
                eff_charge=0.92, eff_discharge=0.92, vom=vom, fom=fom, capex_annualized=capex,
                tech_class=cls, earliest_year=year,
            )
    return out


def _limit_for(system: PowerSystem, bus: str, klass: str, kind: str) -> list[SiteLimit]:
    return [
        lim for lim in system.site_limits
        if lim.bus == bus and lim.kind == kind and lim.tech_class in (ALL, klass)
    ]


def expand_candidate_catalog(system: PowerSystem, counts: Mapping[str, Mapping[str, float]] | None = None) -> PowerSystem:
    """Instantiate candidate units from ``system.catalog``.

    ``counts[tech_class][bus]`` is the number of thermal copies to create at
    that bus, each with its own binary build decision. For renewable and
    storage classes a positive count creates one continuous candidate whose
    build is capped at that many units. Independently of ``counts``, one
    renewable/storage candidate is created for every (bus, class) pair with
    an explicit site limit that leaves room to build.

    Existing elements are never modified; the input system is not mutated.
    """
    counts = counts or {}
    thermal = list(system.thermal_generators)
    renew = list(system.renewable_generators)
    storage = list(system.storage_units)
    bus_ids = {b.id for b in system.buses}
    taken = {e.id for e in (*thermal, *renew, *storage)}

    for klass, per_bus in sorted(counts.items()):
        if klass not in system.catalog:
            raise ValidationError("unknown_tech_class", klass)
        tpl = system.catalog[klass]
        kind = "storage" if isinstance(tpl, StorageUnit) else "generator"
        for bus, n in sorted(per_bus.items()):
            if n < 0:
                raise ValidationError("negative_count", f"{klass}@{bus}")
            if bus not in bus_ids:
                raise ValidationError("unknown_bus", bus)
            if n == 0:
                continue
            lims = _limit_for(system, bus, element_class(tpl), kind)
            if any(lim.max_capacity == 0 for lim in lims):
                raise ValidationError("bus_not_eligible", f"{klass} at {bus}")
            if isinstance(tpl, ThermalGenerator):
                for k in range(int(n)):
                    cid = f"{klass}_{bus}_{k}"
                    thermal.append(dataclasses.replace(tpl, id=cid, bus=bus, existing=False, retirable=False))
            else:
                cid = f"{klass}_{bus}"
                if cid in taken:
                    continue
                taken.add(cid)
                cand = dataclasses.replace(tpl, id=cid, bus=bus, existing=False, max_units=float(n))
                (storage if isinstance(tpl, StorageUnit) else renew).append(cand)

    for klass, tpl in sorted(system.catalog.items()):
        if isinstance(tpl, ThermalGenerator):
            continue
        kind = "storage" if isinstance(tpl, StorageUnit) else "generator"
        for lim in system.site_limits:
            if lim.kind != kind or lim.tech_class != element_class(tpl):
                continue
            if lim.max_capacity is not None and lim.max_capacity <= existing_capacity(system, lim):
                continue
            cid = f"{klass}_{lim.bus}"
            if cid in taken:
                continue
            taken.add(cid)
            cand = dataclasses.replace(tpl, id=cid, bus=lim.bus, existing=False)
            (storage if isinstance(tpl, StorageUnit) else renew).append(cand)

    for i, g in enumerate(renew):
        if not g.existing and g.donor is None:
            donor = next(
                (r.id for r in renew if r.existing and r.bus == g.bus and r.tech == g.tech), None
            )
            if donor is not None:
                renew[i] = dataclasses.replace(g, donor=donor)
    return system.replace(thermal_generators=thermal, renewable_generators=renew, storage_units=storage)


def filter_candidates(system: PowerSystem, *, renewables_only: bool = False, year: int | None = None) -> PowerSystem:
    """Drop candidates by technology or lead time (``earliest_year > year``)."""

    def keep(e) -> bool:
        if e.existing:
            return True
        if renewables_only and isinstance(e, ThermalGenerator):
            return False
        if year is not None and e.earliest_year is not None and e.earliest_year > year:
            return False
        return True

    return system.replace(
        thermal_generators=[g for g in system.thermal_generators if keep(g)],
        renewable_generators=[g for g in system.renewable_generators if keep(g)],
        storage_units=[s for s in system.storage_units if keep(s)],
        catalog={k: v for k, v in system.catalog.items() if keep(v)},
    )


def without_expansion(system: PowerSystem) -> PowerSystem:
    """Existing fleet only, no retirement options."""
    return system.replace(
        thermal_generators=[dataclasses.replace(g, retirable=False) for g in system.thermal_generators if g.existing],
        renewable_generators=[g for g in system.renewable_generators if g.existing],
        storage_units=[s for s in system.storage_units if s.existing],
    )


# ---------------------------------------------------------------------------
# JSON round trip (``system.json`` / ``limits.json``)
# ---------------------------------------------------------------------------


def _heat_rate_from(d, min_power, capacity) -> HeatRateCurve:
    if isinstance(d, (int, float)):
        return HeatRateCurve.from_average(float(d), min_power, capacity)
    if "average" in d:
        return HeatRateCurve.from_average(float(d["average"]), min_power, capacity)
    return HeatRateCurve([tuple(map(float, bp)) for bp in d["breakpoints"]])


def thermal_from_dict(d: dict) -> ThermalGenerator:
    d = dict(d)
    d["heat_rate"] = _heat_rate_from(d["heat_rate"], d["min_power"], d["capacity"])
    d["primary_fuel"] = FuelId.parse(d["primary_fuel"])
    if d.get("secondary_fuel") is not None:
        d["secondary_fuel"] = FuelId.parse(d["secondary_fuel"])
    d["startup_categories"] = [StartupCategory(**c) for c in d.get("startup_categories", [])]
    return ThermalGenerator(**d)


def _element_from(kind: str, d: dict):
    if kind == "thermal":
        return thermal_from_dict(d)
    if kind == "renewable":
        return RenewableGenerator(**d)
    return StorageUnit(**d)


def system_from_dict(data: dict, limits: Iterable[dict] | None = None) -> PowerSystem:
    cfg = PlannerConfig(**data.get("config", {}))
    fuels = [
        FuelSpec(FuelId.parse(f["id"]), float(f["price"]), f.get("supply_per_day"))
        for f in data.get("fuels", [])
    ]
    site = [SiteLimit(**s) for s in data.get("site_limits", [])]
    site += [SiteLimit(**s) for s in (limits or [])]
    catalog = {}
    for klass, entry in data.get("catalog", {}).items():
        entry = dict(entry)
        kind = entry.pop("kind")
        entry.setdefault("id", klass)
        entry.setdefault("bus", "")
        entry["existing"] = False
        catalog[klass] = _element_from(kind, entry)
    return PowerSystem(
        buses=[Bus(**b) for b in data["buses"]],
        lines=[Line(**ln) for ln in data.get("lines", [])],
        thermal_generators=[thermal_from_dict(g) for g in data.get("thermal_generators", [])],
        renewable_generators=[RenewableGenerator(**g) for g in data.get("renewable_generators", [])],
        storage_units=[StorageUnit(**s) for s in data.get("storage_units", [])],
        fuels=fuels,
        site_limits=site,
        config=cfg,
        catalog=catalog,
    )


def _plain(obj):
    if isinstance(obj, FuelId):
        return obj.key
    if isinstance(obj, HeatRateCurve):
        return {"breakpoints": [list(bp) for bp in obj.breakpoints]}
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    return obj


def system_to_dict(system: PowerSystem) -> dict:
    catalog = {}
    for klass, tpl in system.catalog.items():
        entry = _plain(tpl)
        entry["kind"] = (
            "thermal" if isinstance(tpl, ThermalGenerator)
            else "storage" if isinstance(tpl, StorageUnit) else "renewable"
        )
        catalog[klass] = entry
    return {
        "buses": _plain(system.buses),
        "lines": _plain(system.lines),
        "thermal_generators": _plain(system.thermal_generators),
        "renewable_generators": _plain(system.renewable_generators),
        "storage_units": _plain(system.storage_units),
        "fuels": [{"id": f.id.key, "price": f.price, "supply_per_day": f.supply_per_day} for f in system.fuels],
        "site_limits": _plain(system.site_limits),
        "config": _plain(system.config),
        "catalog": catalog,
    }


def load_system(path: str | Path, limits_path: str | Path | None = None) -> PowerSystem:
    path = Path(path)
    data = json.loads(path.read_text())
    limits = None
    if limits_path is not None and Path(limits_path).exists():
        limits = json.loads(Path(limits_path).read_text())
        if isinstance(limits, dict):
            limits = limits.get("site_limits", [])
    return system_from_dict(data, limits)


def save_system(system: PowerSystem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(system_to_dict(system), indent=2, sort_keys=True))

"""Exogenous data around an instance: tariffs, rooftop solar, fares, fleet.

Prices and solar are piecewise-constant day profiles on [0, 86400) seconds.
Transition-level quantities (average price of an idle window, solar energy
captured en route) integrate those step functions over the window between
finishing one request and starting the next. Scenario sampling draws request
subsets with a seeded PCG64 generator so every batch is reproducible.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InputError
from .instance import DAY_S, TravelRequest

__all__ = ["FleetSpec", "FareModel", "PriceSeries", "SolarProfile", "Scenario",
           "average_price", "solar_energy", "fare_for", "consumption_for_battery",
           "charge_power_for_battery", "default_duck_prices", "default_solar",
           "load_prices", "load_solar", "sample_scenarios",
           "DEFAULT_CHARGE_POWER_BY_BATTERY"]


@dataclass(frozen=True)
class FleetSpec:
    """Vehicle fleet parameters shared by all vehicles of a scenario."""

    n_vehicles: int
    battery_kwh: float = 60.0          # usable pack size
    initial_soc_kwh: float = 30.0      # start-of-day and end-of-day energy
    consumption_kwh_per_km: float = 0.12
    charge_power_kw: float = 22.0
    solar_enabled: bool = True

    def __post_init__(self):
        if self.n_vehicles < 1:
            raise InputError(f"fleet needs >= 1 vehicle, got {self.n_vehicles}")
        if self.battery_kwh <= 0 or not (0 <= self.initial_soc_kwh <= self.battery_kwh):
            raise InputError(
                f"initial soc {self.initial_soc_kwh} must sit inside "
                f"[0, {self.battery_kwh}] kWh")
        if self.consumption_kwh_per_km <= 0:
            raise InputError("consumption must be positive")
        if self.charge_power_kw <= 0:
            raise InputError("charge power must be positive")


@dataclass(frozen=True)
class FareModel:
    """Fare of a served request: base + per-km + per-minute components."""

    base: float = 2.5
    per_km: float = 1.45
    per_min: float = 0.40


class _StepSeries:
    """Piecewise-constant value on [0, DAY_S); shared by prices and solar."""

    def __init__(self, times, values):
        t = np.asarray(times, dtype=np.int64)
        v = np.asarray(values, dtype=np.float64)
        if t.ndim != 1 or t.shape != v.shape or t.size == 0:
            raise InputError("step series needs matching nonempty times/values")
        if t[0] != 0:
            raise InputError(f"step series must start at t=0, got {t[0]}")
        if np.any(np.diff(t) <= 0) or t[-1] >= DAY_S:
            raise InputError("step series times must increase strictly within the day")
        self.times = t
        self.values = v

    def value_at(self, t: float) -> float:
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.values[max(0, min(idx, self.times.size - 1))])

    def integral(self, a: float, b: float) -> float:
        """Integral of the step function over [a, b] in value*seconds."""
        a = max(0.0, min(float(a), float(DAY_S)))
        b = max(0.0, min(float(b), float(DAY_S)))
        if b <= a:
            return 0.0
        knots = np.append(self.times.astype(np.float64), float(DAY_S))
        total = 0.0
        for k in range(self.values.size):
            lo = max(a, knots[k])
            hi = min(b, knots[k + 1])
            if hi > lo:
                total += (hi - lo) * float(self.values[k])
        return total


class PriceSeries(_StepSeries):
    """Day-ahead electricity tariff, piecewise constant, currency per kWh."""

    def price_at(self, t: float) -> float:
        return self.value_at(t)

    def mean_over(self, a: float, b: float) -> float:
        """Time-averaged price on [a, b]; collapses to price_at(a) when empty."""
        if b <= a:
            return self.price_at(a)
        return self.integral(a, b) / (b - a)

    def mean(self) -> float:
        return self.mean_over(0.0, float(DAY_S))

    def scaled_spread(self, factor: float) -> "PriceSeries":
        """Same mean, band deviations scaled by factor (>= 0)."""
        m = self.mean()
        return PriceSeries(self.times, m + factor * (self.values - m))

    @classmethod
    def constant(cls, price: float) -> "PriceSeries":
        return cls([0], [price])

    @classmethod
    def from_rows(cls, rows) -> "PriceSeries":
        rows = sorted((int(t), float(p)) for t, p in rows)
        return cls([t for t, _ in rows], [p for _, p in rows])


class SolarProfile(_StepSeries):
    """Per-vehicle rooftop PV power, piecewise constant, kW."""

    def power_at(self, t: float) -> float:
        return self.value_at(t)

    def energy_between(self, a: float, b: float) -> float:
        """Captured energy in kWh over [a, b]."""
        return self.integral(a, b) / 3600.0

    def daily_total(self) -> float:
        return self.energy_between(0.0, float(DAY_S))

    @classmethod
    def zero(cls) -> "SolarProfile":
        return cls([0], [0.0])

    @classmethod
    def from_rows(cls, rows) -> "SolarProfile":
        rows = sorted((int(t), float(p)) for t, p in rows)
        return cls([t for t, _ in rows], [p for _, p in rows])

    @classmethod
    def trapezoid(cls, sunrise_s: int, sunset_s: int, daily_kwh: float,
                  step_s: int = 300) -> "SolarProfile":
        """Symmetric trapezoidal day shape (quarter ramp, half plateau,
        quarter ramp) discretized to a staircase and rescaled so the daily
        energy equals daily_kwh exactly."""
        if not (0 <= sunrise_s < sunset_s <= DAY_S):
            raise InputError("trapezoid needs 0 <= sunrise < sunset <= day end")
        if daily_kwh < 0:
            raise InputError("daily solar energy must be nonnegative")
        length = sunset_s - sunrise_s
        ramp = length / 4.0
        bounds = list(range(sunrise_s, sunset_s, step_s)) + [sunset_s]
        times = [0] + bounds[:-1] if sunrise_s > 0 else bounds[:-1]
        powers = [0.0] if sunrise_s > 0 else []
        raw = []
        for k in range(len(bounds) - 1):
            mid = 0.5 * (bounds[k] + bounds[k + 1]) - sunrise_s
            shape = min(1.0, mid / ramp, (length - mid) / ramp)
            raw.append(max(0.0, shape))
        total_kwh = sum(p * (bounds[k + 1] - bounds[k])
                        for k, p in enumerate(raw)) / 3600.0
        scale = (daily_kwh / total_kwh) if total_kwh > 0 else 0.0
        powers += [p * scale for p in raw]
        if sunset_s < DAY_S:
            times.append(sunset_s)
            powers.append(0.0)
        return cls(times, powers)


@dataclass
class Scenario:
    """One solvable desk-scale problem: requests plus all exogenous data."""

    sample_id: int
    requests: tuple
    fleet: FleetSpec
    prices: PriceSeries
    solar: SolarProfile
    fare: FareModel = FareModel()
    source_ids: tuple = ()   # ids the requests had in the source pool


# trough -> peak -> deep midday trough -> high evening peak -> shoulder,
# the familiar duck shape of a high-solar grid
_DUCK_BANDS = (
    (0, 0.22),          # overnight
    (6 * 3600, 0.32),   # morning peak
    (9 * 3600, 0.15),   # midday solar trough
    (16 * 3600, 0.34),  # evening peak
    (20 * 3600, 0.24),  # late shoulder
)


def default_duck_prices() -> PriceSeries:
    return PriceSeries.from_rows(_DUCK_BANDS)


def default_solar(season: str = "summer") -> SolarProfile:
    """Seasonal per-vehicle rooftop yield: 6 kWh/day summer, 5 winter."""
    if season == "summer":
        return SolarProfile.trapezoid(6 * 3600, 20 * 3600, 6.0)
    if season == "winter":
        return SolarProfile.trapezoid(7 * 3600, 18 * 3600, 5.0)
    raise InputError(f"unknown season {season!r}")


DEFAULT_CHARGE_POWER_BY_BATTERY = {20.0: 8.0, 40.0: 12.0, 60.0: 22.0}


def charge_power_for_battery(battery_kwh: float) -> float:
    """Charger rating paired with a pack size; linear fallback off-catalog."""
    for b, p in DEFAULT_CHARGE_POWER_BY_BATTERY.items():
        if abs(battery_kwh - b) < 1e-9:
            return p
    return 22.0 * battery_kwh / 60.0


def consumption_for_battery(e_con_ref: float, e_b_ref: float, e_b: float,
                            rho_b: float = 5.0, kappa_m: float = 5e-4) -> float:
    """Consumption adjusted for pack mass: rho_b kg per kWh of capacity,
    kappa_m relative consumption change per kg."""
    return e_con_ref * (1.0 + kappa_m * rho_b * (e_b - e_b_ref))


def average_price(prices: PriceSeries, i: int, j: int, inst) -> float:
    """Mean tariff over the idle window between finishing i and starting j."""
    a = float(inst.node_time[i] + inst.serve_time[i])
    b = float(inst.node_time[j])
    return prices.mean_over(a, b)


def solar_energy(scenario: Scenario, i: int, j: int, inst) -> float:
    """Rooftop energy (kWh) captured during the window between i and j;
    zero when the fleet has no panels."""
    if not scenario.fleet.solar_enabled:
        return 0.0
    a = float(inst.node_time[i] + inst.serve_time[i])
    b = float(inst.node_time[j])
    return scenario.solar.energy_between(a, b)


def fare_for(fare: FareModel, inst, j: int) -> float:
    """Fare collected for serving request j."""
    return (fare.base + fare.per_km * float(inst.serve_dist[j]) / 1000.0
            + fare.per_min * float(inst.serve_time[j]) / 60.0)


def _renumber(pool, picked) -> tuple:
    chosen = sorted(picked, key=lambda p: (pool[p].request_time, p))
    reqs = tuple(
        TravelRequest(id=pos, origin=pool[p].origin,
                      destination=pool[p].destination,
                      request_time=pool[p].request_time)
        for pos, p in enumerate(chosen, start=1))
    return reqs, tuple(pool[p].id for p in chosen)


def sample_scenarios(pool, n_requests: int, n_vehicles: int, n_samples: int,
                     seed: int, *, fleet: FleetSpec, prices: PriceSeries,
                     solar: SolarProfile, fare: FareModel = FareModel(),
                     mode: str = "independent") -> list:
    """Draw n_samples request subsets of size n_requests from the pool.

    'independent' draws each subset without replacement from the full pool;
    'disjoint' partitions one seeded permutation into consecutive blocks.
    Sampled requests are re-sorted by time and renumbered 1..n; original pool
    ids are kept in Scenario.source_ids.
    """
    pool = list(pool)
    if n_requests > len(pool):
        raise InputError(
            f"cannot draw {n_requests} requests from a pool of {len(pool)}")
    if mode == "disjoint" and n_samples * n_requests > len(pool):
        raise InputError(
            f"disjoint sampling needs {n_samples * n_requests} requests, "
            f"pool has {len(pool)}")
    if mode not in ("independent", "disjoint"):
        raise InputError(f"unknown sampling mode {mode!r}")

    rng = np.random.default_rng(seed)
    fleet = replace(fleet, n_vehicles=n_vehicles)
    out = []
    perm = rng.permutation(len(pool)) if mode == "disjoint" else None
    for s in range(n_samples):
        if mode == "disjoint":
            picked = perm[s * n_requests:(s + 1) * n_requests]
        else:
            picked = rng.choice(len(pool), size=n_requests, replace=False)
        reqs, src = _renumber(pool, [int(p) for p in picked])
        out.append(Scenario(sample_id=s, requests=reqs, fleet=fleet,
                            prices=prices, solar=solar, fare=fare,
                            source_ids=src))
    return out


def _read_rows(source, fields, kind: str):
    path = Path(source)
    if not path.exists():
        raise InputError(f"{kind} file not found: {path}")
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise InputError(f"{path}: invalid JSON: {e}")
        return [(rec[fields[0]], rec[fields[1]]) if isinstance(rec, dict)
                else tuple(rec) for rec in data]
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        try:
            rows.append((rec[fields[0]], rec[fields[1]]))
        except KeyError as e:
            raise InputError(f"{path}:{lineno}: missing field {e.args[0]!r}")
    return rows


def load_prices(source) -> PriceSeries:
    """Load a tariff from CSV (time_s,price) / JSON rows, or a spec dict:
    {"duck": {}}, {"constant": p}, {"bands": [[t, p], ...]}, {"path": file}."""
    if isinstance(source, dict):
        if "duck" in source:
            return default_duck_prices()
        if "constant" in source:
            return PriceSeries.constant(float(source["constant"]))
        if "bands" in source:
            return PriceSeries.from_rows(source["bands"])
        if "path" in source:
            return load_prices(source["path"])
        raise InputError(f"unrecognized price spec keys: {sorted(source)}")
    return PriceSeries.from_rows(_read_rows(source, ("time_s", "price"), "prices"))


def load_solar(source) -> SolarProfile:
    """Load a solar profile from CSV (time_s,power_kw) / JSON rows, or a spec
    dict: {"zero": {}}, {"season": "summer"}, {"trapezoid": {...}}, {"path": f}."""
    if isinstance(source, dict):
        if "zero" in source:
            return SolarProfile.zero()
        if "season" in source:
            return default_solar(source["season"])
        if "trapezoid" in source:
            t = source["trapezoid"]
            return SolarProfile.trapezoid(int(t["sunrise_s"]), int(t["sunset_s"]),
                                          float(t["daily_kwh"]),
                                          int(t.get("step_s", 300)))
        if "path" in source:
            return load_solar(source["path"])
        raise InputError(f"unrecognized solar spec keys: {sorted(source)}")
    return SolarProfile.from_rows(
        _read_rows(source, ("time_s", "power_kw"), "solar"))

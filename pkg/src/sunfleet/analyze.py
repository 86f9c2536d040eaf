"""Independent solution validation, power profiles, and report files.

The validator replays a solution from the instance and scenario alone — it
never consults the model's constraint matrix — so it catches builder and
solver bugs alike. Profiles lay out each station (dis)charge event at full
charger power immediately after arrival at the station, rooftop generation
over every transition window the schedule uses, and driving consumption
uniformly over the driven legs; per-bin energies are split by exact
interval overlap, so bin sums conserve the solution's traded energy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError
from .instance import DagInstance
from .milp import Solution
from .scenario import Scenario, average_price, fare_for, solar_energy

__all__ = ["Violation", "ValidationReport", "validate", "ChargeEvent",
           "PowerProfile", "power_profile", "CostBreakdown",
           "cost_breakdown", "SampleRun", "aggregate_samples", "emit_report"]

_TOL = 1e-6
_SOLAR_EPS = 1e-12


# ---------------------------------------------------------------------------
# validation

@dataclass
class Violation:
    code: str
    message: str
    amount: float = 0.0


@dataclass
class ValidationReport:
    ok: bool
    violations: list = field(default_factory=list)

    def codes(self):
        return sorted({v.code for v in self.violations})


def _chains_or_none(instance, n_vehicles, x_set):
    """Per-vehicle transition chains, or None when continuity is broken."""
    chains = {}
    for k in range(1, n_vehicles + 1):
        nxt = {}
        for (i, j, k2) in x_set:
            if k2 == k:
                if i in nxt:
                    return None
                nxt[i] = j
        chain = []
        node = 0
        while node != instance.end:
            if node not in nxt:
                return None
            j = nxt.pop(node)
            chain.append((node, j))
            node = j
        if nxt:
            return None
        chains[k] = chain
    return chains


def validate(solution: Solution, instance: DagInstance, scenario: Scenario,
             *, tol: float = _TOL) -> ValidationReport:
    """Replay every operational and energy constraint; failures become
    report entries, never exceptions."""
    out = []
    I = instance.n_requests
    end = instance.end
    K = scenario.fleet.n_vehicles
    fleet = scenario.fleet
    x_set = set(solution.x)
    s_set = set(solution.s)
    allow_v2g = bool(solution.meta.get("allow_v2g", True))

    def fail(code, message, amount=0.0):
        out.append(Violation(code, message, float(amount)))

    # Eqs. (1)-(2): only time-feasible transitions and station detours
    for (i, j, k) in sorted(x_set):
        if not (0 <= i < instance.n_nodes and 0 <= j < instance.n_nodes
                and 1 <= k <= K):
            fail("eq1", f"transition ({i}, {j}, vehicle {k}) is out of range "
                        f"(Eq. (1))")
        elif not instance.x_mask[i, j]:
            fail("eq1", f"transition ({i}, {j}) is not time-feasible "
                        f"(Eq. (1))")
    for (i, j, c, k) in sorted(s_set):
        if not (0 <= i < instance.n_nodes and 0 <= j < instance.n_nodes
                and 0 <= c < len(instance.stations) and 1 <= k <= K):
            fail("eq2", f"station visit ({i}, {j}, station {c}, vehicle {k}) "
                        f"is out of range (Eq. (2))")
        elif not instance.s_mask[i, j, c]:
            fail("eq2", f"station {c} detour does not fit transition "
                        f"({i}, {j}) (Eq. (2))")

    # Eqs. (4)-(5): each request entered/left at most once, fleet-wide
    for j in range(1, I + 1):
        n_in = sum(1 for (i2, j2, _k) in x_set if j2 == j)
        if n_in > 1:
            fail("eq4", f"request {j} entered {n_in} times (Eq. (4))", n_in)
        n_out = sum(1 for (i2, j2, _k) in x_set if i2 == j)
        if n_out > 1:
            fail("eq5", f"request {j} left {n_out} times (Eq. (5))", n_out)

    # Eq. (6): depot degrees and flow conservation per vehicle
    for k in range(1, K + 1):
        dep = sum(1 for (i2, j2, k2) in x_set if k2 == k and i2 == 0)
        arr = sum(1 for (i2, j2, k2) in x_set if k2 == k and j2 == end)
        if dep != 1:
            fail("eq6", f"vehicle {k} leaves the depot {dep} times "
                        f"(Eq. (6))", dep)
        if arr != 1:
            fail("eq6", f"vehicle {k} reaches the end depot {arr} times "
                        f"(Eq. (6))", arr)
        for j in range(1, I + 1):
            n_in = sum(1 for (i2, j2, k2) in x_set if k2 == k and j2 == j)
            n_out = sum(1 for (i2, j2, k2) in x_set if k2 == k and i2 == j)
            if n_in != n_out:
                fail("eq6", f"vehicle {k} flow imbalance at request {j}: "
                            f"{n_in} in, {n_out} out (Eq. (6))")

    # Eq. (7): station visits only on used transitions, at most one
    for (i, j, k) in sorted(x_set | {(i2, j2, k2)
                                     for (i2, j2, _c, k2) in s_set}):
        n_st = sum(1 for (i2, j2, _c, k2) in s_set
                   if (i2, j2, k2) == (i, j, k))
        used = (i, j, k) in x_set
        if n_st > int(used):
            what = "without the transition" if not used \
                else f"{n_st} station visits"
            fail("eq7", f"station visit {what} on ({i}, {j}, vehicle {k}) "
                        f"(Eq. (7))", n_st)

    # Eqs. (3), (8): charge only at visited stations, within capacity
    for key in sorted(set(solution.c_vals) | s_set):
        (i, j, c, k) = key
        cval = float(solution.c_vals.get(key, 0.0))
        visited = key in s_set
        if not visited:
            if abs(cval) > tol:
                fail("eq8", f"energy exchange of {cval:.6f} kWh without a "
                            f"station visit on ({i}, {j}, station {c}, "
                            f"vehicle {k}) (Eq. (8))", abs(cval))
            continue
        if not (0 <= i < instance.n_nodes and 0 <= j < instance.n_nodes
                and 0 <= c < len(instance.stations)):
            continue   # already flagged under Eq. (2)
        cap = float(instance.c_hat[i, j, c]) if instance.s_mask[i, j, c] \
            else 0.0
        if abs(cval) > cap + tol:
            fail("eq8", f"|C| = {abs(cval):.6f} kWh exceeds the "
                        f"{cap:.6f} kWh window capacity on ({i}, {j}, "
                        f"station {c}, vehicle {k}) (Eqs. (3), (8))",
                 abs(cval) - cap)
        if not allow_v2g and cval < -tol:
            fail("eq8", f"V2G is disabled but C = {cval:.6f} kWh is "
                        f"negative on ({i}, {j}, station {c}, vehicle {k}) "
                        f"(Eq. (8))", -cval)

    # spill sanity (bookkeeping check, carries no equation number)
    for (i, j, k), w in sorted(solution.spill.items()):
        if (i, j, k) not in x_set:
            if abs(w) > tol:
                fail("spill", f"spill of {w:.6f} kWh on unused transition "
                              f"({i}, {j}, vehicle {k})", abs(w))
            continue
        cap = solar_energy(scenario, i, j, instance)
        if w < -tol or w > cap + tol:
            fail("spill", f"spill {w:.6f} kWh outside [0, {cap:.6f}] on "
                          f"({i}, {j}, vehicle {k})", w)

    # Eqs. (9)-(10): energy recursion recomputed from scratch, per chain.
    # Eq. (9) covers plain transitions, Eq. (10) those with a station detour.
    e_con = fleet.consumption_kwh_per_km
    chains = _chains_or_none(instance, K, x_set)
    if chains is not None:
        for k in range(1, K + 1):
            e = fleet.initial_soc_kwh
            for (i, j) in chains[k]:
                if not instance.x_mask[i, j]:
                    break
                dist_m = float(instance.d_fp[i, j])
                detoured = False
                for (i2, j2, c, k2) in s_set:
                    if (i2, j2, k2) == (i, j, k) and \
                            instance.s_mask[i, j, c]:
                        dist_m += float(instance.det_d[i, j, c])
                        detoured = True
                e = e - dist_m / 1000.0 * e_con
                for (i2, j2, c, k2), cval in solution.c_vals.items():
                    if (i2, j2, k2) == (i, j, k):
                        e += float(cval)
                        detoured = detoured or (i2, j2, c, k2) in s_set
                e += solar_energy(scenario, i, j, instance)
                e -= float(solution.spill.get((i, j, k), 0.0))
                eq = "eq10" if detoured else "eq9"
                eqname = "(Eq. (10))" if detoured else "(Eq. (9))"
                given = solution.e_vals.get((j, k))
                if given is None:
                    fail(eq, f"missing state of energy at node {j} "
                             f"for vehicle {k} {eqname}")
                elif abs(float(given) - e) > tol:
                    fail(eq,
                         f"energy balance at node {j} of vehicle {k} is "
                         f"off by {float(given) - e:.6f} kWh "
                         f"{eqname}", abs(float(given) - e))
                if e < -tol or e > fleet.battery_kwh + tol:
                    fail("eq11", f"replayed energy {e:.6f} kWh at node {j} "
                                 f"of vehicle {k} is outside "
                                 f"[0, {fleet.battery_kwh:g}] (Eq. (11))", e)
                e = float(given) if given is not None else e

    # Eq. (11): reported levels inside the battery
    for (j, k), val in sorted(solution.e_vals.items()):
        v = float(val)
        if v < -tol or v > fleet.battery_kwh + tol:
            fail("eq11", f"state of energy {v:.6f} kWh at node {j} of "
                         f"vehicle {k} is outside "
                         f"[0, {fleet.battery_kwh:g}] (Eq. (11))", v)

    # Eq. (12): start and end of day at the prescribed level
    for k in range(1, K + 1):
        for node, label in ((0, "start"), (end, "end")):
            val = solution.e_vals.get((node, k))
            if val is None:
                fail("eq12", f"missing {label}-of-day energy for vehicle "
                             f"{k} (Eq. (12))")
            elif abs(float(val) - fleet.initial_soc_kwh) > tol:
                fail("eq12", f"vehicle {k} {label}-of-day energy "
                             f"{float(val):.6f} kWh differs from the "
                             f"prescribed {fleet.initial_soc_kwh:g} kWh "
                             f"(Eq. (12))",
                     abs(float(val) - fleet.initial_soc_kwh))

    # served set and objective accounting (Eq. (13) bookkeeping)
    inflow = {j for (i2, j, _k) in x_set if 1 <= j <= I}
    if set(solution.served) != inflow:
        fail("served", f"served set {sorted(solution.served)} does not "
                       f"match the schedule inflow {sorted(inflow)}")
    if np.isfinite(solution.objective):
        charging = 0.0
        v2g = 0.0
        for (i, j, c, k), cval in solution.c_vals.items():
            p = average_price(scenario.prices, i, j, instance)
            if cval > 0:
                charging += p * float(cval)
            else:
                v2g -= p * float(cval)
        revenue = sum(fare_for(scenario.fare, instance, j) for j in inflow)
        expect = charging - v2g - revenue
        if abs(expect - float(solution.objective)) > max(tol, 1e-6):
            fail("objective",
                 f"objective {solution.objective:.8f} differs from replayed "
                 f"{expect:.8f} (Eq. (13))",
                 abs(expect - float(solution.objective)))

    return ValidationReport(ok=not out, violations=out)


# ---------------------------------------------------------------------------
# power profiles

@dataclass
class ChargeEvent:
    i: int
    j: int
    c: int
    k: int
    start_s: float
    duration_s: float
    energy_kwh: float    # signed; negative = injection into the grid


@dataclass
class PowerProfile:
    bin_width: int
    bin_start_s: np.ndarray
    grid_charge_kw: np.ndarray
    v2g_kw: np.ndarray
    solar_kw: np.ndarray
    cumulative_consumption_kwh: np.ndarray
    n_vehicles: int = 0
    events: list = field(default_factory=list)

    @property
    def n_bins(self) -> int:
        return len(self.bin_start_s)

    def net_traded_kwh(self) -> float:
        dt_h = self.bin_width / 3600.0
        return float(np.sum((self.grid_charge_kw - self.v2g_kw) * dt_h))


def _overlap(a0, a1, b0, b1) -> float:
    return max(0.0, min(a1, b1) - max(a0, b0))


def _spread(bins_start, bin_width, t0, t1, total, acc):
    """Add `total` onto acc, split over bins by overlap with [t0, t1]."""
    if t1 <= t0 or total == 0.0:
        return
    span = t1 - t0
    first = max(0, int((t0 - bins_start[0]) // bin_width))
    for b in range(first, len(bins_start)):
        b0 = bins_start[b]
        if b0 >= t1:
            break
        ov = _overlap(b0, b0 + bin_width, t0, t1)
        if ov > 0.0:
            acc[b] += total * (ov / span)


def power_profile(solution: Solution, instance: DagInstance,
                  scenario: Scenario, bin_width: int = 300) -> PowerProfile:
    """Bin the schedule's grid, rooftop, and drive energy over the day."""
    if bin_width <= 0:
        raise InputError("bin_width must be positive")
    day0 = instance.depot.day_start
    day1 = instance.depot.day_end
    n_bins = -(-(day1 - day0) // bin_width)
    starts = day0 + bin_width * np.arange(n_bins, dtype=np.int64)

    grid_e = np.zeros(n_bins)     # kWh drawn per bin
    v2g_e = np.zeros(n_bins)      # kWh injected per bin
    solar_e = np.zeros(n_bins)
    cons_e = np.zeros(n_bins)
    events = []

    p_ch = instance.charge_power_kw
    e_con = scenario.fleet.consumption_kwh_per_km
    node_t = instance.node_time
    serve_t = instance.serve_time

    for (i, j, k) in sorted(solution.x):
        t_dep = float(node_t[i] + serve_t[i])
        t_arr_win = float(node_t[j])
        stations = sorted(c for (i2, j2, c, k2) in solution.s
                          if (i2, j2, k2) == (i, j, k))

        # rooftop generation over the whole transition window
        if scenario.fleet.solar_enabled:
            lo = t_dep
            while lo < t_arr_win:
                b = min(int((lo - day0) // bin_width), n_bins - 1)
                hi = min(float(starts[b] + bin_width), t_arr_win)
                solar_e[b] += scenario.solar.energy_between(lo, hi)
                lo = hi

        if not stations:
            drive_t = float(instance.t_fp[i, j])
            _spread(starts, bin_width, t_dep, t_dep + drive_t,
                    float(instance.d_fp[i, j]) / 1000.0 * e_con, cons_e)
            continue

        c = stations[0]
        leg1_t = float(instance.t_to_station[i, c])
        leg1_d = float(instance.d_to_station[i, c])
        leg2_t = float(instance.t_fp[i, j] + instance.det_t[i, j, c]) - leg1_t
        leg2_d = float(instance.d_fp[i, j] + instance.det_d[i, j, c]) - leg1_d
        cval = float(solution.c_vals.get((i, j, c, k), 0.0))
        dur = abs(cval) / p_ch * 3600.0
        t_station = t_dep + leg1_t

        _spread(starts, bin_width, t_dep, t_station,
                leg1_d / 1000.0 * e_con, cons_e)
        if dur > 0.0:
            events.append(ChargeEvent(i, j, c, k, t_station, dur, cval))
            target = grid_e if cval > 0 else v2g_e
            _spread(starts, bin_width, t_station, t_station + dur,
                    abs(cval), target)
        _spread(starts, bin_width, t_station + dur,
                t_station + dur + leg2_t, leg2_d / 1000.0 * e_con, cons_e)

    dt_h = bin_width / 3600.0
    return PowerProfile(
        bin_width=int(bin_width),
        bin_start_s=starts,
        grid_charge_kw=grid_e / dt_h,
        v2g_kw=v2g_e / dt_h,
        solar_kw=solar_e / dt_h,
        cumulative_consumption_kwh=np.cumsum(cons_e),
        n_vehicles=scenario.fleet.n_vehicles,
        events=events,
    )


# ---------------------------------------------------------------------------
# cost breakdowns and fleet aggregation

@dataclass
class CostBreakdown:
    charging_cost: float
    v2g_revenue: float
    trading_profit: float
    request_revenue: float


def cost_breakdown(solution: Solution, scenario: Scenario) -> CostBreakdown:
    """Trading and fare accounting for one solution.

    Prefers the arc prices and fares recorded on the solution; falls back to
    the solver's breakdown when a hand-built solution lacks them.
    """
    prices = solution.meta.get("arc_price")
    fares = solution.meta.get("fares")
    if prices is not None and fares is not None:
        charging = 0.0
        v2g = 0.0
        for (i, j, c, k), v in solution.c_vals.items():
            p = float(prices[f"{i},{j}"])
            if v > 0:
                charging += p * float(v)
            elif v < 0:
                v2g -= p * float(v)
        revenue = float(sum(fares[str(j)] for j in solution.served))
    else:
        bd = solution.breakdown
        charging, v2g = bd.charging_cost, bd.v2g_revenue
        revenue = bd.request_revenue
    return CostBreakdown(charging_cost=charging, v2g_revenue=v2g,
                         trading_profit=v2g - charging,
                         request_revenue=revenue)


@dataclass
class SampleRun:
    """One solved scenario sample, with an optionally prebuilt profile."""
    solution: Solution
    scenario: Scenario
    instance: DagInstance
    profile: PowerProfile | None = None


def aggregate_samples(samples, target_fleet: int, *,
                      bin_width: int = 300):
    """Fleet-level profile and breakdown from independently solved samples.

    Bin-wise sums and cost fields are scaled by target_fleet divided by the
    total vehicle count across samples: each sample's small sub-fleet stands
    in for an equal slice of the full fleet. Samples may be SampleRun
    records or (Solution, Scenario, DagInstance) triples.
    """
    runs = []
    for entry in samples:
        if isinstance(entry, SampleRun):
            runs.append(entry)
        else:
            sol, scen, inst = entry
            runs.append(SampleRun(sol, scen, inst))
    if not runs:
        raise InputError("aggregate_samples needs at least one sample")

    profiles = []
    total_k = 0
    for run in runs:
        prof = run.profile
        if prof is None:
            prof = power_profile(run.solution, run.instance, run.scenario,
                                 bin_width)
        elif prof.bin_width != bin_width:
            raise InputError(
                f"mismatched bin widths: {prof.bin_width} vs {bin_width}")
        profiles.append(prof)
        total_k += run.scenario.fleet.n_vehicles
    n_bins = {p.n_bins for p in profiles}
    if len(n_bins) != 1:
        raise InputError("samples cover different day spans")

    scale = float(target_fleet) / float(total_k)
    agg = PowerProfile(
        bin_width=bin_width,
        bin_start_s=profiles[0].bin_start_s.copy(),
        grid_charge_kw=scale * np.sum([p.grid_charge_kw for p in profiles],
                                      axis=0),
        v2g_kw=scale * np.sum([p.v2g_kw for p in profiles], axis=0),
        solar_kw=scale * np.sum([p.solar_kw for p in profiles], axis=0),
        cumulative_consumption_kwh=scale * np.sum(
            [p.cumulative_consumption_kwh for p in profiles], axis=0),
        n_vehicles=int(target_fleet),
    )
    charging = v2g = revenue = 0.0
    for run in runs:
        bd = cost_breakdown(run.solution, run.scenario)
        charging += bd.charging_cost
        v2g += bd.v2g_revenue
        revenue += bd.request_revenue
    agg_bd = CostBreakdown(charging_cost=scale * charging,
                           v2g_revenue=scale * v2g,
                           trading_profit=scale * (v2g - charging),
                           request_revenue=scale * revenue)
    return agg, agg_bd


# ---------------------------------------------------------------------------
# report files

def _fmt(v: float) -> str:
    v = float(v)
    if v == 0.0:
        v = 0.0   # canonicalize -0.0
    return format(v, ".12g")


def emit_report(profile: PowerProfile, breakdown: CostBreakdown,
                destination, *, status: str | None = None,
                gap: float | None = None) -> list:
    """Write the profile table and a summary JSON under `destination`."""
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)

    csv_path = dest / "profile.csv"
    lines = ["bin_start_s,grid_charge_kw,v2g_kw,solar_kw,cum_consumption_kwh"]
    for b in range(profile.n_bins):
        lines.append(",".join([
            str(int(profile.bin_start_s[b])),
            _fmt(profile.grid_charge_kw[b]),
            _fmt(profile.v2g_kw[b]),
            _fmt(profile.solar_kw[b]),
            _fmt(profile.cumulative_consumption_kwh[b]),
        ]))
    csv_path.write_text("\n".join(lines) + "\n")

    summary = {
        "breakdown": {
            "charging_cost": breakdown.charging_cost,
            "v2g_revenue": breakdown.v2g_revenue,
            "trading_profit": breakdown.trading_profit,
            "request_revenue": breakdown.request_revenue,
        },
        "status": status,
        "gap": gap if gap is None or np.isfinite(gap) else None,
        "n_vehicles": profile.n_vehicles,
        "bin_width_s": profile.bin_width,
    }
    json_path = dest / "summary.json"
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return [csv_path, json_path]

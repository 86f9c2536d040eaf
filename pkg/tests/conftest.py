"""Shared fixtures: small networks, random instance generator, duck batch."""

from __future__ import annotations

import numpy as np
import pytest

from sunfleet.instance import DepotSpec, TravelRequest, build_dag
from sunfleet.network import load_network
from sunfleet.scenario import (FareModel, FleetSpec, PriceSeries, Scenario,
                               SolarProfile, default_duck_prices,
                               default_solar)

DAY_S = 86400


def triangle_net():
    """a->b direct (100 s, 1000 m) vs a->c->b (80 s, 1200 m); c is a station."""
    return load_network({
        "nodes": ["a", "b", "c"],
        "arcs": [
            {"from": "a", "to": "b", "time_s": 100, "dist_m": 1000},
            {"from": "b", "to": "a", "time_s": 100, "dist_m": 1000},
            {"from": "a", "to": "c", "time_s": 40, "dist_m": 600},
            {"from": "c", "to": "a", "time_s": 40, "dist_m": 600},
            {"from": "c", "to": "b", "time_s": 40, "dist_m": 600},
            {"from": "b", "to": "c", "time_s": 40, "dist_m": 600},
        ],
        "stations": ["c"],
    })


def line_net(leg_s=600, leg_m=5000, station=True):
    """depot - p - q line with an optional station s hanging off p."""
    nodes = ["depot", "p", "q"] + (["s"] if station else [])
    arcs = []
    for f, t in (("depot", "p"), ("p", "q")):
        arcs.append({"from": f, "to": t, "time_s": leg_s, "dist_m": leg_m})
        arcs.append({"from": t, "to": f, "time_s": leg_s, "dist_m": leg_m})
    if station:
        for f, t in (("p", "s"), ("q", "s"), ("depot", "s")):
            arcs.append({"from": f, "to": t, "time_s": leg_s // 2,
                         "dist_m": leg_m // 2})
            arcs.append({"from": t, "to": f, "time_s": leg_s // 2,
                         "dist_m": leg_m // 2})
    return load_network({"nodes": nodes, "arcs": arcs,
                         "stations": ["s"] if station else []})


def hub_net(n_spokes=4, spoke_s=600, spoke_m=4000, hub_station=True):
    """Star around `hub`; hub itself is a station (zero-detour stops)."""
    spokes = [f"v{i}" for i in range(n_spokes)]
    arcs = []
    for v in spokes:
        arcs.append({"from": "hub", "to": v, "time_s": spoke_s,
                     "dist_m": spoke_m})
        arcs.append({"from": v, "to": "hub", "time_s": spoke_s,
                     "dist_m": spoke_m})
    return load_network({"nodes": ["hub"] + spokes, "arcs": arcs,
                         "stations": ["hub"] if hub_station else []})


def make_requests(specs):
    """[(origin, destination, time_s), ...] -> renumbered TravelRequests."""
    ordered = sorted(enumerate(specs), key=lambda p: (p[1][2], p[0]))
    return [TravelRequest(id=i, origin=o, destination=d, request_time=int(t))
            for i, (_orig, (o, d, t)) in enumerate(ordered, start=1)]


def make_scenario(requests, fleet=None, prices=None, solar=None, fare=None,
                  sample_id=0):
    return Scenario(
        sample_id=sample_id,
        requests=tuple(requests),
        fleet=fleet or FleetSpec(n_vehicles=1),
        prices=prices or default_duck_prices(),
        solar=solar if solar is not None else SolarProfile.zero(),
        fare=fare or FareModel(),
    )


def flat_prices(p=0.30):
    return PriceSeries.from_rows([(0, p)])


def random_problem(seed, *, max_requests=5, max_vehicles=2, max_stations=2,
                   force_solar=None, force_v2g_price_spread=False,
                   return_parts=False):
    """One random desk-scale (instance, scenario) pair.

    Sizes are weighted toward the middle of the guard range; initial energy
    stays well above zero and solar below ~4 kWh/day so feasibility never
    hinges on razor-thin margins.
    """
    rng = np.random.default_rng(seed)
    n_nodes = int(rng.integers(4, 7))
    names = [f"n{m}" for m in range(n_nodes)]
    arcs = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if rng.random() < 0.35:
                continue
            t = float(rng.integers(240, 900))
            d = t * float(rng.uniform(6.0, 9.0))
            arcs.append({"from": a, "to": b, "time_s": t, "dist_m": d})
            arcs.append({"from": b, "to": a, "time_s": t, "dist_m": d})
    for a, b in zip(names, names[1:]):  # keep the graph connected
        t = float(rng.integers(240, 900))
        d = t * 7.5
        arcs.append({"from": a, "to": b, "time_s": t, "dist_m": d})
        arcs.append({"from": b, "to": a, "time_s": t, "dist_m": d})
    n_st = int(rng.integers(0, max_stations + 1))
    stations = [str(s) for s in rng.choice(names, size=n_st, replace=False)]
    spec = {"nodes": names, "arcs": arcs, "stations": stations}
    net = load_network(spec)

    n_req = int(rng.choice(np.arange(1, max_requests + 1),
                           p=_size_weights(max_requests)))
    times = np.sort(rng.integers(6 * 3600, 21 * 3600, size=n_req))
    reqs = []
    for i, t in enumerate(times, start=1):
        o, d = rng.choice(names, size=2, replace=False)
        reqs.append(TravelRequest(id=i, origin=str(o), destination=str(d),
                                  request_time=int(t)))

    inst = build_dag(net, reqs, DepotSpec(node=names[0]),
                     float(rng.choice([8.0, 22.0])))

    if force_v2g_price_spread:
        prices = default_duck_prices()
    elif rng.random() < 0.5:
        prices = default_duck_prices()
    else:
        n_bands = int(rng.integers(2, 6))
        cuts = np.sort(rng.choice(np.arange(1, 24), size=n_bands - 1,
                                  replace=False)) * 3600
        vals = rng.uniform(0.10, 0.50, size=n_bands)
        prices = PriceSeries.from_rows(
            [(0, float(vals[0]))] + [(int(c), float(v))
                                     for c, v in zip(cuts, vals[1:])])

    if force_solar is True or (force_solar is None and rng.random() < 0.5):
        solar = SolarProfile.trapezoid(
            sunrise_s=6 * 3600, sunset_s=20 * 3600,
            daily_kwh=float(rng.uniform(1.0, 4.0)))
    else:
        solar = SolarProfile.zero()

    fleet = FleetSpec(
        n_vehicles=int(rng.integers(1, max_vehicles + 1)),
        battery_kwh=60.0,
        initial_soc_kwh=float(rng.uniform(20.0, 50.0)),
        consumption_kwh_per_km=0.12,
        charge_power_kw=inst.charge_power_kw,
        solar_enabled=True,
    )
    scen = Scenario(sample_id=int(seed), requests=tuple(reqs), fleet=fleet,
                    prices=prices, solar=solar, fare=FareModel())
    if return_parts:
        parts = {"spec": spec, "requests": reqs,
                 "depot": DepotSpec(node=names[0]),
                 "charge_power": inst.charge_power_kw}
        return inst, scen, parts
    return inst, scen


def _size_weights(max_requests):
    base = {1: 0.10, 2: 0.25, 3: 0.30, 4: 0.25, 5: 0.10}
    w = np.array([base.get(i, 0.1) for i in range(1, max_requests + 1)])
    return w / w.sum()


# --- duck-curve acceptance batch -------------------------------------------

DUCK_NOMINAL_TIMES = (25200, 31500, 50400, 56700, 64200, 77400)
# 07:00, 08:45, 14:00, 15:45, 17:50, 21:30


def duck_problem(seed, *, battery_kwh=60.0, initial_soc_kwh=12.0,
                 charge_power_kw=22.0, consumption_kwh_per_km=0.12,
                 solar_enabled=False):
    """One jittered single-vehicle day against the two-peak tariff.

    The six requests carve idle windows that each sit inside one tariff band:
    night (cheap) before r1, morning peak r1->r2, midday trough r2->r4,
    evening peak r4->r6, and a shoulder tail after r6 for the mandatory
    return to the starting energy.
    """
    rng = np.random.default_rng(seed)
    net = hub_net(n_spokes=4, spoke_s=540, spoke_m=3800)
    jit = rng.integers(-300, 301, size=6)
    times = [int(t + j) for t, j in zip(DUCK_NOMINAL_TIMES, jit)]
    spokes = ["v0", "v1", "v2", "v3"]
    reqs = []
    for i, t in enumerate(times, start=1):
        o = spokes[(i - 1) % 4]
        d = spokes[i % 4]
        reqs.append(TravelRequest(id=i, origin=o, destination=d,
                                  request_time=t))
    inst = build_dag(net, reqs, DepotSpec(node="hub"), charge_power_kw)
    fleet = FleetSpec(n_vehicles=1, battery_kwh=battery_kwh,
                      initial_soc_kwh=initial_soc_kwh,
                      consumption_kwh_per_km=consumption_kwh_per_km,
                      charge_power_kw=charge_power_kw,
                      solar_enabled=solar_enabled)
    solar = default_solar("summer") if solar_enabled else SolarProfile.zero()
    scen = Scenario(sample_id=int(seed), requests=tuple(reqs), fleet=fleet,
                    prices=default_duck_prices(), solar=solar,
                    fare=FareModel())
    return inst, scen


@pytest.fixture(scope="session")
def rng_session():
    return np.random.default_rng(20240823)

"""Exhaustive reference solver for small instances.

Vehicles are interchangeable and a chain must visit its requests in time
order, so a served subset determines the chain. The oracle memoizes the
best charging cost per subset — minimizing over every station pattern along
the chain with the same per-vehicle LP the main solver replays through —
then combines subsets across vehicles by enumeration. Guarded to small
sizes; the pattern product grows exponentially with chain length.
"""

from __future__ import annotations

import itertools

from .chain import _solve_one_chain, solve_chain_charging
from .errors import InputError
from .instance import DagInstance
from .milp import Breakdown, Solution
from .scenario import Scenario, average_price, fare_for

__all__ = ["brute_force_oracle"]

_MAX_REQUESTS = 6
_MAX_VEHICLES = 2
_MAX_STATIONS = 2
_TIE_TOL = 1e-12


def _best_single(instance, scenario, members, allow_v2g):
    """Best trading cost for one vehicle serving `members` in id order.

    Returns (cost, station pattern per transition); cost is inf when the
    chain is unreachable or energy-infeasible under every pattern.
    """
    nodes = [0] + list(members) + [instance.end]
    chain = list(zip(nodes, nodes[1:]))
    for (i, j) in chain:
        if not instance.x_mask[i, j]:
            return float("inf"), None
    options = [[None] + list(instance.station_options(i, j))
               for (i, j) in chain]
    best_cost = float("inf")
    best_pattern = None
    for pattern in itertools.product(*options):
        stations_by_pos = {pos: [c] for pos, c in enumerate(pattern)
                           if c is not None}
        ok, _cv, _wv, _levels, cost = _solve_one_chain(
            instance, scenario, chain, stations_by_pos, allow_v2g,
            canonical=False)
        if ok and cost < best_cost - _TIE_TOL:
            best_cost = cost
            best_pattern = pattern
    return best_cost, best_pattern


def _submasks_ascending(mask):
    subs = []
    s = mask
    while True:
        subs.append(s)
        if s == 0:
            break
        s = (s - 1) & mask
    return reversed(subs)


def brute_force_oracle(instance: DagInstance, scenario: Scenario, *,
                       allow_v2g: bool = True) -> Solution:
    """Provably optimal Solution by enumeration, for guarded small sizes."""
    I = instance.n_requests
    K = scenario.fleet.n_vehicles
    n_st = len(instance.stations)
    if I > _MAX_REQUESTS:
        raise InputError(
            f"oracle limited to {_MAX_REQUESTS} requests, got {I}")
    if K > _MAX_VEHICLES:
        raise InputError(
            f"oracle limited to {_MAX_VEHICLES} vehicles, got {K}")
    if n_st > _MAX_STATIONS:
        raise InputError(
            f"oracle limited to {_MAX_STATIONS} stations, got {n_st}")

    fares = {j: fare_for(scenario.fare, instance, j)
             for j in range(1, I + 1)}
    memo = {}

    def best1(mask):
        if mask not in memo:
            members = [j for j in range(1, I + 1) if mask >> (j - 1) & 1]
            memo[mask] = _best_single(instance, scenario, members, allow_v2g)
        return memo[mask]

    def fare_sum(mask):
        return sum(fares[j] for j in range(1, I + 1) if mask >> (j - 1) & 1)

    full = (1 << I) - 1
    best = None   # (J, masks per vehicle)
    if K == 1:
        for m1 in range(full + 1):
            cost, _ = best1(m1)
            if cost == float("inf"):
                continue
            J = cost - fare_sum(m1)
            if best is None or J < best[0] - _TIE_TOL:
                best = (J, (m1,))
    else:
        for m1 in range(full + 1):
            c1, _ = best1(m1)
            if c1 == float("inf"):
                continue
            for m2 in _submasks_ascending(full & ~m1):
                c2, _ = best1(m2)
                if c2 == float("inf"):
                    continue
                J = c1 + c2 - fare_sum(m1 | m2)
                if best is None or J < best[0] - _TIE_TOL:
                    best = (J, (m1, m2))

    if best is None:
        # the all-idle schedule is always energy-feasible, so this cannot
        # happen for well-formed inputs; report it honestly anyway
        return Solution(status="infeasible")

    x_set, s_set = set(), set()
    served = set()
    for k, mask in enumerate(best[1], start=1):
        members = [j for j in range(1, I + 1) if mask >> (j - 1) & 1]
        served.update(members)
        nodes = [0] + members + [instance.end]
        chain = list(zip(nodes, nodes[1:]))
        _, pattern = best1(mask)
        for pos, (i, j) in enumerate(chain):
            x_set.add((i, j, k))
            if pattern[pos] is not None:
                s_set.add((i, j, pattern[pos], k))

    res = solve_chain_charging(instance, scenario, x_set, s_set,
                               allow_v2g=allow_v2g, canonical=True)
    revenue = sum(fares[j] for j in served)
    price = {(i, j): average_price(scenario.prices, i, j, instance)
             for (i, j) in instance.arcs()}
    charging = 0.0
    v2g = 0.0
    for (i, j, c, k), v in res.c_vals.items():
        if v > 0.0:
            charging += price[(i, j)] * v
        elif v < 0.0:
            v2g -= price[(i, j)] * v
    e_vals = dict(res.e_vals)
    for j in range(instance.n_nodes):
        for k in range(1, K + 1):
            e_vals.setdefault((j, k), scenario.fleet.initial_soc_kwh)
    return Solution(
        status="optimal",
        x=x_set, s=s_set,
        c_vals=dict(res.c_vals), e_vals=e_vals, spill=dict(res.spill),
        served=served,
        objective=res.cost - revenue,
        breakdown=Breakdown(charging_cost=charging, v2g_revenue=v2g,
                            request_revenue=revenue),
        bound=res.cost - revenue,
        meta={
            "allow_v2g": allow_v2g,
            "arc_price": {f"{i},{j}": p for (i, j), p
                          in sorted(price.items())},
            "fares": {str(j): f for j, f in sorted(fares.items())},
        },
    )

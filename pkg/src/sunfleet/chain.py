"""Per-vehicle charging LP on a fixed routing.

Once the routing and station-visit binaries are fixed, the fleet problem
separates by vehicle into a small LP over that vehicle's chain of
transitions: choose signed station energies and rooftop spill to minimize
trading cost subject to the battery recursion, state-of-energy bounds, and
an exact return to the initial level at the end of the horizon. A second
lexicographic pass shrinks gross traded volume at unchanged cost, so a
flat-price day yields the zero-trade schedule rather than an arbitrary
cost-equivalent churn.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import BuildError
from .instance import DagInstance
from .scenario import Scenario, average_price, solar_energy

__all__ = ["ChainChargingResult", "check_routing", "vehicle_chains",
           "solve_chain_charging"]

_COST_TOL = 1e-9      # allowed cost drift when minimizing traded volume
_PARAM_TOL = 1e-9     # feasibility slack for variable-free chains
_SOLAR_EPS = 1e-12    # below this, a transition captures no rooftop energy


@dataclass
class ChainChargingResult:
    """Optimal charging plan for a fixed routing.

    c_vals maps (i, j, c, k) to signed kWh, e_vals maps visited (j, k) to the
    battery level there, spill maps (i, j, k) to curtailed rooftop kWh, and
    cost is the total trading cost (negative when the plan earns money).
    """
    feasible: bool
    c_vals: dict
    e_vals: dict
    spill: dict
    cost: float


def _as_set(obj) -> set:
    """Accept dicts of 0/1-ish values or iterables of keys."""
    if obj is None:
        return set()
    if isinstance(obj, dict):
        return {key for key, val in obj.items() if val > 0.5}
    return set(obj)


def check_routing(instance: DagInstance, n_vehicles: int,
                  x_set: set, s_set: set) -> None:
    """Reject routings that break the assignment-side constraints."""
    I = instance.n_requests
    end = instance.end
    arcs = set(instance.arcs())
    for (i, j, k) in x_set:
        if not 1 <= k <= n_vehicles:
            raise BuildError(
                f"routing uses vehicle {k} outside 1..{n_vehicles}")
        if (i, j) not in arcs:
            raise BuildError(f"routing uses infeasible transition ({i}, {j})")
    for (i, j, c, k) in s_set:
        if (i, j, k) not in x_set:
            raise BuildError(
                f"station visit on unused transition ({i}, {j}) vehicle {k}")
        if c not in instance.station_options(i, j):
            raise BuildError(
                f"station {c} not usable on transition ({i}, {j})")
    for j in range(1, I + 1):
        if sum(1 for (i2, j2, _k) in x_set if j2 == j) > 1:
            raise BuildError(f"request {j} entered more than once")
        if sum(1 for (i2, j2, _k) in x_set if i2 == j) > 1:
            raise BuildError(f"request {j} left more than once")
    for k in range(1, n_vehicles + 1):
        dep = sum(1 for (i2, j2, k2) in x_set if k2 == k and i2 == 0)
        arr = sum(1 for (i2, j2, k2) in x_set if k2 == k and j2 == end)
        if dep != 1 or arr != 1:
            raise BuildError(
                f"vehicle {k} must leave the depot once and return once")
        for j in range(1, I + 1):
            inn = sum(1 for (i2, j2, k2) in x_set if k2 == k and j2 == j)
            out = sum(1 for (i2, j2, k2) in x_set if k2 == k and i2 == j)
            if inn != out:
                raise BuildError(f"vehicle {k} flow imbalance at request {j}")
    for (i, j, k) in x_set:
        nst = sum(1 for (i2, j2, _c, k2) in s_set
                  if (i2, j2, k2) == (i, j, k))
        if nst > 1:
            raise BuildError(
                f"multiple station visits on transition ({i}, {j}) "
                f"vehicle {k}")


def vehicle_chains(instance: DagInstance, n_vehicles: int,
                   x_set: set) -> dict:
    """Ordered transition list per vehicle, following the path from node 0."""
    chains = {}
    for k in range(1, n_vehicles + 1):
        nxt = {}
        for (i, j, k2) in x_set:
            if k2 == k:
                if i in nxt:
                    raise BuildError(f"vehicle {k} leaves node {i} twice")
                nxt[i] = j
        chain = []
        node = 0
        while node != instance.end:
            if node not in nxt:
                raise BuildError(f"vehicle {k} path breaks at node {node}")
            j = nxt.pop(node)
            chain.append((node, j))
            node = j
        if nxt:
            raise BuildError(f"vehicle {k} routing is not a single path")
        chains[k] = chain
    return chains


def _solve_one_chain(instance, scenario, chain, stations_by_pos,
                     allow_v2g, canonical):
    """LP for one vehicle's chain. Returns (feasible, C per (pos, c), spill
    per pos, battery level after each arc, trading cost)."""
    fleet = scenario.fleet
    e0 = fleet.initial_soc_kwh
    emax = fleet.battery_kwh
    e_con = fleet.consumption_kwh_per_km

    m = len(chain)
    arc_delta = []           # exogenous kWh change per arc (rooftop - drive)
    arc_sol = []
    c_keys, c_price, c_cap = [], [], []
    w_pos = []
    for pos, (i, j) in enumerate(chain):
        cons = float(instance.d_fp[i, j]) / 1000.0 * e_con
        price = average_price(scenario.prices, i, j, instance)
        for c in stations_by_pos.get(pos, ()):
            cons += float(instance.det_d[i, j, c]) / 1000.0 * e_con
            c_keys.append((pos, c))
            c_price.append(price)
            c_cap.append(float(instance.c_hat[i, j, c]))
        sol = solar_energy(scenario, i, j, instance)
        arc_sol.append(sol)
        arc_delta.append(sol - cons)
        if sol > _SOLAR_EPS:
            w_pos.append(pos)

    nc = len(c_keys)
    nw = len(w_pos)
    base_cum = np.cumsum(arc_delta) if m else np.zeros(0)

    if nc + nw == 0:
        # nothing to decide: the battery trajectory is fully determined
        for p in range(m - 1):
            level = e0 + base_cum[p]
            if level < -_PARAM_TOL or level > emax + _PARAM_TOL:
                return False, {}, {}, [], 0.0
        if m and abs(base_cum[m - 1]) > _PARAM_TOL:
            return False, {}, {}, [], 0.0
        levels = [e0 + float(base_cum[p]) for p in range(m)]
        if m:
            levels[m - 1] = e0
        return True, {}, {}, levels, 0.0

    # prefix coefficients: battery level after arc p is
    # e0 + base_cum[p] + P[p] @ v
    nv = nc + nw
    P = np.zeros((m, nv))
    for vi, (pos, _c) in enumerate(c_keys):
        P[pos:, vi] = 1.0
    for wi, pos in enumerate(w_pos):
        P[pos:, nc + wi] = -1.0

    rows_ub, rhs_ub = [], []
    for p in range(m - 1):
        rows_ub.append(P[p])
        rhs_ub.append(emax - e0 - base_cum[p])
        rows_ub.append(-P[p])
        rhs_ub.append(e0 + base_cum[p])
    A_ub = np.array(rows_ub) if rows_ub else None
    b_ub = np.array(rhs_ub) if rows_ub else None
    A_eq = P[m - 1:m]
    b_eq = np.array([-base_cum[m - 1]])

    obj = np.concatenate([np.array(c_price, dtype=float), np.zeros(nw)])
    lo_c = [-cap if allow_v2g else 0.0 for cap in c_cap]
    bounds = [(lo_c[t], c_cap[t]) for t in range(nc)]
    bounds += [(0.0, arc_sol[pos]) for pos in w_pos]

    res = linprog(obj, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if res.status != 0:
        return False, {}, {}, [], 0.0
    v = np.asarray(res.x, dtype=float)
    cost1 = float(obj @ v)

    if canonical and nc:
        # minimize gross traded volume at (numerically) unchanged cost
        pos_cap = np.array(c_cap, dtype=float)
        neg_cap = pos_cap if allow_v2g else np.zeros(nc)
        obj2 = np.concatenate([np.ones(2 * nc), np.zeros(nw)])

        def _split(mat):
            if mat is None:
                return None
            cpart, wpart = mat[:, :nc], mat[:, nc:]
            return np.hstack([cpart, -cpart, wpart])

        A2_ub = _split(A_ub)
        cost_row = np.concatenate([obj[:nc], -obj[:nc], np.zeros(nw)])
        if A2_ub is None:
            A2_ub = cost_row[None, :]
            b2_ub = np.array([cost1 + _COST_TOL])
        else:
            A2_ub = np.vstack([A2_ub, cost_row])
            b2_ub = np.concatenate([b_ub, [cost1 + _COST_TOL]])
        A2_eq = _split(A_eq)
        bounds2 = [(0.0, pos_cap[t]) for t in range(nc)]
        bounds2 += [(0.0, neg_cap[t]) for t in range(nc)]
        bounds2 += bounds[nc:]
        res2 = linprog(obj2, A_ub=A2_ub, b_ub=b2_ub, A_eq=A2_eq, b_eq=b_eq,
                       bounds=bounds2, method="highs")
        if res2.status == 0:
            v2c = np.asarray(res2.x[:nc]) - np.asarray(res2.x[nc:2 * nc])
            v2 = np.concatenate([v2c, np.asarray(res2.x[2 * nc:])])
            if float(obj @ v2) <= cost1 + _COST_TOL:
                v = v2

    # clip solver dust into the boxes, then replay the recursion exactly
    for t in range(nc):
        v[t] = min(max(v[t], bounds[t][0]), bounds[t][1])
    for wi, pos in enumerate(w_pos):
        v[nc + wi] = min(max(v[nc + wi], 0.0), arc_sol[pos])

    c_by_key = {c_keys[t]: float(v[t]) for t in range(nc)}
    w_by_pos = {pos: float(v[nc + wi]) for wi, pos in enumerate(w_pos)}
    levels = []
    e = e0
    for p in range(m):
        e = e + arc_delta[p]
        for (pos, c) in c_keys:
            if pos == p:
                e = e + c_by_key[(pos, c)]
        e = e - w_by_pos.get(p, 0.0)
        levels.append(e)
    cost = float(np.dot(np.array(c_price), v[:nc])) if nc else 0.0
    return True, c_by_key, w_by_pos, levels, cost


def solve_chain_charging(instance: DagInstance, scenario: Scenario,
                         x, s=None, *, allow_v2g: bool = True,
                         canonical: bool = True) -> ChainChargingResult:
    """Optimal station energies, battery levels, and spill for a routing.

    x holds the chosen transitions as (i, j, k) keys, s the station visits as
    (i, j, c, k) keys; either may be a dict of indicator values or a plain
    collection of keys. The routing must satisfy the assignment constraints;
    an energy-infeasible routing comes back with feasible=False.
    """
    x_set = _as_set(x)
    s_set = _as_set(s)
    K = scenario.fleet.n_vehicles
    check_routing(instance, K, x_set, s_set)
    chains = vehicle_chains(instance, K, x_set)

    c_vals, e_vals, spill = {}, {}, {}
    total = 0.0
    for k in range(1, K + 1):
        chain = chains[k]
        stations_by_pos = {}
        for pos, (i, j) in enumerate(chain):
            opts = sorted(c for (i2, j2, c, k2) in s_set
                          if (i2, j2, k2) == (i, j, k))
            if opts:
                stations_by_pos[pos] = opts
        ok, cv, wv, levels, cost = _solve_one_chain(
            instance, scenario, chain, stations_by_pos, allow_v2g, canonical)
        if not ok:
            return ChainChargingResult(False, {}, {}, {}, float("inf"))
        for (pos, c), val in cv.items():
            i, j = chain[pos]
            c_vals[(i, j, c, k)] = val
        for pos, val in wv.items():
            i, j = chain[pos]
            spill[(i, j, k)] = val
        e_vals[(0, k)] = scenario.fleet.initial_soc_kwh
        for pos, (i, j) in enumerate(chain):
            e_vals[(j, k)] = levels[pos]
        total += cost
    return ChainChargingResult(True, c_vals, e_vals, spill, total)

"""Branch-and-bound solver for the fleet MILP.

Best-first search over the binary variables, with bounds taken from the
bounded-variable simplex on the continuous relaxation. Nodes carry only
their branch fixings and are solved lazily on expansion. Routing binaries
branch before station choices, which branch before the served indicators,
since fixing a transition decides far more of the schedule than either of
the others. The winning assignment is replayed through the per-vehicle
chain LP, which canonicalizes the continuous part (zero trade on flat
prices, deterministic spill) and supplies the reported cost breakdown.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .chain import solve_chain_charging
from .errors import InputError, SolveError
from .model import BRANCH_RANK, MilpModel
from .simplex import solve_lp

__all__ = ["SolverConfig", "Breakdown", "Solution", "lp_relaxation", "solve",
           "solution_to_dict", "solution_from_dict"]

_INT_TOL = 1e-6
_BRANCH_RULES = ("most-fractional", "pseudo-cost")


@dataclass
class SolverConfig:
    abs_gap: float = 1e-6
    time_limit: float | None = None
    branch_rule: str = "most-fractional"
    node_limit: int | None = None


@dataclass
class Breakdown:
    charging_cost: float = 0.0
    v2g_revenue: float = 0.0
    request_revenue: float = 0.0


@dataclass
class Solution:
    """Schedule, energies, and accounting for one solved model."""
    status: str
    x: set = field(default_factory=set)
    s: set = field(default_factory=set)
    c_vals: dict = field(default_factory=dict)
    e_vals: dict = field(default_factory=dict)
    spill: dict = field(default_factory=dict)
    served: set = field(default_factory=set)
    objective: float = float("nan")
    breakdown: Breakdown = field(default_factory=Breakdown)
    gap: float = 0.0
    bound: float = float("nan")
    node_count: int = 0
    lp_iterations: int = 0
    meta: dict = field(default_factory=dict)


def lp_relaxation(model: MilpModel):
    """Optimal value and primal point of the continuous relaxation.

    Returns (inf, None) when the relaxation is infeasible and (-inf, None)
    when it is unbounded.
    """
    A, b, rel, c, lb, ub, _ = model.to_arrays()
    if A.shape[1] == 0:
        return 0.0, np.zeros(0)
    res = solve_lp(A, b, rel, c, lb, ub)
    if res.status == "optimal":
        return res.objective, res.x
    if res.status == "infeasible":
        return float("inf"), None
    if res.status == "unbounded":
        return float("-inf"), None
    raise SolveError("simplex iteration limit hit in the relaxation")


def _extract_binaries(model: MilpModel, xv: np.ndarray):
    x_set = {key for key, vi in model.x_idx.items() if xv[vi] > 0.5}
    s_set = {key for key, vi in model.s_idx.items() if xv[vi] > 0.5}
    return x_set, s_set


def _greedy_routings(model: MilpModel):
    """First-fit request chains per vehicle, with and without station stops."""
    inst = model.instance
    K = model.n_vehicles
    end = inst.end
    last = {k: 0 for k in range(1, K + 1)}
    chains = {k: [] for k in range(1, K + 1)}
    for j in range(1, inst.n_requests + 1):
        for k in range(1, K + 1):
            if inst.x_mask[last[k], j] and inst.x_mask[j, end]:
                chains[k].append(j)
                last[k] = j
                break
    x_set = set()
    for k in range(1, K + 1):
        nodes = [0] + chains[k] + [end]
        for a, bnode in zip(nodes, nodes[1:]):
            x_set.add((a, bnode, k))
    s_set = set()
    for (i, j, k) in x_set:
        opts = inst.station_options(i, j)
        if opts:
            s_set.add((i, j, opts[0], k))
    return [(x_set, s_set), (x_set, set())]


def _seed_incumbent(model: MilpModel):
    """Cheap feasible schedules so pruning bites from the first node."""
    inst, scen = model.instance, model.scenario
    K = model.n_vehicles
    idle = {(0, inst.end, k) for k in range(1, K + 1)}
    routings = [(idle, set())] + _greedy_routings(model)
    best = None
    for x_set, s_set in routings:
        res = solve_chain_charging(inst, scen, x_set, s_set,
                                   allow_v2g=model.allow_v2g)
        if not res.feasible:
            continue
        served = {j for (i, j, k) in x_set if 1 <= j <= inst.n_requests}
        val = res.cost - sum(model.fares[j] for j in served)
        if best is None or val < best[0]:
            best = (val, x_set, s_set)
    return best


def _finalize(model: MilpModel, x_set: set, s_set: set) -> Solution:
    """Replay an assignment through the chain LP and assemble the Solution."""
    inst, scen = model.instance, model.scenario
    res = solve_chain_charging(inst, scen, x_set, s_set,
                               allow_v2g=model.allow_v2g, canonical=True)
    if not res.feasible:
        raise SolveError("incumbent assignment failed the chain replay")
    served = {j for (i, j, k) in x_set if 1 <= j <= inst.n_requests}
    revenue = sum(model.fares[j] for j in served)
    charging = float(sum(model.arc_price[(i, j)] * v
                         for (i, j, c, k), v in res.c_vals.items()
                         if v > 0.0))
    v2g = float(-sum(model.arc_price[(i, j)] * v
                     for (i, j, c, k), v in res.c_vals.items() if v < 0.0))
    e_vals = dict(res.e_vals)
    for j in range(inst.n_nodes):
        for k in range(1, model.n_vehicles + 1):
            e_vals.setdefault((j, k), scen.fleet.initial_soc_kwh)
    return Solution(
        status="optimal",
        x=set(x_set), s=set(s_set),
        c_vals=dict(res.c_vals), e_vals=e_vals, spill=dict(res.spill),
        served=served,
        objective=res.cost - revenue,
        breakdown=Breakdown(charging_cost=charging, v2g_revenue=v2g,
                            request_revenue=revenue),
        meta=solution_meta(model),
    )


def solution_meta(model: MilpModel) -> dict:
    """Self-contained pricing context carried on every Solution."""
    return {
        "allow_v2g": model.allow_v2g,
        "arc_price": {f"{i},{j}": p for (i, j), p
                      in sorted(model.arc_price.items())},
        "fares": {str(j): f for j, f in sorted(model.fares.items())},
    }


def solve(model: MilpModel, cfg: SolverConfig | None = None) -> Solution:
    """Solve the MILP to within cfg.abs_gap of the optimum."""
    if cfg is None:
        cfg = SolverConfig()
    if cfg.abs_gap < 0:
        raise InputError("abs_gap must be nonnegative")
    if cfg.branch_rule not in _BRANCH_RULES:
        raise InputError(f"unknown branch rule: {cfg.branch_rule!r}")

    A, b, rel, c, lb0, ub0, int_mask = model.to_arrays()
    n = A.shape[1]
    int_idx = [int(vi) for vi in np.where(int_mask)[0]]
    rank = {vi: BRANCH_RANK.get(model.vars[vi].kind, 3) for vi in int_idx}

    t0 = time.monotonic()
    node_count = 0
    lp_iters = 0
    up_pc: dict = {}
    dn_pc: dict = {}

    def pc_estimate(table, vi):
        if vi in table:
            total, cnt = table[vi]
            return total / cnt
        return 1.0

    inc = _seed_incumbent(model)

    heap = []
    seq = 0
    heapq.heappush(heap, (float("-inf"), seq, {}, None))
    limit_hit = False
    stop_bound = None

    while heap:
        key = heap[0][0]
        if inc is not None and key >= inc[0] - cfg.abs_gap:
            stop_bound = key
            break
        if cfg.time_limit is not None and \
                time.monotonic() - t0 > cfg.time_limit:
            limit_hit = True
            stop_bound = key
            break
        if cfg.node_limit is not None and node_count >= cfg.node_limit:
            limit_hit = True
            stop_bound = key
            break

        _, _, fixings, pinfo = heapq.heappop(heap)
        lbN = lb0.copy()
        ubN = ub0.copy()
        for vi, val in fixings.items():
            lbN[vi] = val
            ubN[vi] = val
        res = solve_lp(A, b, rel, c, lbN, ubN)
        node_count += 1
        lp_iters += res.iterations
        if res.status == "infeasible":
            continue
        if res.status == "unbounded":
            return Solution(status="unbounded", node_count=node_count,
                            lp_iterations=lp_iters)
        if res.status != "optimal":
            raise SolveError("simplex iteration limit hit at a search node")
        value = res.objective

        if pinfo is not None:
            pval, bvi, direction, f = pinfo
            moved = (1.0 - f) if direction == 1 else f
            if moved > 1e-12 and math.isfinite(pval):
                gain = max(0.0, value - pval) / moved
                tbl = up_pc if direction == 1 else dn_pc
                total, cnt = tbl.get(bvi, (0.0, 0))
                tbl[bvi] = (total + gain, cnt + 1)

        if inc is not None and value >= inc[0] - cfg.abs_gap:
            continue

        xv = res.x
        frac_of = {vi: min(max(float(xv[vi]), 0.0), 1.0) for vi in int_idx}
        cand = [vi for vi in int_idx
                if min(frac_of[vi], 1.0 - frac_of[vi]) > _INT_TOL]
        if not cand:
            x_set, s_set = _extract_binaries(model, xv)
            if inc is None or value < inc[0]:
                inc = (value, x_set, s_set)
            continue

        if cfg.branch_rule == "most-fractional":
            def score(vi):
                f = frac_of[vi]
                return min(f, 1.0 - f)
        else:
            def score(vi):
                f = frac_of[vi]
                return min(pc_estimate(up_pc, vi) * (1.0 - f),
                           pc_estimate(dn_pc, vi) * f)
        bvi = min(cand, key=lambda vi: (rank[vi], -score(vi), vi))
        f = frac_of[bvi]
        for direction, val in ((0, 0.0), (1, 1.0)):
            child = dict(fixings)
            child[bvi] = val
            seq += 1
            heapq.heappush(heap, (value, seq, child,
                                  (value, bvi, direction, f)))

    if inc is None:
        return Solution(status="infeasible", node_count=node_count,
                        lp_iterations=lp_iters)

    _, x_set, s_set = inc
    sol = _finalize(model, x_set, s_set)
    sol.node_count = node_count
    sol.lp_iterations = lp_iters
    if limit_hit:
        sol.status = "feasible-with-gap"
        sol.bound = float(stop_bound) if stop_bound is not None \
            else float("-inf")
    else:
        sol.status = "optimal"
        sol.bound = float(stop_bound) if stop_bound is not None \
            else sol.objective
    sol.gap = max(0.0, sol.objective - sol.bound)
    return sol


def _num_out(v: float):
    return float(v) if math.isfinite(v) else None


def solution_to_dict(sol: Solution) -> dict:
    """JSON-ready dict; tuple keys flatten to comma-joined strings."""
    return {
        "status": sol.status,
        "objective": _num_out(sol.objective),
        "gap": _num_out(sol.gap),
        "bound": _num_out(sol.bound),
        "node_count": sol.node_count,
        "lp_iterations": sol.lp_iterations,
        "x": [list(key) for key in sorted(sol.x)],
        "s": [list(key) for key in sorted(sol.s)],
        "c_vals": {",".join(map(str, k)): v
                   for k, v in sorted(sol.c_vals.items())},
        "e_vals": {",".join(map(str, k)): v
                   for k, v in sorted(sol.e_vals.items())},
        "spill": {",".join(map(str, k)): v
                  for k, v in sorted(sol.spill.items())},
        "served": sorted(sol.served),
        "breakdown": {
            "charging_cost": sol.breakdown.charging_cost,
            "v2g_revenue": sol.breakdown.v2g_revenue,
            "request_revenue": sol.breakdown.request_revenue,
        },
        "meta": sol.meta,
    }


def solution_from_dict(d: dict) -> Solution:
    def keyed(mapping):
        return {tuple(int(p) for p in k.split(",")): float(v)
                for k, v in mapping.items()}

    bd = d.get("breakdown", {})
    return Solution(
        status=d["status"],
        x={tuple(key) for key in d.get("x", [])},
        s={tuple(key) for key in d.get("s", [])},
        c_vals=keyed(d.get("c_vals", {})),
        e_vals=keyed(d.get("e_vals", {})),
        spill=keyed(d.get("spill", {})),
        served=set(d.get("served", [])),
        objective=d["objective"] if d.get("objective") is not None
        else float("nan"),
        breakdown=Breakdown(
            charging_cost=bd.get("charging_cost", 0.0),
            v2g_revenue=bd.get("v2g_revenue", 0.0),
            request_revenue=bd.get("request_revenue", 0.0)),
        gap=d["gap"] if d.get("gap") is not None else float("inf"),
        bound=d["bound"] if d.get("bound") is not None else float("nan"),
        node_count=int(d.get("node_count", 0)),
        lp_iterations=int(d.get("lp_iterations", 0)),
        meta=dict(d.get("meta", {})),
    )

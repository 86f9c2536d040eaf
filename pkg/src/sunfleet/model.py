"""MILP construction over the request DAG.

Variables (names are the export convention; k is 1-based, station index c is
1-based over the sorted station list):

  X_i_j_k    binary, vehicle k drives transition (i, j)
  S_i_j_c_k  binary, vehicle k detours via station c on (i, j)
  C_i_j_c_k  continuous signed kWh at the station (positive buys from the
             grid, negative sells to it)
  E_j_k      continuous battery state of vehicle k at node j, kWh
  W_i_j_k    continuous curtailed rooftop energy on (i, j), kWh
  BR_j       binary, request j is served

S/C pairs are materialized only where the station detour is time-feasible with
strictly positive energy capacity; W only where the transition window captures
any rooftop energy. Masked-out transitions produce no variables and no rows.
The energy balance along a chosen transition is enforced exactly through a
big-M inequality pair that goes vacuous when the transition is unused.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BuildError
from .instance import DagInstance
from .scenario import Scenario, average_price, fare_for, solar_energy

__all__ = ["VarDef", "Row", "MilpModel", "build_model", "big_m",
           "transition_solar"]

# branching priority by variable class: routing first, then station choice,
# then the served indicators
BRANCH_RANK = {"X": 0, "S": 1, "BR": 2}


@dataclass
class VarDef:
    name: str
    kind: str          # 'X' | 'S' | 'C' | 'E' | 'SPILL' | 'BR'
    key: tuple
    lb: float
    ub: float
    obj: float
    is_int: bool


@dataclass
class Row:
    name: str
    rel: int           # -1 for <=, 0 for =, +1 for >=
    rhs: float
    coeffs: list       # list of (var_index, coefficient)


class MilpModel:
    """Assembled MILP with index maps for every variable class."""

    def __init__(self, instance: DagInstance, scenario: Scenario,
                 allow_v2g: bool):
        self.instance = instance
        self.scenario = scenario
        self.allow_v2g = allow_v2g
        self.vars: list = []
        self.rows: list = []
        self.var_index: dict = {}
        self.x_idx: dict = {}
        self.s_idx: dict = {}
        self.c_idx: dict = {}
        self.e_idx: dict = {}
        self.w_idx: dict = {}
        self.br_idx: dict = {}
        self.arc_price: dict = {}
        self.arc_solar: dict = {}
        self.fares: dict = {}
        self.big_m_value: float = 0.0
        self._arrays = None

    @property
    def n_vehicles(self) -> int:
        return self.scenario.fleet.n_vehicles

    @property
    def n_requests(self) -> int:
        return self.instance.n_requests

    def add_var(self, name, kind, key, lb, ub, obj=0.0, is_int=False) -> int:
        vi = len(self.vars)
        self.vars.append(VarDef(name, kind, key, float(lb), float(ub),
                                float(obj), is_int))
        self.var_index[name] = vi
        return vi

    def add_row(self, name, coeffs, rel, rhs) -> None:
        self.rows.append(Row(name, rel, float(rhs), list(coeffs)))

    def to_arrays(self):
        """Dense arrays (A, b, rel, c, lb, ub, int_mask) of the model."""
        if self._arrays is None:
            n = len(self.vars)
            m = len(self.rows)
            A = np.zeros((m, n))
            b = np.zeros(m)
            rel = np.zeros(m, dtype=np.int8)
            for r, row in enumerate(self.rows):
                for vi, coef in row.coeffs:
                    A[r, vi] += coef
                b[r] = row.rhs
                rel[r] = row.rel
            c = np.array([v.obj for v in self.vars])
            lb = np.array([v.lb for v in self.vars])
            ub = np.array([v.ub for v in self.vars])
            int_mask = np.array([v.is_int for v in self.vars], dtype=bool)
            self._arrays = (A, b, rel, c, lb, ub, int_mask)
        return self._arrays

    def objective_value(self, x: np.ndarray) -> float:
        c = self.to_arrays()[3]
        return float(c @ x)


def transition_solar(instance: DagInstance, scenario: Scenario) -> dict:
    """Rooftop kWh captured on each feasible transition window."""
    out = {}
    for (i, j) in instance.arcs():
        out[(i, j)] = solar_energy(scenario, i, j, instance)
    return out


def big_m(instance: DagInstance, scenario: Scenario) -> float:
    """Slack constant for the conditional energy balance: battery size plus the
    largest station exchange plus the largest rooftop capture. Large enough to
    free the balance on unused transitions, tight enough to stay well scaled."""
    max_chat = 0.0
    if instance.c_hat.size:
        masked = np.where(instance.s_mask, instance.c_hat, 0.0)
        if masked.size:
            max_chat = float(masked.max())
    sol = transition_solar(instance, scenario)
    max_sol = max(sol.values(), default=0.0)
    return float(scenario.fleet.battery_kwh) + max_chat + max_sol


def _check_consistency(instance: DagInstance, scenario: Scenario) -> None:
    if len(scenario.requests) != len(instance.requests):
        raise BuildError(
            f"scenario has {len(scenario.requests)} requests, instance has "
            f"{len(instance.requests)}")
    for a, b in zip(scenario.requests, instance.requests):
        if (a.id, a.origin, a.destination, a.request_time) != \
                (b.id, b.origin, b.destination, b.request_time):
            raise BuildError(f"scenario/instance mismatch at request {a.id}")
    if abs(scenario.fleet.charge_power_kw - instance.charge_power_kw) > 1e-9:
        raise BuildError(
            f"scenario charge power {scenario.fleet.charge_power_kw} != "
            f"instance charge power {instance.charge_power_kw}")


def build_model(instance: DagInstance, scenario: Scenario, *,
                allow_v2g: bool = True) -> MilpModel:
    """Assemble the joint assignment/charging/V2G MILP for one scenario."""
    _check_consistency(instance, scenario)
    mdl = MilpModel(instance, scenario, allow_v2g)
    I = instance.n_requests
    end = instance.end
    K = scenario.fleet.n_vehicles
    fleet = scenario.fleet
    e_con = fleet.consumption_kwh_per_km

    arcs = list(instance.arcs())
    options = {(i, j): instance.station_options(i, j) for (i, j) in arcs}
    for (i, j) in arcs:
        mdl.arc_price[(i, j)] = average_price(scenario.prices, i, j, instance)
        mdl.arc_solar[(i, j)] = solar_energy(scenario, i, j, instance)
    for j in range(1, I + 1):
        mdl.fares[j] = fare_for(scenario.fare, instance, j)
    M = big_m(instance, scenario)
    mdl.big_m_value = M

    # variables, in branching-priority class order
    for (i, j) in arcs:
        for k in range(1, K + 1):
            mdl.x_idx[(i, j, k)] = mdl.add_var(
                f"X_{i}_{j}_{k}", "X", (i, j, k), 0.0, 1.0, is_int=True)
    for (i, j) in arcs:
        for c in options[(i, j)]:
            for k in range(1, K + 1):
                mdl.s_idx[(i, j, c, k)] = mdl.add_var(
                    f"S_{i}_{j}_{c + 1}_{k}", "S", (i, j, c, k), 0.0, 1.0,
                    is_int=True)
    for (i, j) in arcs:
        price = mdl.arc_price[(i, j)]
        for c in options[(i, j)]:
            cap = float(instance.c_hat[i, j, c])
            lo = -cap if allow_v2g else 0.0
            for k in range(1, K + 1):
                mdl.c_idx[(i, j, c, k)] = mdl.add_var(
                    f"C_{i}_{j}_{c + 1}_{k}", "C", (i, j, c, k), lo, cap,
                    obj=price)
    for j in range(instance.n_nodes):
        fixed = j == 0 or j == end
        lo = fleet.initial_soc_kwh if fixed else 0.0
        hi = fleet.initial_soc_kwh if fixed else fleet.battery_kwh
        for k in range(1, K + 1):
            mdl.e_idx[(j, k)] = mdl.add_var(
                f"E_{j}_{k}", "E", (j, k), lo, hi)
    for (i, j) in arcs:
        cap = mdl.arc_solar[(i, j)]
        if cap > 1e-12:
            for k in range(1, K + 1):
                mdl.w_idx[(i, j, k)] = mdl.add_var(
                    f"W_{i}_{j}_{k}", "SPILL", (i, j, k), 0.0, cap)
    for j in range(1, I + 1):
        mdl.br_idx[j] = mdl.add_var(
            f"BR_{j}", "BR", (j,), 0.0, 1.0, obj=-mdl.fares[j], is_int=True)

    # (a) each request enters and leaves at most once, across all vehicles
    for j in range(1, I + 1):
        coeffs = [(mdl.x_idx[(i, j, k)], 1.0) for (i, jj) in arcs if jj == j
                  for k in range(1, K + 1)]
        if coeffs:
            mdl.add_row(f"SERVEIN_{j}", coeffs, -1, 1.0)
    for i in range(1, I + 1):
        coeffs = [(mdl.x_idx[(i, j, k)], 1.0) for (ii, j) in arcs if ii == i
                  for k in range(1, K + 1)]
        if coeffs:
            mdl.add_row(f"SERVEOUT_{i}", coeffs, -1, 1.0)

    # (b) every vehicle leaves the start depot once and reaches the end depot
    # once; the always-feasible (0, end) arc lets it idle
    for k in range(1, K + 1):
        out = [(mdl.x_idx[(i, j, k)], 1.0) for (i, j) in arcs if i == 0]
        mdl.add_row(f"DEPOUT_{k}", out, 0, 1.0)
        inn = [(mdl.x_idx[(i, j, k)], 1.0) for (i, j) in arcs if j == end]
        mdl.add_row(f"DEPIN_{k}", inn, 0, 1.0)

    # (c) flow conservation per vehicle at every request node
    for j in range(1, I + 1):
        for k in range(1, K + 1):
            coeffs = [(mdl.x_idx[(i, jj, k)], 1.0) for (i, jj) in arcs
                      if jj == j]
            coeffs += [(mdl.x_idx[(jj, l, k)], -1.0) for (jj, l) in arcs
                       if jj == j]
            if coeffs:
                mdl.add_row(f"FLOW_{j}_{k}", coeffs, 0, 0.0)

    # (d) at most one station visit per used transition
    for (i, j) in arcs:
        opts = options[(i, j)]
        if not opts:
            continue
        for k in range(1, K + 1):
            coeffs = [(mdl.s_idx[(i, j, c, k)], 1.0) for c in opts]
            coeffs.append((mdl.x_idx[(i, j, k)], -1.0))
            mdl.add_row(f"STLINK_{i}_{j}_{k}", coeffs, -1, 0.0)

    # (e) station energy only when the station is visited, within capacity
    for (i, j) in arcs:
        for c in options[(i, j)]:
            cap = float(instance.c_hat[i, j, c])
            for k in range(1, K + 1):
                cv = mdl.c_idx[(i, j, c, k)]
                sv = mdl.s_idx[(i, j, c, k)]
                mdl.add_row(f"CUB_{i}_{j}_{c + 1}_{k}",
                            [(cv, 1.0), (sv, -cap)], -1, 0.0)
                if allow_v2g:
                    mdl.add_row(f"CLB_{i}_{j}_{c + 1}_{k}",
                                [(cv, -1.0), (sv, -cap)], -1, 0.0)

    # (g) conditional energy balance along used transitions, big-M pair;
    # transition energy = repositioning distance plus station detour distance
    for (i, j) in arcs:
        d_km = float(instance.d_fp[i, j]) / 1000.0
        sol = mdl.arc_solar[(i, j)]
        for k in range(1, K + 1):
            xv = mdl.x_idx[(i, j, k)]
            ei = mdl.e_idx[(i, k)]
            ej = mdl.e_idx[(j, k)]
            up = [(ej, 1.0), (ei, -1.0), (xv, d_km * e_con - sol + M)]
            dn = [(ej, -1.0), (ei, 1.0), (xv, -(d_km * e_con - sol - M))]
            for c in options[(i, j)]:
                dd_km = float(instance.det_d[i, j, c]) / 1000.0
                sv = mdl.s_idx[(i, j, c, k)]
                cv = mdl.c_idx[(i, j, c, k)]
                up.append((sv, dd_km * e_con))
                up.append((cv, -1.0))
                dn.append((sv, -dd_km * e_con))
                dn.append((cv, 1.0))
            wv = mdl.w_idx.get((i, j, k))
            if wv is not None:
                up.append((wv, 1.0))
                dn.append((wv, -1.0))
            mdl.add_row(f"EBU_{i}_{j}_{k}", up, -1, M)
            mdl.add_row(f"EBL_{i}_{j}_{k}", dn, -1, M)

    # (i) served indicator equals total inflow
    for j in range(1, I + 1):
        coeffs = [(mdl.br_idx[j], 1.0)]
        coeffs += [(mdl.x_idx[(i, jj, k)], -1.0) for (i, jj) in arcs if jj == j
                   for k in range(1, K + 1)]
        mdl.add_row(f"BRDEF_{j}", coeffs, 0, 0.0)

    return mdl

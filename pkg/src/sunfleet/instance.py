"""Travel requests and the expanded request DAG.

Requests are expanded into nodes 0..I+1 where 0 and I+1 are depot
pseudo-requests bracketing the operating day. For every ordered pair (i, j)
the instance precomputes the fastest transition time/distance, the available
time between finishing i and starting j, a transition feasibility mask, and
for every charging station the detour deltas, time slack, and the maximum
energy exchangeable during the slack. All downstream layers (model, oracle,
profiles) read these tensors instead of touching the road network again.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BuildError, InputError
from .network import RoadNetwork, fastest_path

__all__ = ["TravelRequest", "DepotSpec", "DagInstance", "load_requests",
           "available_time", "build_dag"]

DAY_S = 86400


@dataclass(frozen=True)
class TravelRequest:
    """One pickup request: serve origin -> destination starting at request_time."""

    id: int
    origin: str
    destination: str
    request_time: int  # seconds from midnight, [0, 86400)


@dataclass(frozen=True)
class DepotSpec:
    """Depot node and the operating-day window vehicles must respect."""

    node: str
    day_start: int = 0
    day_end: int = DAY_S

    def __post_init__(self):
        if not (0 <= self.day_start < self.day_end <= DAY_S):
            raise InputError(
                f"depot day window [{self.day_start}, {self.day_end}] is not "
                f"inside [0, {DAY_S}]")


def load_requests(source) -> list:
    """Load travel requests from CSV (origin_node,destination_node,request_time_s)
    or a JSON list of objects with those fields.

    Returns requests sorted by (request_time, input order) with ids renumbered
    1..I. Raises InputError naming file/line on malformed rows.
    """
    if isinstance(source, (list, tuple)):
        rows = [(f"<list>[{i}]", dict(r)) for i, r in enumerate(source)]
    else:
        path = Path(source)
        if not path.exists():
            raise InputError(f"requests file not found: {path}")
        text = path.read_text()
        if path.suffix.lower() == ".json":
            try:
                data = json.loads(text)
            except json.JSONDecodeError as e:
                raise InputError(f"{path}: invalid JSON: {e}")
            rows = [(f"{path}[{i}]", dict(r)) for i, r in enumerate(data)]
        else:
            reader = csv.DictReader(io.StringIO(text))
            rows = [(f"{path}:{i}", r) for i, r in enumerate(reader, start=2)]

    parsed = []
    for where, rec in rows:
        try:
            o = str(rec["origin_node"])
            d = str(rec["destination_node"])
            t = rec["request_time_s"]
        except KeyError as e:
            raise InputError(f"{where}: missing field {e.args[0]!r}")
        try:
            t = int(round(float(t)))
        except (TypeError, ValueError):
            raise InputError(f"{where}: non-numeric request_time_s {t!r}")
        if not (0 <= t < DAY_S):
            raise InputError(f"{where}: request_time_s {t} outside [0, {DAY_S})")
        if o == d:
            raise InputError(f"{where}: origin equals destination ({o!r})")
        parsed.append((t, len(parsed), o, d))

    parsed.sort(key=lambda r: (r[0], r[1]))
    return [TravelRequest(id=i, origin=o, destination=d, request_time=t)
            for i, (t, _, o, d) in enumerate(parsed, start=1)]


def available_time(node_times, serve_times, i: int, j: int) -> float:
    """Seconds available between finishing node i and starting node j."""
    return node_times[j] - node_times[i] - serve_times[i]


@dataclass(eq=False)
class DagInstance:
    """Expanded request DAG with all precomputed transition tensors.

    Index convention: 0 = start depot, 1..I = requests sorted by time,
    I+1 = end depot. Stations are sorted node ids, indexed 0..nc-1 internally
    (1-based in exported variable names). Unreachable entries are +inf; all
    masks already fold reachability in.
    """

    requests: tuple
    depot: DepotSpec
    stations: tuple
    charge_power_kw: float

    node_time: np.ndarray    # (n,) request times, depots at day_start/day_end
    serve_time: np.ndarray   # (n,) fastest origin->destination time, 0 at depots
    serve_dist: np.ndarray   # (n,) meters of the serve trip
    t_fp: np.ndarray         # (n,n) fastest exit(i)->entry(j) seconds, diag = serve_time
    d_fp: np.ndarray         # (n,n) meters, diag = serve_dist
    t_ava: np.ndarray        # (n,n) available seconds between i and j
    x_mask: np.ndarray       # (n,n) bool, transition time-feasible
    det_t: np.ndarray        # (n,n,nc) extra seconds via station, inf infeasible
    det_d: np.ndarray        # (n,n,nc) extra meters via station (may be < 0)
    s_mask: np.ndarray       # (n,n,nc) bool, station detour time-feasible
    slack_s: np.ndarray      # (n,n,nc) idle seconds left after the detour
    c_hat: np.ndarray        # (n,n,nc) max |energy| exchangeable, kWh
    t_to_station: np.ndarray  # (n,nc) seconds exit(i)->station
    d_to_station: np.ndarray  # (n,nc) meters exit(i)->station

    @property
    def n_requests(self) -> int:
        return len(self.requests)

    @property
    def n_nodes(self) -> int:
        return self.n_requests + 2

    @property
    def end(self) -> int:
        return self.n_requests + 1

    def arcs(self):
        """Feasible transitions in row-major order."""
        n = self.n_nodes
        for i in range(n):
            for j in range(n):
                if self.x_mask[i, j]:
                    yield (i, j)

    def station_options(self, i: int, j: int) -> list:
        """Stations visitable on (i, j) with strictly positive energy capacity."""
        return [c for c in range(len(self.stations))
                if self.s_mask[i, j, c] and self.c_hat[i, j, c] > 0.0]

    def with_charge_power(self, charge_power_kw: float) -> "DagInstance":
        """Same DAG with a rescaled charger rating (c_hat scales linearly)."""
        if charge_power_kw <= 0:
            raise BuildError(f"charge power must be positive, got {charge_power_kw}")
        new = DagInstance(
            requests=self.requests, depot=self.depot, stations=self.stations,
            charge_power_kw=float(charge_power_kw),
            node_time=self.node_time, serve_time=self.serve_time,
            serve_dist=self.serve_dist, t_fp=self.t_fp, d_fp=self.d_fp,
            t_ava=self.t_ava, x_mask=self.x_mask, det_t=self.det_t,
            det_d=self.det_d, s_mask=self.s_mask, slack_s=self.slack_s,
            c_hat=self.slack_s / 3600.0 * float(charge_power_kw),
            t_to_station=self.t_to_station, d_to_station=self.d_to_station)
        return new

    def to_json(self) -> str:
        def grid(a):
            return [[None if math.isinf(v) else v for v in row] for row in a.tolist()]

        def cube(a):
            return [[[None if math.isinf(v) else v for v in row] for row in plane]
                    for plane in a.tolist()]

        obj = {
            "requests": [{"id": r.id, "origin": r.origin,
                          "destination": r.destination,
                          "request_time_s": r.request_time} for r in self.requests],
            "depot": {"node": self.depot.node, "day_start_s": self.depot.day_start,
                      "day_end_s": self.depot.day_end},
            "stations": list(self.stations),
            "charge_power_kw": self.charge_power_kw,
            "node_time": self.node_time.tolist(),
            "serve_time": self.serve_time.tolist(),
            "serve_dist": self.serve_dist.tolist(),
            "t_fp": grid(self.t_fp),
            "d_fp": grid(self.d_fp),
            "t_ava": self.t_ava.tolist(),
            "x_mask": self.x_mask.astype(int).tolist(),
            "det_t": cube(self.det_t),
            "det_d": cube(self.det_d),
            "s_mask": self.s_mask.astype(int).tolist(),
            "slack_s": self.slack_s.tolist(),
            "c_hat": self.c_hat.tolist(),
            "t_to_station": grid(self.t_to_station),
            "d_to_station": grid(self.d_to_station),
        }
        return json.dumps(obj, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "DagInstance":
        obj = json.loads(text)

        def arr(x):
            a = np.array([[math.inf if v is None else v for v in row] for row in x],
                         dtype=np.float64)
            return a

        def arr3(x):
            return np.array([[[math.inf if v is None else v for v in row]
                              for row in plane] for plane in x], dtype=np.float64)

        reqs = tuple(TravelRequest(r["id"], r["origin"], r["destination"],
                                   r["request_time_s"]) for r in obj["requests"])
        dep = DepotSpec(obj["depot"]["node"], obj["depot"]["day_start_s"],
                        obj["depot"]["day_end_s"])
        return cls(
            requests=reqs, depot=dep, stations=tuple(obj["stations"]),
            charge_power_kw=obj["charge_power_kw"],
            node_time=np.array(obj["node_time"], dtype=np.float64),
            serve_time=np.array(obj["serve_time"], dtype=np.float64),
            serve_dist=np.array(obj["serve_dist"], dtype=np.float64),
            t_fp=arr(obj["t_fp"]), d_fp=arr(obj["d_fp"]),
            t_ava=np.array(obj["t_ava"], dtype=np.float64),
            x_mask=np.array(obj["x_mask"], dtype=bool),
            det_t=arr3(obj["det_t"]), det_d=arr3(obj["det_d"]),
            s_mask=np.array(obj["s_mask"], dtype=bool),
            slack_s=np.array(obj["slack_s"], dtype=np.float64),
            c_hat=np.array(obj["c_hat"], dtype=np.float64),
            t_to_station=arr(obj["t_to_station"]),
            d_to_station=arr(obj["d_to_station"]))


def _check_requests(requests) -> None:
    last = None
    for pos, r in enumerate(requests, start=1):
        if r.id != pos:
            raise BuildError(
                f"request ids must be consecutive 1..I in time order; "
                f"position {pos} has id {r.id}")
        if last is not None and r.request_time < last:
            raise BuildError(
                f"requests not sorted by time at id {r.id} "
                f"({r.request_time} < {last})")
        last = r.request_time


def build_dag(net: RoadNetwork, requests, depot: DepotSpec,
              charge_power_kw: float) -> DagInstance:
    """Expand requests into the transition DAG with all precomputed tensors.

    Raises BuildError naming the offending request when an endpoint is
    unreachable from/to the depot or the serve trip itself has no path.
    """
    requests = tuple(requests)
    _check_requests(requests)
    if charge_power_kw <= 0:
        raise BuildError(f"charge power must be positive, got {charge_power_kw}")
    if not net.has_node(depot.node):
        raise BuildError(f"depot node {depot.node!r} not in network")
    for r in requests:
        for node, role in ((r.origin, "origin"), (r.destination, "destination")):
            if not net.has_node(node):
                raise BuildError(f"request {r.id}: {role} node {node!r} not in network")

    I = len(requests)
    n = I + 2
    stations = tuple(net.stations)
    nc = len(stations)

    entry = [depot.node] + [r.origin for r in requests] + [depot.node]
    exit_ = [depot.node] + [r.destination for r in requests] + [depot.node]
    node_time = np.array([depot.day_start] + [r.request_time for r in requests]
                         + [depot.day_end], dtype=np.float64)

    serve_time = np.zeros(n)
    serve_dist = np.zeros(n)
    for r in requests:
        p = fastest_path(net, r.origin, r.destination)
        if not p.reachable:
            raise BuildError(
                f"request {r.id}: no path {r.origin!r} -> {r.destination!r}")
        serve_time[r.id] = p.time_s
        serve_dist[r.id] = p.dist_m

    t_fp = np.full((n, n), math.inf)
    d_fp = np.full((n, n), math.inf)
    for i in range(n):
        for j in range(n):
            if i == j:
                t_fp[i, j] = serve_time[i]
                d_fp[i, j] = serve_dist[i]
                continue
            p = fastest_path(net, exit_[i], entry[j])
            if p.reachable:
                t_fp[i, j] = p.time_s
                d_fp[i, j] = p.dist_m

    # hard reachability guarantees: depot -> origin and destination -> depot
    for r in requests:
        if math.isinf(t_fp[0, r.id]):
            raise BuildError(
                f"request {r.id}: origin {r.origin!r} unreachable from depot")
        if math.isinf(t_fp[r.id, I + 1]):
            raise BuildError(
                f"request {r.id}: depot unreachable from destination "
                f"{r.destination!r}")

    t_ava = node_time[None, :] - node_time[:, None] - serve_time[:, None]

    idx = np.arange(n)
    structural = (idx[:, None] != idx[None, :]) & (idx[None, :] != 0) \
        & (idx[:, None] != I + 1)
    with np.errstate(invalid="ignore"):
        x_mask = structural & np.isfinite(t_fp) & (t_fp <= t_ava)

    st_out_t = np.full((n, nc), math.inf)
    st_out_d = np.full((n, nc), math.inf)
    st_in_t = np.full((nc, n), math.inf)
    st_in_d = np.full((nc, n), math.inf)
    for c, snode in enumerate(stations):
        for i in range(n):
            p = fastest_path(net, exit_[i], snode)
            if p.reachable:
                st_out_t[i, c] = p.time_s
                st_out_d[i, c] = p.dist_m
            q = fastest_path(net, snode, entry[i])
            if q.reachable:
                st_in_t[c, i] = q.time_s
                st_in_d[c, i] = q.dist_m

    via_t = st_out_t[:, None, :] + st_in_t.T[None, :, :]
    via_d = st_out_d[:, None, :] + st_in_d.T[None, :, :]
    with np.errstate(invalid="ignore"):
        det_t = np.where(np.isfinite(via_t) & np.isfinite(t_fp)[:, :, None],
                         via_t - t_fp[:, :, None], math.inf)
        det_d = np.where(np.isfinite(via_d) & np.isfinite(d_fp)[:, :, None],
                         via_d - d_fp[:, :, None], math.inf)
        s_mask = x_mask[:, :, None] & np.isfinite(det_t) \
            & ((t_fp[:, :, None] + det_t) <= t_ava[:, :, None])
        slack_s = np.where(s_mask, t_ava[:, :, None] - t_fp[:, :, None] - det_t, 0.0)
    c_hat = slack_s / 3600.0 * float(charge_power_kw)

    inst = DagInstance(
        requests=requests, depot=depot, stations=stations,
        charge_power_kw=float(charge_power_kw),
        node_time=node_time, serve_time=serve_time, serve_dist=serve_dist,
        t_fp=t_fp, d_fp=d_fp, t_ava=t_ava, x_mask=x_mask,
        det_t=det_t, det_d=det_d, s_mask=s_mask, slack_s=slack_s, c_hat=c_hat,
        t_to_station=st_out_t, d_to_station=st_out_d)

    # the DAG property: every feasible arc moves strictly forward in time,
    # except the always-allowed idle arc (0 -> I+1)
    ii, jj = np.nonzero(inst.x_mask)
    assert np.all((node_time[jj] >= node_time[ii]) | (jj == I + 1))
    return inst

"""Road network loading and fastest-path queries.

The network is a directed graph with integer travel times (seconds) and float
distances (meters) on arcs. Fastest paths minimize (time, distance, node
sequence) lexicographically, which makes every query deterministic even when
parallel routes tie on both time and distance. Single-source Dijkstra results
are cached on the network object, so repeated queries during instance
construction are cheap.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InputError

__all__ = ["Arc", "PathResult", "RoadNetwork", "load_network", "fastest_path",
           "detour_via_station"]


@dataclass(frozen=True)
class Arc:
    """One directed road segment."""

    tail: str
    head: str
    time_s: int      # positive travel time, seconds
    dist_m: float    # nonnegative length, meters


@dataclass(frozen=True)
class PathResult:
    """Result of a fastest-path query.

    ``time_s``/``dist_m`` are ``inf`` when ``reachable`` is False. ``nodes``
    is the full node sequence of the chosen path (empty when unreachable).
    """

    time_s: float
    dist_m: float
    reachable: bool
    nodes: tuple = ()


_UNREACHABLE = PathResult(math.inf, math.inf, False, ())


@dataclass
class RoadNetwork:
    """Directed road graph with charging stations on a subset of nodes."""

    nodes: tuple
    arcs: tuple            # tuple of Arc, parallel arcs already collapsed
    stations: tuple        # sorted node ids hosting a charging station

    # adjacency: tail -> list of (head, time_s, dist_m), sorted by head
    _adj: dict = field(default_factory=dict, repr=False)
    # Dijkstra cache: source -> (best: node -> (t, d), parent: node -> node)
    _sp: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise InputError("duplicate node ids in network")
        for a in self.arcs:
            if a.tail not in node_set or a.head not in node_set:
                raise InputError(f"arc {a.tail}->{a.head} references unknown node")
        for s in self.stations:
            if s not in node_set:
                raise InputError(f"station node {s!r} not in network")
        adj = {n: [] for n in self.nodes}
        for a in self.arcs:
            adj[a.tail].append((a.head, a.time_s, a.dist_m))
        for lst in adj.values():
            lst.sort()
        self._adj = adj
        self._sp = {}

    def has_node(self, n: str) -> bool:
        return n in self._adj


def _coerce_arc(tail, head, time_s, dist_m, where: str) -> Arc:
    tail, head = str(tail), str(head)
    try:
        t = float(time_s)
        d = float(dist_m)
    except (TypeError, ValueError):
        raise InputError(f"{where}: non-numeric time/dist on arc {tail}->{head}")
    if not (t > 0) or math.isinf(t):
        raise InputError(f"{where}: arc {tail}->{head} needs positive travel time, got {time_s}")
    if d < 0 or math.isinf(d):
        raise InputError(f"{where}: arc {tail}->{head} needs nonnegative distance, got {dist_m}")
    return Arc(tail, head, int(round(t)), d)


def _from_parts(nodes, raw_arcs, stations, where: str) -> RoadNetwork:
    nodes = tuple(str(n) for n in nodes)
    # collapse parallel arcs to the (min time, then min distance) representative
    best = {}
    for a in raw_arcs:
        key = (a.tail, a.head)
        cur = best.get(key)
        if cur is None or (a.time_s, a.dist_m) < (cur.time_s, cur.dist_m):
            best[key] = a
    arcs = tuple(best[k] for k in sorted(best))
    stations = tuple(sorted(str(s) for s in set(stations)))
    if not nodes:
        raise InputError(f"{where}: network has no nodes")
    return RoadNetwork(nodes=nodes, arcs=arcs, stations=stations)


def _load_json_obj(obj: dict, where: str) -> RoadNetwork:
    for key in ("nodes", "arcs"):
        if key not in obj:
            raise InputError(f"{where}: missing required key {key!r}")
    raw = []
    for idx, rec in enumerate(obj["arcs"]):
        if isinstance(rec, dict):
            try:
                raw.append(_coerce_arc(rec["from"], rec["to"], rec["time_s"],
                                       rec["dist_m"], f"{where} arcs[{idx}]"))
            except KeyError as e:
                raise InputError(f"{where} arcs[{idx}]: missing field {e.args[0]!r}")
        else:
            if len(rec) != 4:
                raise InputError(f"{where} arcs[{idx}]: expected [from, to, time_s, dist_m]")
            raw.append(_coerce_arc(rec[0], rec[1], rec[2], rec[3], f"{where} arcs[{idx}]"))
    return _from_parts(obj["nodes"], raw, obj.get("stations", ()), where)


def _load_sectioned_csv(text: str, where: str) -> RoadNetwork:
    """Parse the `[nodes] / [arcs] / [stations]` sectioned CSV format."""
    sections = {}
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip().lower()
            sections[current] = []
            continue
        if current is None:
            raise InputError(f"{where}:{lineno}: data before any [section] header")
        sections[current].append((lineno, s))

    def rows(name, required):
        if name not in sections:
            if required:
                raise InputError(f"{where}: missing [{name}] section")
            return []
        recs = sections[name]
        if not recs:
            return []
        header = next(csv.reader(io.StringIO(recs[0][1])))
        out = []
        for lineno, raw in recs[1:]:
            vals = next(csv.reader(io.StringIO(raw)))
            if len(vals) != len(header):
                raise InputError(f"{where}:{lineno}: expected {len(header)} fields, got {len(vals)}")
            out.append((lineno, dict(zip(header, vals))))
        return out

    nodes = [rec["id"] for _, rec in rows("nodes", required=True)]
    raw_arcs = []
    for lineno, rec in rows("arcs", required=True):
        for f in ("from", "to", "time_s", "dist_m"):
            if f not in rec:
                raise InputError(f"{where}:{lineno}: arc row missing field {f!r}")
        raw_arcs.append(_coerce_arc(rec["from"], rec["to"], rec["time_s"],
                                    rec["dist_m"], f"{where}:{lineno}"))
    stations = [rec["id"] for _, rec in rows("stations", required=False)]
    return _from_parts(nodes, raw_arcs, stations, where)


def load_network(source) -> RoadNetwork:
    """Load a road network from a JSON/CSV file path, JSON text, or parsed dict.

    Parallel arcs collapse to the fastest (then shortest) representative.
    Raises InputError naming the file and line/field on malformed input.
    """
    if isinstance(source, dict):
        return _load_json_obj(source, "<dict>")
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and len(source) < 4096 and Path(source).suffix):
        path = Path(source)
        if not path.exists():
            raise InputError(f"network file not found: {path}")
        text = path.read_text()
        if path.suffix.lower() == ".json":
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as e:
                raise InputError(f"{path}: invalid JSON: {e}")
            return _load_json_obj(obj, str(path))
        return _load_sectioned_csv(text, str(path))
    if isinstance(source, str):
        s = source.lstrip()
        if s.startswith("{"):
            try:
                obj = json.loads(source)
            except json.JSONDecodeError as e:
                raise InputError(f"<text>: invalid JSON: {e}")
            return _load_json_obj(obj, "<text>")
        return _load_sectioned_csv(source, "<text>")
    raise InputError(f"unsupported network source type: {type(source).__name__}")


def _run_dijkstra(net: RoadNetwork, source: str):
    """Single-source fastest paths minimizing (time, dist, node sequence)."""
    best = {source: (0.0, 0.0)}
    parent = {source: None}
    done = set()
    heap = [(0.0, 0.0, source)]

    def path_of(n):
        seq = []
        while n is not None:
            seq.append(n)
            n = parent[n]
        seq.reverse()
        return tuple(seq)

    while heap:
        t, d, u = heapq.heappop(heap)
        if u in done:
            continue
        if (t, d) != best[u]:
            continue
        done.add(u)
        pu = None
        for v, at, ad in net._adj[u]:
            if v in done:
                continue
            cand = (t + at, d + ad)
            cur = best.get(v)
            if cur is None or cand < cur:
                best[v] = cand
                parent[v] = u
                heapq.heappush(heap, (cand[0], cand[1], v))
            elif cand == cur:
                # exact tie on (time, dist): keep the lexicographically
                # smallest node sequence so queries are deterministic
                if pu is None:
                    pu = path_of(u)
                if pu + (v,) < path_of(v):
                    parent[v] = u
    return best, parent


def _single_source(net: RoadNetwork, source: str):
    hit = net._sp.get(source)
    if hit is None:
        hit = _run_dijkstra(net, source)
        net._sp[source] = hit
    return hit


def fastest_path(net: RoadNetwork, a: str, b: str) -> PathResult:
    """Fastest path a -> b; ties broken by distance then node sequence."""
    if not net.has_node(a) or not net.has_node(b):
        raise InputError(f"fastest_path: unknown node in query {a!r} -> {b!r}")
    best, parent = _single_source(net, a)
    if b not in best:
        return _UNREACHABLE
    t, d = best[b]
    seq = []
    n = b
    while n is not None:
        seq.append(n)
        n = parent[n]
    seq.reverse()
    return PathResult(t, d, True, tuple(seq))


def detour_via_station(net: RoadNetwork, from_node: str, to_node: str, station: str):
    """Extra (time_s, dist_m) of routing from_node -> station -> to_node.

    Returns None when the station leg is unreachable. The time delta is
    nonnegative by definition of fastest paths; the distance delta may be
    negative when the via-station route is longer in time but shorter in
    meters.
    """
    direct = fastest_path(net, from_node, to_node)
    if not direct.reachable:
        return None
    leg1 = fastest_path(net, from_node, station)
    leg2 = fastest_path(net, station, to_node)
    if not (leg1.reachable and leg2.reachable):
        return None
    dt = (leg1.time_s + leg2.time_s) - direct.time_s
    dd = (leg1.dist_m + leg2.dist_m) - direct.dist_m
    return (dt, dd)

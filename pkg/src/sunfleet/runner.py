"""Manifest-driven batch runs: sample, solve, analyze, and write reports.

A manifest is one JSON document naming the inputs (network, request pool,
tariff, solar, fleet, fares), the sampling parameters, the solver settings,
and the output directory. Relative paths resolve against the manifest's own
directory. Outputs are deterministic byte-for-byte for a fixed manifest and
seed: no timestamps, sorted keys, fixed float formatting.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .analyze import (SampleRun, aggregate_samples, cost_breakdown,
                      emit_report, power_profile, validate)
from .errors import InputError
from .instance import DepotSpec, build_dag, load_requests
from .milp import Solution, SolverConfig, solution_from_dict, solve, \
    solution_to_dict
from .model import build_model
from .mps import export_model
from .network import load_network
from .scenario import (DEFAULT_CHARGE_POWER_BY_BATTERY, FareModel, FleetSpec,
                       consumption_for_battery, load_prices, load_solar,
                       sample_scenarios)

__all__ = ["load_manifest", "prepare_batch", "run_build", "run_solve",
           "run_sweep", "run_validate"]

_DEFAULT_SAMPLING = {
    "seed": 0,
    "n_samples": 4,
    "requests_per_sample": 200,
    "vehicles_per_sample": 5,
    "mode": "independent",
}


def _fmt(v: float) -> str:
    v = float(v)
    if v == 0.0:
        v = 0.0
    return format(v, ".12g")


def load_manifest(path) -> dict:
    """Read a manifest JSON and fill defaults; paths stay as written."""
    p = Path(path)
    if not p.exists():
        raise InputError(f"manifest not found: {p}")
    try:
        man = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"manifest {p} is not valid JSON: {exc}") from exc
    if not isinstance(man, dict):
        raise InputError(f"manifest {p} must hold a JSON object")
    for key in ("network", "requests"):
        if key not in man:
            raise InputError(f"manifest {p} is missing required key {key!r}")
    man.setdefault("depot", {"node": None})
    man.setdefault("prices", {"duck": {}})
    man.setdefault("solar", {"season": "summer"})
    man.setdefault("fleet", {})
    man.setdefault("fare", {})
    sampling = dict(_DEFAULT_SAMPLING)
    sampling.update(man.get("sampling", {}))
    man["sampling"] = sampling
    man.setdefault("fleet_total_vehicles", 800)
    man.setdefault("solver", {})
    man.setdefault("sweep", {"batteries": [20, 40, 60]})
    man.setdefault("out", "runs/out")
    man["_base_dir"] = str(p.parent)
    return man


def _resolve(man: dict, ref):
    """Resolve a path-like manifest entry against the manifest directory."""
    if isinstance(ref, dict):
        if "path" in ref:
            return {**ref, "path": str(Path(man["_base_dir"]) / ref["path"])}
        return ref
    path = Path(ref)
    if not path.is_absolute():
        path = Path(man["_base_dir"]) / path
    return path


def _load_inputs(man: dict):
    net_ref = man["network"]
    if isinstance(net_ref, dict):
        net = load_network(net_ref)
    else:
        net_path = _resolve(man, net_ref)
        if not Path(net_path).exists():
            raise InputError(f"network file not found: {net_path}")
        net = load_network(str(net_path))

    req_path = _resolve(man, man["requests"])
    if not Path(req_path).exists():
        raise InputError(f"requests file not found: {req_path}")
    pool = load_requests(str(req_path))

    depot_cfg = dict(man["depot"])
    node = depot_cfg.get("node")
    if node is None:
        raise InputError("manifest depot must name a node")
    depot = DepotSpec(node=node,
                      day_start=int(depot_cfg.get("day_start", 0)),
                      day_end=int(depot_cfg.get("day_end", 86400)))
    prices = load_prices(_resolve(man, man["prices"]))
    solar = load_solar(_resolve(man, man["solar"]))
    fleet = FleetSpec(
        n_vehicles=int(man["sampling"]["vehicles_per_sample"]),
        **{k: v for k, v in man["fleet"].items() if k != "n_vehicles"})
    fare = FareModel(**man["fare"])
    return net, pool, depot, prices, solar, fleet, fare


def prepare_batch(man: dict, *, fleet: FleetSpec | None = None):
    """Sampled (scenario, instance) pairs plus the shared inputs."""
    net, pool, depot, prices, solar, base_fleet, fare = _load_inputs(man)
    if fleet is None:
        fleet = base_fleet
    sampling = man["sampling"]
    scens = sample_scenarios(
        pool, int(sampling["requests_per_sample"]), fleet.n_vehicles,
        int(sampling["n_samples"]), int(sampling["seed"]),
        fleet=fleet, prices=prices, solar=solar, fare=fare,
        mode=sampling.get("mode", "independent"))
    pairs = []
    for scen in scens:
        inst = build_dag(net, list(scen.requests), depot,
                         fleet.charge_power_kw)
        pairs.append((scen, inst))
    return pairs, (net, pool, depot, prices, solar, fleet, fare)


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _manifest_echo(man: dict) -> dict:
    return {k: v for k, v in man.items() if not k.startswith("_")}


def run_build(man: dict, out_dir, *, dry_run: bool = False) -> Path | None:
    """Build the full-pool instance; serialize unless dry_run."""
    net, pool, depot, _prices, _solar, fleet, _fare = _load_inputs(man)
    inst = build_dag(net, pool, depot, fleet.charge_power_kw)
    if dry_run:
        return None
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "instance.json"
    path.write_text(inst.to_json())
    _write_json(out / "run_manifest.json", _manifest_echo(man))
    return path


def _solve_one(payload):
    idx, scen, inst, cfg_kwargs = payload
    mdl = build_model(inst, scen)
    sol = solve(mdl, SolverConfig(**cfg_kwargs))
    return idx, sol, export_model(mdl, "mps")


def run_solve(man: dict, out_dir, *, export_only: bool = False,
              jobs: int = 1, dry_run: bool = False) -> dict:
    """Solve (or just export) every sample; emit per-sample and fleet files.

    Returns {"statuses": [...], "ok": [...], "out": path} for exit handling.
    """
    pairs, _shared = prepare_batch(man)
    cfg_kwargs = dict(man["solver"])
    out = Path(out_dir)

    if dry_run:
        return {"statuses": ["dry-run"] * len(pairs), "ok": [], "out": out,
                "n_samples": len(pairs)}

    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "run_manifest.json", _manifest_echo(man))

    if export_only:
        statuses = []
        for idx, (scen, inst) in enumerate(pairs):
            sdir = out / "samples" / f"sample_{idx:03d}"
            sdir.mkdir(parents=True, exist_ok=True)
            mdl = build_model(inst, scen)
            (sdir / "model.mps").write_text(export_model(mdl, "mps"))
            statuses.append("exported")
        return {"statuses": statuses, "ok": [True] * len(pairs), "out": out,
                "n_samples": len(pairs)}

    payloads = [(idx, scen, inst, cfg_kwargs)
                for idx, (scen, inst) in enumerate(pairs)]
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = sorted(pool.map(_solve_one, payloads))
    else:
        results = [_solve_one(p) for p in payloads]

    statuses, valid_flags, runs = [], [], []
    for (idx, sol, mps_doc) in results:
        scen, inst = pairs[idx]
        sdir = out / "samples" / f"sample_{idx:03d}"
        sdir.mkdir(parents=True, exist_ok=True)
        (sdir / "model.mps").write_text(mps_doc)
        _write_json(sdir / "solution.json", solution_to_dict(sol))
        report = validate(sol, inst, scen)
        prof = power_profile(sol, inst, scen)
        bd = cost_breakdown(sol, scen)
        emit_report(prof, bd, sdir, status=sol.status, gap=sol.gap)
        if not report.ok:
            _write_json(sdir / "violations.json",
                        [dataclasses.asdict(v) for v in report.violations])
        statuses.append(sol.status)
        valid_flags.append(report.ok)
        runs.append(SampleRun(sol, scen, inst, profile=prof))

    fleet_prof, fleet_bd = aggregate_samples(
        runs, int(man["fleet_total_vehicles"]))
    emit_report(fleet_prof, fleet_bd, out / "fleet",
                status=None, gap=None)
    return {"statuses": statuses, "ok": valid_flags, "out": out,
            "n_samples": len(pairs)}


def _sweep_power_map(man: dict) -> dict:
    raw = man.get("sweep", {}).get("power_map")
    if raw is None:
        return dict(DEFAULT_CHARGE_POWER_BY_BATTERY)
    return {float(k): float(v) for k, v in raw.items()}


def run_sweep(man: dict, out_dir, *, batteries=None, jobs: int = 1,
              dry_run: bool = False) -> list:
    """Battery-size design study: each size x solar on/off over the batch.

    Each row reports the fleet-scaled aggregate of the sample batch. The
    consumption-per-km shifts with pack mass, the charger rating follows the
    configured size-to-power map, and the initial state of energy keeps the
    reference state-of-charge fraction.
    """
    power_map = _sweep_power_map(man)
    if batteries is None:
        batteries = man.get("sweep", {}).get("batteries", [20, 40, 60])
    batteries = [float(b) for b in batteries]
    if not batteries:
        raise InputError("sweep needs at least one battery size")
    for b in batteries:
        if b not in power_map:
            raise InputError(
                f"battery size {b:g} kWh has no charge power in the "
                f"size-to-power map {power_map}")

    _net, _pool, _depot, _prices, _solar, ref_fleet, _fare = \
        _load_inputs(man)
    rows = []
    for b in batteries:
        for solar_on in (True, False):
            fleet = dataclasses.replace(
                ref_fleet,
                battery_kwh=b,
                initial_soc_kwh=ref_fleet.initial_soc_kwh
                * b / ref_fleet.battery_kwh,
                consumption_kwh_per_km=consumption_for_battery(
                    ref_fleet.consumption_kwh_per_km,
                    ref_fleet.battery_kwh, b),
                charge_power_kw=power_map[b],
                solar_enabled=solar_on,
            )
            pairs, _shared = prepare_batch(man, fleet=fleet)
            if dry_run:
                continue
            cfg_kwargs = dict(man["solver"])
            payloads = [(idx, scen, inst, cfg_kwargs)
                        for idx, (scen, inst) in enumerate(pairs)]
            if jobs > 1 and len(payloads) > 1:
                with ProcessPoolExecutor(max_workers=jobs) as pool:
                    results = sorted(pool.map(_solve_one, payloads))
            else:
                results = [_solve_one(p) for p in payloads]
            runs = [SampleRun(sol, pairs[idx][0], pairs[idx][1])
                    for (idx, sol, _doc) in results]
            _prof, bd = aggregate_samples(runs,
                                          int(man["fleet_total_vehicles"]))
            rows.append({
                "battery_kwh": b,
                "solar": solar_on,
                "charging_cost": bd.charging_cost,
                "v2g_revenue": bd.v2g_revenue,
                "trading_profit": bd.trading_profit,
                "request_revenue": bd.request_revenue,
                "J": bd.charging_cost - bd.v2g_revenue - bd.request_revenue,
            })
    if dry_run:
        return []

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "run_manifest.json", _manifest_echo(man))
    lines = ["battery_kwh,solar,charging_cost,v2g_revenue,trading_profit,"
             "request_revenue,J"]
    for row in rows:
        lines.append(",".join([
            _fmt(row["battery_kwh"]),
            "on" if row["solar"] else "off",
            _fmt(row["charging_cost"]),
            _fmt(row["v2g_revenue"]),
            _fmt(row["trading_profit"]),
            _fmt(row["request_revenue"]),
            _fmt(row["J"]),
        ]))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    return rows


def run_validate(man: dict, out_dir) -> dict:
    """Re-validate previously written sample solutions under out_dir."""
    pairs, _shared = prepare_batch(man)
    out = Path(out_dir)
    results = []
    for idx, (scen, inst) in enumerate(pairs):
        spath = out / "samples" / f"sample_{idx:03d}" / "solution.json"
        if not spath.exists():
            raise InputError(f"solution file not found: {spath}")
        sol = solution_from_dict(json.loads(spath.read_text()))
        report = validate(sol, inst, scen)
        results.append((idx, report))
    return {"reports": results,
            "ok": all(rep.ok for _idx, rep in results)}

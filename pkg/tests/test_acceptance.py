"""End-to-end acceptance gate.

Each test prints one PASS/FAIL line (straight to the terminal, bypassing
capture) and asserts the same condition, so the suite output doubles as the
acceptance report.
"""

import dataclasses
import time

import numpy as np
import pytest

from sunfleet.analyze import power_profile, validate
from sunfleet.instance import DepotSpec, TravelRequest, build_dag
from sunfleet.milp import solve
from sunfleet.model import build_model
from sunfleet.mps import export_model, import_solution
from sunfleet.network import load_network
from sunfleet.oracle import brute_force_oracle
from sunfleet.scenario import consumption_for_battery, solar_energy

import mutants
from conftest import duck_problem, random_problem
from test_analyze import make_mutant, _EQTAG
from test_cli import _tree_bytes, _write_manifest
from test_mps import GOLDEN, _fixture_model


_CAPTURE = None


@pytest.fixture(scope="module", autouse=True)
def _report_channel(request):
    """Route the per-criterion report lines past pytest's capture."""
    global _CAPTURE
    _CAPTURE = request.config.pluginmanager.getplugin("capturemanager")
    yield
    _CAPTURE = None


def _line(num, ok, detail):
    verdict = "PASS" if ok else "FAIL"
    msg = f"ACCEPTANCE {num:>2} {verdict} — {detail}"
    if _CAPTURE is not None:
        with _CAPTURE.global_and_fixture_disabled():
            print(msg, flush=True)
    else:
        print(msg, flush=True)


def _tp(sol):
    return sol.breakdown.v2g_revenue - sol.breakdown.charging_cost


def _vwaps(sol):
    """(volume-weighted purchase price, sale price) or None if one-sided."""
    prices = sol.meta.get("arc_price")
    if not prices:
        return None
    buy_e = buy_c = sell_e = sell_c = 0.0
    for (i, j, c, k), v in sol.c_vals.items():
        p = float(prices[f"{i},{j}"])
        if v > 1e-9:
            buy_e += v
            buy_c += p * v
        elif v < -1e-9:
            sell_e += -v
            sell_c += -p * v
    if buy_e <= 1e-9 or sell_e <= 1e-9:
        return None
    return buy_c / buy_e, sell_c / sell_e


# ---------------------------------------------------------------------------
# shared solved batches

@pytest.fixture(scope="module")
def random_oracle_batch():
    t0 = time.monotonic()
    runs = []
    worst = 0.0
    matched = 0
    for seed in range(200):
        inst, scen = random_problem(seed)
        sol = solve(build_model(inst, scen))
        ora = brute_force_oracle(inst, scen)
        assert sol.status == ora.status, f"seed {seed} status mismatch"
        if sol.status == "optimal":
            diff = abs(sol.objective - ora.objective)
            worst = max(worst, diff)
            matched += 1
            runs.append((sol, inst, scen))
    return {"runs": runs, "worst": worst, "matched": matched,
            "n": 200, "elapsed": time.monotonic() - t0}


@pytest.fixture(scope="module")
def dominance_batch():
    """50 station-bearing random days with five controlled counterparts."""
    t0 = time.monotonic()
    rows = []
    n_violations = 0
    seed = 1000
    while len(rows) < 50:
        seed += 1
        inst, scen, parts = random_problem(
            seed, force_solar=True, force_v2g_price_spread=True,
            return_parts=True)
        if not parts["spec"]["stations"] or not inst.s_mask.any():
            continue
        solved = []

        base = solve(build_model(inst, scen))
        if base.status != "optimal":
            continue
        solved.append((base, inst, scen))

        scen_off = dataclasses.replace(
            scen, fleet=dataclasses.replace(scen.fleet, solar_enabled=False))
        no_solar = solve(build_model(inst, scen_off))
        solved.append((no_solar, inst, scen_off))

        no_v2g = solve(build_model(inst, scen, allow_v2g=False))
        solved.append((no_v2g, inst, scen))

        variants = {}
        for p in (8.0, 22.0):
            inst_p = inst.with_charge_power(p)
            scen_p = dataclasses.replace(
                scen,
                fleet=dataclasses.replace(scen.fleet, charge_power_kw=p))
            variants[p] = solve(build_model(inst_p, scen_p))
            solved.append((variants[p], inst_p, scen_p))

        spec2 = dict(parts["spec"])
        spec2["stations"] = parts["spec"]["stations"][:-1]
        inst_minus = build_dag(load_network(spec2), parts["requests"],
                               parts["depot"], parts["charge_power"])
        fewer = solve(build_model(inst_minus, scen))
        solved.append((fewer, inst_minus, scen))

        for s, i_, sc_ in solved:
            rep = validate(s, i_, sc_)
            n_violations += len(rep.violations)
        rows.append({
            "solar_on": base.objective, "solar_off": no_solar.objective,
            "v2g": base.objective, "charge_only": no_v2g.objective,
            "p22": variants[22.0].objective, "p8": variants[8.0].objective,
            "with_st": base.objective, "without_st": fewer.objective,
            "base": base,
        })
    return {"rows": rows, "violations": n_violations,
            "elapsed": time.monotonic() - t0}


@pytest.fixture(scope="module")
def duck_batch():
    """50 single-vehicle days against the two-peak tariff, mostly idle."""
    t0 = time.monotonic()
    bands = [(0, 21600), (21600, 32400), (32400, 57600),
             (57600, 72000), (72000, 86400)]
    runs = []
    for seed in range(50):
        inst, scen = duck_problem(seed)
        sol = solve(build_model(inst, scen))
        assert sol.status == "optimal", f"duck seed {seed}: {sol.status}"
        rep = validate(sol, inst, scen)
        assert rep.ok, f"duck seed {seed}: {rep.codes()}"
        prof = power_profile(sol, inst, scen, bin_width=300)
        dt_h = prof.bin_width / 3600.0
        net = {}
        for (a, b) in bands:
            sel = (prof.bin_start_s >= a) & (prof.bin_start_s < b)
            net[(a, b)] = float(np.sum(
                (prof.grid_charge_kw[sel] - prof.v2g_kw[sel]) * dt_h))
        busy = 0.0
        for (i, j, k) in sol.x:
            busy += float(inst.t_fp[i, j]) + float(inst.serve_time[j])
            for (i2, j2, c, k2) in sol.s:
                if (i2, j2, k2) == (i, j, k):
                    busy += float(inst.det_t[i, j, c])
        idle = 1.0 - busy / 86400.0
        runs.append({"sol": sol, "net": net, "idle": idle})
    return {"runs": runs, "elapsed": time.monotonic() - t0}


# ---------------------------------------------------------------------------
# the ten criteria

def test_criterion_1_oracle_equivalence(random_oracle_batch):
    b = random_oracle_batch
    ok = b["matched"] >= 1 and b["worst"] <= 1e-6 and b["elapsed"] < 600.0
    _line(1, ok,
          f"exact solver matches enumeration on {b['matched']}/{b['n']} "
          f"optimal instances, worst |dJ| = {b['worst']:.2e}, "
          f"{b['elapsed']:.1f}s")
    assert b["worst"] <= 1e-6
    assert b["elapsed"] < 600.0


def test_criterion_2_validator_soundness():
    n_ok = 0
    total = 0
    for family in mutants.FAMILIES:
        for variant in range(10):
            total += 1
            sol, inst, scen = make_mutant(family, variant)
            rep = validate(sol, inst, scen)
            if rep.ok or family not in rep.codes():
                continue
            msg = next(v.message for v in rep.violations
                       if v.code == family)
            if _EQTAG[family] in msg:
                n_ok += 1
    ok = n_ok == total
    _line(2, ok,
          f"{n_ok}/{total} corrupted solutions rejected naming the "
          f"violated equation (10 per family, Eqs. 4-12)")
    assert n_ok == total


def test_criterion_3_dominance(dominance_batch):
    rows = dominance_batch["rows"]
    tol = 1e-9
    checks = {
        "solar": sum(r["solar_on"] <= r["solar_off"] + tol for r in rows),
        "v2g": sum(r["v2g"] <= r["charge_only"] + tol for r in rows),
        "charge power": sum(r["p22"] <= r["p8"] + tol for r in rows),
        "station": sum(r["with_st"] <= r["without_st"] + tol for r in rows),
    }
    n = len(rows)
    ok = all(v == n for v in checks.values()) and \
        dominance_batch["violations"] == 0
    _line(3, ok,
          f"relaxing the fleet never hurts on {n} instances — " +
          ", ".join(f"{k} {v}/{n}" for k, v in checks.items()) +
          f"; {dominance_batch['violations']} constraint violations")
    assert checks == {k: n for k in checks}
    assert dominance_batch["violations"] == 0


def test_criterion_4_no_loss_trades(random_oracle_batch, duck_batch,
                                    dominance_batch):
    sols = [sol for (sol, _i, _s) in random_oracle_batch["runs"]]
    sols += [r["sol"] for r in duck_batch["runs"]]
    sols += [r["base"] for r in dominance_batch["rows"]]
    n_checked = 0
    n_ok = 0
    worst = float("-inf")
    for sol in sols:
        vw = _vwaps(sol)
        if vw is None:
            continue
        buy, sell = vw
        n_checked += 1
        worst = max(worst, buy - sell)
        if buy <= sell + 1e-6:
            n_ok += 1
    ok = n_checked > 0 and n_ok == n_checked
    _line(4, ok,
          f"volume-weighted purchase price <= sale price in "
          f"{n_ok}/{n_checked} two-sided schedules "
          f"(worst margin {worst:.2e})")
    assert n_checked > 0
    assert n_ok == n_checked


def test_criterion_5_duck_curve_response(duck_batch):
    runs = duck_batch["runs"]
    cheap = [(32400, 57600), (0, 21600)]       # 0.15 midday, 0.22 night
    dear = [(57600, 72000), (21600, 32400)]    # 0.34 evening, 0.32 morning
    n_pattern = 0
    for r in runs:
        draws = all(r["net"][b] > 0.0 for b in cheap)
        injects = all(r["net"][b] < 0.0 for b in dear)
        if draws and injects:
            n_pattern += 1
    idle_ok = all(r["idle"] >= 0.30 for r in runs)
    frac = n_pattern / len(runs)
    ok = frac >= 0.90 and idle_ok
    _line(5, ok,
          f"{n_pattern}/{len(runs)} days draw in both cheap bands and "
          f"inject in both peak bands ({frac:.0%}, all days >= 30% idle)")
    assert idle_ok
    assert frac >= 0.90


def test_criterion_6_solar_value():
    improvements = []
    predicted = []
    for seed in range(12):
        inst, scen_on = duck_problem(seed, solar_enabled=True)
        _, scen_off = duck_problem(seed, solar_enabled=False)
        on = solve(build_model(inst, scen_on))
        off = solve(build_model(inst, scen_off))
        improvements.append(_tp(on) - _tp(off))
        mean_p = scen_on.prices.mean_over(0.0, 86400.0)
        predicted.append(mean_p * sum(
            solar_energy(scen_on, i, j, inst) for (i, j, _k) in on.x))
    ratio = float(np.mean(improvements)) / float(np.mean(predicted))
    ok = 0.5 <= ratio <= 1.5
    _line(6, ok,
          f"mean trading gain from rooftop solar is {ratio:.2f}x the "
          f"harvested energy at the mean tariff (within +/-50%)")
    assert 0.5 <= ratio <= 1.5


def test_criterion_7_battery_scaling():
    pmap = {20.0: 8.0, 60.0: 22.0}
    tp = {20.0: [], 60.0: []}
    for seed in range(10):
        for b in (20.0, 60.0):
            inst, scen = duck_problem(
                seed, battery_kwh=b, initial_soc_kwh=12.0 * b / 60.0,
                charge_power_kw=pmap[b],
                consumption_kwh_per_km=consumption_for_battery(
                    0.12, 60.0, b))
            sol = solve(build_model(inst, scen))
            assert sol.status == "optimal"
            tp[b].append(_tp(sol))
    small, large = float(np.mean(tp[20.0])), float(np.mean(tp[60.0]))
    ok = large >= small - 1e-9
    _line(7, ok,
          f"mean trading profit grows with pack size: "
          f"{small:.2f} (20 kWh @ 8 kW) -> {large:.2f} (60 kWh @ 22 kW)")
    assert large >= small - 1e-9


def test_criterion_8_window_capacity_values():
    net = load_network({
        "nodes": ["A", "B", "C", "S"],
        "arcs": [
            ["A", "B", 600, 4000], ["B", "C", 1800, 12000],
            ["B", "S", 1080, 7000], ["S", "B", 1080, 7000],
            ["S", "C", 1080, 7000], ["C", "S", 1080, 7000],
            ["A", "C", 2000, 14000], ["C", "A", 2000, 14000],
            ["A", "S", 1500, 10000], ["S", "A", 1500, 10000],
        ],
        "stations": ["S"],
    })
    reqs = [
        TravelRequest(id=1, origin="A", destination="B", request_time=28800),
        TravelRequest(id=2, origin="C", destination="A", request_time=33000),
    ]
    inst = build_dag(net, reqs, DepotSpec(node="A"), 22.0)
    cap = float(inst.c_hat[1, 2, 0])
    exact = cap == 8.8

    reqs_tight = [
        TravelRequest(id=1, origin="A", destination="B", request_time=28800),
        TravelRequest(id=2, origin="C", destination="A", request_time=31000),
    ]
    inst2 = build_dag(net, reqs_tight, DepotSpec(node="A"), 22.0)
    zeroed = float(inst2.c_hat[1, 2, 0]) == 0.0 and \
        not bool(inst2.s_mask[1, 2, 0])
    ok = exact and zeroed
    _line(8, ok,
          f"window capacity is exactly 8.8 kWh for the 3600s/1800s/360s "
          f"layover at 22 kW (got {cap!r}) and 0 when the detour cannot "
          f"fit")
    assert exact
    assert zeroed


def test_criterion_9_interchange():
    model = _fixture_model()
    doc1 = export_model(model, fmt="mps")
    doc2 = export_model(_fixture_model(), fmt="mps")
    stable = doc1 == doc2 and \
        doc1.encode() == (GOLDEN / "fixture_model.mps").read_bytes()

    external = "skipped (scipy.optimize.milp unavailable)"
    ext_ok = True
    try:
        from scipy.optimize import Bounds, LinearConstraint, milp
    except ImportError:
        milp = None
    if milp is not None:
        A, b, rel, c, lb, ub, int_mask = model.to_arrays()
        con_lb = np.where(rel == 0, b, np.where(rel == 1, b, -np.inf))
        con_ub = np.where(rel == 0, b, np.where(rel == -1, b, np.inf))
        res = milp(c=c, constraints=LinearConstraint(A, con_lb, con_ub),
                   bounds=Bounds(lb, ub),
                   integrality=int_mask.astype(int))
        doc = "\n".join(f"{model.vars[vi].name} {float(res.x[vi])!r}"
                        for vi in range(len(model.vars)))
        imported = import_solution(model, doc)
        ours = solve(model)
        gap = abs(imported.objective - ours.objective)
        ext_ok = res.status == 0 and gap <= 1e-5
        external = f"external MILP objective matches within {gap:.2e}"
    ok = stable and ext_ok
    _line(9, ok, f"MPS export is byte-stable; {external}")
    assert stable
    assert ext_ok


def test_criterion_10_reproducible_pipeline(tmp_path):
    man = _write_manifest(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    from sunfleet.cli import main
    rc1 = main(["solve", "--manifest", str(man), "--out", str(a)])
    rc2 = main(["solve", "--manifest", str(man), "--out", str(b)])
    ta, tb = _tree_bytes(a), _tree_bytes(b)
    same = rc1 == rc2 == 0 and ta == tb
    _line(10, same,
          f"two runs from one manifest+seed produce byte-identical "
          f"output trees ({len(ta)} files)")
    assert rc1 == 0 and rc2 == 0
    assert set(ta) == set(tb)
    for name in ta:
        assert ta[name] == tb[name], f"{name} differs"

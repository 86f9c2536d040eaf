"""Time the bounded-variable simplex kernel: compiled vs pure numpy.

Builds LP relaxations of random desk-scale programs and times solve_lp
with each backend on the same matrices. Run from the repository root:

    python3 benchmarks/bench_lp.py [--sizes 4,6,8] [--repeat 5]

The compiled backend needs numba; without it only numpy timings print.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sunfleet.instance import DepotSpec, TravelRequest, build_dag
from sunfleet.model import build_model
from sunfleet.network import load_network
from sunfleet.scenario import (FareModel, FleetSpec, Scenario,
                               default_duck_prices, default_solar)
from sunfleet.simplex import solve_lp

try:
    import numba  # noqa: F401
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def _random_net(rng):
    names = ["n0", "n1", "n2", "n3", "n4", "n5"]
    arcs = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            t = float(rng.integers(240, 900))
            d = t * float(rng.uniform(6.0, 9.0))
            arcs.append({"from": a, "to": b, "time_s": t, "dist_m": d})
            arcs.append({"from": b, "to": a, "time_s": t, "dist_m": d})
    return load_network({"nodes": names, "arcs": arcs,
                         "stations": ["n4", "n5"]})


def _make_arrays(n_requests: int, seed: int):
    rng = np.random.default_rng(seed)
    net = _random_net(rng)
    times = np.sort(rng.integers(7 * 3600, 20 * 3600, size=n_requests))
    reqs = []
    for i, t in enumerate(times, start=1):
        o, d = rng.choice(["n0", "n1", "n2", "n3"], size=2, replace=False)
        reqs.append(TravelRequest(id=i, origin=str(o), destination=str(d),
                                  request_time=int(t)))
    inst = build_dag(net, reqs, DepotSpec(node="n0"), 22.0)
    fleet = FleetSpec(n_vehicles=2)
    scen = Scenario(sample_id=0, requests=tuple(reqs), fleet=fleet,
                    prices=default_duck_prices(), solar=default_solar(),
                    fare=FareModel())
    return build_model(inst, scen).to_arrays()


def _time_backend(arrays_list, backend: str, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        for (A, b, rel, c, lb, ub, _mask) in arrays_list:
            solve_lp(A, b, rel, c, lb, ub, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="4,6,8",
                    help="comma-separated request counts")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--programs", type=int, default=10,
                    help="random programs per size")
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",") if s]

    print(f"{'requests':>8} {'rows':>6} {'cols':>6} "
          f"{'numpy (s)':>10} {'numba (s)':>10} {'speedup':>8}")
    for n in sizes:
        arrays_list = [_make_arrays(n, seed) for seed in range(args.programs)]
        rows = int(np.mean([a[0].shape[0] for a in arrays_list]))
        cols = int(np.mean([a[0].shape[1] for a in arrays_list]))
        if HAVE_NUMBA:
            _time_backend(arrays_list[:1], "numba", 1)  # compile warm-up
        t_np = _time_backend(arrays_list, "numpy", args.repeat)
        if HAVE_NUMBA:
            t_nb = _time_backend(arrays_list, "numba", args.repeat)
            print(f"{n:>8} {rows:>6} {cols:>6} {t_np:>10.4f} "
                  f"{t_nb:>10.4f} {t_np / t_nb:>7.1f}x")
        else:
            print(f"{n:>8} {rows:>6} {cols:>6} {t_np:>10.4f} "
                  f"{'n/a':>10} {'n/a':>8}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

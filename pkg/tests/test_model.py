"""MILP construction: variables, rows, coefficients, big-M."""

import numpy as np
import pytest

from sunfleet.errors import BuildError
from sunfleet.instance import DepotSpec, TravelRequest, build_dag
from sunfleet.model import build_model, transition_solar
from sunfleet.network import load_network
from sunfleet.scenario import (FareModel, FleetSpec, SolarProfile,
                               average_price, fare_for, solar_energy)

from conftest import make_scenario

from test_instance import _chat_fixture


def _fixture(solar=None, fleet=None):
    net, reqs = _chat_fixture()
    # r2 moved to 33000 s so every feasible arc offers the station
    reqs = [reqs[0],
            TravelRequest(id=2, origin="C", destination="A",
                          request_time=33000)]
    inst = build_dag(net, reqs, DepotSpec(node="A"), 22.0)
    scen = make_scenario(reqs, fleet=fleet or FleetSpec(n_vehicles=1),
                         solar=solar)
    return inst, scen


class TestVariableLayout:
    def test_counts_match_hand_enumeration(self):
        inst, scen = _fixture()
        mdl = build_model(inst, scen)
        # arcs: (0,1) (0,2) (0,3) (1,2) (1,3) (2,3); every one fits the
        # single station; zero solar; one vehicle; two requests
        arcs = list(inst.arcs())
        assert len(arcs) == 6
        assert all(inst.station_options(i, j) == [0] for (i, j) in arcs)
        kinds = {}
        for v in mdl.vars:
            kinds[v.kind] = kinds.get(v.kind, 0) + 1
        assert kinds == {"X": 6, "S": 6, "C": 6, "E": 4, "BR": 2}
        names = {r.name.split("_")[0] for r in mdl.rows}
        counts = {p: sum(1 for r in mdl.rows if r.name.startswith(p + "_"))
                  for p in names}
        assert counts == {"SERVEIN": 2, "SERVEOUT": 2, "DEPOUT": 1,
                          "DEPIN": 1, "FLOW": 2, "STLINK": 6, "CUB": 6,
                          "CLB": 6, "EBU": 6, "EBL": 6, "BRDEF": 2}

    def test_no_v2g_drops_lower_caps(self):
        inst, scen = _fixture()
        mdl = build_model(inst, scen, allow_v2g=False)
        assert not any(r.name.startswith("CLB_") for r in mdl.rows)
        for v in mdl.vars:
            if v.kind == "C":
                assert v.lb == 0.0

    def test_naming_convention(self):
        inst, scen = _fixture()
        mdl = build_model(inst, scen)
        names = set(mdl.var_index)
        assert "X_1_2_1" in names
        assert "S_1_2_1_1" in names      # station index is 1-based in names
        assert "C_1_2_1_1" in names
        assert "E_0_1" in names and "E_3_1" in names
        assert "BR_1" in names and "BR_2" in names

    def test_masked_arcs_never_materialize(self):
        inst, scen = _fixture()
        mdl = build_model(inst, scen)
        assert (2, 1, 1) not in mdl.x_idx      # backward in time
        assert (1, 1, 1) not in mdl.x_idx      # self loop

    def test_zero_capacity_station_dropped(self):
        net, reqs = _chat_fixture()
        # r2 timed so the detour exactly exhausts the window: capacity = 0
        reqs = [reqs[0],
                TravelRequest(id=2, origin="C", destination="A",
                              request_time=28800 + 600 + 1800 + 360)]
        inst = build_dag(net, reqs, DepotSpec(node="A"), 22.0)
        assert inst.s_mask[1, 2, 0]
        assert inst.c_hat[1, 2, 0] == 0.0
        scen = make_scenario(reqs)
        mdl = build_model(inst, scen)
        assert (1, 2, 0, 1) not in mdl.s_idx
        assert (1, 2, 0, 1) not in mdl.c_idx

    def test_bounds(self):
        solar = SolarProfile.from_rows([(0, 0.8)])
        fleet = FleetSpec(n_vehicles=1, battery_kwh=60.0,
                          initial_soc_kwh=33.0)
        inst, scen = _fixture(solar=solar, fleet=fleet)
        mdl = build_model(inst, scen)
        for v in mdl.vars:
            if v.kind in ("X", "S", "BR"):
                assert (v.lb, v.ub, v.is_int) == (0.0, 1.0, True)
            elif v.kind == "C":
                (i, j, c, _k) = v.key
                assert v.ub == inst.c_hat[i, j, c]
                assert v.lb == -inst.c_hat[i, j, c]
                assert not v.is_int
            elif v.kind == "E":
                (j, _k) = v.key
                if j in (0, inst.end):
                    assert v.lb == v.ub == 33.0
                else:
                    assert (v.lb, v.ub) == (0.0, 60.0)
            elif v.kind == "SPILL":
                (i, j, _k) = v.key
                assert v.lb == 0.0
                assert v.ub == pytest.approx(
                    solar_energy(scen, i, j, inst))


class TestCoefficients:
    def test_objective_prices_and_fares(self):
        inst, scen = _fixture()
        mdl = build_model(inst, scen)
        for v in mdl.vars:
            if v.kind == "C":
                (i, j, _c, _k) = v.key
                assert v.obj == average_price(scen.prices, i, j, inst)
            elif v.kind == "BR":
                (j,) = v.key
                assert v.obj == -fare_for(scen.fare, inst, j)
            else:
                assert v.obj == 0.0

    def test_transition_solar_matches_per_arc(self):
        solar = SolarProfile.from_rows([(0, 0.8)])
        inst, scen = _fixture(solar=solar)
        sol_map = transition_solar(inst, scen)
        for (i, j) in inst.arcs():
            assert sol_map[(i, j)] == pytest.approx(
                solar_energy(scen, i, j, inst))

    def test_big_m_covers_battery_capacity_and_solar(self):
        solar = SolarProfile.from_rows([(0, 0.8)])
        inst, scen = _fixture(solar=solar)
        mdl = build_model(inst, scen)
        max_chat = max(float(inst.c_hat[i, j, c]) for (i, j) in inst.arcs()
                       for c in inst.station_options(i, j))
        max_sol = max(solar_energy(scen, i, j, inst)
                      for (i, j) in inst.arcs())
        assert mdl.big_m_value == pytest.approx(
            scen.fleet.battery_kwh + max_chat + max_sol)

    def test_balance_rows_vacuous_when_arc_unused(self):
        """At X = S = C = W = 0 both big-M rows hold for any E in range."""
        inst, scen = _fixture()
        mdl = build_model(inst, scen)
        A, b, rel, c, lb, ub, int_mask = mdl.to_arrays()
        rng = np.random.default_rng(2)
        x = np.zeros(len(mdl.vars))
        for v_i, v in enumerate(mdl.vars):
            if v.kind == "E":
                x[v_i] = rng.uniform(v.lb, v.ub)
        for r_i, row in enumerate(mdl.rows):
            if row.name.startswith(("EBU_", "EBL_")):
                assert A[r_i] @ x <= b[r_i] + 1e-9, row.name

    def test_balance_rows_tight_when_arc_used(self):
        """At X = 1 the pair pins E_j to the recursion value exactly."""
        inst, scen = _fixture()
        mdl = build_model(inst, scen)
        A, b, rel, c, lb, ub, int_mask = mdl.to_arrays()
        x = np.zeros(len(mdl.vars))
        e0 = scen.fleet.initial_soc_kwh
        x[mdl.x_idx[(0, 3, 1)]] = 1.0
        cons = float(inst.d_fp[0, 3]) / 1000.0 \
            * scen.fleet.consumption_kwh_per_km
        x[mdl.e_idx[(0, 1)]] = e0
        x[mdl.e_idx[(3, 1)]] = e0 - cons
        for r_i, row in enumerate(mdl.rows):
            if row.name in ("EBU_0_3_1", "EBL_0_3_1"):
                assert A[r_i] @ x == pytest.approx(b[r_i], abs=1e-9)


class TestConsistency:
    def test_scenario_instance_mismatch_rejected(self):
        inst, scen = _fixture()
        other = make_scenario([TravelRequest(id=1, origin="A",
                                             destination="B",
                                             request_time=111)])
        with pytest.raises(BuildError, match="request"):
            build_model(inst, other)

    def test_charge_power_mismatch_rejected(self):
        inst, scen = _fixture()
        bad_fleet = FleetSpec(n_vehicles=1, charge_power_kw=11.0)
        bad = make_scenario(inst.requests, fleet=bad_fleet)
        with pytest.raises(BuildError, match="charge power"):
            build_model(inst, bad)

    def test_arrays_match_row_list(self):
        inst, scen = _fixture()
        mdl = build_model(inst, scen)
        A, b, rel, c, lb, ub, int_mask = mdl.to_arrays()
        assert A.shape == (len(mdl.rows), len(mdl.vars))
        for r_i, row in enumerate(mdl.rows):
            dense = np.zeros(len(mdl.vars))
            for vi, coef in row.coeffs:
                dense[vi] += coef
            assert np.array_equal(A[r_i], dense)
            assert b[r_i] == row.rhs
            assert rel[r_i] == row.rel
        assert np.array_equal(c, [v.obj for v in mdl.vars])
        assert np.array_equal(int_mask,
                              [v.is_int for v in mdl.vars])

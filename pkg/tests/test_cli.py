"""Command-line driver: exit codes, output trees, determinism."""

import json
from pathlib import Path

import pytest

from sunfleet.cli import main

DATA = Path(__file__).parent.parent / "data"


def _write_manifest(tmp_path, **overrides):
    man = {
        "network": str(DATA / "network.json"),
        "requests": str(DATA / "requests.csv"),
        "depot": {"node": "depot"},
        "prices": {"path": str(DATA / "prices_duck.csv")},
        "solar": {"season": "summer"},
        "fleet": {
            "battery_kwh": 60.0, "initial_soc_kwh": 30.0,
            "consumption_kwh_per_km": 0.12, "charge_power_kw": 22.0,
            "solar_enabled": True,
        },
        "fare": {"base": 2.5, "per_km": 1.45, "per_min": 0.40},
        "sampling": {
            "seed": 11, "n_samples": 2, "requests_per_sample": 2,
            "vehicles_per_sample": 1,
        },
        "fleet_total_vehicles": 40,
        "sweep": {"batteries": [20, 40, 60],
                  "power_map": {"20": 8, "40": 12, "60": 22}},
    }
    man.update(overrides)
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(man, indent=2))
    return path


def _tree_bytes(root: Path):
    return {str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


class TestBuild:
    def test_dry_run_writes_nothing(self, tmp_path):
        man = _write_manifest(tmp_path)
        out = tmp_path / "out"
        assert main(["build", "--manifest", str(man), "--out", str(out),
                     "--dry-run"]) == 0
        assert not out.exists()

    def test_build_writes_instances(self, tmp_path):
        man = _write_manifest(tmp_path)
        out = tmp_path / "out"
        assert main(["build", "--manifest", str(man),
                     "--out", str(out)]) == 0
        assert (out / "run_manifest.json").exists()


class TestSolve:
    def test_full_run_then_validate(self, tmp_path):
        man = _write_manifest(tmp_path)
        out = tmp_path / "run"
        assert main(["solve", "--manifest", str(man),
                     "--out", str(out)]) == 0
        for i in range(2):
            base = out / "samples" / f"sample_{i:03d}"
            for name in ("model.mps", "solution.json", "profile.csv",
                         "summary.json"):
                assert (base / name).exists(), name
        assert (out / "fleet" / "profile.csv").exists()
        assert (out / "fleet" / "summary.json").exists()
        assert main(["validate", "--manifest", str(man),
                     "--out", str(out)]) == 0

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        man = _write_manifest(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["solve", "--manifest", str(man), "--out", str(a)]) == 0
        assert main(["solve", "--manifest", str(man), "--out", str(b)]) == 0
        ta, tb = _tree_bytes(a), _tree_bytes(b)
        assert set(ta) == set(tb)
        for name in ta:
            assert ta[name] == tb[name], f"{name} differs between runs"

    def test_export_only_skips_solving(self, tmp_path):
        man = _write_manifest(tmp_path)
        out = tmp_path / "exp"
        assert main(["solve", "--manifest", str(man), "--out", str(out),
                     "--export-only"]) == 0
        base = out / "samples" / "sample_000"
        assert (base / "model.mps").exists()
        assert not (base / "solution.json").exists()

    def test_validate_flags_corruption(self, tmp_path, capsys):
        man = _write_manifest(tmp_path)
        out = tmp_path / "run"
        assert main(["solve", "--manifest", str(man),
                     "--out", str(out)]) == 0
        target = out / "samples" / "sample_000" / "solution.json"
        doc = json.loads(target.read_text())
        doc["e_vals"] = {k: v + 0.5 for k, v in doc["e_vals"].items()}
        target.write_text(json.dumps(doc))
        assert main(["validate", "--manifest", str(man),
                     "--out", str(out)]) == 1


class TestErrors:
    def test_missing_manifest_is_an_input_error(self, tmp_path, capsys):
        missing = tmp_path / "nope.json"
        assert main(["build", "--manifest", str(missing)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_requests_file_names_the_path(self, tmp_path, capsys):
        man = _write_manifest(tmp_path,
                              requests=str(tmp_path / "ghost.csv"))
        assert main(["solve", "--manifest", str(man),
                     "--out", str(tmp_path / "o")]) == 2
        assert "ghost.csv" in capsys.readouterr().err

    def test_unmapped_battery_size_is_rejected(self, tmp_path, capsys):
        man = _write_manifest(tmp_path)
        assert main(["sweep", "--manifest", str(man),
                     "--out", str(tmp_path / "s"),
                     "--batteries", "33"]) == 2
        err = capsys.readouterr().err
        assert "33" in err and "size-to-power" in err


class TestSweep:
    def test_six_rows_with_solar_dominance(self, tmp_path):
        man = _write_manifest(
            tmp_path,
            sampling={"seed": 11, "n_samples": 1, "requests_per_sample": 2,
                      "vehicles_per_sample": 1})
        out = tmp_path / "sweep"
        assert main(["sweep", "--manifest", str(man),
                     "--out", str(out)]) == 0
        lines = (out / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == ("battery_kwh,solar,charging_cost,v2g_revenue,"
                            "trading_profit,request_revenue,J")
        rows = [ln.split(",") for ln in lines[1:]]
        assert len(rows) == 6
        by_cell = {(r[0], r[1]): float(r[6]) for r in rows}
        for b in ("20", "40", "60"):
            assert by_cell[(b, "on")] <= by_cell[(b, "off")] + 1e-9

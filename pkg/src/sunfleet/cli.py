"""Command-line entry point.

Subcommands:
  build      expand the full request pool into an instance file
  solve      sample scenarios, solve each, write solutions and reports
  sweep      battery-size design study (each size with solar on and off)
  validate   re-check previously written solutions against the constraints
  export     write the fixed-format model files only, without solving

Exit codes: 0 success, 1 a solve or validation failed (soft failure),
2 malformed input or missing file.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import (BuildError, InputError, SolutionImportError, SolveError,
                     ValidationError)
from . import runner

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sunfleet",
        description="Optimize ride assignment, charging, and grid trading "
                    "for a solar-equipped electric fleet.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, sampling=False, solving=False):
        p.add_argument("--manifest", required=True,
                       help="run manifest (JSON)")
        p.add_argument("--out", default=None,
                       help="output directory (default: manifest 'out')")
        p.add_argument("--dry-run", action="store_true",
                       help="parse and build everything, write nothing")
        if sampling:
            p.add_argument("--seed", type=int, default=None)
            p.add_argument("--samples", type=int, default=None,
                           help="number of sampled scenarios")
            p.add_argument("--requests-per-sample", type=int, default=None)
            p.add_argument("--vehicles-per-sample", type=int, default=None)
        if solving:
            p.add_argument("--allow-gap", action="store_true",
                           help="accept solutions proven only to a gap")
            p.add_argument("--jobs", type=int, default=1,
                           help="worker processes for the sample batch")

    p_build = sub.add_parser("build", help="expand the request pool into "
                                           "an instance file")
    common(p_build)

    p_solve = sub.add_parser("solve", help="sample, solve, and report")
    common(p_solve, sampling=True, solving=True)
    p_solve.add_argument("--export-only", action="store_true",
                         help="write model files instead of solving")

    p_sweep = sub.add_parser("sweep", help="battery-size design study")
    common(p_sweep, sampling=True, solving=True)
    p_sweep.add_argument("--batteries", default=None,
                         help="comma-separated pack sizes in kWh")

    p_val = sub.add_parser("validate", help="re-check written solutions")
    common(p_val, sampling=True)

    p_exp = sub.add_parser("export", help="write model files only")
    common(p_exp, sampling=True)
    return parser


def _apply_overrides(man: dict, args) -> None:
    s = man["sampling"]
    if getattr(args, "seed", None) is not None:
        s["seed"] = args.seed
    if getattr(args, "samples", None) is not None:
        s["n_samples"] = args.samples
    if getattr(args, "requests_per_sample", None) is not None:
        s["requests_per_sample"] = args.requests_per_sample
    if getattr(args, "vehicles_per_sample", None) is not None:
        s["vehicles_per_sample"] = args.vehicles_per_sample


def _out_dir(man: dict, args) -> Path:
    if args.out is not None:
        return Path(args.out)
    out = Path(man["out"])
    if not out.is_absolute():
        out = Path(man["_base_dir"]) / out
    return out


def _cmd_build(args) -> int:
    man = runner.load_manifest(args.manifest)
    path = runner.run_build(man, _out_dir(man, args), dry_run=args.dry_run)
    if args.dry_run:
        print("build: inputs OK (dry run, nothing written)")
    else:
        print(f"build: wrote {path}")
    return 0


def _cmd_solve(args) -> int:
    man = runner.load_manifest(args.manifest)
    _apply_overrides(man, args)
    res = runner.run_solve(man, _out_dir(man, args),
                           export_only=args.export_only,
                           jobs=args.jobs, dry_run=args.dry_run)
    if args.dry_run:
        print(f"solve: {res['n_samples']} samples prepared "
              "(dry run, nothing written)")
        return 0
    for i, status in enumerate(res["statuses"]):
        print(f"sample_{i:03d}: {status}")
    if args.export_only:
        print(f"solve: exported {res['n_samples']} models to {res['out']}")
        return 0
    bad_status = [s for s in res["statuses"]
                  if s not in ("optimal",)
                  and not (args.allow_gap and s == "feasible-with-gap")]
    invalid = res["ok"].count(False)
    if invalid:
        print(f"solve: {invalid} solution(s) failed validation",
              file=sys.stderr)
        return 1
    if bad_status:
        print(f"solve: statuses {sorted(set(bad_status))} not accepted",
              file=sys.stderr)
        return 1
    print(f"solve: wrote {res['n_samples']} samples and fleet aggregate "
          f"to {res['out']}")
    return 0


def _cmd_sweep(args) -> int:
    man = runner.load_manifest(args.manifest)
    _apply_overrides(man, args)
    batteries = None
    if args.batteries is not None:
        try:
            batteries = [float(b) for b in args.batteries.split(",") if b]
        except ValueError:
            raise InputError(f"bad --batteries value {args.batteries!r}")
    rows = runner.run_sweep(man, _out_dir(man, args), batteries=batteries,
                            jobs=args.jobs, dry_run=args.dry_run)
    if args.dry_run:
        print("sweep: inputs OK (dry run, nothing written)")
        return 0
    for row in rows:
        print(f"battery {row['battery_kwh']:g} kWh, solar "
              f"{'on' if row['solar'] else 'off'}: J = {row['J']:.6g}")
    print(f"sweep: wrote {len(rows)} rows")
    return 0


def _cmd_validate(args) -> int:
    man = runner.load_manifest(args.manifest)
    _apply_overrides(man, args)
    res = runner.run_validate(man, _out_dir(man, args))
    n_bad = 0
    for idx, report in res["reports"]:
        if report.ok:
            print(f"sample_{idx:03d}: valid")
        else:
            n_bad += 1
            for v in report.violations:
                print(f"sample_{idx:03d}: [{v.code}] {v.message}",
                      file=sys.stderr)
    if n_bad:
        print(f"validate: {n_bad} solution(s) violated constraints",
              file=sys.stderr)
        return 1
    print(f"validate: all {len(res['reports'])} solutions valid")
    return 0


def _cmd_export(args) -> int:
    man = runner.load_manifest(args.manifest)
    _apply_overrides(man, args)
    res = runner.run_solve(man, _out_dir(man, args), export_only=True,
                           dry_run=args.dry_run)
    if args.dry_run:
        print(f"export: {res['n_samples']} models prepared "
              "(dry run, nothing written)")
    else:
        print(f"export: wrote {res['n_samples']} models to {res['out']}")
    return 0


_COMMANDS = {
    "build": _cmd_build,
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "validate": _cmd_validate,
    "export": _cmd_export,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (InputError, BuildError, SolutionImportError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SolveError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

"""Model export to free-format MPS / LP text, and solution import.

Output is byte-stable for identical models: variables and rows appear in
model order, every number goes through one formatter, and negative zero is
canonicalized. Variables that appear in no row still get a zero objective
entry so that MPS readers keep them. Solution files are plain
`<variable> <value>` lines; `#`- and `*`-comments and an `=obj=` line are
ignored, which covers the common external-solver conventions.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import SolutionImportError, ValidationError
from .milp import Breakdown, Solution, solution_meta
from .model import MilpModel

__all__ = ["export_model", "write_model", "import_solution"]

_IMPORT_TOL = 1e-5


def _fmt(v: float) -> str:
    v = float(v)
    if v == 0.0:
        v = 0.0   # canonicalize -0.0
    return format(v, ".12g")


def _rel_tag(rel: int) -> str:
    return {-1: "L", 0: "E", 1: "G"}[rel]


def _export_mps(model: MilpModel) -> str:
    lines = ["NAME SUNFLEET", "ROWS", " N COST"]
    for row in model.rows:
        lines.append(f" {_rel_tag(row.rel)} {row.name}")

    # entries per variable, in declaration order; rows keep model order
    per_var = [[] for _ in model.vars]
    for row in model.rows:
        seen = {}
        for vi, coef in row.coeffs:
            seen[vi] = seen.get(vi, 0.0) + coef
        for vi, coef in sorted(seen.items()):
            per_var[vi].append((row.name, coef))

    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for vi, var in enumerate(model.vars):
        if var.is_int != in_int:
            tag = "INTORG" if var.is_int else "INTEND"
            lines.append(f" MARKER{marker} 'MARKER' '{tag}'")
            marker += 1
            in_int = var.is_int
        emitted = False
        if var.obj != 0.0:
            lines.append(f" {var.name} COST {_fmt(var.obj)}")
            emitted = True
        for row_name, coef in per_var[vi]:
            lines.append(f" {var.name} {row_name} {_fmt(coef)}")
            emitted = True
        if not emitted:
            lines.append(f" {var.name} COST 0")
    if in_int:
        lines.append(f" MARKER{marker} 'MARKER' 'INTEND'")

    lines.append("RHS")
    for row in model.rows:
        if row.rhs != 0.0:
            lines.append(f" RHS {row.name} {_fmt(row.rhs)}")

    lines.append("BOUNDS")
    for var in model.vars:
        if var.is_int and var.lb == 0.0 and var.ub == 1.0:
            lines.append(f" BV BND {var.name}")
        elif var.lb == var.ub:
            lines.append(f" FX BND {var.name} {_fmt(var.lb)}")
        else:
            if var.lb != 0.0:
                lines.append(f" LO BND {var.name} {_fmt(var.lb)}")
            if np.isfinite(var.ub):
                lines.append(f" UP BND {var.name} {_fmt(var.ub)}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def _lp_terms(pairs) -> str:
    parts = []
    for name, coef in pairs:
        if coef >= 0:
            parts.append(f"+ {_fmt(coef)} {name}")
        else:
            parts.append(f"- {_fmt(-coef)} {name}")
    return " ".join(parts) if parts else "0 ZERO_"


def _export_lp(model: MilpModel) -> str:
    lines = ["\\ fleet schedule model", "Minimize"]
    obj_pairs = [(v.name, v.obj) for v in model.vars if v.obj != 0.0]
    lines.append(" obj: " + _lp_terms(obj_pairs))
    lines.append("Subject To")
    relsym = {-1: "<=", 0: "=", 1: ">="}
    for row in model.rows:
        seen = {}
        for vi, coef in row.coeffs:
            seen[vi] = seen.get(vi, 0.0) + coef
        pairs = [(model.vars[vi].name, coef)
                 for vi, coef in sorted(seen.items())]
        lines.append(f" {row.name}: {_lp_terms(pairs)} "
                     f"{relsym[row.rel]} {_fmt(row.rhs)}")
    lines.append("Bounds")
    for var in model.vars:
        if var.is_int and var.lb == 0.0 and var.ub == 1.0:
            continue
        if var.lb == var.ub:
            lines.append(f" {var.name} = {_fmt(var.lb)}")
        else:
            hi = _fmt(var.ub) if np.isfinite(var.ub) else "+inf"
            lines.append(f" {_fmt(var.lb)} <= {var.name} <= {hi}")
    ints = [v.name for v in model.vars if v.is_int]
    if ints:
        lines.append("Binaries")
        for name in ints:
            lines.append(f" {name}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_model(model: MilpModel, fmt: str = "mps") -> str:
    """Serialize the model; fmt is 'mps' or 'lp' (CPLEX LP text)."""
    key = fmt.strip().lower()
    if key == "mps":
        return _export_mps(model)
    if key in ("lp", "lp-text", "lptext"):
        return _export_lp(model)
    raise SolutionImportError(f"unknown export format: {fmt!r}")


def write_model(model: MilpModel, path, fmt: str = "mps") -> Path:
    out = Path(path)
    out.write_text(export_model(model, fmt))
    return out


def _parse_solution_values(model: MilpModel, document: str) -> np.ndarray:
    values = np.full(len(model.vars), np.nan)
    for lineno, raw in enumerate(document.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("*"):
            continue
        tokens = line.split()
        if tokens[0] == "=obj=":
            continue
        if len(tokens) < 2:
            raise SolutionImportError(
                f"line {lineno}: expected '<variable> <value>', got "
                f"{line!r}")
        name = tokens[0]
        vi = model.var_index.get(name)
        if vi is None:
            raise SolutionImportError(
                f"line {lineno}: unknown variable name {name!r}")
        try:
            values[vi] = float(tokens[1])
        except ValueError as exc:
            raise SolutionImportError(
                f"line {lineno}: bad value for {name}: {tokens[1]!r}") \
                from exc
    # omitted variables default to zero, pulled into their bounds
    for vi, var in enumerate(model.vars):
        if np.isnan(values[vi]):
            values[vi] = min(max(0.0, var.lb), var.ub)
    return values


def import_solution(model: MilpModel, document: str) -> Solution:
    """Parse, verify against the model within 1e-5, and package a Solution."""
    xv = _parse_solution_values(model, document)

    violations = []
    for vi, var in enumerate(model.vars):
        v = xv[vi]
        if v < var.lb - _IMPORT_TOL or v > var.ub + _IMPORT_TOL:
            violations.append(
                f"{var.name} = {v:.8g} outside bounds "
                f"[{_fmt(var.lb)}, {_fmt(var.ub)}]")
        if var.is_int and abs(v - round(v)) > _IMPORT_TOL:
            violations.append(f"{var.name} = {v:.8g} is not integral")
    A, b, rel, c, _lb, _ub, _im = model.to_arrays()
    if A.shape[0]:
        resid = A @ xv - b
        for r, row in enumerate(model.rows):
            bad = (row.rel == -1 and resid[r] > _IMPORT_TOL) or \
                  (row.rel == 1 and resid[r] < -_IMPORT_TOL) or \
                  (row.rel == 0 and abs(resid[r]) > _IMPORT_TOL)
            if bad:
                violations.append(
                    f"row {row.name} violated by {abs(resid[r]):.3e}")
    if violations:
        raise ValidationError(
            f"imported solution violates the model beyond {_IMPORT_TOL:g}",
            violations)

    inst = model.instance
    scen = model.scenario
    x_set = {key for key, vi in model.x_idx.items() if xv[vi] > 0.5}
    s_set = {key for key, vi in model.s_idx.items() if xv[vi] > 0.5}
    c_vals = {key: float(xv[vi]) for key, vi in model.c_idx.items()
              if key in s_set}
    e_vals = {key: float(xv[vi]) for key, vi in model.e_idx.items()}
    spill = {key: float(xv[vi]) for key, vi in model.w_idx.items()
             if key in x_set}
    served = {j for (i, j, k) in x_set if 1 <= j <= inst.n_requests}
    charging = float(sum(model.arc_price[(i, j)] * v
                         for (i, j, c, k), v in c_vals.items() if v > 0.0))
    v2g = float(-sum(model.arc_price[(i, j)] * v
                     for (i, j, c, k), v in c_vals.items() if v < 0.0))
    revenue = float(sum(model.fares[j] for j in served))
    return Solution(
        status="feasible-with-gap",
        x=x_set, s=s_set, c_vals=c_vals, e_vals=e_vals, spill=spill,
        served=served,
        objective=float(c @ xv),
        breakdown=Breakdown(charging_cost=charging, v2g_revenue=v2g,
                            request_revenue=revenue),
        gap=float("inf"),
        bound=float("-inf"),
        meta=solution_meta(model),
    )

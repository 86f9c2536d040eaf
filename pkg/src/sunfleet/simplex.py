"""Public LP interface over the twin simplex kernels.

Problems are given as dense arrays: minimize c @ x subject to row relations
A x (<=, =, >=) b and box bounds lb <= x <= ub. The backend is the numba
kernel when available, or the vectorized numpy twin; setting the environment
variable SUNFLEET_NO_NUMBA=1 forces the numpy backend. Both backends follow
identical pivot rules, so results match bit for bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _lpcore
from .errors import SolveError

__all__ = ["LpResult", "solve_lp", "backend_name"]

_STATUS_NAMES = {
    _lpcore.STATUS_OPTIMAL: "optimal",
    _lpcore.STATUS_INFEASIBLE: "infeasible",
    _lpcore.STATUS_UNBOUNDED: "unbounded",
    _lpcore.STATUS_ITER_LIMIT: "iteration-limit",
}


def _env_disables_numba() -> bool:
    return os.environ.get("SUNFLEET_NO_NUMBA", "").strip().lower() in (
        "1", "true", "yes", "on")


def backend_name() -> str:
    """Name of the kernel the auto backend will run: 'numba' or 'numpy'."""
    if _lpcore.HAVE_NUMBA and not _env_disables_numba():
        return "numba"
    return "numpy"


@dataclass
class LpResult:
    status: str
    x: np.ndarray
    objective: float
    iterations: int


def solve_lp(A, b, rel, c, lb, ub, max_iter: int = 0,
             backend: str = "auto") -> LpResult:
    """Solve the bounded LP; objective is computed on one shared path so both
    backends report identical floats.

    rel holds one int per row: -1 for <=, 0 for =, +1 for >=. Every variable
    must carry at least one finite bound (free variables are rejected).
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    rel = np.ascontiguousarray(rel, dtype=np.int8)
    c = np.ascontiguousarray(c, dtype=np.float64)
    lb = np.ascontiguousarray(lb, dtype=np.float64)
    ub = np.ascontiguousarray(ub, dtype=np.float64)

    if A.ndim != 2:
        raise SolveError(f"A must be 2-d, got shape {A.shape}")
    m, n = A.shape
    for name, arr, size in (("b", b, m), ("rel", rel, m), ("c", c, n),
                            ("lb", lb, n), ("ub", ub, n)):
        if arr.shape != (size,):
            raise SolveError(f"{name} must have shape ({size},), got {arr.shape}")
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)) \
            or not np.all(np.isfinite(c)):
        raise SolveError("A, b, c must be finite")
    if np.any(np.isnan(lb)) or np.any(np.isnan(ub)) or np.any(lb > ub):
        raise SolveError("bounds must satisfy lb <= ub without NaN")
    if np.any(np.isinf(lb) & np.isinf(ub)):
        raise SolveError("free variables are not supported; give a finite bound")
    if not np.all((rel >= -1) & (rel <= 1)):
        raise SolveError("rel entries must be -1, 0, or +1")

    if max_iter <= 0:
        max_iter = 50 * (m + n) + 500

    if backend == "auto":
        backend = backend_name()
    if backend == "numba":
        if _lpcore._simplex_njit is None:
            raise SolveError("numba backend requested but numba is unavailable")
        kern = _lpcore._simplex_njit
    elif backend == "numpy":
        kern = _lpcore._simplex_numpy
    else:
        raise SolveError(f"unknown backend {backend!r}")

    status_code, x, iters = kern(A, b, rel, c, lb, ub, max_iter)
    status = _STATUS_NAMES[int(status_code)]
    obj = float(c @ x) if status == "optimal" else float("nan")
    return LpResult(status=status, x=x, objective=obj, iterations=int(iters))

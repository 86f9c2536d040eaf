"""Bounded-variable two-phase primal simplex kernels.

Two twin implementations of the same algorithm live here: a scalar loop
version compiled with numba, and a vectorized numpy version used as the
fallback backend. They follow identical pivot rules (Dantzig pricing with a
Bland fallback after a degenerate streak, bound flips in the ratio test,
smallest-basis-index tie breaks) and perform the same floating-point
operations in the same order, so both backends return bit-identical iterates.
The numpy twin vectorizes only across tableau columns; reductions keep the
loop twin's row order.

Columns of the internal tableau: [0, n) structural variables, [n, n+m) row
slacks (<= rows get slack in [0, inf), >= rows in (-inf, 0], = rows fixed at
0), [n+m, n+2m) phase-1 artificials. Every structural variable must have at
least one finite bound; the wrapper in simplex.py enforces that.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f
        return deco

STATUS_OPTIMAL = 0
STATUS_INFEASIBLE = 1
STATUS_UNBOUNDED = 2
STATUS_ITER_LIMIT = 3

# shared pivot-rule tolerances; both twins must read the same values
_TOL_RC = 1e-9       # reduced cost must beat this to enter
_TOL_PIV = 1e-10     # minimum pivot magnitude in the ratio test
_TOL_FEAS = 1e-7     # residual phase-1 mass that still counts as feasible
_TOL_DEGEN = 1e-11   # steps at or below this are degenerate
_TOL_SNAP = 1e-6     # final bound snapping window
_BLAND_AFTER = 40    # degenerate pivots in a row before Bland pricing


def _simplex_loops(A, b, rel, c, lb_s, ub_s, max_iter):
    """Scalar-loop twin. Returns (status, x_structural, iterations)."""
    m, n = A.shape
    ntot = n + 2 * m
    INF = np.inf

    lb = np.empty(ntot)
    ub = np.empty(ntot)
    for j in range(n):
        lb[j] = lb_s[j]
        ub[j] = ub_s[j]
    for i in range(m):
        if rel[i] < 0:
            lb[n + i] = 0.0
            ub[n + i] = INF
        elif rel[i] > 0:
            lb[n + i] = -INF
            ub[n + i] = 0.0
        else:
            lb[n + i] = 0.0
            ub[n + i] = 0.0
        lb[n + m + i] = 0.0
        ub[n + m + i] = INF

    # nonbasic start: rest every structural/slack at a finite bound
    val = np.zeros(ntot)
    atlower = np.zeros(ntot, np.bool_)
    for j in range(n + m):
        if lb[j] > -INF:
            atlower[j] = True
            val[j] = lb[j]
        else:
            val[j] = ub[j]
    for j in range(n + m, ntot):
        atlower[j] = True

    # residual b - A @ val decides artificial directions
    r = np.empty(m)
    for i in range(m):
        acc = b[i]
        for j in range(n):
            vj = val[j]
            if vj != 0.0:
                acc -= A[i, j] * vj
        r[i] = acc

    T = np.zeros((m, ntot))
    basis = np.empty(m, np.int64)
    xB = np.empty(m)
    basic = np.zeros(ntot, np.bool_)
    for i in range(m):
        sgn = 1.0 if r[i] >= 0.0 else -1.0
        for j in range(n):
            T[i, j] = sgn * A[i, j]
        T[i, n + i] = sgn
        T[i, n + m + i] = 1.0
        basis[i] = n + m + i
        xB[i] = sgn * r[i]
        basic[n + m + i] = True

    d = np.zeros(ntot)
    iters = 0
    status = STATUS_OPTIMAL

    for phase in range(1, 3):
        if phase == 1:
            for j in range(ntot):
                d[j] = 1.0 if j >= n + m else 0.0
            for i in range(m):
                for j in range(ntot):
                    d[j] -= T[i, j]
        else:
            # phase-1 mass left in the basis means the model is infeasible
            p1 = 0.0
            for i in range(m):
                if basis[i] >= n + m:
                    p1 += xB[i]
            if p1 > _TOL_FEAS:
                status = STATUS_INFEASIBLE
                break
            for i in range(m):
                if basis[i] >= n + m and np.abs(xB[i]) <= _TOL_FEAS:
                    xB[i] = 0.0
            for j in range(n + m, ntot):
                lb[j] = 0.0
                ub[j] = 0.0
            for j in range(ntot):
                d[j] = c[j] if j < n else 0.0
            for i in range(m):
                cb = c[basis[i]] if basis[i] < n else 0.0
                if cb != 0.0:
                    for j in range(ntot):
                        d[j] -= cb * T[i, j]

        bland = False
        streak = 0
        while True:
            # pricing: most negative effective reduced cost, first index wins
            q = -1
            best = _TOL_RC
            for j in range(ntot):
                if basic[j] or lb[j] == ub[j]:
                    continue
                score = -d[j] if atlower[j] else d[j]
                if score > best:
                    best = score
                    q = j
                    if bland:
                        break
            if q < 0:
                break
            dirn = 1.0 if atlower[q] else -1.0

            # ratio test with bound flips; ties prefer the smallest basis index
            limit = ub[q] - lb[q]
            step = limit
            rrow = -1
            leave_lower = True
            for i in range(m):
                alpha = T[i, q] * dirn
                bi = basis[i]
                if alpha > _TOL_PIV:
                    if lb[bi] > -INF:
                        num = xB[i] - lb[bi]
                        if num < 0.0:
                            num = 0.0
                        s = num / alpha
                        if s < step or (s == step and rrow >= 0
                                        and bi < basis[rrow]):
                            step = s
                            rrow = i
                            leave_lower = True
                elif alpha < -_TOL_PIV:
                    if ub[bi] < INF:
                        num = ub[bi] - xB[i]
                        if num < 0.0:
                            num = 0.0
                        s = num / (-alpha)
                        if s < step or (s == step and rrow >= 0
                                        and bi < basis[rrow]):
                            step = s
                            rrow = i
                            leave_lower = False

            iters += 1
            if rrow < 0:
                if not np.isfinite(step):
                    status = STATUS_UNBOUNDED
                    break
                # bound flip: q crosses its box, basis unchanged
                for i in range(m):
                    xB[i] -= T[i, q] * dirn * step
                atlower[q] = not atlower[q]
                val[q] = lb[q] if atlower[q] else ub[q]
            else:
                enter_val = val[q] + dirn * step
                for i in range(m):
                    if i != rrow:
                        xB[i] -= T[i, q] * dirn * step
                lv = basis[rrow]
                basic[lv] = False
                atlower[lv] = leave_lower
                val[lv] = lb[lv] if leave_lower else ub[lv]

                piv = T[rrow, q]
                inv = 1.0 / piv
                for j in range(ntot):
                    T[rrow, j] *= inv
                T[rrow, q] = 1.0
                for i in range(m):
                    if i == rrow:
                        continue
                    f = T[i, q]
                    if f != 0.0:
                        for j in range(ntot):
                            T[i, j] -= f * T[rrow, j]
                    T[i, q] = 0.0
                fd = d[q]
                if fd != 0.0:
                    for j in range(ntot):
                        d[j] -= fd * T[rrow, j]
                d[q] = 0.0
                basis[rrow] = q
                basic[q] = True
                xB[rrow] = enter_val

                if step <= _TOL_DEGEN:
                    streak += 1
                    if streak > _BLAND_AFTER:
                        bland = True
                else:
                    streak = 0
                    bland = False

            if iters >= max_iter:
                status = STATUS_ITER_LIMIT
                break
        if status != STATUS_OPTIMAL:
            break

    x = np.empty(n)
    for j in range(n):
        x[j] = val[j]
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = xB[i]
    for j in range(n):
        if x[j] < lb_s[j] and lb_s[j] - x[j] <= _TOL_SNAP:
            x[j] = lb_s[j]
        elif x[j] > ub_s[j] and x[j] - ub_s[j] <= _TOL_SNAP:
            x[j] = ub_s[j]
    return status, x, iters


def _simplex_numpy(A, b, rel, c, lb_s, ub_s, max_iter):
    """Vectorized twin of _simplex_loops; identical pivot rules and floats."""
    m, n = A.shape
    ntot = n + 2 * m
    INF = np.inf

    lb = np.empty(ntot)
    ub = np.empty(ntot)
    lb[:n] = lb_s
    ub[:n] = ub_s
    le = rel < 0
    ge = rel > 0
    eq = ~le & ~ge
    lb[n:n + m] = np.where(ge, -INF, 0.0)
    ub[n:n + m] = np.where(le, INF, 0.0)
    lb[n + m:] = 0.0
    ub[n + m:] = INF

    val = np.zeros(ntot)
    atlower = np.zeros(ntot, np.bool_)
    fin_lo = lb[:n + m] > -INF
    atlower[:n + m] = fin_lo
    val[:n + m] = np.where(fin_lo, lb[:n + m], ub[:n + m])
    atlower[n + m:] = True

    r = b.astype(np.float64).copy()
    for j in range(n):
        vj = val[j]
        if vj != 0.0:
            r -= A[:, j] * vj

    sgn = np.where(r >= 0.0, 1.0, -1.0)
    T = np.zeros((m, ntot))
    T[:, :n] = sgn[:, None] * A
    rows = np.arange(m)
    T[rows, n + rows] = sgn
    T[rows, n + m + rows] = 1.0
    basis = (n + m + rows).astype(np.int64)
    xB = sgn * r
    basic = np.zeros(ntot, np.bool_)
    basic[n + m:] = True

    d = np.zeros(ntot)
    iters = 0
    status = STATUS_OPTIMAL

    for phase in range(1, 3):
        if phase == 1:
            d[:] = 0.0
            d[n + m:] = 1.0
            for i in range(m):
                d -= T[i]
        else:
            art = basis >= n + m
            # accumulate in row order so the twins agree bit for bit
            p1 = 0.0
            for i in range(m):
                if art[i]:
                    p1 += xB[i]
            if p1 > _TOL_FEAS:
                status = STATUS_INFEASIBLE
                break
            xB[art & (np.abs(xB) <= _TOL_FEAS)] = 0.0
            lb[n + m:] = 0.0
            ub[n + m:] = 0.0
            d[:] = 0.0
            d[:n] = c
            for i in range(m):
                cb = c[basis[i]] if basis[i] < n else 0.0
                if cb != 0.0:
                    d -= cb * T[i]

        bland = False
        streak = 0
        while True:
            eligible = ~basic & (lb != ub)
            score = np.where(eligible, np.where(atlower, -d, d), -INF)
            if bland:
                cand = score > _TOL_RC
                if not cand.any():
                    break
                q = int(np.argmax(cand))
            else:
                q = int(np.argmax(score))
                if not (score[q] > _TOL_RC):
                    break
            dirn = 1.0 if atlower[q] else -1.0

            limit = ub[q] - lb[q]
            step = limit
            rrow = -1
            leave_lower = True
            alpha = T[:, q] * dirn
            lb_b = lb[basis]
            ub_b = ub[basis]
            dec = (alpha > _TOL_PIV) & (lb_b > -INF)
            inc = (alpha < -_TOL_PIV) & (ub_b < INF)
            s = np.full(m, INF)
            if dec.any():
                num = xB[dec] - lb_b[dec]
                num[num < 0.0] = 0.0
                s[dec] = num / alpha[dec]
            if inc.any():
                num = ub_b[inc] - xB[inc]
                num[num < 0.0] = 0.0
                s[inc] = num / (-alpha[inc])
            have = dec | inc
            if have.any():
                smin = np.min(s[have])
                if smin < step:
                    tied = have & (s == smin)
                    ti = np.nonzero(tied)[0]
                    rrow = int(ti[np.argmin(basis[ti])])
                    step = smin
                    leave_lower = bool(dec[rrow])

            iters += 1
            if rrow < 0:
                if not np.isfinite(step):
                    status = STATUS_UNBOUNDED
                    break
                xB -= (T[:, q] * dirn) * step
                atlower[q] = not atlower[q]
                val[q] = lb[q] if atlower[q] else ub[q]
            else:
                enter_val = val[q] + dirn * step
                save = xB[rrow]
                xB -= (T[:, q] * dirn) * step
                xB[rrow] = save  # row rrow is overwritten below
                lv = int(basis[rrow])
                basic[lv] = False
                atlower[lv] = leave_lower
                val[lv] = lb[lv] if leave_lower else ub[lv]

                piv = T[rrow, q]
                T[rrow] *= 1.0 / piv
                T[rrow, q] = 1.0
                fcol = T[:, q].copy()
                fcol[rrow] = 0.0
                T -= fcol[:, None] * T[rrow][None, :]
                T[:, q] = 0.0
                T[rrow, q] = 1.0
                fd = d[q]
                if fd != 0.0:
                    d -= fd * T[rrow]
                d[q] = 0.0
                basis[rrow] = q
                basic[q] = True
                xB[rrow] = enter_val

                if step <= _TOL_DEGEN:
                    streak += 1
                    if streak > _BLAND_AFTER:
                        bland = True
                else:
                    streak = 0
                    bland = False

            if iters >= max_iter:
                status = STATUS_ITER_LIMIT
                break
        if status != STATUS_OPTIMAL:
            break

    x = val[:n].copy()
    struct = basis < n
    x[basis[struct]] = xB[struct]
    low = (x < lb_s) & (lb_s - x <= _TOL_SNAP)
    x[low] = lb_s[low]
    high = ~low & (x > ub_s) & (x - ub_s <= _TOL_SNAP)
    x[high] = ub_s[high]
    return status, x, iters


_simplex_njit = njit(cache=True)(_simplex_loops) if HAVE_NUMBA else None

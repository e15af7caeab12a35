"""Public LP solving entry point.

One-shot solves go through the incremental HiGHS backend when it is
available (scipy bundles the bindings) and fall back to
scipy.optimize.linprog otherwise.  Either way the result carries the
optimal point and an independently computed dual objective so tests can
check strong duality.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..errors import NumericalFailure
from . import highs_backend
from .problems import EQ, GE, LE, LinearProgram, SolveResult, Status

FEAS_TOL = 1e-7
OPT_TOL = 1e-9


def _feasible_without_vars(lp: LinearProgram) -> bool:
    for c in lp.constraints:
        if c.sense == LE and 0.0 > c.rhs + FEAS_TOL:
            return False
        if c.sense == GE and 0.0 < c.rhs - FEAS_TOL:
            return False
        if c.sense == EQ and abs(c.rhs) > FEAS_TOL:
            return False
    return True


def lp_solve(lp: LinearProgram) -> SolveResult:
    """Solve a bounded-variable LP to optimality.

    Returns Status.OPTIMAL with the optimal point, objective, and dual
    objective, or an Infeasible/Unbounded certificate status.
    """
    lp.validate()
    if lp.n_vars == 0:
        if _feasible_without_vars(lp):
            return SolveResult(
                Status.OPTIMAL,
                objective=lp.obj_offset,
                x=np.zeros(0),
                bound=lp.obj_offset,
                gap=0.0,
                dual_objective=lp.obj_offset,
            )
        return SolveResult(Status.INFEASIBLE)

    sign = -1.0 if lp.maximize else 1.0
    min_lp = replace(lp, obj=sign * lp.obj, obj_offset=0.0, maximize=False)

    if highs_backend.AVAILABLE:
        inc = highs_backend.IncrementalLp(min_lp)
        status, obj, x, dual = inc.solve_with_bounds(min_lp.lo, min_lp.hi)
        if status != Status.OPTIMAL:
            return SolveResult(status)
        value = sign * obj + lp.obj_offset
        return SolveResult(
            Status.OPTIMAL,
            objective=value,
            x=x,
            bound=value,
            gap=0.0,
            dual_objective=sign * dual + lp.obj_offset,
        )
    return _lp_solve_scipy(min_lp, lp, sign)


def _lp_solve_scipy(min_lp: LinearProgram, lp: LinearProgram, sign: float) -> SolveResult:
    from scipy import sparse
    from scipy.optimize import linprog

    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    for c in min_lp.constraints:
        if c.sense == EQ:
            eq_rows.append((c, 1.0))
            eq_rhs.append(c.rhs)
        elif c.sense == LE:
            ub_rows.append((c, 1.0))
            ub_rhs.append(c.rhs)
        else:
            ub_rows.append((c, -1.0))
            ub_rhs.append(-c.rhs)

    def to_csr(rows):
        data, ri, ci = [], [], []
        for k, (c, s) in enumerate(rows):
            for i, v in zip(c.idx, c.coef):
                ri.append(k)
                ci.append(i)
                data.append(s * v)
        return sparse.csr_matrix((data, (ri, ci)), shape=(len(rows), min_lp.n_vars))

    res = linprog(
        min_lp.obj,
        A_ub=to_csr(ub_rows) if ub_rows else None,
        b_ub=np.array(ub_rhs) if ub_rhs else None,
        A_eq=to_csr(eq_rows) if eq_rows else None,
        b_eq=np.array(eq_rhs) if eq_rhs else None,
        bounds=list(zip(min_lp.lo, min_lp.hi)),
        method="highs",
        options={
            "primal_feasibility_tolerance": FEAS_TOL,
            "dual_feasibility_tolerance": max(OPT_TOL, 1e-9),
        },
    )
    if res.status == 2:
        return SolveResult(Status.INFEASIBLE, message=res.message)
    if res.status == 3:
        return SolveResult(Status.UNBOUNDED, message=res.message)
    if res.status != 0:
        raise NumericalFailure(f"LP backend failure: {res.message}")

    obj = sign * res.fun + lp.obj_offset
    dual = 0.0
    if ub_rhs:
        dual += float(np.array(ub_rhs) @ res.ineqlin.marginals)
    if eq_rhs:
        dual += float(np.array(eq_rhs) @ res.eqlin.marginals)
    for lo_i, m in zip(min_lp.lo, res.lower.marginals):
        if m != 0.0:
            dual += lo_i * m
    for hi_i, m in zip(min_lp.hi, res.upper.marginals):
        if m != 0.0:
            dual += hi_i * m
    return SolveResult(
        Status.OPTIMAL,
        objective=obj,
        x=np.asarray(res.x, dtype=float),
        bound=obj,
        gap=0.0,
        dual_objective=sign * dual + lp.obj_offset,
    )

"""Spatial branch-and-bound for bilinear programs.

Each node relaxes every product w = u*v with McCormick envelopes built from
node-local factor boxes and solves the resulting MILP (binaries stay
integral, per the relaxation policy).  Branching bisects the factor variable
of the most violated product, at the relaxation point clamped to the middle
20-80% of its range.  Node selection is best-bound.

Incumbents come from two sources: relaxation points whose products are
already consistent, and a fixing heuristic that pins every first factor at
its relaxation value, which collapses the envelopes to exact equations and
turns the node into a MILP whose optimum is bilinear-feasible.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, replace

import numpy as np

from ..errors import UnboundedBilinearVariable
from ..intervals import Interval
from .milp import milp_solve
from .problems import (
    LE,
    BilinearProgram,
    LinConstraint,
    MilpProblem,
    SolveResult,
    Status,
)

FEAS_TOL = 1e-7
MIN_BRANCH_WIDTH = 1e-9


def mccormick_envelope(w: int, u: int, v: int, ub: Interval, vb: Interval) -> list[LinConstraint]:
    """Four-plane relaxation of w = u*v over the box ub x vb.

    Degenerate factor boxes collapse the planes to the exact product
    equation.  Raises UnboundedBilinearVariable on infinite bounds.
    """
    if not all(np.isfinite([ub.lo, ub.hi, vb.lo, vb.hi])):
        raise UnboundedBilinearVariable(
            f"bilinear factors need finite bounds; got u in {ub}, v in {vb}"
        )
    uL, uU, vL, vU = ub.lo, ub.hi, vb.lo, vb.hi

    def row(cw, cu, cv, rhs, name):
        if u == v:  # square term: fold the two factor coefficients
            return LinConstraint((w, u), (cw, cu + cv), LE, rhs, name)
        return LinConstraint((w, u, v), (cw, cu, cv), LE, rhs, name)

    return [
        # w >= uL*v + vL*u - uL*vL
        row(-1.0, vL, uL, uL * vL, "mc1"),
        # w >= uU*v + vU*u - uU*vU
        row(-1.0, vU, uU, uU * vU, "mc2"),
        # w <= uU*v + vL*u - uU*vL
        row(1.0, -vL, -uU, -uU * vL, "mc3"),
        # w <= uL*v + vU*u - uL*vU
        row(1.0, -vU, -uL, -uL * vU, "mc4"),
    ]


@dataclass
class _SpatialNode:
    bound: float
    seq: int
    lo: np.ndarray
    hi: np.ndarray

    def __lt__(self, other):
        return (self.bound, self.seq) < (other.bound, other.seq)


def _term_violations(x: np.ndarray, terms) -> np.ndarray:
    return np.array([abs(x[t.w] - x[t.u] * x[t.v]) for t in terms])


def bilinear_solve(
    bp: BilinearProgram,
    gap_tol: float = 1e-4,
    time_limit: float | None = None,
    node_limit: int | None = None,
    inner_node_limit: int | None = None,
    heur_every: int = 5,
) -> SolveResult:
    """Globally optimize a bilinear program to relative gap ``gap_tol``.

    Returns OPTIMAL with a certified gap, TIME_LIMIT / GAP_LIMIT with the
    best incumbent and proved bound, or INFEASIBLE from the root relaxation.
    """
    t0 = time.monotonic()
    base = bp.milp
    terms = list(bp.terms)
    lp = base.lp

    for t in terms:
        if not (
            np.isfinite(lp.lo[t.u])
            and np.isfinite(lp.hi[t.u])
            and np.isfinite(lp.lo[t.v])
            and np.isfinite(lp.hi[t.v])
        ):
            raise UnboundedBilinearVariable(
                f"factors of product var {t.w} must have finite bounds"
            )

    if not terms:
        return milp_solve(base, gap_tol=gap_tol, time_limit=time_limit)

    # Node relaxations only need enough accuracy to steer the search; their
    # proved bounds stay valid at any gap.
    inner_gap = max(1e-6, 0.2 * gap_tol)

    # Canonicalize to minimization; flip results at exit.
    sign = -1.0 if lp.maximize else 1.0
    min_lp = replace(lp, obj=sign * lp.obj, obj_offset=sign * lp.obj_offset, maximize=False)

    fix_vars = sorted({t.u for t in terms})

    def node_milp(lo: np.ndarray, hi: np.ndarray) -> MilpProblem | None:
        """Base MILP plus McCormick rows for the node box; None if the
        product hulls contradict the w bounds."""
        lo = lo.copy()
        hi = hi.copy()
        rows = list(min_lp.constraints)
        for t in terms:
            hull = Interval(lo[t.u], hi[t.u]) * Interval(lo[t.v], hi[t.v])
            wlo = max(lo[t.w], hull.lo)
            whi = min(hi[t.w], hull.hi)
            if wlo > whi + FEAS_TOL:
                return None
            lo[t.w], hi[t.w] = min(wlo, whi), whi
            rows.extend(
                mccormick_envelope(
                    t.w, t.u, t.v, Interval(lo[t.u], hi[t.u]), Interval(lo[t.v], hi[t.v])
                )
            )
        return MilpProblem(replace(min_lp, lo=lo, hi=hi, constraints=rows), base.binaries)

    def remaining() -> float | None:
        if time_limit is None:
            return None
        return max(0.05, time_limit - (time.monotonic() - t0))

    incumbent_val: float | None = None
    incumbent_x: np.ndarray | None = None

    def consider(val: float, x: np.ndarray) -> None:
        nonlocal incumbent_val, incumbent_x
        if incumbent_val is None or val < incumbent_val:
            incumbent_val = val
            incumbent_x = x

    def try_fixing_heuristic(lo: np.ndarray, hi: np.ndarray, x: np.ndarray) -> None:
        flo = lo.copy()
        fhi = hi.copy()
        for i in fix_vars:
            val = min(max(x[i], lo[i]), hi[i])
            flo[i] = fhi[i] = val
        fixed = node_milp(flo, fhi)
        if fixed is None:
            return
        res = milp_solve(
            fixed, gap_tol=inner_gap, time_limit=remaining(), node_limit=inner_node_limit
        )
        if res.objective is not None and res.x is not None:
            if np.max(_term_violations(res.x, terms)) <= FEAS_TOL * max(1.0, abs(res.objective)):
                consider(res.objective, res.x)

    seq = itertools.count()
    heap: list[_SpatialNode] = []
    n_nodes = 0

    def finish(status: Status, bound: float | None) -> SolveResult:
        obj = None if incumbent_val is None else sign * incumbent_val
        bnd = None if bound is None else sign * bound
        gap = None
        if incumbent_val is not None and bound is not None:
            gap = abs(incumbent_val - bound) / max(1.0, abs(incumbent_val))
        return SolveResult(status, objective=obj, x=incumbent_x, bound=bnd, gap=gap, n_nodes=n_nodes)

    root = _SpatialNode(-np.inf, next(seq), min_lp.lo.copy(), min_lp.hi.copy())
    heap.append(root)

    while heap:
        node = heapq.heappop(heap)
        best_bound = node.bound if not np.isinf(node.bound) else None
        if incumbent_val is not None and best_bound is not None:
            gap = abs(incumbent_val - best_bound) / max(1.0, abs(incumbent_val))
            if gap <= gap_tol:
                return finish(Status.OPTIMAL, best_bound)
            if best_bound >= incumbent_val - 1e-12:
                return finish(Status.OPTIMAL, best_bound)
        if time_limit is not None and time.monotonic() - t0 > time_limit:
            heapq.heappush(heap, node)
            return finish(Status.TIME_LIMIT, node.bound if np.isfinite(node.bound) else None)
        if node_limit is not None and n_nodes >= node_limit:
            heapq.heappush(heap, node)
            return finish(Status.GAP_LIMIT, node.bound if np.isfinite(node.bound) else None)

        prob = node_milp(node.lo, node.hi)
        n_nodes += 1
        if prob is None:
            continue
        res = milp_solve(
            prob, gap_tol=inner_gap, time_limit=remaining(), node_limit=inner_node_limit
        )
        if res.status == Status.INFEASIBLE:
            continue
        if res.status == Status.UNBOUNDED:
            return SolveResult(Status.UNBOUNDED, n_nodes=n_nodes)
        node_bound = max(node.bound, res.bound if res.bound is not None else -np.inf)
        if incumbent_val is not None and node_bound >= incumbent_val - 1e-12:
            continue

        x = res.x
        if x is None:
            # Budget-limited inner solve without a point: branch blindly on
            # the widest factor.
            widths = {i: node.hi[i] - node.lo[i] for t in terms for i in (t.u, t.v)}
            var = max(widths, key=widths.get)
            if widths[var] <= MIN_BRANCH_WIDTH:
                continue
            cut = 0.5 * (node.lo[var] + node.hi[var])
        else:
            viol = _term_violations(x, terms)
            k = int(np.argmax(viol))
            scale = max(1.0, abs(res.objective) if res.objective is not None else 1.0)
            if viol[k] <= FEAS_TOL * scale:
                # Relaxation point satisfies every product: feasible.
                consider(res.objective, x)
                if node_bound >= (incumbent_val if incumbent_val is not None else np.inf) - 1e-12:
                    continue
                # The node is solved: its relaxation optimum is attained.
                continue
            if incumbent_val is None or n_nodes % heur_every == 1:
                try_fixing_heuristic(node.lo, node.hi, x)
                if incumbent_val is not None and node_bound >= incumbent_val - 1e-12:
                    continue
            t = terms[k]
            wu = node.hi[t.u] - node.lo[t.u]
            wv = node.hi[t.v] - node.lo[t.v]
            var = t.u if wu >= wv else t.v
            if max(wu, wv) <= MIN_BRANCH_WIDTH:
                # Box essentially a point yet still violated: accept the
                # tiny error rather than looping.
                consider(res.objective, x)
                continue
            lo_, hi_ = node.lo[var], node.hi[var]
            cut = min(max(x[var], lo_ + 0.2 * (hi_ - lo_)), lo_ + 0.8 * (hi_ - lo_))

        left = _SpatialNode(node_bound, next(seq), node.lo.copy(), node.hi.copy())
        left.hi[var] = cut
        right = _SpatialNode(node_bound, next(seq), node.lo.copy(), node.hi.copy())
        right.lo[var] = cut
        heapq.heappush(heap, left)
        heapq.heappush(heap, right)

    if incumbent_val is None:
        return SolveResult(Status.INFEASIBLE, n_nodes=n_nodes)
    return finish(Status.OPTIMAL, incumbent_val)

"""Best-first branch-and-bound for MILPs with binary variables.

Nodes carry only the sets of binaries fixed so far; the LP relaxation lives
in one incremental HiGHS instance whose bounds are swapped per node, so a
node solve warm-starts from the previous basis.  Branching picks the most
fractional binary.  A truncated run (time or node budget) still returns a
proved bound, which the spatial solver relies on.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, replace

import numpy as np

from . import highs_backend
from .lp import lp_solve
from .problems import LinearProgram, MilpProblem, SolveResult, Status

ABS_GAP = 1e-6
REL_GAP = 1e-6
INT_TOL = 1e-7


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    fixed0: frozenset = frozenset()
    fixed1: frozenset = frozenset()


def _gap_closed(incumbent: float, bound: float, rel: float) -> bool:
    return abs(incumbent - bound) <= max(ABS_GAP, rel * abs(incumbent))


class _NodeLp:
    """Node relaxation solver: incremental HiGHS when available, one-shot
    lp_solve otherwise.  Works in minimize space."""

    def __init__(self, min_lp: LinearProgram):
        self.min_lp = min_lp
        self.inc = highs_backend.IncrementalLp(min_lp) if highs_backend.AVAILABLE else None

    def solve(self, lo: np.ndarray, hi: np.ndarray):
        """(status, objective, x) with the offset applied."""
        if self.inc is not None:
            status, obj, x, _ = self.inc.solve_with_bounds(lo, hi)
            if status == Status.OPTIMAL:
                obj += self.min_lp.obj_offset
            return status, obj, x
        res = lp_solve(replace(self.min_lp, lo=lo, hi=hi))
        return res.status, res.objective, res.x


def milp_solve(
    p: MilpProblem,
    gap_tol: float | None = None,
    time_limit: float | None = None,
    node_limit: int | None = None,
) -> SolveResult:
    """Solve a MILP; statuses mirror lp_solve plus budget-limited outcomes.

    ``gap_tol`` overrides the default relative gap; absolute gap stays at
    1e-6.  With a time or node budget the result may be TIME_LIMIT /
    GAP_LIMIT and then carries the best incumbent and the proved bound.
    """
    p.validate()
    rel_gap = REL_GAP if gap_tol is None else float(gap_tol)
    t0 = time.monotonic()
    if p.lp.n_vars == 0:
        return lp_solve(p.lp)

    # Work in minimization space; flip at exit.
    lp = p.lp
    sign = -1.0 if lp.maximize else 1.0
    min_lp = replace(lp, obj=sign * lp.obj, obj_offset=sign * lp.obj_offset, maximize=False)
    binaries = np.array(sorted(p.binaries), dtype=int)
    node_lp = _NodeLp(min_lp)

    def node_bounds(node: _Node):
        lo = min_lp.lo.copy()
        hi = min_lp.hi.copy()
        for i in node.fixed0:
            hi[i] = min(hi[i], 0.0)
            lo[i] = min(lo[i], hi[i])
        for i in node.fixed1:
            lo[i] = max(lo[i], 1.0)
            hi[i] = max(hi[i], lo[i])
        return lo, hi

    def finish(status: Status, inc_val, inc_x, bound, nodes) -> SolveResult:
        obj = None if inc_val is None else sign * inc_val
        bnd = None if bound is None else sign * bound
        gap = None
        if inc_val is not None and bound is not None:
            gap = abs(inc_val - bound) / max(1.0, abs(inc_val))
        return SolveResult(status, objective=obj, x=inc_x, bound=bnd, gap=gap, n_nodes=nodes)

    seq = itertools.count()
    incumbent_val: float | None = None
    incumbent_x: np.ndarray | None = None
    heap: list[tuple[float, _Node, np.ndarray]] = []

    def process(node: _Node) -> Status:
        """Solve the node; either fathom it or queue it for branching."""
        nonlocal incumbent_val, incumbent_x
        status, obj, x = node_lp.solve(*node_bounds(node))
        if status != Status.OPTIMAL:
            return status
        obj = max(obj, node.bound)  # child relaxations cannot beat the parent
        node.bound = obj
        if incumbent_val is not None and obj >= incumbent_val - ABS_GAP:
            return Status.OPTIMAL
        if binaries.size:
            frac = np.minimum(x[binaries], 1.0 - x[binaries])
            integral = bool(np.all(frac <= INT_TOL))
        else:
            integral = True
        if integral:
            if incumbent_val is None or obj < incumbent_val:
                incumbent_val = obj
                incumbent_x = x
        else:
            heapq.heappush(heap, (obj, node, x))
        return Status.OPTIMAL

    root = _Node(-np.inf, next(seq))
    n_nodes = 1
    root_status = process(root)
    if root_status == Status.INFEASIBLE:
        return SolveResult(Status.INFEASIBLE)
    if root_status == Status.UNBOUNDED:
        return SolveResult(Status.UNBOUNDED)

    while heap:
        best_bound = heap[0][0]
        if incumbent_val is not None and _gap_closed(incumbent_val, best_bound, rel_gap):
            return finish(Status.OPTIMAL, incumbent_val, incumbent_x, best_bound, n_nodes)
        if time_limit is not None and time.monotonic() - t0 > time_limit:
            return finish(Status.TIME_LIMIT, incumbent_val, incumbent_x, best_bound, n_nodes)
        if node_limit is not None and n_nodes >= node_limit:
            return finish(Status.GAP_LIMIT, incumbent_val, incumbent_x, best_bound, n_nodes)

        _, node, x = heapq.heappop(heap)
        if incumbent_val is not None and node.bound >= incumbent_val - ABS_GAP:
            continue

        frac = np.minimum(x[binaries], 1.0 - x[binaries])
        j = int(binaries[int(np.argmax(frac))])
        for child in (
            _Node(node.bound, next(seq), node.fixed0 | {j}, node.fixed1),
            _Node(node.bound, next(seq), node.fixed0, node.fixed1 | {j}),
        ):
            n_nodes += 1
            process(child)

    if incumbent_val is None:
        return SolveResult(Status.INFEASIBLE, n_nodes=n_nodes)
    return finish(Status.OPTIMAL, incumbent_val, incumbent_x, incumbent_val, n_nodes)

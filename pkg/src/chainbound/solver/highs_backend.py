"""Incremental LP backend on the HiGHS bindings bundled with scipy.

Branch-and-bound resolves the same LP thousands of times with only variable
bounds changing, so the model is built once and each node only pushes new
bounds and re-runs; HiGHS keeps the previous basis, making node solves a
handful of simplex iterations.  Falls back gracefully (AVAILABLE = False)
when the private scipy module moves; callers then use the one-shot path.
"""

from __future__ import annotations

import numpy as np

from ..errors import NumericalFailure
from .problems import EQ, GE, LinearProgram, Status

try:  # pragma: no cover - exercised implicitly by every solver test
    from scipy.optimize._highspy import _core as _hc

    AVAILABLE = True
except ImportError:  # pragma: no cover
    _hc = None
    AVAILABLE = False

FEAS_TOL = 1e-7
DUAL_TOL = 1e-9


class IncrementalLp:
    """A minimize-sense LP held inside a persistent HiGHS instance.

    ``solve_with_bounds`` swaps in new variable bounds and re-runs; the
    objective and constraint matrix never change after construction.
    """

    def __init__(self, lp: LinearProgram):
        if not AVAILABLE:
            raise NumericalFailure("HiGHS backend unavailable")
        if lp.maximize:
            raise ValueError("IncrementalLp expects a minimize-canonical LP")
        n = lp.n_vars
        m = len(lp.constraints)
        self.n_vars = n
        self.obj_offset = lp.obj_offset

        row_lower = np.empty(m)
        row_upper = np.empty(m)
        data, indices, indptr = [], [], [0]
        cols: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for k, c in enumerate(lp.constraints):
            if c.sense == EQ:
                row_lower[k] = row_upper[k] = c.rhs
            elif c.sense == GE:
                row_lower[k], row_upper[k] = c.rhs, np.inf
            else:
                row_lower[k], row_upper[k] = -np.inf, c.rhs
            for i, v in zip(c.idx, c.coef):
                cols[i].append((k, v))
        for i in range(n):
            for k, v in sorted(cols[i]):
                indices.append(k)
                data.append(v)
            indptr.append(len(indices))

        hlp = _hc.HighsLp()
        hlp.num_col_ = n
        hlp.num_row_ = m
        hlp.col_cost_ = np.asarray(lp.obj, dtype=float)
        hlp.col_lower_ = np.asarray(lp.lo, dtype=float)
        hlp.col_upper_ = np.asarray(lp.hi, dtype=float)
        hlp.row_lower_ = row_lower
        hlp.row_upper_ = row_upper
        hlp.a_matrix_.format_ = _hc.MatrixFormat.kColwise
        hlp.a_matrix_.start_ = np.asarray(indptr, dtype=np.int32)
        hlp.a_matrix_.index_ = np.asarray(indices, dtype=np.int32)
        hlp.a_matrix_.value_ = np.asarray(data, dtype=float)

        self._row_lower = row_lower
        self._row_upper = row_upper
        self._col_cost = np.asarray(lp.obj, dtype=float)
        self._h = _hc._Highs()
        self._h.setOptionValue("output_flag", False)
        self._h.setOptionValue("threads", 1)
        self._h.setOptionValue("primal_feasibility_tolerance", FEAS_TOL)
        self._h.setOptionValue("dual_feasibility_tolerance", DUAL_TOL)
        # Keep HiGHS from silently dropping small-but-meaningful envelope
        # coefficients; kWarning (e.g. values it still drops) is acceptable.
        self._h.setOptionValue("small_matrix_value", 1e-12)
        model = _hc.HighsModel()
        model.lp_ = hlp
        if self._h.passModel(model) == _hc.HighsStatus.kError:
            raise NumericalFailure("HiGHS rejected the model")
        self._indices = np.arange(n, dtype=np.int32)

    def solve_with_bounds(self, lo: np.ndarray, hi: np.ndarray):
        """Returns (Status, objective, x, dual_objective); objective/x are
        None unless optimal.  Values are in minimize space without the
        objective offset applied."""
        h = self._h
        if self.n_vars:
            h.changeColsBounds(
                self.n_vars,
                self._indices,
                np.asarray(lo, dtype=float),
                np.asarray(hi, dtype=float),
            )
        run_status = h.run()
        if run_status == _hc.HighsStatus.kError:
            raise NumericalFailure("HiGHS run() reported an error")
        status = h.getModelStatus()
        if status == _hc.HighsModelStatus.kUnknown:
            # Warm-start occasionally stalls on badly scaled relaxations;
            # retry cold.
            h.clearSolver()
            run_status = h.run()
            if run_status == _hc.HighsStatus.kError:
                raise NumericalFailure("HiGHS run() reported an error")
            status = h.getModelStatus()
        if status == _hc.HighsModelStatus.kOptimal:
            sol = h.getSolution()
            x = np.asarray(sol.col_value, dtype=float)
            obj = float(h.getInfo().objective_function_value)
            dual = self._dual_objective(sol, lo, hi)
            return Status.OPTIMAL, obj, x, dual
        if status == _hc.HighsModelStatus.kInfeasible:
            return Status.INFEASIBLE, None, None, None
        if status in (
            _hc.HighsModelStatus.kUnbounded,
            _hc.HighsModelStatus.kUnboundedOrInfeasible,
        ):
            return Status.UNBOUNDED, None, None, None
        raise NumericalFailure(f"HiGHS returned model status {status}")

    def _dual_objective(self, sol, lo, hi) -> float:
        """Independent dual value: each multiplier paired with the bound it
        supports (rows at their binding side, columns at the bound their
        reduced cost pins)."""
        row_dual = np.asarray(sol.row_dual, dtype=float)
        col_dual = np.asarray(sol.col_dual, dtype=float)
        total = 0.0
        for k, y in enumerate(row_dual):
            if y > 0.0 and np.isfinite(self._row_lower[k]):
                total += y * self._row_lower[k]
            elif y < 0.0 and np.isfinite(self._row_upper[k]):
                total += y * self._row_upper[k]
        for j, z in enumerate(col_dual):
            if z > 0.0 and np.isfinite(lo[j]):
                total += z * lo[j]
            elif z < 0.0 and np.isfinite(hi[j]):
                total += z * hi[j]
        return total

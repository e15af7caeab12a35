"""Problem containers for the LP / MILP / bilinear solver stack.

Everything downstream assumes finite variable bounds; the verification
pipeline guarantees them by construction (interval propagation supplies a
box for every quantity before it reaches a solver).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..errors import InvalidParameter
from ..intervals import Interval

LE = "<="
GE = ">="
EQ = "="
_SENSES = (LE, GE, EQ)


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    GAP_LIMIT = "gap_limit"
    TIME_LIMIT = "time_limit"


@dataclass(frozen=True)
class LinConstraint:
    """Sparse row: sum(coef[k] * x[idx[k]]) <sense> rhs."""

    idx: tuple[int, ...]
    coef: tuple[float, ...]
    sense: str
    rhs: float
    name: str = ""

    def __post_init__(self):
        if self.sense not in _SENSES:
            raise InvalidParameter(f"unknown constraint sense {self.sense!r}")
        if len(self.idx) != len(self.coef):
            raise InvalidParameter("constraint idx/coef length mismatch")

    def activity(self, x: np.ndarray) -> float:
        return float(sum(c * x[i] for i, c in zip(self.idx, self.coef)))

    def violated_by(self, x: np.ndarray, tol: float) -> bool:
        a = self.activity(x)
        if self.sense == LE:
            return a > self.rhs + tol
        if self.sense == GE:
            return a < self.rhs - tol
        return abs(a - self.rhs) > tol


@dataclass
class LinearProgram:
    lo: np.ndarray
    hi: np.ndarray
    obj: np.ndarray
    constraints: list[LinConstraint]
    maximize: bool = False
    obj_offset: float = 0.0
    names: list[str] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return len(self.lo)

    def validate(self) -> None:
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise InvalidParameter("NaN variable bound")
        if np.any(self.lo > self.hi):
            raise InvalidParameter("inverted variable bound")
        if np.any(np.isnan(self.obj)):
            raise InvalidParameter("NaN objective coefficient")
        for c in self.constraints:
            if any(not np.isfinite(v) for v in c.coef) or not np.isfinite(c.rhs):
                raise InvalidParameter(f"non-finite coefficient in row {c.name!r}")


@dataclass
class MilpProblem:
    lp: LinearProgram
    binaries: tuple[int, ...]

    def validate(self) -> None:
        self.lp.validate()
        for i in self.binaries:
            if self.lp.lo[i] < -1e-12 or self.lp.hi[i] > 1.0 + 1e-12:
                raise InvalidParameter(f"binary variable {i} has bounds outside [0, 1]")


@dataclass(frozen=True)
class BilinearTerm:
    """Auxiliary variable ``w`` stands for the product ``u * v``."""

    w: int
    u: int
    v: int


@dataclass
class BilinearProgram:
    milp: MilpProblem
    terms: list[BilinearTerm]


@dataclass
class SolveResult:
    status: Status
    objective: float | None = None
    x: np.ndarray | None = None
    bound: float | None = None
    gap: float | None = None
    dual_objective: float | None = None
    n_nodes: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == Status.OPTIMAL


class ProblemBuilder:
    """Incremental construction of LP / MILP / bilinear problems.

    Encoders add variables and rows; the verifier stitches several encodings
    into one program.  Variable handles are plain integer indices.
    """

    def __init__(self):
        self._lo: list[float] = []
        self._hi: list[float] = []
        self._names: list[str] = []
        self._binaries: list[int] = []
        self._constraints: list[LinConstraint] = []
        self._obj: dict[int, float] = {}
        self._obj_offset = 0.0
        self._maximize = False
        self._terms: list[BilinearTerm] = []

    @property
    def n_vars(self) -> int:
        return len(self._lo)

    @property
    def n_constraints(self) -> int:
        return len(self._constraints)

    @property
    def binary_set(self) -> frozenset[int]:
        return frozenset(self._binaries)

    def add_var(self, name: str, lo: float, hi: float, *, binary: bool = False) -> int:
        if lo > hi:
            raise InvalidParameter(f"variable {name!r} has inverted bounds [{lo}, {hi}]")
        idx = len(self._lo)
        self._lo.append(float(lo))
        self._hi.append(float(hi))
        self._names.append(name)
        if binary:
            self._binaries.append(idx)
        return idx

    def add_binary(self, name: str) -> int:
        return self.add_var(name, 0.0, 1.0, binary=True)

    def var_bounds(self, idx: int) -> Interval:
        return Interval(self._lo[idx], self._hi[idx])

    def set_bounds(self, idx: int, lo: float, hi: float) -> None:
        if lo > hi:
            raise InvalidParameter(f"inverted bounds [{lo}, {hi}] for var {idx}")
        self._lo[idx] = float(lo)
        self._hi[idx] = float(hi)

    def tighten_bounds(self, idx: int, iv: Interval) -> None:
        """Intersect the variable's box with ``iv``."""
        self.set_bounds(idx, max(self._lo[idx], iv.lo), min(self._hi[idx], iv.hi))

    def add_constraint(
        self,
        coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
        sense: str,
        rhs: float,
        name: str = "",
    ) -> None:
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        merged: dict[int, float] = {}
        for i, c in items:
            if c != 0.0:
                merged[i] = merged.get(i, 0.0) + float(c)
        self._constraints.append(
            LinConstraint(tuple(merged.keys()), tuple(merged.values()), sense, float(rhs), name)
        )

    def set_constraint_rhs(self, index: int, rhs: float) -> None:
        """Repoint an existing row's right-hand side (e.g. pinning rows)."""
        old = self._constraints[index]
        self._constraints[index] = LinConstraint(old.idx, old.coef, old.sense, float(rhs), old.name)

    def add_bilinear_term(self, name: str, u: int, v: int) -> int:
        """Create the auxiliary product variable for u*v, bounded by the
        interval product of the factors' boxes."""
        prod = self.var_bounds(u) * self.var_bounds(v)
        w = self.add_var(name, prod.lo, prod.hi)
        self._terms.append(BilinearTerm(w, u, v))
        return w

    def register_bilinear(self, w: int, u: int, v: int) -> None:
        """Declare an existing variable as the product u*v."""
        self._terms.append(BilinearTerm(w, u, v))

    def set_objective(
        self,
        coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
        *,
        maximize: bool,
        offset: float = 0.0,
    ) -> None:
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        self._obj = {i: float(c) for i, c in items if c != 0.0}
        self._obj_offset = float(offset)
        self._maximize = maximize

    def build_lp(self) -> LinearProgram:
        obj = np.zeros(self.n_vars)
        for i, c in self._obj.items():
            obj[i] = c
        lp = LinearProgram(
            lo=np.array(self._lo, dtype=float),
            hi=np.array(self._hi, dtype=float),
            obj=obj,
            constraints=list(self._constraints),
            maximize=self._maximize,
            obj_offset=self._obj_offset,
            names=list(self._names),
        )
        lp.validate()
        return lp

    def build_milp(self) -> MilpProblem:
        p = MilpProblem(self.build_lp(), tuple(self._binaries))
        p.validate()
        return p

    def build_bilinear(self) -> BilinearProgram:
        return BilinearProgram(self.build_milp(), list(self._terms))

    @property
    def bilinear_terms(self) -> list[BilinearTerm]:
        return list(self._terms)


def write_lp_text(p: LinearProgram | MilpProblem | BilinearProgram) -> str:
    """Human-readable dump, one constraint per line, for cross-checking
    against external solvers."""
    terms: Sequence[BilinearTerm] = ()
    if isinstance(p, BilinearProgram):
        terms = p.terms
        p = p.milp
    binaries: Sequence[int] = ()
    if isinstance(p, MilpProblem):
        binaries = p.binaries
        p = p.lp

    def vname(i: int) -> str:
        return p.names[i] if i < len(p.names) and p.names[i] else f"x{i}"

    def row(idx, coef) -> str:
        return " + ".join(f"{c:.12g}*{vname(i)}" for i, c in zip(idx, coef)) or "0"

    lines = []
    sense = "maximize" if p.maximize else "minimize"
    nz = [(i, c) for i, c in enumerate(p.obj) if c != 0.0]
    lines.append(f"{sense}: {row(*zip(*nz)) if nz else '0'} + {p.obj_offset:.12g}")
    lines.append("subject to:")
    for c in p.constraints:
        tag = f"  [{c.name}]" if c.name else ""
        lines.append(f"  {row(c.idx, c.coef)} {c.sense} {c.rhs:.12g}{tag}")
    lines.append("bounds:")
    for i in range(p.n_vars):
        lines.append(f"  {p.lo[i]:.12g} <= {vname(i)} <= {p.hi[i]:.12g}")
    if binaries:
        lines.append("binary: " + " ".join(vname(i) for i in binaries))
    for t in terms:
        lines.append(f"product: {vname(t.w)} = {vname(t.u)} * {vname(t.v)}")
    return "\n".join(lines) + "\n"

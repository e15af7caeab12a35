"""Declarative data model for Markov processes with learned parameters.

A process is described by affine links that map the concatenated model
outputs (theta) to the initial distribution pi, the transition matrix P
(row-major vectorized), and the reward vector r, plus linear inequalities
on those parameters, a feature set, and a property query.  Validation and
problem-class detection live here; solving lives in the verifier.

State indices are 0-based everywhere in files and messages.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
import numpy as np

from .errors import InvalidQuery
from .models import ModelArtifact

PI = "pi"
P = "P"
R_VEC = "r"
PI_TILDE = "pi_tilde"
Q = "Q"
R_MAT = "R"
QR = "QR"

LINK_TARGETS = (PI, P, R_VEC)
INEQ_TARGETS = (PI, P, R_VEC, PI_TILDE, Q, R_MAT, QR)


class QueryKind(str, enum.Enum):
    TOTAL_REWARD = "total_reward"
    REACHABILITY = "reachability"
    HITTING_TIME = "hitting_time"


class QuerySense(str, enum.Enum):
    MIN = "min"
    MAX = "max"
    FEASIBILITY = "feasibility"


class ProblemClass(str, enum.Enum):
    """Structure of the optimization problem after fixing constant
    parameters (objective x Bellman-constraint shape)."""

    FULL_BILINEAR = "full_bilinear"
    LINEAR_OBJ_BILINEAR_CON = "linear_obj_bilinear_con"        # pi fixed
    BILINEAR_OBJ_LINEAR_CON = "bilinear_obj_linear_con"        # P fixed
    BILINEAR_OBJ_BILINEAR_CON = "bilinear_obj_bilinear_con"    # r fixed
    LINEAR_LINEAR = "linear_linear"                            # pi, P fixed
    LINEAR_OBJ_BILINEAR_CON2 = "linear_obj_bilinear_con2"      # pi, r fixed
    VALUE_CLOSED_FORM = "value_closed_form"                    # P, r fixed


@dataclass(frozen=True)
class ParameterLink:
    """Affine map param = A @ theta + b."""

    target: str
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", np.atleast_2d(np.asarray(self.A, dtype=float)))
        object.__setattr__(self, "b", np.atleast_1d(np.asarray(self.b, dtype=float)))

    @property
    def is_fixed(self) -> bool:
        """Constant link: A identically zero (exact zeros; near-zero
        coefficients are deliberately not rounded)."""
        return self.A.size == 0 or bool(np.all(self.A == 0.0))

    def constant(self) -> np.ndarray:
        return self.b.copy()


@dataclass(frozen=True)
class ParameterInequality:
    """Rows C @ param <= d."""

    target: str
    C: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "C", np.atleast_2d(np.asarray(self.C, dtype=float)))
        object.__setattr__(self, "d", np.atleast_1d(np.asarray(self.d, dtype=float)))


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.atleast_1d(np.asarray(self.lower, dtype=float)))
        object.__setattr__(self, "upper", np.atleast_1d(np.asarray(self.upper, dtype=float)))


@dataclass(frozen=True)
class LinearCut:
    """c @ x <sense> rhs with sense '<=' or '>='."""

    c: np.ndarray
    rhs: float
    sense: str = "<="

    def __post_init__(self):
        object.__setattr__(self, "c", np.atleast_1d(np.asarray(self.c, dtype=float)))


@dataclass(frozen=True)
class FeatureSet:
    """Union of boxes, shared linear cuts, and per-feature integrality."""

    boxes: tuple[Box, ...]
    extra_linear: tuple[LinearCut, ...] = ()
    integrality: tuple[bool, ...] = ()

    @classmethod
    def single_box(cls, lower, upper, integrality=None) -> "FeatureSet":
        box = Box(np.asarray(lower), np.asarray(upper))
        integ = tuple(integrality) if integrality is not None else (False,) * len(box.lower)
        return cls((box,), (), integ)

    @property
    def n_features(self) -> int:
        return len(self.boxes[0].lower) if self.boxes else 0

    def hull(self) -> Box:
        lo = np.min([b.lower for b in self.boxes], axis=0)
        hi = np.max([b.upper for b in self.boxes], axis=0)
        return Box(lo, hi)

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        in_box = any(
            bool(np.all(x >= b.lower - tol) and np.all(x <= b.upper + tol))
            for b in self.boxes
        )
        if not in_box:
            return False
        for cut in self.extra_linear:
            a = float(cut.c @ x)
            if cut.sense == "<=" and a > cut.rhs + tol:
                return False
            if cut.sense == ">=" and a < cut.rhs - tol:
                return False
        for i, integral in enumerate(self.integrality):
            if integral and abs(x[i] - round(x[i])) > tol:
                return False
        return True


@dataclass(frozen=True)
class PropertyQuery:
    kind: QueryKind
    sense: QuerySense = QuerySense.MAX
    target_set: tuple[int, ...] = ()
    transient_set: tuple[int, ...] = ()
    w_min: float = -math.inf
    w_max: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "target_set", tuple(sorted(self.target_set)))
        object.__setattr__(self, "transient_set", tuple(sorted(self.transient_set)))


@dataclass
class MarkovProcessSpec:
    n_states: int
    m_features: int
    query: PropertyQuery
    feature_set: FeatureSet
    links: dict[str, ParameterLink]
    models: list[ModelArtifact] = field(default_factory=list)
    ineqs: list[ParameterInequality] = field(default_factory=list)
    discount: float | None = None
    absorbing_states: tuple[int, ...] = ()

    @property
    def n_outputs(self) -> int:
        """Total model output arity (width of theta)."""
        return sum(m.arity for m in self.models)

    def target_arity(self, target: str) -> int:
        n = self.n_states
        if target in (PI, R_VEC):
            return n
        if target == P:
            return n * n
        t = len(self.query.transient_set)
        s = len(self.query.target_set)
        if target == PI_TILDE:
            return t
        if target == Q:
            return t * t
        if target == R_MAT:
            return t * s
        if target == QR:
            return t * t + t * s
        raise InvalidQuery(f"unknown parameter target {target!r}")

    def link_is_fixed(self, target: str) -> bool:
        link = self.links.get(target)
        return link is not None and link.is_fixed


@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    where: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.where}: {self.message}"


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    def error(self, where: str, message: str) -> None:
        self.issues.append(ValidationIssue("error", where, message))

    def warn(self, where: str, message: str) -> None:
        self.issues.append(ValidationIssue("warning", where, message))

    @property
    def errors(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def is_valid(self) -> bool:
        return not self.errors

    def __len__(self) -> int:
        return len(self.issues)

    def __str__(self) -> str:
        return "\n".join(str(i) for i in self.issues) if self.issues else "ok"


def validate(spec: MarkovProcessSpec) -> ValidationReport:
    """Collect every violation; an empty report means the spec is admissible."""
    rep = ValidationReport()
    n = spec.n_states
    if n < 1:
        rep.error("n_states", "need at least one state")
        return rep
    if spec.m_features < 1:
        rep.error("m_features", "need at least one feature")

    ell = spec.n_outputs
    kind = spec.query.kind

    # Links: pi and P always; r only drives total-reward queries.
    required = [PI, P] + ([R_VEC] if kind == QueryKind.TOTAL_REWARD else [])
    for target in required:
        if target not in spec.links:
            rep.error(f"links.{target}", "missing parameter link")
    for target, link in spec.links.items():
        if target not in LINK_TARGETS:
            rep.error(f"links.{target}", f"links must target one of {LINK_TARGETS}")
            continue
        arity = spec.target_arity(target)
        if link.A.shape != (arity, ell) and not (link.is_fixed and link.A.shape[0] == arity):
            rep.error(
                f"links.{target}",
                f"{target} link arity: A is {link.A.shape}, expected ({arity}, {ell})",
            )
        if link.b.shape != (arity,):
            rep.error(f"links.{target}", f"b has length {link.b.shape[0]}, expected {arity}")
        if not np.all(np.isfinite(link.A)) or not np.all(np.isfinite(link.b)):
            rep.error(f"links.{target}", "link entries must be finite")

    if kind == QueryKind.TOTAL_REWARD:
        if spec.discount is None or not (0.0 < spec.discount < 1.0):
            rep.error("discount", f"discount must be in (0, 1); got {spec.discount}")

    # Query sets.
    S, T = spec.query.target_set, spec.query.transient_set
    if kind in (QueryKind.REACHABILITY, QueryKind.HITTING_TIME):
        if not T:
            rep.error("query.transient_set", "transient set must be nonempty")
        if not S:
            rep.error("query.target_set", "target set must be nonempty")
        if set(S) & set(T):
            rep.error("query", f"target and transient sets overlap: {sorted(set(S) & set(T))}")
        bad = [i for i in (*S, *T) if not (0 <= i < n)]
        if bad:
            rep.error("query", f"state indices out of range: {bad}")
    if spec.query.sense == QuerySense.FEASIBILITY and spec.query.w_min > spec.query.w_max:
        rep.error("query", f"w_min {spec.query.w_min} > w_max {spec.query.w_max}")

    # Inequalities must match the query's parameter space.
    restricted = (PI_TILDE, Q, R_MAT, QR)
    for k, ineq in enumerate(spec.ineqs):
        where = f"ineqs[{k}]"
        if ineq.target not in INEQ_TARGETS:
            rep.error(where, f"unknown inequality target {ineq.target!r}")
            continue
        if kind == QueryKind.TOTAL_REWARD and ineq.target in restricted:
            rep.error(where, f"{ineq.target} inequalities need a reachability/hitting query")
            continue
        if kind != QueryKind.TOTAL_REWARD and ineq.target in (PI, P, R_VEC):
            rep.error(where, f"{ineq.target} inequalities apply to total-reward queries only")
            continue
        if kind == QueryKind.HITTING_TIME and ineq.target in (R_MAT, QR):
            rep.error(where, "hitting-time programs have no R parameter")
            continue
        arity = spec.target_arity(ineq.target)
        if ineq.C.shape[1] != arity:
            rep.error(where, f"C has {ineq.C.shape[1]} columns, expected {arity}")
        if ineq.d.shape[0] != ineq.C.shape[0]:
            rep.error(where, "C/d row mismatch")

    # Feature set.
    fs = spec.feature_set
    if not fs.boxes:
        rep.error("feature_set", "needs at least one box")
    for bi, box in enumerate(fs.boxes):
        if len(box.lower) != spec.m_features or len(box.upper) != spec.m_features:
            rep.error(f"feature_set.boxes[{bi}]", "box dimension != m_features")
            continue
        if np.any(box.lower > box.upper):
            rep.error(f"feature_set.boxes[{bi}]", "empty box (lower > upper)")
        if not np.all(np.isfinite(box.lower)) or not np.all(np.isfinite(box.upper)):
            rep.error(f"feature_set.boxes[{bi}]", "box bounds must be finite")
    if fs.integrality and len(fs.integrality) != spec.m_features:
        rep.error("feature_set.integrality", "flag list length != m_features")
    for i, integral in enumerate(fs.integrality):
        if not integral:
            continue
        for bi, box in enumerate(fs.boxes):
            if i < len(box.lower) and (
                abs(box.lower[i] - round(box.lower[i])) > 1e-9
                or abs(box.upper[i] - round(box.upper[i])) > 1e-9
            ):
                rep.error(
                    f"feature_set.boxes[{bi}]",
                    f"integral feature {i} needs integer box bounds",
                )
    for ci, cut in enumerate(fs.extra_linear):
        if len(cut.c) != spec.m_features:
            rep.error(f"feature_set.extra_linear[{ci}]", "cut dimension != m_features")
        if cut.sense not in ("<=", ">="):
            rep.error(f"feature_set.extra_linear[{ci}]", f"unknown sense {cut.sense!r}")

    # Models.
    for mi, model in enumerate(spec.models):
        if model.n_inputs is not None and model.n_inputs != spec.m_features:
            rep.error(f"models[{mi}]", f"model expects {model.n_inputs} features, spec has {spec.m_features}")

    # Absorbing states: the P link row must be a constant unit row.
    p_link = spec.links.get(P)
    for s in spec.absorbing_states:
        if not (0 <= s < n):
            rep.error("absorbing_states", f"state {s} out of range")
            continue
        if p_link is None or p_link.A.shape[0] != n * n:
            continue
        rows = range(s * n, (s + 1) * n)
        unit = np.zeros(n)
        unit[s] = 1.0
        if np.any(p_link.A[list(rows), :] != 0.0) or not np.allclose(
            p_link.b[list(rows)], unit
        ):
            rep.error(
                "absorbing_states",
                f"state {s} declared absorbing but its P rows are not fixed to the unit vector",
            )

    # Constant links that already violate declared inequalities deserve a
    # warning: links alone never enforce C*param <= d.
    for k, ineq in enumerate(spec.ineqs):
        link = spec.links.get(ineq.target)
        if link is not None and link.is_fixed and ineq.C.shape[1] == link.b.shape[0]:
            lhs = ineq.C @ link.constant()
            if np.any(lhs > ineq.d + 1e-9):
                rep.warn(f"ineqs[{k}]", f"constant {ineq.target} link violates this inequality")

    # Constant stochastic parameters that cannot satisfy the appended
    # stochasticity rows make the final program trivially infeasible.
    if kind == QueryKind.TOTAL_REWARD:
        if p_link is not None and p_link.is_fixed and p_link.b.shape[0] == n * n:
            Pm = p_link.constant().reshape(n, n)
            if np.any(np.abs(Pm.sum(axis=1) - 1.0) > 1e-9):
                rep.warn("links.P", "constant P rows do not sum to 1")
            if np.any(Pm < -1e-12) or np.any(Pm > 1 + 1e-12):
                rep.warn("links.P", "constant P entries outside [0, 1]")
        pi_link = spec.links.get(PI)
        if pi_link is not None and pi_link.is_fixed and pi_link.b.shape[0] == n:
            if abs(pi_link.constant().sum() - 1.0) > 1e-9:
                rep.warn("links.pi", "constant pi does not sum to 1")

    return rep


def classify_problem(spec: MarkovProcessSpec) -> ProblemClass:
    """Problem-class detection from which parameters are fixed.

    'Fixed' means the affine link has an exactly zero coefficient matrix.
    For reachability the roles are pi_tilde / Q / R; hitting time has an
    inherently constant right-hand side.
    """
    kind = spec.query.kind
    if kind == QueryKind.TOTAL_REWARD:
        pi_fixed = spec.link_is_fixed(PI)
        p_fixed = spec.link_is_fixed(P)
        r_fixed = spec.link_is_fixed(R_VEC)
    else:
        views = restrict_to_transient(spec)
        pi_fixed = views.pi_tilde.is_fixed
        p_fixed = views.Q.is_fixed
        r_fixed = True if kind == QueryKind.HITTING_TIME else views.R.is_fixed

    if p_fixed and r_fixed:
        return ProblemClass.VALUE_CLOSED_FORM
    if pi_fixed and p_fixed:
        return ProblemClass.LINEAR_LINEAR
    if pi_fixed and r_fixed:
        return ProblemClass.LINEAR_OBJ_BILINEAR_CON2
    if pi_fixed:
        return ProblemClass.LINEAR_OBJ_BILINEAR_CON
    if p_fixed:
        return ProblemClass.BILINEAR_OBJ_LINEAR_CON
    if r_fixed:
        return ProblemClass.BILINEAR_OBJ_BILINEAR_CON
    return ProblemClass.FULL_BILINEAR


@dataclass(frozen=True)
class RestrictedLinks:
    """Row/column-selected affine links for the transient-restricted
    program: Q is |T| x |T|, R is |T| x |S|, pi_tilde has length |T|."""

    pi_tilde: ParameterLink
    Q: ParameterLink
    R: ParameterLink
    transient: tuple[int, ...]
    target: tuple[int, ...]


def restrict_to_transient(spec: MarkovProcessSpec) -> RestrictedLinks:
    """Derive the restricted parameter links by index selection from the
    full pi and P links (vec is row-major, so P_ij sits at row i*n + j)."""
    if spec.query.kind not in (QueryKind.REACHABILITY, QueryKind.HITTING_TIME):
        raise InvalidQuery(f"restriction needs a reachability/hitting query, got {spec.query.kind}")
    T = spec.query.transient_set
    S = spec.query.target_set
    if not T:
        raise InvalidQuery("transient set is empty")
    if not S:
        raise InvalidQuery("target set is empty")
    n = spec.n_states
    pi_link = spec.links[PI]
    p_link = spec.links[P]

    t_idx = list(T)
    q_rows = [ti * n + tj for ti in T for tj in T]
    r_rows = [ti * n + sj for ti in T for sj in S]

    return RestrictedLinks(
        pi_tilde=ParameterLink(PI_TILDE, pi_link.A[t_idx, :], pi_link.b[t_idx]),
        Q=ParameterLink(Q, p_link.A[q_rows, :], p_link.b[q_rows]),
        R=ParameterLink(R_MAT, p_link.A[r_rows, :], p_link.b[r_rows]),
        transient=T,
        target=S,
    )

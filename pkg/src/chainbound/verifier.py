"""End-to-end verification pipeline.

The solve decomposes into fixed stages, each of which only narrows
intervals:

1. bound every model output over the feature set (two MILPs per output),
2. push the output box through the affine links onto pi / P / r (or the
   transient-restricted pi-tilde / Q / R),
3. derive initial value-vector bounds from the reward box,
4. tighten the value box with interval Gauss-Seidel,
5. assemble the full program with every box injected as variable bounds and
   hand it to the MILP or spatial bilinear solver, downgrading per the
   fixed-parameter special cases.

Stages can be disabled back-to-front for ablation benchmarks; a disabled
bound stage falls back to the definitional box ([0,1] for probabilities, a
large safety box for rewards and values), which mirrors handing the raw
program to a solver with default bounds.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .encodings import (
    DEFAULT_SIGMOID_SEGMENTS,
    MilpEncoding,
    add_feature_vars,
    affine_interval,
    encode,
    output_bounds,
)
from .errors import (
    DivisionByZeroInterval,
    InternalConsistencyError,
    InvalidParameter,
)
from .intervals import (
    Interval,
    IntervalMatrix,
    IntervalVector,
    gauss_seidel_solve,
    is_interval_m_matrix,
)
from .markov import (
    P,
    PI,
    PI_TILDE,
    Q,
    QR,
    R_MAT,
    R_VEC,
    MarkovProcessSpec,
    ParameterLink,
    ProblemClass,
    QueryKind,
    QuerySense,
    classify_problem,
    restrict_to_transient,
    validate,
)
from .solver import (
    EQ,
    GE,
    LE,
    ProblemBuilder,
    Status,
    bilinear_solve,
    milp_solve,
)

STAGES = ("theta", "affine", "v_init", "v_tighten")

# Fallback half-width for value/reward boxes when the deriving stage is
# ablated; plays the role of a solver's default variable bounds.  Must only
# be large enough to contain any value the admitted parameters can produce.
BIG_BOUND = 1e5


@dataclass
class VerifyConfig:
    gap_tol: float = 1e-4
    time_limit: float | None = None
    sigmoid_segments: int = DEFAULT_SIGMOID_SEGMENTS
    epsilon: float = 1e-6
    gs_max_iter: int = 100
    gs_tol: float = 1e-9
    ablate: frozenset = frozenset()
    force_full_bilinear: bool = False
    bounds_only: bool = False
    inner_node_limit: int | None = None
    debug_dump_path: str | None = None

    def disabled_stages(self) -> frozenset:
        """Disabling a stage disables all later stages."""
        bad = set(self.ablate) - set(STAGES)
        if bad:
            raise InvalidParameter(f"unknown ablation stages {sorted(bad)}")
        if not self.ablate:
            return frozenset()
        first = min(STAGES.index(s) for s in self.ablate)
        return frozenset(STAGES[first:])


@dataclass
class BoundsLedger:
    """Interval state after each pipeline stage.  Later stages only narrow."""

    theta: list[Interval] = field(default_factory=list)
    pi: list[Interval] = field(default_factory=list)
    P: list[list[Interval]] = field(default_factory=list)
    r: list[Interval] = field(default_factory=list)
    R: list[list[Interval]] = field(default_factory=list)
    v_initial: list[Interval] = field(default_factory=list)
    v: list[Interval] = field(default_factory=list)
    hull_certified: bool | None = None
    stages_run: tuple[str, ...] = ()
    timings: dict[str, float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        def box(ivs):
            return [[iv.lo, iv.hi] for iv in ivs]

        return {
            "theta": box(self.theta),
            "pi": box(self.pi),
            "P": [box(row) for row in self.P],
            "r": box(self.r),
            "R": [box(row) for row in self.R],
            "v_initial": box(self.v_initial),
            "v": box(self.v),
            "hull_certified": self.hull_certified,
            "stages_run": list(self.stages_run),
            "timings": dict(self.timings),
        }


@dataclass
class VerificationResult:
    status: str
    problem_class: ProblemClass
    value: float | None = None
    bound: float | None = None
    gap: float | None = None
    witness: np.ndarray | None = None
    witness_value: float | None = None
    program_value: float | None = None
    witness_params: dict = field(default_factory=dict)
    ledger: BoundsLedger = field(default_factory=BoundsLedger)
    outer_bound: bool = False
    envelope_gap: float = 0.0
    n_nodes: int = 0
    runtime: float = 0.0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")


# --------------------------------------------------------------------------
# Stage operations (also usable standalone)
# --------------------------------------------------------------------------


def propagate_affine(theta_box: list[Interval], link: ParameterLink) -> list[Interval]:
    """Exact componentwise image of the theta box under an affine link
    (signed-vertex bound per row)."""
    if link.A.shape[1] == 0:
        return [Interval.point(v) for v in link.b]
    return affine_interval(link.A, link.b, list(theta_box))


def _structural_theta(model, fs, segments) -> list[Interval]:
    """Output boxes implied by the encoding alone (no optimization)."""
    builder = ProblemBuilder()
    xs = add_feature_vars(builder, fs)
    enc = encode(model, builder, xs, sigmoid_segments=segments)
    return [builder.var_bounds(y) for y in enc.output_vars]


def theta_bounds(spec: MarkovProcessSpec, config: VerifyConfig | None = None) -> list[Interval]:
    """Stage 1: per-output boxes for every model output.

    Outputs that no link coefficient touches skip their two MILPs and keep
    the encoding's structural box.
    """
    config = config or VerifyConfig()
    used = _used_outputs(spec)
    boxes: list[Interval] = []
    offset = 0
    for model in spec.models:
        outs = range(offset, offset + model.arity)
        if any(j in used for j in outs):
            boxes.extend(
                output_bounds(
                    model,
                    spec.feature_set,
                    sigmoid_segments=config.sigmoid_segments,
                    time_limit=config.time_limit,
                )
            )
        else:
            boxes.extend(_structural_theta(model, spec.feature_set, config.sigmoid_segments))
        offset += model.arity
    return boxes


def _used_outputs(spec: MarkovProcessSpec) -> set[int]:
    used: set[int] = set()
    for link in spec.links.values():
        if link.A.size:
            used.update(int(j) for j in np.nonzero(np.any(link.A != 0.0, axis=0))[0])
    return used


def initial_v_bounds(
    kind: QueryKind,
    r_boxes: list[Interval],
    discount: float | None,
    epsilon: float,
    n: int,
) -> list[Interval]:
    """Stage 3: a-priori value box.

    Total reward: every component lies in [gamma*min r_lo, gamma*max r_hi]
    with gamma = 1/(1-discount).  Reachability: [0, max row sum of the
    R box / epsilon], intersected with [0,1] since the value is a
    probability.  Hitting time: [0, 1/epsilon].  The epsilon comes from the
    strict-substochasticity offset on Q's row sums.
    """
    if kind == QueryKind.TOTAL_REWARD:
        if discount is None or not (0.0 < discount < 1.0):
            raise InvalidParameter(f"discount must be in (0,1); got {discount}")
        gamma = 1.0 / (1.0 - discount)
        lo = gamma * min(b.lo for b in r_boxes)
        hi = gamma * max(b.hi for b in r_boxes)
        return [Interval(min(lo, hi), max(lo, hi))] * n
    if kind == QueryKind.REACHABILITY:
        # r_boxes here are the row-sum boxes of R.
        hi = max(b.hi for b in r_boxes) / epsilon
        return [Interval(0.0, min(1.0, hi))] * n
    return [Interval(0.0, 1.0 / epsilon)] * n


def tighten_v_bounds(
    kind: QueryKind,
    p_boxes: list[list[Interval]],
    rhs_boxes: list[Interval],
    v0: list[Interval],
    discount: float | None,
    config: VerifyConfig,
) -> tuple[list[Interval], bool]:
    """Stage 4: interval Gauss-Seidel on (I - lam*P) v = rhs.

    Returns the refined box and the hull certificate (interval M-matrix
    test on the elementwise upper bound of P, with lam = 1 for the
    substochastic kinds).
    """
    n = len(v0)
    lam = discount if kind == QueryKind.TOTAL_REWARD else 1.0
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            d = 1.0 if i == j else 0.0
            pij = p_boxes[i][j]
            row.append(Interval(d - lam * pij.hi, d - lam * pij.lo))
        rows.append(row)
    A = IntervalMatrix(rows)

    floor = (1.0 - lam) if kind == QueryKind.TOTAL_REWARD else config.epsilon
    for i in range(n):
        if A[i, i].lo < floor - 1e-12:
            raise DivisionByZeroInterval(
                f"diagonal lower bound {A[i, i].lo} below the safety floor {floor}; "
                "parameter boxes were not shrunk for substochasticity"
            )

    x = gauss_seidel_solve(
        A,
        IntervalVector(rhs_boxes),
        IntervalVector(v0),
        max_iter=config.gs_max_iter,
        tol=config.gs_tol,
    )
    p_max = np.array([[p_boxes[i][j].hi for j in range(n)] for i in range(n)])
    certified = is_interval_m_matrix(np.clip(p_max, 0.0, 1.0), lam)
    return list(x), certified


# --------------------------------------------------------------------------
# Pipeline
# --------------------------------------------------------------------------


@dataclass
class _Roles:
    """Query-resolved parameter roles: links for the weight vector (pi or
    pi-tilde), the square matrix (P or Q), and the additive term."""

    kind: QueryKind
    n: int                       # states of the square system
    n_target: int                # |S| for reachability, else 0
    pi_link: ParameterLink
    p_link: ParameterLink
    r_link: ParameterLink | None  # None for hitting time
    R_link: ParameterLink | None  # reachability only


def _roles(spec: MarkovProcessSpec) -> _Roles:
    kind = spec.query.kind
    if kind == QueryKind.TOTAL_REWARD:
        return _Roles(
            kind,
            spec.n_states,
            0,
            spec.links[PI],
            spec.links[P],
            spec.links[R_VEC],
            None,
        )
    views = restrict_to_transient(spec)
    return _Roles(
        kind,
        len(views.transient),
        len(views.target),
        views.pi_tilde,
        views.Q,
        views.R if kind == QueryKind.REACHABILITY else None,
        views.R if kind == QueryKind.REACHABILITY else None,
    )


def _entry_fixed(link: ParameterLink, k: int) -> bool:
    return link.A.size == 0 or bool(np.all(link.A[k, :] == 0.0))


def verify(spec: MarkovProcessSpec, config: VerifyConfig | None = None) -> VerificationResult:
    """Run the full pipeline on a validated spec and certify the optimum
    (or feasibility verdict) of its property query."""
    config = config or VerifyConfig()
    t_start = time.monotonic()
    report = validate(spec)
    if not report.is_valid:
        raise InvalidParameter(f"spec failed validation:\n{report}")

    disabled = config.disabled_stages()
    ledger = BoundsLedger(stages_run=tuple(s for s in STAGES if s not in disabled))
    roles = _roles(spec)
    kind = spec.query.kind
    n = roles.n
    eps = config.epsilon

    # Stage 1: theta boxes.
    t0 = time.monotonic()
    if "theta" not in disabled:
        ledger.theta = theta_bounds(spec, config)
    else:
        ledger.theta = [
            b
            for model in spec.models
            for b in _structural_theta(model, spec.feature_set, config.sigmoid_segments)
        ]
    ledger.timings["theta"] = time.monotonic() - t0

    # Stage 2: parameter boxes via the affine links.
    t0 = time.monotonic()
    prob_cap = 1.0 if kind == QueryKind.TOTAL_REWARD else 1.0 - eps

    def param_boxes(link, clip: Interval | None, fallback: Interval) -> list[Interval]:
        out = []
        for k in range(link.b.shape[0]):
            if _entry_fixed(link, k):
                iv = Interval.point(float(link.b[k]))
            elif "affine" not in disabled:
                iv = propagate_affine(ledger.theta, ParameterLink(link.target, link.A[[k], :], link.b[[k]]))[0]
            else:
                iv = fallback
            if clip is not None and not _entry_fixed(link, k):
                iv = iv.meet(clip)
            out.append(iv)
        return out

    unit = Interval(0.0, 1.0)
    ledger.pi = param_boxes(roles.pi_link, unit, unit)
    q_clip = unit if kind == QueryKind.TOTAL_REWARD else Interval(0.0, prob_cap)
    p_flat = param_boxes(roles.p_link, q_clip, q_clip)
    ledger.P = [p_flat[i * n : (i + 1) * n] for i in range(n)]

    if kind == QueryKind.TOTAL_REWARD:
        big = Interval(-BIG_BOUND, BIG_BOUND)
        ledger.r = param_boxes(roles.r_link, None, big)
    elif kind == QueryKind.REACHABILITY:
        r_flat = param_boxes(roles.R_link, unit, unit)
        ns = roles.n_target
        ledger.R = [r_flat[i * ns : (i + 1) * ns] for i in range(n)]
        ledger.r = [
            _sum_intervals(ledger.R[i]).meet(Interval(0.0, 1.0)) for i in range(n)
        ]
    else:  # hitting time: unit right-hand side
        ledger.r = [Interval.point(1.0)] * n
    ledger.timings["affine"] = time.monotonic() - t0

    # Stage 3: initial v box.
    t0 = time.monotonic()
    if "v_init" not in disabled:
        ledger.v_initial = initial_v_bounds(kind, ledger.r, spec.discount, eps, n)
    else:
        cap = BIG_BOUND if kind == QueryKind.TOTAL_REWARD else 1.0 / eps
        ledger.v_initial = [Interval(-cap, cap)] * n
    ledger.v = list(ledger.v_initial)
    ledger.timings["v_init"] = time.monotonic() - t0

    # Stage 4: Gauss-Seidel tightening.
    t0 = time.monotonic()
    if "v_tighten" not in disabled:
        ledger.v, ledger.hull_certified = tighten_v_bounds(
            kind, ledger.P, ledger.r, ledger.v_initial, spec.discount, config
        )
    ledger.timings["v_tighten"] = time.monotonic() - t0

    if config.bounds_only:
        return VerificationResult(
            status="bounds_only",
            problem_class=classify_problem(spec),
            ledger=ledger,
            runtime=time.monotonic() - t_start,
        )

    # Stage 5: assemble and solve.
    t0 = time.monotonic()
    result = _solve_program(spec, roles, ledger, config)
    ledger.timings["solve"] = time.monotonic() - t0
    result.ledger = ledger
    result.runtime = time.monotonic() - t_start
    return result


def _sum_intervals(ivs) -> Interval:
    total = Interval.point(0.0)
    for iv in ivs:
        total = total + iv
    return total


def ablation_run(
    spec: MarkovProcessSpec,
    stages_disabled,
    config: VerifyConfig | None = None,
) -> VerificationResult:
    """Verify with the given bound stages disabled (closing under the
    'a disabled stage disables all later stages' convention)."""
    config = config or VerifyConfig()
    return verify(spec, replace(config, ablate=frozenset(stages_disabled)))


# --------------------------------------------------------------------------
# Final program assembly
# --------------------------------------------------------------------------


def _solve_program(spec, roles: _Roles, ledger: BoundsLedger, config: VerifyConfig) -> VerificationResult:
    kind = roles.kind
    n = roles.n
    sense = spec.query.sense
    pclass = classify_problem(spec)
    force = config.force_full_bilinear

    def fixed(link, k):
        return not force and _entry_fixed(link, k)

    pi_fix = [fixed(roles.pi_link, i) for i in range(n)]
    p_fix = [[fixed(roles.p_link, i * n + j) for j in range(n)] for i in range(n)]
    if kind == QueryKind.TOTAL_REWARD:
        r_fix = [fixed(roles.r_link, i) for i in range(n)]
    elif kind == QueryKind.REACHABILITY:
        ns = roles.n_target
        R_fix = [[fixed(roles.R_link, i * ns + k) for k in range(ns)] for i in range(n)]
    else:
        r_fix = [True] * n

    # Constant-parameter sanity: definitional rows that constants violate
    # make the program infeasible before any solving.
    issue = _constant_infeasibility(spec, roles, config)
    if issue:
        return VerificationResult(
            status="infeasible", problem_class=pclass, ledger=ledger, message=issue,
        )

    builder = ProblemBuilder()
    all_p_fixed = all(all(row) for row in p_fix)
    if kind == QueryKind.TOTAL_REWARD:
        all_rhs_fixed = all(r_fix)
    elif kind == QueryKind.REACHABILITY:
        all_rhs_fixed = all(all(row) for row in R_fix)
    else:
        all_rhs_fixed = True
    closed_form_v = all_p_fixed and all_rhs_fixed and not force

    # Feature variables and model encodings (only for models whose outputs
    # some link actually reads).
    used = _used_outputs(spec)
    theta_vars: dict[int, int] = {}
    encodings: list[MilpEncoding | None] = []
    xs: list[int] = []
    envelope_gaps: list[float] = []
    need_models = [
        any((offset + j) in used for j in range(m.arity))
        for offset, m in zip(_offsets(spec.models), spec.models)
    ]
    if any(need_models):
        xs = add_feature_vars(builder, spec.feature_set)
    offset = 0
    for mi, model in enumerate(spec.models):
        if need_models[mi]:
            enc = encode(
                model, builder, xs, sigmoid_segments=config.sigmoid_segments, name=f"m{mi}"
            )
            encodings.append(enc)
            for j, yv in enumerate(enc.output_vars):
                theta_vars[offset + j] = yv
                builder.tighten_bounds(yv, ledger.theta[offset + j])
            envelope_gaps.extend([enc.gap_bound] * model.arity)
        else:
            encodings.append(None)
            envelope_gaps.extend([0.0] * model.arity)
        offset += model.arity

    def link_row(link, k, var, name):
        """param_k - A[k,:] @ theta = b[k]"""
        coeffs = {var: 1.0}
        for j in np.nonzero(link.A[k, :])[0]:
            coeffs[theta_vars[int(j)]] = -float(link.A[k, j])
        builder.add_constraint(coeffs, EQ, float(link.b[k]), name)

    # pi variables / constants.
    pi_vars: list[int | None] = [None] * n
    pi_const = [float(roles.pi_link.b[i]) for i in range(n)]
    for i in range(n):
        if not pi_fix[i]:
            box = ledger.pi[i]
            pi_vars[i] = builder.add_var(f"pi{i}", box.lo, box.hi)
            link_row(roles.pi_link, i, pi_vars[i], f"pi{i}_link")

    # P / Q variables and constants.
    p_vars: list[list[int | None]] = [[None] * n for _ in range(n)]
    p_const = roles.p_link.b.reshape(n, n)
    for i in range(n):
        for j in range(n):
            if not p_fix[i][j]:
                box = ledger.P[i][j]
                p_vars[i][j] = builder.add_var(f"P{i}_{j}", box.lo, box.hi)
                link_row(roles.p_link, i * n + j, p_vars[i][j], f"P{i}_{j}_link")

    # Additive term: r (total reward), R (reachability), or constant 1.
    r_vars: list[int | None] = [None] * n
    if kind == QueryKind.TOTAL_REWARD:
        r_const = [float(roles.r_link.b[i]) for i in range(n)]
        for i in range(n):
            if not r_fix[i]:
                box = ledger.r[i]
                r_vars[i] = builder.add_var(f"r{i}", box.lo, box.hi)
                link_row(roles.r_link, i, r_vars[i], f"r{i}_link")
    elif kind == QueryKind.REACHABILITY:
        ns = roles.n_target
        R_vars: list[list[int | None]] = [[None] * ns for _ in range(n)]
        R_const = roles.R_link.b.reshape(n, ns)
        for i in range(n):
            for k in range(ns):
                if not R_fix[i][k]:
                    box = ledger.R[i][k]
                    R_vars[i][k] = builder.add_var(f"R{i}_{k}", box.lo, box.hi)
                    link_row(roles.R_link, i * ns + k, R_vars[i][k], f"R{i}_{k}_link")

    # Declared inequalities on whole parameter blocks.
    _add_inequalities(spec, roles, builder, pi_vars, pi_const, p_vars, p_const,
                      r_vars if kind == QueryKind.TOTAL_REWARD else None,
                      [float(roles.r_link.b[i]) for i in range(n)] if kind == QueryKind.TOTAL_REWARD else None,
                      R_vars if kind == QueryKind.REACHABILITY else None,
                      R_const if kind == QueryKind.REACHABILITY else None)

    # Stochasticity rows (always appended, regardless of links).
    eps = config.epsilon
    if kind == QueryKind.TOTAL_REWARD:
        _sum_row(builder, [(pi_vars[i], pi_const[i]) for i in range(n)], EQ, 1.0, "pi_stoch")
        for i in range(n):
            _sum_row(
                builder,
                [(p_vars[i][j], p_const[i, j]) for j in range(n)],
                EQ,
                1.0,
                f"P{i}_stoch",
            )
    else:
        _sum_row(builder, [(pi_vars[i], pi_const[i]) for i in range(n)], LE, 1.0, "pi_substoch")
        for i in range(n):
            _sum_row(
                builder,
                [(p_vars[i][j], p_const[i, j]) for j in range(n)],
                LE,
                1.0 - eps,
                f"Q{i}_substoch",
            )
        if kind == QueryKind.REACHABILITY:
            for i in range(n):
                _sum_row(
                    builder,
                    [(R_vars[i][k], R_const[i, k]) for k in range(roles.n_target)],
                    LE,
                    1.0,
                    f"R{i}_substoch",
                )

    # Value variables and the Bellman rows; or the closed form when both
    # the matrix and the additive term are constant.
    lam = spec.discount if kind == QueryKind.TOTAL_REWARD else 1.0
    v_vals: np.ndarray | None = None
    v_vars: list[int] = []
    if closed_form_v:
        v_vals = _closed_form_v(kind, p_const, roles, n, lam)
        if v_vals is None:
            return VerificationResult(status="infeasible", problem_class=pclass, ledger=ledger)
    else:
        v_vars = [
            builder.add_var(f"v{i}", ledger.v[i].lo, ledger.v[i].hi) for i in range(n)
        ]
        for i in range(n):
            coeffs = {v_vars[i]: 1.0}
            rhs = 0.0
            for j in range(n):
                if p_fix[i][j]:
                    if p_const[i, j] != 0.0:
                        coeffs[v_vars[j]] = coeffs.get(v_vars[j], 0.0) - lam * float(p_const[i, j])
                else:
                    w = builder.add_bilinear_term(f"w_P{i}_{j}", p_vars[i][j], v_vars[j])
                    coeffs[w] = -lam
            if kind == QueryKind.TOTAL_REWARD:
                if r_fix[i]:
                    rhs += r_const[i]
                else:
                    coeffs[r_vars[i]] = -1.0
            elif kind == QueryKind.REACHABILITY:
                for k in range(roles.n_target):
                    if R_fix[i][k]:
                        rhs += float(R_const[i, k])
                    else:
                        coeffs[R_vars[i][k]] = -1.0
            else:
                rhs += 1.0
            builder.add_constraint(coeffs, EQ, rhs, f"bellman{i}")

    # Objective: sum_i pi_i * v_i.
    obj: dict[int, float] = {}
    obj_const = 0.0
    for i in range(n):
        if v_vals is not None:
            if pi_fix[i]:
                obj_const += pi_const[i] * float(v_vals[i])
            else:
                obj[pi_vars[i]] = obj.get(pi_vars[i], 0.0) + float(v_vals[i])
        elif pi_fix[i]:
            if pi_const[i] != 0.0:
                obj[v_vars[i]] = obj.get(v_vars[i], 0.0) + pi_const[i]
        else:
            w = builder.add_bilinear_term(f"w_pi{i}", pi_vars[i], v_vars[i])
            obj[w] = obj.get(w, 0.0) + 1.0

    feasibility = sense == QuerySense.FEASIBILITY
    if feasibility:
        wmin, wmax = spec.query.w_min, spec.query.w_max
        if math.isfinite(wmin):
            builder.add_constraint(dict(obj), GE, wmin - obj_const, "w_min")
        if math.isfinite(wmax):
            builder.add_constraint(dict(obj), LE, wmax - obj_const, "w_max")
        builder.set_objective({}, maximize=False)
    else:
        builder.set_objective(obj, maximize=(sense == QuerySense.MAX), offset=obj_const)

    bp = builder.build_bilinear()
    if config.debug_dump_path:
        from .solver import write_lp_text

        with open(config.debug_dump_path, "w") as fh:
            fh.write(write_lp_text(bp))
    if bp.terms:
        res = bilinear_solve(
            bp,
            gap_tol=config.gap_tol,
            time_limit=config.time_limit,
            inner_node_limit=config.inner_node_limit,
        )
    else:
        res = milp_solve(bp.milp, gap_tol=config.gap_tol, time_limit=config.time_limit)

    status_map = {
        Status.OPTIMAL: "feasible" if feasibility else "optimal",
        Status.INFEASIBLE: "infeasible",
        Status.TIME_LIMIT: "time_limit",
        Status.GAP_LIMIT: "gap_limit",
        Status.UNBOUNDED: "unbounded",
    }
    outer = any(g > 0 for g in envelope_gaps) or any(
        enc is not None and enc.bilinear_terms for enc in encodings
    )
    result = VerificationResult(
        status=status_map[res.status],
        problem_class=pclass,
        value=res.objective,
        bound=res.bound,
        gap=res.gap,
        outer_bound=outer,
        n_nodes=res.n_nodes,
    )

    if res.x is not None and res.status in (Status.OPTIMAL, Status.TIME_LIMIT, Status.GAP_LIMIT):
        witness = (
            np.array([res.x[i] for i in xs])
            if xs
            else np.asarray(spec.feature_set.boxes[0].lower, dtype=float)
        )
        result.witness = witness
        theta_solver = _solver_theta(spec, res.x, theta_vars, witness)
        _reconstruct_witness(spec, roles, result, theta_solver)
        if res.status == Status.OPTIMAL and not feasibility:
            _check_witness(result, config, envelope_gaps, ledger, spec, roles)
    return result


def _solver_theta(spec, x_sol, theta_vars, witness) -> np.ndarray:
    """Model outputs as the solver chose them; outputs of models that were
    never encoded fall back to native evaluation."""
    theta = np.zeros(spec.n_outputs)
    offset = 0
    for model in spec.models:
        native = None
        for j in range(model.arity):
            g = offset + j
            if g in theta_vars:
                theta[g] = float(x_sol[theta_vars[g]])
            else:
                if native is None:
                    native = model.evaluate(witness)
                theta[g] = float(native[j])
        offset += model.arity
    return theta


def _offsets(models) -> list[int]:
    offs, total = [], 0
    for m in models:
        offs.append(total)
        total += m.arity
    return offs


def _sum_row(builder, items, sense, rhs, name):
    """sum of (var or constant) items <sense> rhs."""
    coeffs: dict[int, float] = {}
    const = 0.0
    for var, c in items:
        if var is None:
            const += c
        else:
            coeffs[var] = coeffs.get(var, 0.0) + 1.0
    if not coeffs:
        return  # fully constant; checked beforehand
    builder.add_constraint(coeffs, sense, rhs - const, name)


def _constant_infeasibility(spec, roles: _Roles, config) -> str | None:
    """Definitional rows evaluated on fully-constant parameter blocks."""
    n = roles.n
    kind = roles.kind
    tol = 1e-9
    if all(_entry_fixed(roles.pi_link, i) for i in range(n)):
        s = float(roles.pi_link.b.sum())
        if kind == QueryKind.TOTAL_REWARD and abs(s - 1.0) > tol:
            return f"constant pi sums to {s}, not 1"
        if kind != QueryKind.TOTAL_REWARD and s > 1.0 + tol:
            return f"constant pi-tilde sums to {s} > 1"
    Pm = roles.p_link.b.reshape(n, n)
    for i in range(n):
        if all(_entry_fixed(roles.p_link, i * n + j) for j in range(n)):
            s = float(Pm[i].sum())
            if kind == QueryKind.TOTAL_REWARD and abs(s - 1.0) > tol:
                return f"constant P row {i} sums to {s}, not 1"
            if kind != QueryKind.TOTAL_REWARD and s > 1.0 - config.epsilon + tol:
                return f"constant Q row {i} sums to {s} > 1 - epsilon"
    if kind == QueryKind.REACHABILITY:
        ns = roles.n_target
        Rm = roles.R_link.b.reshape(n, ns)
        for i in range(n):
            if all(_entry_fixed(roles.R_link, i * ns + k) for k in range(ns)):
                if float(Rm[i].sum()) > 1.0 + tol:
                    return f"constant R row {i} sums above 1"
    return None


def _add_inequalities(spec, roles, builder, pi_vars, pi_const, p_vars, p_const,
                      r_vars, r_const, R_vars, R_const):
    n = roles.n

    def block(target):
        if target in (PI, PI_TILDE):
            return [(pi_vars[i], pi_const[i]) for i in range(n)]
        if target in (P, Q):
            return [
                (p_vars[i][j], float(p_const[i, j])) for i in range(n) for j in range(n)
            ]
        if target == R_VEC:
            return [(r_vars[i], r_const[i]) for i in range(n)]
        if target == R_MAT:
            ns = roles.n_target
            return [
                (R_vars[i][k], float(R_const[i, k])) for i in range(n) for k in range(ns)
            ]
        if target == QR:
            return block(Q) + block(R_MAT)
        raise InvalidParameter(f"unsupported inequality target {target}")

    for k, ineq in enumerate(spec.ineqs):
        entries = block(ineq.target)
        for row in range(ineq.C.shape[0]):
            coeffs: dict[int, float] = {}
            const = 0.0
            for col, (var, cval) in enumerate(entries):
                c = float(ineq.C[row, col])
                if c == 0.0:
                    continue
                if var is None:
                    const += c * cval
                else:
                    coeffs[var] = coeffs.get(var, 0.0) + c
            rhs = float(ineq.d[row]) - const
            if coeffs:
                builder.add_constraint(coeffs, LE, rhs, f"ineq{k}_{row}")
            # Fully-constant rows were validated up front.


def _closed_form_v(kind, p_const, roles, n, lam) -> np.ndarray | None:
    M = np.eye(n) - lam * p_const
    if kind == QueryKind.TOTAL_REWARD:
        rhs = roles.r_link.b.astype(float)
    elif kind == QueryKind.REACHABILITY:
        rhs = roles.R_link.b.reshape(n, roles.n_target).sum(axis=1)
    else:
        rhs = np.ones(n)
    try:
        return np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        return None


def _value_from_theta(spec, roles: _Roles, theta: np.ndarray):
    """Parameters, value vector, and objective implied by a theta vector."""
    n = roles.n

    def apply(link):
        if link.is_fixed or link.A.shape[1] != len(theta):
            return link.b.astype(float)
        return link.A @ theta + link.b

    pi = apply(roles.pi_link)
    Pm = apply(roles.p_link).reshape(n, n)
    lam = spec.discount if roles.kind == QueryKind.TOTAL_REWARD else 1.0
    Rm = None
    if roles.kind == QueryKind.TOTAL_REWARD:
        rhs = apply(roles.r_link)
    elif roles.kind == QueryKind.REACHABILITY:
        Rm = apply(roles.R_link).reshape(n, roles.n_target)
        rhs = Rm.sum(axis=1)
    else:
        rhs = np.ones(n)
    try:
        v = np.linalg.solve(np.eye(n) - lam * Pm, rhs)
    except np.linalg.LinAlgError:
        return {"pi": pi, "P": Pm, "theta": theta, "R": Rm}, None
    params = {"pi": pi, "P": Pm, "r": rhs, "v": v, "theta": theta}
    if Rm is not None:
        params["R"] = Rm
    return params, float(pi @ v)


def _native_theta(spec, x: np.ndarray) -> np.ndarray:
    if not spec.models:
        return np.zeros(0)
    return np.concatenate([m.evaluate(x) for m in spec.models])


def _reconstruct_witness(spec, roles: _Roles, result: VerificationResult, theta_solver) -> None:
    """Rebuild parameters and value at the witness.

    The solver's own model-output values give the internal-consistency
    reference.  The reported witness is additionally re-evaluated natively;
    when the solver exploited a decision-boundary tie (both branches
    feasible at exact equality), the witness is nudged off the tie toward
    the branch the solver chose, so the reported point attains the reported
    value under native evaluation too.
    """
    _, program_value = _value_from_theta(spec, roles, theta_solver)
    result.program_value = program_value

    x = result.witness
    params, value = _value_from_theta(spec, roles, _native_theta(spec, x))
    if (
        value is not None
        and result.value is not None
        and program_value is not None
        and abs(value - result.value) > max(1e-7, 1e-7 * abs(result.value))
        and abs(program_value - result.value) <= max(1e-5, 1e-5 * abs(result.value))
    ):
        x2, value2 = _detie_witness(spec, roles, x, result.value, value)
        if value2 is not None and abs(value2 - result.value) < abs(value - result.value):
            result.witness = x2
            params, value = _value_from_theta(spec, roles, _native_theta(spec, x2))
    result.witness_params = params
    result.witness_value = value


def _detie_witness(spec, roles, x, target, base_value):
    """Coordinate search over tiny per-feature nudges that stay inside the
    feature set; picks the point whose native value is closest to the
    solver's."""
    best_x, best_val = x, base_value
    fs = spec.feature_set
    for _ in range(2):
        improved = False
        for f in range(len(x)):
            step = 1e-7 * max(1.0, abs(best_x[f]))
            for delta in (step, -step):
                cand = best_x.copy()
                cand[f] += delta
                if not fs.contains(cand, tol=1e-12):
                    continue
                _, val = _value_from_theta(spec, roles, _native_theta(spec, cand))
                if val is not None and abs(val - target) < abs(best_val - target) - 1e-12:
                    best_x, best_val = cand, val
                    improved = True
        if not improved:
            break
    return best_x, best_val


def _check_witness(result, config, envelope_gaps, ledger, spec, roles) -> None:
    """Optimal values must be reproducible from the solver's own model
    outputs: exactly for exact encodings, within the accumulated envelope
    slack otherwise.  (The native witness value can differ only on decision
    boundaries, where both branches of an exact model are feasible.)"""
    if result.program_value is None or result.value is None:
        return
    if not result.outer_bound:
        tol = max(1e-5, 1e-5 * abs(result.value))
        if abs(result.program_value - result.value) > tol:
            raise InternalConsistencyError(
                f"witness reproduces {result.program_value}, solver reported "
                f"{result.value} (tolerance {tol})"
            )
        return
    result.envelope_gap = _envelope_slack(spec, roles, envelope_gaps, ledger)


def _envelope_slack(spec, roles: _Roles, envelope_gaps, ledger) -> float:
    """Loose but sound cap on how far an envelope-relaxed objective can sit
    from the objective reconstructed at the witness."""
    n = roles.n
    g = np.asarray(envelope_gaps, dtype=float)
    if not g.size or float(g.max()) == 0.0:
        return 0.0
    v_hi = max(abs(iv.lo) if abs(iv.lo) > abs(iv.hi) else abs(iv.hi) for iv in ledger.v)
    lam = spec.discount if roles.kind == QueryKind.TOTAL_REWARD else 1.0
    gamma = 1.0 / (1.0 - lam) if roles.kind == QueryKind.TOTAL_REWARD else 1.0 / 1e-6

    def link_amp_max(link):
        return float((np.abs(link.A) @ g).max()) if link.A.size else 0.0

    d_pi = float((np.abs(roles.pi_link.A) @ g).sum()) if roles.pi_link.A.size else 0.0
    d_p = link_amp_max(roles.p_link)
    if roles.kind == QueryKind.TOTAL_REWARD:
        d_r = link_amp_max(roles.r_link)
    elif roles.kind == QueryKind.REACHABILITY:
        d_r = link_amp_max(roles.R_link) * roles.n_target
    else:
        d_r = 0.0
    dv = gamma * (lam * v_hi * n * d_p + d_r)
    return d_pi * v_hi + dv

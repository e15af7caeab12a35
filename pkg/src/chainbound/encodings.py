"""MILP encodings of model artifacts and feature sets.

Every encoder writes variables and constraints into a shared
:class:`ProblemBuilder` and reports the output variable handles.  Encodings
for linear models, trees, ensembles, ReLU networks, and decision rules are
exact off decision boundaries.  Sigmoid and softmax outputs get sound
piecewise-linear outer envelopes whose approximation gap is computed and
reported; softmax additionally emits bilinear normalization constraints for
the spatial solver.

Big-M constants are always derived from propagated interval bounds, never
from a global constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleFeatureSet, InvalidParameter, UnboundedInput
from .intervals import Interval
from .markov import FeatureSet
from .models import (
    ENSEMBLE,
    LINEAR,
    LOGISTIC,
    RELU_NET,
    RELU_SOFTMAX,
    RULES,
    TREE,
    ModelArtifact,
    TreeNode,
    sigmoid,
)
from .solver import EQ, GE, LE, BilinearTerm, ProblemBuilder, Status, milp_solve

DEFAULT_SIGMOID_SEGMENTS = 8


@dataclass
class MilpEncoding:
    """Handles and bookkeeping for one model's encoding."""

    output_vars: list[int]
    logit_vars: list[int] = field(default_factory=list)
    new_vars: list[int] = field(default_factory=list)
    new_binaries: list[int] = field(default_factory=list)
    n_constraints: int = 0
    bilinear_terms: list[BilinearTerm] = field(default_factory=list)
    gap_bound: float = 0.0

    @property
    def is_exact(self) -> bool:
        return self.gap_bound == 0.0 and not self.bilinear_terms


def affine_interval(W: np.ndarray, b: np.ndarray, boxes: list[Interval]) -> list[Interval]:
    """Exact image box of an affine map applied to a box (signed-vertex
    evaluation of each row)."""
    lo = np.array([iv.lo for iv in boxes])
    hi = np.array([iv.hi for iv in boxes])
    Wp = np.maximum(W, 0.0)
    Wn = np.minimum(W, 0.0)
    out_lo = b + Wp @ lo + Wn @ hi
    out_hi = b + Wp @ hi + Wn @ lo
    return [Interval(l, h) for l, h in zip(out_lo, out_hi)]


# --------------------------------------------------------------------------
# Feature set
# --------------------------------------------------------------------------


def add_feature_vars(builder: ProblemBuilder, fs: FeatureSet) -> list[int]:
    """Feature variables constrained to the (union-of-boxes) feature set.

    Multiple boxes get one selector binary each; integral features are
    expanded into weighted binary digits.
    """
    if not fs.boxes:
        raise InfeasibleFeatureSet("feature set has no boxes")
    hull = fs.hull()
    m = fs.n_features
    xs = [builder.add_var(f"x{i}", hull.lower[i], hull.upper[i]) for i in range(m)]

    if len(fs.boxes) > 1:
        sel = [builder.add_binary(f"box{bi}") for bi in range(len(fs.boxes))]
        builder.add_constraint({s: 1.0 for s in sel}, EQ, 1.0, "one_box")
        for bi, box in enumerate(fs.boxes):
            for i in range(m):
                lo_gap = box.lower[i] - hull.lower[i]
                hi_gap = hull.upper[i] - box.upper[i]
                if lo_gap > 0:
                    builder.add_constraint(
                        {xs[i]: 1.0, sel[bi]: -lo_gap}, GE, hull.lower[i],
                        f"box{bi}_lo{i}",
                    )
                if hi_gap > 0:
                    builder.add_constraint(
                        {xs[i]: 1.0, sel[bi]: hi_gap}, LE, hull.upper[i],
                        f"box{bi}_hi{i}",
                    )

    for cut in fs.extra_linear:
        coeffs = {xs[i]: float(cut.c[i]) for i in range(m)}
        builder.add_constraint(coeffs, LE if cut.sense == "<=" else GE, cut.rhs, "cut")

    for i, integral in enumerate(fs.integrality):
        if not integral:
            continue
        lo = int(round(hull.lower[i]))
        hi = int(round(hull.upper[i]))
        span = hi - lo
        if span == 0:
            builder.set_bounds(xs[i], lo, lo)
            continue
        bits = max(1, math.ceil(math.log2(span + 1)))
        coeffs = {xs[i]: 1.0}
        for k in range(bits):
            coeffs[builder.add_binary(f"x{i}_bit{k}")] = -float(2**k)
        builder.add_constraint(coeffs, EQ, float(lo), f"int{i}")
    return xs


# --------------------------------------------------------------------------
# Piecewise-linear outer envelopes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Segment:
    t0: float
    t1: float
    lower: tuple[float, float]  # (slope, intercept): y >= a z + c on segment
    upper: tuple[float, float]  # y <= a z + c on segment


def _tangent(f, fp, m: float) -> tuple[float, float]:
    a = fp(m)
    return a, f(m) - a * m


def _secant(f, t0: float, t1: float) -> tuple[float, float]:
    if t1 == t0:
        return 0.0, f(t0)
    a = (f(t1) - f(t0)) / (t1 - t0)
    return a, f(t0) - a * t0


def _build_segments(f, fp, zlo, zhi, n_segments, is_convex_on) -> tuple[list[_Segment], float]:
    """Split [zlo, zhi] into segments with local over/under lines.

    On convex stretches the tangent at the midpoint bounds from below and
    the secant from above; concave stretches use the reverse.  The returned
    gap is the largest upper-lower difference, which for two lines is
    attained at a segment endpoint.
    """
    if zlo > 0 or zhi < 0:
        edges = np.linspace(zlo, zhi, n_segments + 1)
    else:
        span = zhi - zlo
        n_left = int(round(n_segments * (0.0 - zlo) / span)) if span > 0 else 0
        n_left = min(max(n_left, 1 if zlo < 0 else 0), n_segments - (1 if zhi > 0 else 0))
        edges = np.concatenate(
            [
                np.linspace(zlo, 0.0, n_left + 1),
                np.linspace(0.0, zhi, n_segments - n_left + 1)[1:],
            ]
        )
    segs = []
    gap = 0.0
    for t0, t1 in zip(edges[:-1], edges[1:]):
        if t1 <= t0:
            continue
        mid = 0.5 * (t0 + t1)
        if is_convex_on(t0, t1):
            lower, upper = _tangent(f, fp, mid), _secant(f, t0, t1)
        else:
            lower, upper = _secant(f, t0, t1), _tangent(f, fp, mid)
        seg = _Segment(t0, t1, lower, upper)
        for t in (t0, t1):
            gap = max(gap, (upper[0] - lower[0]) * t + upper[1] - lower[1])
        segs.append(seg)
    return segs, gap


def _link_pwl(
    builder: ProblemBuilder,
    z: int,
    f,
    fp,
    is_convex_on,
    n_segments: int,
    name: str,
) -> tuple[int, float, list[int]]:
    """Create an output variable tied to f(z) by a segment-selected PWL
    outer envelope.  f must be increasing on the z box (sigmoid, shifted
    exp).  Returns (output var, gap bound, segment binaries)."""
    zb = builder.var_bounds(z)
    ylo, yhi = f(zb.lo), f(zb.hi)
    y = builder.add_var(f"{name}_out", ylo, yhi)
    if zb.width <= 1e-12:
        return y, float(yhi - ylo), []

    segs, gap = _build_segments(f, fp, zb.lo, zb.hi, n_segments, is_convex_on)
    deltas = [builder.add_binary(f"{name}_seg{k}") for k in range(len(segs))]
    builder.add_constraint({d: 1.0 for d in deltas}, EQ, 1.0, f"{name}_one_seg")
    for k, seg in enumerate(segs):
        d = deltas[k]
        # Segment selection: delta = 1 pins z into [t0, t1].
        builder.add_constraint({z: 1.0, d: -(seg.t0 - zb.lo)}, GE, zb.lo, f"{name}_zlo{k}")
        builder.add_constraint({z: 1.0, d: zb.hi - seg.t1}, LE, zb.hi, f"{name}_zhi{k}")
        a_lo, c_lo = seg.lower
        a_up, c_up = seg.upper
        m_lo = max(a_lo * zb.lo + c_lo, a_lo * zb.hi + c_lo) - ylo
        m_up = yhi - min(a_up * zb.lo + c_up, a_up * zb.hi + c_up)
        m_lo = max(m_lo, 0.0)
        m_up = max(m_up, 0.0)
        builder.add_constraint({y: 1.0, z: -a_lo, d: -m_lo}, GE, c_lo - m_lo, f"{name}_low{k}")
        builder.add_constraint({y: 1.0, z: -a_up, d: m_up}, LE, c_up + m_up, f"{name}_up{k}")
    return y, gap, deltas


def _sigmoid_prime(z: float) -> float:
    s = float(sigmoid(np.array([z]))[0])
    return s * (1.0 - s)


def _link_sigmoid(builder, z, n_segments, name) -> tuple[int, float]:
    y, gap, _ = _link_pwl(
        builder,
        z,
        lambda t: float(sigmoid(np.array([t]))[0]),
        _sigmoid_prime,
        lambda t0, t1: t1 <= 0.0,
        n_segments,
        name,
    )
    return y, gap


def _link_exp(builder, z, shift, n_segments, name) -> tuple[int, float]:
    y, gap, _ = _link_pwl(
        builder,
        z,
        lambda t: math.exp(t - shift),
        lambda t: math.exp(t - shift),
        lambda t0, t1: True,
        n_segments,
        name,
    )
    return y, gap


# --------------------------------------------------------------------------
# Per-kind encoders
# --------------------------------------------------------------------------


def _affine_layer(builder, W, b, in_vars, name) -> list[int]:
    boxes = [builder.var_bounds(i) for i in in_vars]
    out_boxes = affine_interval(W, b, boxes)
    outs = []
    for j in range(W.shape[0]):
        z = builder.add_var(f"{name}_{j}", out_boxes[j].lo, out_boxes[j].hi)
        coeffs = {z: 1.0}
        for k, xv in enumerate(in_vars):
            coeffs[xv] = coeffs.get(xv, 0.0) - float(W[j, k])
        builder.add_constraint(coeffs, EQ, float(b[j]), f"{name}_{j}_def")
        outs.append(z)
    return outs


def _encode_linear(model, builder, x_vars, name) -> MilpEncoding:
    outs = _affine_layer(builder, model.W, model.b, x_vars, name)
    return MilpEncoding(output_vars=outs)


def _encode_logistic(model, builder, x_vars, name, n_segments) -> MilpEncoding:
    logits = _affine_layer(builder, model.W, model.b, x_vars, f"{name}_z")
    outs, gap = [], 0.0
    for j, z in enumerate(logits):
        y, g = _link_sigmoid(builder, z, n_segments, f"{name}_sig{j}")
        outs.append(y)
        gap = max(gap, g)
    return MilpEncoding(output_vars=outs, logit_vars=logits, gap_bound=gap)


def _tree_leaves(nodes: list[TreeNode]) -> list[tuple[int, list[tuple[int, float, bool]]]]:
    """(leaf index, path) pairs; path entries are (feature, threshold,
    goes_left)."""
    out = []
    stack: list[tuple[int, list]] = [(0, [])]
    while stack:
        i, path = stack.pop()
        node = nodes[i]
        if node.is_leaf:
            out.append((i, path))
        else:
            stack.append((node.left, path + [(node.feature, node.threshold, True)]))
            stack.append((node.right, path + [(node.feature, node.threshold, False)]))
    return out


def _leaves_below(nodes, root: int) -> list[int]:
    out, stack = [], [root]
    while stack:
        i = stack.pop()
        if nodes[i].is_leaf:
            out.append(i)
        else:
            stack.extend((nodes[i].left, nodes[i].right))
    return out


def _encode_tree_nodes(builder, nodes, x_vars, arity, name) -> list[int]:
    leaves = _tree_leaves(nodes)
    deltas = {}
    for li, (leaf, _) in enumerate(leaves):
        deltas[leaf] = builder.add_binary(f"{name}_leaf{li}")
    builder.add_constraint({d: 1.0 for d in deltas.values()}, EQ, 1.0, f"{name}_one_leaf")

    # Branch constraints aggregated per internal node: selecting any leaf of
    # a subtree activates that subtree's split condition.  Equivalent to the
    # per-leaf big-M rows at integral points but with a tighter relaxation.
    for i, node in enumerate(nodes):
        if node.is_leaf:
            continue
        xv = x_vars[node.feature]
        xb = builder.var_bounds(xv)
        thr = node.threshold
        left_mass = {deltas[l]: xb.hi - thr for l in _leaves_below(nodes, node.left)}
        builder.add_constraint({xv: 1.0, **left_mass}, LE, xb.hi)
        right_mass = {deltas[l]: -(thr - xb.lo) for l in _leaves_below(nodes, node.right)}
        builder.add_constraint({xv: 1.0, **right_mass}, GE, xb.lo)

    outs = []
    values = np.array([nodes[leaf].value for leaf, _ in leaves])
    for j in range(arity):
        y = builder.add_var(f"{name}_out{j}", float(values[:, j].min()), float(values[:, j].max()))
        coeffs = {y: 1.0}
        for (leaf, _), v in zip(leaves, values[:, j]):
            if v != 0.0:
                coeffs[deltas[leaf]] = -float(v)
        builder.add_constraint(coeffs, EQ, 0.0, f"{name}_out{j}_def")
        outs.append(y)
    return outs


def _encode_tree(model, builder, x_vars, name) -> MilpEncoding:
    outs = _encode_tree_nodes(builder, model.nodes, x_vars, model.arity, name)
    return MilpEncoding(output_vars=outs)


def _encode_ensemble(model, builder, x_vars, name) -> MilpEncoding:
    scale = 1.0 / len(model.trees) if model.combine == "average" else 1.0
    per_tree = [
        _encode_tree_nodes(builder, t, x_vars, model.arity, f"{name}_t{ti}")
        for ti, t in enumerate(model.trees)
    ]
    outs = []
    for j in range(model.arity):
        total = Interval.point(0.0)
        for tree_outs in per_tree:
            total = total + builder.var_bounds(tree_outs[j]).scale(scale)
        y = builder.add_var(f"{name}_out{j}", total.lo, total.hi)
        coeffs = {y: 1.0}
        for tree_outs in per_tree:
            coeffs[tree_outs[j]] = -scale
        builder.add_constraint(coeffs, EQ, 0.0, f"{name}_out{j}_def")
        outs.append(y)
    return MilpEncoding(output_vars=outs)


def _encode_relu_layers(builder, layers, x_vars, name):
    """Hidden relu/linear layers; returns the final affine layer's output
    vars (the logits when a nonlinear head follows)."""
    h = list(x_vars)
    for li, (W, b, act) in enumerate(layers):
        z = _affine_layer(builder, W, b, h, f"{name}_l{li}")
        if act != "relu":
            h = z
            continue
        new_h = []
        for j, zj in enumerate(z):
            zb = builder.var_bounds(zj)
            if zb.lo >= 0.0:  # stably active
                new_h.append(zj)
            elif zb.hi <= 0.0:  # stably inactive
                hv = builder.add_var(f"{name}_l{li}_h{j}", 0.0, 0.0)
                new_h.append(hv)
            else:
                hv = builder.add_var(f"{name}_l{li}_h{j}", 0.0, zb.hi)
                d = builder.add_binary(f"{name}_l{li}_on{j}")
                builder.add_constraint({hv: 1.0, zj: -1.0}, GE, 0.0)
                builder.add_constraint({hv: 1.0, zj: -1.0, d: -zb.lo}, LE, -zb.lo)
                builder.add_constraint({hv: 1.0, d: -zb.hi}, LE, 0.0)
                new_h.append(hv)
        h = new_h
    return h


def _encode_relu_net(model, builder, x_vars, name, n_segments) -> MilpEncoding:
    last_act = model.layers[-1][2]
    body = model.layers if last_act in ("relu", "linear") else model.layers[:-1]
    outs = _encode_relu_layers(builder, body, x_vars, name)
    if last_act == "sigmoid":
        W, b, _ = model.layers[-1]
        logits = _affine_layer(builder, W, b, outs, f"{name}_z")
        ys, gap = [], 0.0
        for j, z in enumerate(logits):
            y, g = _link_sigmoid(builder, z, n_segments, f"{name}_sig{j}")
            ys.append(y)
            gap = max(gap, g)
        return MilpEncoding(output_vars=ys, logit_vars=logits, gap_bound=gap)
    return MilpEncoding(output_vars=outs)


def softmax_box(logit_boxes: list[Interval]) -> list[Interval]:
    """Componentwise-sharp softmax bounds over independent logit boxes:
    p_i is maximized at (z_i^hi, z_j^lo) and minimized at (z_i^lo, z_j^hi)."""
    his = np.array([b.hi for b in logit_boxes])
    los = np.array([b.lo for b in logit_boxes])
    shift = his.max()
    out = []
    for i in range(len(logit_boxes)):
        e_hi_i = math.exp(his[i] - shift)
        e_lo_i = math.exp(los[i] - shift)
        rest_lo = sum(math.exp(los[j] - shift) for j in range(len(logit_boxes)) if j != i)
        rest_hi = sum(math.exp(his[j] - shift) for j in range(len(logit_boxes)) if j != i)
        out.append(Interval(e_lo_i / (e_lo_i + rest_hi), e_hi_i / (e_hi_i + rest_lo)))
    return out


def _encode_relu_softmax(model, builder, x_vars, name, n_segments) -> MilpEncoding:
    logits = _encode_relu_layers(builder, model.layers[:-1], x_vars, name)
    W, b, _ = model.layers[-1]
    logits = _affine_layer(builder, W, b, logits, f"{name}_z")
    logit_boxes = [builder.var_bounds(z) for z in logits]
    shift = max(bx.hi for bx in logit_boxes)

    exps, gaps = [], []
    for j, z in enumerate(logits):
        e, g = _link_exp(builder, z, shift, n_segments, f"{name}_exp{j}")
        exps.append(e)
        gaps.append(g)
    s_lo = sum(builder.var_bounds(e).lo for e in exps)
    s_hi = sum(builder.var_bounds(e).hi for e in exps)
    s = builder.add_var(f"{name}_norm", s_lo, s_hi)
    builder.add_constraint({s: 1.0, **{e: -1.0 for e in exps}}, EQ, 0.0, f"{name}_norm_def")

    p_boxes = softmax_box(logit_boxes)
    ps, terms = [], []
    for j, e in enumerate(exps):
        p = builder.add_var(f"{name}_p{j}", p_boxes[j].lo, p_boxes[j].hi)
        # p * s = e, handed to the spatial solver.
        builder.register_bilinear(e, p, s)
        terms.append(BilinearTerm(e, p, s))
        ps.append(p)
    builder.add_constraint({p: 1.0 for p in ps}, EQ, 1.0, f"{name}_simplex")

    # Crude but sound probability-gap bound from the exp envelope gaps.
    gap_p = (max(gaps) + sum(gaps)) / max(s_lo, 1e-300)
    return MilpEncoding(
        output_vars=ps, logit_vars=logits, bilinear_terms=terms, gap_bound=gap_p
    )


def _encode_rules(model, builder, x_vars, name) -> MilpEncoding:
    atom_vars: dict[tuple[int, str, float], int] = {}

    def atom_binary(feature: int, op: str, const: float) -> tuple[int, bool]:
        """Binary equal to the atom's truth value (off boundaries); returns
        (var, negate) where negate means the atom is the binary's complement."""
        direction = "le" if op in ("<=", "<") else "ge"
        key = (feature, direction, const)
        if key not in atom_vars:
            xv = x_vars[feature]
            xb = builder.var_bounds(xv)
            sv = builder.add_binary(f"{name}_atom{len(atom_vars)}")
            if direction == "le":
                builder.add_constraint({xv: 1.0, sv: xb.hi - const}, LE, xb.hi)
                builder.add_constraint({xv: 1.0, sv: const - xb.lo}, GE, const)
            else:
                builder.add_constraint({xv: 1.0, sv: -(const - xb.lo)}, GE, xb.lo)
                builder.add_constraint({xv: 1.0, sv: -(xb.hi - const)}, LE, const)
            atom_vars[key] = sv
        return atom_vars[key], False

    match_vars = []
    for k, rule in enumerate(model.rules):
        svs = [atom_binary(a.feature, a.op, a.const)[0] for a in rule.atoms]
        if len(svs) == 1:
            match_vars.append(svs[0])
            continue
        mk = builder.add_binary(f"{name}_match{k}")
        for sv in svs:
            builder.add_constraint({mk: 1.0, sv: -1.0}, LE, 0.0)
        builder.add_constraint(
            {mk: 1.0, **{sv: -1.0 for sv in svs}}, GE, 1.0 - len(svs)
        )
        match_vars.append(mk)

    # First-match semantics via prefix products.
    fire_vars = []
    for k, mk in enumerate(match_vars):
        fk = builder.add_var(f"{name}_fire{k}", 0.0, 1.0)
        builder.add_constraint({fk: 1.0, mk: -1.0}, LE, 0.0)
        for mj in match_vars[:k]:
            builder.add_constraint({fk: 1.0, mj: 1.0}, LE, 1.0)
        builder.add_constraint(
            {fk: 1.0, mk: -1.0, **{mj: 1.0 for mj in match_vars[:k]}}, GE, 0.0
        )
        fire_vars.append(fk)

    vals = [r.value for r in model.rules]
    all_vals = vals + [model.default]
    y = builder.add_var(f"{name}_out", min(all_vals), max(all_vals))
    coeffs = {y: 1.0}
    for fk, v in zip(fire_vars, vals):
        coeffs[fk] = -(v - model.default)
    builder.add_constraint(coeffs, EQ, model.default, f"{name}_out_def")
    return MilpEncoding(output_vars=[y])


def encode(
    model: ModelArtifact,
    builder: ProblemBuilder,
    x_vars: list[int],
    *,
    sigmoid_segments: int = DEFAULT_SIGMOID_SEGMENTS,
    name: str = "m",
) -> MilpEncoding:
    """Encode model(x) into the builder; returns output handles plus
    bookkeeping.  Input variables must carry finite bounds."""
    if model.n_inputs is not None and len(x_vars) != model.n_inputs:
        raise InvalidParameter(
            f"model expects {model.n_inputs} inputs, got {len(x_vars)} variables"
        )
    for xv in x_vars:
        xb = builder.var_bounds(xv)
        if not (np.isfinite(xb.lo) and np.isfinite(xb.hi)):
            raise UnboundedInput(f"input variable {xv} lacks finite bounds")

    vars_before = builder.n_vars
    cons_before = builder.n_constraints

    if model.kind == LINEAR:
        enc = _encode_linear(model, builder, x_vars, name)
    elif model.kind == LOGISTIC:
        enc = _encode_logistic(model, builder, x_vars, name, sigmoid_segments)
    elif model.kind == TREE:
        enc = _encode_tree(model, builder, x_vars, name)
    elif model.kind == ENSEMBLE:
        enc = _encode_ensemble(model, builder, x_vars, name)
    elif model.kind == RELU_NET:
        enc = _encode_relu_net(model, builder, x_vars, name, sigmoid_segments)
    elif model.kind == RELU_SOFTMAX:
        enc = _encode_relu_softmax(model, builder, x_vars, name, sigmoid_segments)
    elif model.kind == RULES:
        enc = _encode_rules(model, builder, x_vars, name)
    else:
        raise InvalidParameter(f"no encoder for kind {model.kind!r}")

    enc.new_vars = list(range(vars_before, builder.n_vars))
    enc.new_binaries = [i for i in enc.new_vars if i in builder.binary_set]
    enc.n_constraints = builder.n_constraints - cons_before
    # Classifier outputs stay inside [0, 1] whatever the envelope says.
    if model.output_range_hint() is not None:
        for y in enc.output_vars:
            builder.tighten_bounds(y, Interval(0.0, 1.0))
    return enc


def output_bounds(
    model: ModelArtifact,
    feature_set: FeatureSet,
    *,
    sigmoid_segments: int = DEFAULT_SIGMOID_SEGMENTS,
    time_limit: float | None = None,
) -> list[Interval]:
    """Per-output bounds of the model over the feature set, each side from
    its own MILP.  Exact kinds give exact bounds (up to solver tolerance);
    sigmoid and softmax outputs get sound outer bounds obtained by bounding
    the logits exactly and applying the exact monotone transfer.
    """
    builder = ProblemBuilder()
    xs = add_feature_vars(builder, feature_set)
    enc = encode(model, builder, xs, sigmoid_segments=sigmoid_segments)

    sigmoid_head = model.kind == LOGISTIC or (
        model.kind == RELU_NET and model.layers[-1][2] == "sigmoid"
    )
    targets = enc.logit_vars if (sigmoid_head or model.kind == RELU_SOFTMAX) else enc.output_vars

    boxes = []
    for t in targets:
        lo, hi = None, None
        for maximize in (False, True):
            builder.set_objective({t: 1.0}, maximize=maximize)
            res = milp_solve(builder.build_milp(), time_limit=time_limit)
            if res.status == Status.INFEASIBLE:
                raise InfeasibleFeatureSet("feature set admits no points")
            if res.bound is None:
                raise InfeasibleFeatureSet(f"could not bound model output (status {res.status})")
            if maximize:
                hi = res.bound
            else:
                lo = res.bound
        tb = builder.var_bounds(t)
        boxes.append(Interval(max(lo, tb.lo), min(max(hi, lo), tb.hi)))

    if sigmoid_head:
        return [Interval(float(sigmoid(np.array([b.lo]))[0]), float(sigmoid(np.array([b.hi]))[0])) for b in boxes]
    if model.kind == RELU_SOFTMAX:
        return softmax_box(boxes)
    return boxes

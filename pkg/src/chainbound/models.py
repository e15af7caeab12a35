"""Portable pretrained-model artifacts.

An artifact is a JSON-serializable description of a trained model together
with an exact forward evaluator.  The evaluator is the testing oracle for
the MILP encodings in :mod:`chainbound.encodings`; the two are written
independently of each other on purpose.

Artifact file schema (JSON): ``{"kind": ..., "arity": ..., "params": {...}}``
with kind-specific params:

* LinearRegression / LogisticRegression: ``{"W": [[...]], "b": [...]}``
* DecisionTree: ``{"nodes": [{"feature", "threshold", "left", "right",
  "value"}, ...]}`` -- internal nodes carry feature/threshold/left/right,
  leaves carry ``"feature": -1`` and a value list.
* TreeEnsemble: ``{"trees": [<nodes arrays>], "combine": "average"|"sum"}``
* ReluNetwork / ReluNetworkSoftmax: ``{"layers": [{"W": [[...]] (row-major),
  "b": [...], "activation": "relu"|"linear"|"sigmoid"|"softmax"}, ...]}``
* DecisionRules: ``{"rules": ["if age >= 65 then 0.8", ..., "else 0.2"],
  "feature_names": ["age", ...]}``
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidInput, InvalidParameter

LINEAR = "LinearRegression"
LOGISTIC = "LogisticRegression"
TREE = "DecisionTree"
ENSEMBLE = "TreeEnsemble"
RELU_NET = "ReluNetwork"
RELU_SOFTMAX = "ReluNetworkSoftmax"
RULES = "DecisionRules"

MODEL_KINDS = (LINEAR, LOGISTIC, TREE, ENSEMBLE, RELU_NET, RELU_SOFTMAX, RULES)

LEAF = -1


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z):
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max())
    return e / e.sum()


@dataclass(frozen=True)
class TreeNode:
    feature: int
    threshold: float
    left: int
    right: int
    value: tuple[float, ...] = ()

    @property
    def is_leaf(self) -> bool:
        return self.feature == LEAF


@dataclass(frozen=True)
class RuleAtom:
    feature: int
    op: str  # one of <=, <, >=, >
    const: float

    def holds(self, x: np.ndarray) -> bool:
        v = x[self.feature]
        if self.op == "<=":
            return v <= self.const
        if self.op == "<":
            return v < self.const
        if self.op == ">=":
            return v >= self.const
        return v > self.const


@dataclass(frozen=True)
class Rule:
    atoms: tuple[RuleAtom, ...]
    value: float

    def matches(self, x: np.ndarray) -> bool:
        return all(a.holds(x) for a in self.atoms)


_RULE_RE = re.compile(r"^\s*if\s+(.+?)\s+then\s+(\S+)\s*$", re.IGNORECASE)
_ELSE_RE = re.compile(r"^\s*else\s+(\S+)\s*$", re.IGNORECASE)
_ATOM_RE = re.compile(r"^\s*(\S+)\s*(<=|>=|<|>)\s*(\S+)\s*$")


def parse_rules(
    lines: Sequence[str], feature_names: Sequence[str] | None = None
) -> tuple[tuple[Rule, ...], float]:
    """Parse ``if <feat> <op> <const> [and ...] then <value>`` lines plus a
    final ``else <value>`` default.  Features are named via
    ``feature_names`` or positionally as ``x0, x1, ...``."""

    def feat_index(tok: str) -> int:
        if feature_names and tok in feature_names:
            return list(feature_names).index(tok)
        m = re.fullmatch(r"x(\d+)", tok)
        if m:
            return int(m.group(1))
        raise InvalidParameter(f"unknown feature name {tok!r} in rule")

    rules: list[Rule] = []
    default: float | None = None
    for line in lines:
        m = _ELSE_RE.match(line)
        if m:
            if default is not None:
                raise InvalidParameter("multiple 'else' clauses in rule list")
            default = float(m.group(1))
            continue
        m = _RULE_RE.match(line)
        if not m:
            raise InvalidParameter(f"cannot parse rule {line!r}")
        if default is not None:
            raise InvalidParameter("'else' clause must come last")
        atoms = []
        for part in re.split(r"\s+and\s+", m.group(1), flags=re.IGNORECASE):
            am = _ATOM_RE.match(part)
            if not am:
                raise InvalidParameter(f"cannot parse condition {part!r}")
            atoms.append(RuleAtom(feat_index(am.group(1)), am.group(2), float(am.group(3))))
        rules.append(Rule(tuple(atoms), float(m.group(2))))
    if default is None:
        raise InvalidParameter("rule list needs a final 'else <value>' clause")
    return tuple(rules), default


def _check_tree(nodes: list[TreeNode], arity: int) -> None:
    n = len(nodes)
    if n == 0:
        raise InvalidParameter("empty tree")
    seen: set[int] = set()
    stack = [0]
    while stack:
        i = stack.pop()
        if i in seen:
            raise InvalidParameter(f"tree node {i} reachable twice (cycle or DAG)")
        seen.add(i)
        node = nodes[i]
        if node.is_leaf:
            if len(node.value) != arity:
                raise InvalidParameter(
                    f"leaf {i} has {len(node.value)} values, expected {arity}"
                )
            continue
        if not math.isfinite(node.threshold):
            raise InvalidParameter(f"node {i} has non-finite threshold")
        if node.feature < 0:
            raise InvalidParameter(f"node {i} has invalid feature index")
        for child in (node.left, node.right):
            if not (0 <= child < n):
                raise InvalidParameter(f"node {i} child {child} out of range")
            stack.append(child)


@dataclass
class ModelArtifact:
    """A pretrained model with an exact forward evaluator.

    ``arity`` is the output dimension.  ``n_inputs`` may be None for kinds
    whose input width is implicit (rules only reference feature indices).
    """

    kind: str
    arity: int
    n_inputs: int | None = None
    # Linear / logistic
    W: np.ndarray | None = None
    b: np.ndarray | None = None
    # Trees
    nodes: list[TreeNode] = field(default_factory=list)
    trees: list[list[TreeNode]] = field(default_factory=list)
    combine: str = "average"
    # Networks: list of (W, b, activation)
    layers: list[tuple[np.ndarray, np.ndarray, str]] = field(default_factory=list)
    # Rules
    rules: tuple[Rule, ...] = ()
    default: float = 0.0
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvalidParameter(f"unknown model kind {self.kind!r}")
        if self.arity < 1:
            raise InvalidParameter("output arity must be >= 1")
        if self.kind in (LINEAR, LOGISTIC):
            self.W = np.atleast_2d(np.asarray(self.W, dtype=float))
            self.b = np.atleast_1d(np.asarray(self.b, dtype=float))
            if self.W.shape[0] != self.arity or self.b.shape != (self.arity,):
                raise InvalidParameter(f"{self.kind}: weight/bias shapes do not match arity")
            self.n_inputs = self.W.shape[1]
        elif self.kind == TREE:
            _check_tree(self.nodes, self.arity)
        elif self.kind == ENSEMBLE:
            if not self.trees:
                raise InvalidParameter("ensemble needs at least one tree")
            if self.combine not in ("average", "sum"):
                raise InvalidParameter(f"unknown combine mode {self.combine!r}")
            for t in self.trees:
                _check_tree(t, self.arity)
        elif self.kind in (RELU_NET, RELU_SOFTMAX):
            if not self.layers:
                raise InvalidParameter("network needs at least one layer")
            fixed = []
            width = None
            for li, (W, bvec, act) in enumerate(self.layers):
                W = np.atleast_2d(np.asarray(W, dtype=float))
                bvec = np.atleast_1d(np.asarray(bvec, dtype=float))
                if W.shape[0] != bvec.shape[0]:
                    raise InvalidParameter(f"layer {li}: W/b row mismatch")
                if width is not None and W.shape[1] != width:
                    raise InvalidParameter(f"layer {li}: input width {W.shape[1]} != {width}")
                width = W.shape[0]
                if act not in ("relu", "linear", "sigmoid", "softmax"):
                    raise InvalidParameter(f"layer {li}: unknown activation {act!r}")
                if act in ("sigmoid", "softmax") and li != len(self.layers) - 1:
                    raise InvalidParameter(f"{act} only supported on the final layer")
                fixed.append((W, bvec, act))
            self.layers = fixed
            last_act = fixed[-1][2]
            if self.kind == RELU_SOFTMAX and last_act != "softmax":
                raise InvalidParameter("ReluNetworkSoftmax must end in a softmax layer")
            if self.kind == RELU_NET and last_act == "softmax":
                raise InvalidParameter("softmax networks must use kind ReluNetworkSoftmax")
            if width != self.arity:
                raise InvalidParameter("final layer width does not match arity")
            self.n_inputs = self.layers[0][0].shape[1]
        elif self.kind == RULES:
            if self.arity != 1:
                raise InvalidParameter("decision rules have output arity 1")

    # ---------------------------------------------------------------- goods

    @property
    def is_classifier(self) -> bool:
        """Classifier outputs are declared in [0, 1]."""
        return self.kind in (LOGISTIC, RELU_SOFTMAX) or (
            self.kind == RELU_NET and self.layers[-1][2] == "sigmoid"
        )

    def output_range_hint(self) -> tuple[float, float] | None:
        return (0.0, 1.0) if self.is_classifier else None

    # ------------------------------------------------------------- evaluate

    def evaluate(self, x: Sequence[float]) -> np.ndarray:
        """Exact forward pass (exact sigmoid / softmax)."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise InvalidInput("evaluate expects a single feature vector")
        if self.n_inputs is not None and x.shape[0] != self.n_inputs:
            raise InvalidInput(f"expected {self.n_inputs} features, got {x.shape[0]}")

        if self.kind == LINEAR:
            return self.W @ x + self.b
        if self.kind == LOGISTIC:
            return sigmoid(self.W @ x + self.b)
        if self.kind == TREE:
            return np.asarray(_eval_tree(self.nodes, x))
        if self.kind == ENSEMBLE:
            vals = np.array([_eval_tree(t, x) for t in self.trees])
            total = vals.sum(axis=0)
            return total / len(self.trees) if self.combine == "average" else total
        if self.kind in (RELU_NET, RELU_SOFTMAX):
            h = x
            for W, bvec, act in self.layers:
                z = W @ h + bvec
                if act == "relu":
                    h = np.maximum(z, 0.0)
                elif act == "linear":
                    h = z
                elif act == "sigmoid":
                    h = sigmoid(z)
                else:
                    h = softmax(z)
            return h
        # rules: first match wins
        for rule in self.rules:
            if rule.matches(x):
                return np.array([rule.value])
        return np.array([self.default])

    # ------------------------------------------------------------------ io

    def to_json_dict(self) -> dict:
        params: dict
        if self.kind in (LINEAR, LOGISTIC):
            params = {"W": self.W.tolist(), "b": self.b.tolist()}
        elif self.kind == TREE:
            params = {"nodes": _nodes_to_json(self.nodes)}
        elif self.kind == ENSEMBLE:
            params = {
                "trees": [_nodes_to_json(t) for t in self.trees],
                "combine": self.combine,
            }
        elif self.kind in (RELU_NET, RELU_SOFTMAX):
            params = {
                "layers": [
                    {"W": W.tolist(), "b": bvec.tolist(), "activation": act}
                    for W, bvec, act in self.layers
                ]
            }
        else:
            params = {
                "rules": [_rule_to_str(r, self.feature_names) for r in self.rules]
                + [f"else {self.default!r}"],
            }
            if self.feature_names:
                params["feature_names"] = list(self.feature_names)
        return {"kind": self.kind, "arity": self.arity, "params": params}

    @classmethod
    def from_json_dict(cls, d: dict) -> "ModelArtifact":
        try:
            kind = d["kind"]
            arity = int(d["arity"])
            params = d["params"]
        except (KeyError, TypeError) as exc:
            raise InvalidParameter(f"malformed model artifact: missing {exc}") from exc
        if kind in (LINEAR, LOGISTIC):
            return cls(kind, arity, W=params["W"], b=params["b"])
        if kind == TREE:
            return cls(kind, arity, nodes=_nodes_from_json(params["nodes"]))
        if kind == ENSEMBLE:
            return cls(
                kind,
                arity,
                trees=[_nodes_from_json(t) for t in params["trees"]],
                combine=params.get("combine", "average"),
            )
        if kind in (RELU_NET, RELU_SOFTMAX):
            layers = [
                (np.asarray(l["W"], dtype=float), np.asarray(l["b"], dtype=float), l["activation"])
                for l in params["layers"]
            ]
            return cls(kind, arity, layers=layers)
        if kind == RULES:
            names = tuple(params.get("feature_names", ()))
            rules, default = parse_rules(params["rules"], names or None)
            return cls(kind, arity, rules=rules, default=default, feature_names=names)
        raise InvalidParameter(f"unknown model kind {kind!r}")


def _eval_tree(nodes: list[TreeNode], x: np.ndarray) -> tuple[float, ...]:
    i = 0
    while True:
        node = nodes[i]
        if node.is_leaf:
            return node.value
        i = node.left if x[node.feature] <= node.threshold else node.right


def _nodes_to_json(nodes: list[TreeNode]) -> list[dict]:
    out = []
    for n in nodes:
        if n.is_leaf:
            out.append({"feature": LEAF, "threshold": 0.0, "left": LEAF, "right": LEAF,
                        "value": list(n.value)})
        else:
            out.append({"feature": n.feature, "threshold": n.threshold,
                        "left": n.left, "right": n.right, "value": None})
    return out


def _nodes_from_json(raw: list[dict]) -> list[TreeNode]:
    nodes = []
    for d in raw:
        feature = int(d["feature"])
        if feature == LEAF:
            value = d.get("value")
            if value is None:
                raise InvalidParameter("leaf node without value")
            value = tuple(float(v) for v in (value if isinstance(value, list) else [value]))
            nodes.append(TreeNode(LEAF, 0.0, LEAF, LEAF, value))
        else:
            nodes.append(
                TreeNode(feature, float(d["threshold"]), int(d["left"]), int(d["right"]))
            )
    return nodes


def _rule_to_str(rule: Rule, names: Sequence[str]) -> str:
    def feat(i: int) -> str:
        return names[i] if i < len(names) else f"x{i}"

    conds = " and ".join(f"{feat(a.feature)} {a.op} {a.const!r}" for a in rule.atoms)
    return f"if {conds} then {rule.value!r}"


def load_model(path: str | Path) -> ModelArtifact:
    with open(path) as fh:
        return ModelArtifact.from_json_dict(json.load(fh))


def save_model(model: ModelArtifact, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(model.to_json_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")

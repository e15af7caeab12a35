import json

import numpy as np
import pytest

from chainbound.errors import InvalidInput, InvalidParameter
from chainbound.models import (
    LEAF,
    ModelArtifact,
    TreeNode,
    load_model,
    parse_rules,
    save_model,
)

from oracles import relu_forward_loops


def depth1_tree():
    return ModelArtifact(
        "DecisionTree",
        1,
        nodes=[
            TreeNode(0, 0.0, 1, 2),
            TreeNode(LEAF, 0.0, LEAF, LEAF, (1.0,)),
            TreeNode(LEAF, 0.0, LEAF, LEAF, (2.0,)),
        ],
    )


class TestEvaluate:
    def test_linear(self):
        m = ModelArtifact("LinearRegression", 1, W=[[1.0, 2.0]], b=[0.5])
        assert m.evaluate([1.0, 1.0])[0] == pytest.approx(3.5)

    def test_tree_depth1(self):
        t = depth1_tree()
        assert t.evaluate([-1.0])[0] == pytest.approx(1.0)
        assert t.evaluate([1.0])[0] == pytest.approx(2.0)
        assert t.evaluate([0.0])[0] == pytest.approx(1.0)  # ties go left

    def test_logistic_exact_sigmoid(self):
        m = ModelArtifact("LogisticRegression", 1, W=[[2.0]], b=[-1.0])
        assert m.evaluate([0.5])[0] == pytest.approx(0.5)
        assert 0 < m.evaluate([-10.0])[0] < 1e-4

    def test_relu_matches_independent_evaluator(self):
        rng = np.random.default_rng(2)
        layers = [
            (rng.normal(size=(6, 3)), rng.normal(size=6), "relu"),
            (rng.normal(size=(4, 6)), rng.normal(size=4), "relu"),
            (rng.normal(size=(2, 4)), rng.normal(size=2), "linear"),
        ]
        m = ModelArtifact("ReluNetwork", 2, layers=layers)
        for _ in range(50):
            x = rng.uniform(-2, 2, 3)
            assert m.evaluate(x) == pytest.approx(relu_forward_loops(layers, x), abs=1e-10)

    def test_softmax_network(self):
        rng = np.random.default_rng(3)
        layers = [
            (rng.normal(size=(4, 2)), rng.normal(size=4), "relu"),
            (rng.normal(size=(3, 4)), rng.normal(size=3), "softmax"),
        ]
        m = ModelArtifact("ReluNetworkSoftmax", 3, layers=layers)
        for _ in range(20):
            x = rng.uniform(-1, 1, 2)
            p = m.evaluate(x)
            assert p.sum() == pytest.approx(1.0)
            assert np.all(p >= 0)
            assert p == pytest.approx(relu_forward_loops(layers, x), abs=1e-10)

    def test_ensemble_average_and_sum(self):
        t = depth1_tree()
        avg = ModelArtifact("TreeEnsemble", 1, trees=[t.nodes, t.nodes], combine="average")
        tot = ModelArtifact("TreeEnsemble", 1, trees=[t.nodes, t.nodes], combine="sum")
        assert avg.evaluate([1.0])[0] == pytest.approx(2.0)
        assert tot.evaluate([1.0])[0] == pytest.approx(4.0)

    def test_rules_first_match(self):
        rules, default = parse_rules(
            ["if x0 >= 65 then 0.8", "if x0 >= 40 then 0.5", "else 0.2"]
        )
        m = ModelArtifact("DecisionRules", 1, rules=rules, default=default)
        assert m.evaluate([70.0])[0] == pytest.approx(0.8)
        assert m.evaluate([50.0])[0] == pytest.approx(0.5)
        assert m.evaluate([30.0])[0] == pytest.approx(0.2)

    def test_arity_mismatch(self):
        m = ModelArtifact("LinearRegression", 1, W=[[1.0, 2.0]], b=[0.0])
        with pytest.raises(InvalidInput):
            m.evaluate([1.0])


class TestRuleParsing:
    def test_named_features(self):
        rules, default = parse_rules(
            ["if age >= 65 and bmi < 30 then 0.8", "else 0.2"], ["age", "bmi"]
        )
        assert default == 0.2
        assert len(rules) == 1
        assert rules[0].atoms[0].feature == 0
        assert rules[0].atoms[1].feature == 1
        assert rules[0].atoms[1].op == "<"

    def test_requires_else(self):
        with pytest.raises(InvalidParameter):
            parse_rules(["if x0 >= 1 then 2.0"])

    def test_else_must_be_last(self):
        with pytest.raises(InvalidParameter):
            parse_rules(["else 0.1", "if x0 >= 1 then 2.0"])

    def test_unknown_feature(self):
        with pytest.raises(InvalidParameter):
            parse_rules(["if weight >= 1 then 2.0", "else 0.0"], ["age"])

    def test_garbage(self):
        with pytest.raises(InvalidParameter):
            parse_rules(["if x0 ~ 1 then 2.0", "else 0.0"])


class TestValidation:
    def test_tree_cycle_rejected(self):
        nodes = [TreeNode(0, 0.0, 0, 1), TreeNode(LEAF, 0.0, LEAF, LEAF, (1.0,))]
        with pytest.raises(InvalidParameter):
            ModelArtifact("DecisionTree", 1, nodes=nodes)

    def test_leaf_arity_checked(self):
        nodes = [TreeNode(LEAF, 0.0, LEAF, LEAF, (1.0,))]
        with pytest.raises(InvalidParameter):
            ModelArtifact("DecisionTree", 2, nodes=nodes)

    def test_layer_chain_checked(self):
        with pytest.raises(InvalidParameter):
            ModelArtifact(
                "ReluNetwork",
                1,
                layers=[
                    (np.ones((3, 2)), np.zeros(3), "relu"),
                    (np.ones((1, 4)), np.zeros(1), "linear"),
                ],
            )

    def test_softmax_kind_enforced(self):
        with pytest.raises(InvalidParameter):
            ModelArtifact(
                "ReluNetwork", 2, layers=[(np.ones((2, 2)), np.zeros(2), "softmax")]
            )

    def test_unknown_kind(self):
        with pytest.raises(InvalidParameter):
            ModelArtifact("GradientBoosting", 1, W=[[1.0]], b=[0.0])


class TestJsonRoundTrip:
    @pytest.mark.parametrize("kind", ["linear", "logistic", "tree", "ensemble", "net", "softmax", "rules"])
    def test_round_trip(self, kind, tmp_path):
        rng = np.random.default_rng(8)
        if kind == "linear":
            m = ModelArtifact("LinearRegression", 2, W=rng.normal(size=(2, 3)), b=rng.normal(size=2))
        elif kind == "logistic":
            m = ModelArtifact("LogisticRegression", 1, W=rng.normal(size=(1, 3)), b=rng.normal(size=1))
        elif kind == "tree":
            m = depth1_tree()
        elif kind == "ensemble":
            m = ModelArtifact("TreeEnsemble", 1, trees=[depth1_tree().nodes] * 3, combine="sum")
        elif kind == "net":
            m = ModelArtifact(
                "ReluNetwork",
                2,
                layers=[
                    (rng.normal(size=(4, 3)), rng.normal(size=4), "relu"),
                    (rng.normal(size=(2, 4)), rng.normal(size=2), "linear"),
                ],
            )
        elif kind == "softmax":
            m = ModelArtifact(
                "ReluNetworkSoftmax", 3, layers=[(rng.normal(size=(3, 2)), rng.normal(size=3), "softmax")]
            )
        else:
            rules, default = parse_rules(
                ["if age >= 65 then 0.8", "if age >= 40 and x1 <= 2 then 0.5", "else 0.2"],
                ["age", "x1"],
            )
            m = ModelArtifact("DecisionRules", 1, rules=rules, default=default, feature_names=("age", "x1"))

        path = tmp_path / "m.json"
        save_model(m, path)
        m2 = load_model(path)
        assert m2.kind == m.kind
        assert m2.arity == m.arity
        x = rng.uniform(-1, 1, m.n_inputs or 2)
        if m.kind == "DecisionRules":
            x = np.abs(x) * 50
        assert m2.evaluate(x) == pytest.approx(m.evaluate(x), abs=1e-12)

    def test_malformed_file(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"kind": "LinearRegression"}))
        with pytest.raises(InvalidParameter):
            load_model(p)

#!/usr/bin/env python3
"""Export scikit-learn estimators to the portable model-artifact format.

Supported: LinearRegression / Ridge / Lasso (-> LinearRegression), binary
LogisticRegression (-> LogisticRegression), DecisionTreeRegressor and
binary DecisionTreeClassifier (-> DecisionTree), RandomForestRegressor
(-> TreeEnsemble), MLPRegressor with relu activations (-> ReluNetwork).

This script lives outside the package on purpose: the repository core never
imports an ML framework.  Usage:

    python export_sklearn.py  # demo: trains small models, writes JSON files
"""

import json

import numpy as np

from chainbound.models import ModelArtifact, save_model


def export_linear(est) -> ModelArtifact:
    W = np.atleast_2d(est.coef_)
    b = np.atleast_1d(est.intercept_)
    return ModelArtifact("LinearRegression", W.shape[0], W=W, b=b)


def export_logistic(est) -> ModelArtifact:
    if len(est.classes_) != 2:
        raise ValueError("only binary logistic regression is supported")
    return ModelArtifact(
        "LogisticRegression", 1, W=np.atleast_2d(est.coef_), b=np.atleast_1d(est.intercept_)
    )


def _tree_nodes(tree, classifier: bool):
    """Flatten an sklearn tree_ structure into the artifact node array."""
    nodes = []
    for i in range(tree.node_count):
        if tree.children_left[i] == -1:
            value = tree.value[i][0]
            if classifier:
                value = value / value.sum()  # class frequencies -> probability
                out = [float(value[1])]  # P(class 1)
            else:
                out = [float(v) for v in np.atleast_1d(value)]
            nodes.append(
                {"feature": -1, "threshold": 0.0, "left": -1, "right": -1, "value": out}
            )
        else:
            nodes.append(
                {
                    "feature": int(tree.feature[i]),
                    "threshold": float(tree.threshold[i]),
                    "left": int(tree.children_left[i]),
                    "right": int(tree.children_right[i]),
                    "value": None,
                }
            )
    return nodes


def export_tree(est, classifier=False) -> ModelArtifact:
    raw = {"kind": "DecisionTree", "arity": 1, "params": {"nodes": _tree_nodes(est.tree_, classifier)}}
    return ModelArtifact.from_json_dict(raw)


def export_forest(est) -> ModelArtifact:
    raw = {
        "kind": "TreeEnsemble",
        "arity": 1,
        "params": {
            "trees": [_tree_nodes(t.tree_, False) for t in est.estimators_],
            "combine": "average",
        },
    }
    return ModelArtifact.from_json_dict(raw)


def export_mlp(est, softmax=False) -> ModelArtifact:
    layers = []
    n = len(est.coefs_)
    for i, (W, b) in enumerate(zip(est.coefs_, est.intercepts_)):
        last = i == n - 1
        act = ("softmax" if softmax else "linear") if last else "relu"
        layers.append({"W": W.T.tolist(), "b": list(map(float, b)), "activation": act})
    kind = "ReluNetworkSoftmax" if softmax else "ReluNetwork"
    return ModelArtifact.from_json_dict(
        {"kind": kind, "arity": len(est.intercepts_[-1]), "params": {"layers": layers}}
    )


def main():
    try:
        from sklearn.ensemble import RandomForestRegressor
        from sklearn.linear_model import LinearRegression, LogisticRegression
        from sklearn.neural_network import MLPRegressor
        from sklearn.tree import DecisionTreeClassifier, DecisionTreeRegressor
    except ImportError:
        raise SystemExit("scikit-learn is required to run the demo export")

    rng = np.random.default_rng(0)
    X = rng.normal(size=(500, 3))
    y = X @ np.array([1.0, -0.5, 0.25]) + 0.1 * rng.normal(size=500)
    y_bin = (y > 0).astype(int)

    save_model(export_linear(LinearRegression().fit(X, y)), "linear.json")
    save_model(export_logistic(LogisticRegression().fit(X, y_bin)), "logistic.json")
    save_model(export_tree(DecisionTreeRegressor(max_depth=4).fit(X, y)), "tree.json")
    save_model(
        export_tree(DecisionTreeClassifier(max_depth=4).fit(X, y_bin), classifier=True),
        "tree_classifier.json",
    )
    save_model(
        export_forest(RandomForestRegressor(n_estimators=5, max_depth=3).fit(X, y)),
        "forest.json",
    )
    save_model(
        export_mlp(MLPRegressor(hidden_layer_sizes=(8,), max_iter=500).fit(X, y)),
        "mlp.json",
    )
    print("wrote linear/logistic/tree/tree_classifier/forest/mlp JSON artifacts")


if __name__ == "__main__":
    main()

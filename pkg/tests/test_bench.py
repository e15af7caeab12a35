import json

import numpy as np
import pytest

from chainbound.bench import (
    BenchConfig,
    fit_linear,
    fit_logistic,
    fit_tree,
    generate_instance,
)
from chainbound.cli import main
from chainbound.markov import validate
from chainbound.models import sigmoid


class TestTrainers:
    def test_linear_recovers_coefficients(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(500, 3))
        beta = np.array([1.0, -2.0, 0.5])
        y = X @ beta + 0.7
        m = fit_linear(X, y)
        assert m.W[0] == pytest.approx(beta, abs=1e-8)
        assert m.b[0] == pytest.approx(0.7, abs=1e-8)

    def test_logistic_separates(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(2000, 2))
        p = sigmoid(X @ np.array([2.0, -1.0]))
        y = (rng.uniform(size=2000) < p).astype(float)
        m = fit_logistic(X, y)
        preds = sigmoid(X @ m.W[0] + m.b[0])
        # direction recovered: high-probability points score high
        assert np.corrcoef(preds, p)[0, 1] > 0.9

    def test_tree_fits_step_function(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(-1, 1, (1000, 2))
        y = np.where(X[:, 0] <= 0.25, 1.0, 3.0)
        m = fit_tree(X, y, max_depth=2)
        assert m.evaluate(np.array([-0.5, 0.0]))[0] == pytest.approx(1.0, abs=0.05)
        assert m.evaluate(np.array([0.8, 0.0]))[0] == pytest.approx(3.0, abs=0.05)

    def test_tree_respects_depth(self):
        rng = np.random.default_rng(3)
        X = rng.uniform(-1, 1, (400, 2))
        y = rng.normal(size=400)
        m = fit_tree(X, y, max_depth=3)
        n_leaves = sum(1 for n in m.nodes if n.is_leaf)
        assert n_leaves <= 8


class TestInstances:
    def test_generated_spec_valid(self):
        cfg = BenchConfig(n_states=5, n_train=500)
        spec = generate_instance(cfg, seed=0)
        assert validate(spec).is_valid
        assert spec.discount == 0.97
        assert spec.m_features == 5
        assert len(spec.models) == 3

    def test_experiment_shape_smallest_setting(self):
        # Smallest state-space setting: three models, n = 5, box [-1,1]^5.
        cfg = BenchConfig(n_states=5, prob_model="logistic", reward_model="linear", n_train=500)
        spec = generate_instance(cfg, seed=1)
        assert spec.n_states == 5
        kinds = [m.kind for m in spec.models]
        assert kinds == ["LinearRegression", "LogisticRegression", "LogisticRegression"]
        hull = spec.feature_set.hull()
        assert hull.lower.tolist() == [-1.0] * 5
        assert hull.upper.tolist() == [1.0] * 5
        # last state absorbing
        P_b = spec.links["P"].b.reshape(5, 5)
        assert P_b[4, 4] == 1.0

    def test_seeded_instances_reproduce(self):
        cfg = BenchConfig(n_states=4, n_train=300)
        a = generate_instance(cfg, seed=7)
        b = generate_instance(cfg, seed=7)
        for t in a.links:
            assert np.array_equal(a.links[t].A, b.links[t].A)
            assert np.array_equal(a.links[t].b, b.links[t].b)
        for ma, mb in zip(a.models, b.models):
            assert json.dumps(ma.to_json_dict(), sort_keys=True) == json.dumps(
                mb.to_json_dict(), sort_keys=True
            )


class TestBenchCommand:
    def test_files_reproduce_byte_for_byte(self, tmp_path):
        args = [
            "bench",
            "--n-states",
            "3",
            "--instances",
            "1",
            "--n-train",
            "200",
            "--seed",
            "5",
            "--time-limit",
            "60",
        ]
        rc = main(args + ["--out", str(tmp_path / "a")])
        assert rc == 0
        rc = main(args + ["--out", str(tmp_path / "b")])
        assert rc == 0
        inst_a = tmp_path / "a" / "instance_0005"
        inst_b = tmp_path / "b" / "instance_0005"
        for name in sorted(p.name for p in inst_a.iterdir()):
            assert (inst_a / name).read_bytes() == (inst_b / name).read_bytes()
        results = (tmp_path / "a" / "results.csv").read_text()
        assert "full" in results and "v_init" in results

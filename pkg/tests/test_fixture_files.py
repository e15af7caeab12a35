"""Committed fixture files stay loadable and solvable."""

from pathlib import Path

import pytest

from chainbound.markov import validate
from chainbound.probfile import load_problem
from chainbound.verifier import VerifyConfig, verify

FIXTURES = Path(__file__).parent / "fixtures"


def test_fixed_two_state():
    spec = load_problem(FIXTURES / "fixed_two_state.json")
    assert validate(spec).is_valid
    res = verify(spec)
    assert res.value == pytest.approx(2.0)


def test_interval_two_state_bounds():
    spec = load_problem(FIXTURES / "interval_two_state.json")
    assert validate(spec).is_valid
    res = verify(spec, VerifyConfig(bounds_only=True))
    assert res.ledger.hull_certified is True
    assert res.ledger.v[0].hi == pytest.approx(2688.38, abs=0.01)
    assert res.ledger.v[1].hi == pytest.approx(2110.81, abs=0.01)


def test_bench_smallest_instance():
    spec = load_problem(FIXTURES / "bench_smallest" / "problem.json")
    assert validate(spec).is_valid
    assert spec.n_states == 5
    assert spec.m_features == 5
    assert spec.discount == 0.97
    assert [m.kind for m in spec.models] == [
        "LinearRegression",
        "LogisticRegression",
        "LogisticRegression",
    ]
    res = verify(spec, VerifyConfig(time_limit=120))
    assert res.status == "optimal"

import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from chainbound.cli import main
from chainbound.errors import InvalidParameter
from chainbound.markov import (
    ParameterInequality,
    PropertyQuery,
    QueryKind,
    QuerySense,
    validate,
)
from chainbound.probfile import load_problem, problem_from_json, save_problem

from instances import grid_instance

FIXTURES = Path(__file__).parent / "fixtures"


class TestProblemFiles:
    def test_round_trip(self, tmp_path):
        spec = grid_instance(1, n_states=4)
        spec.ineqs = [
            ParameterInequality("r", np.ones((1, 4)), np.array([50.0])),
        ]
        spec.query = PropertyQuery(
            QueryKind.TOTAL_REWARD, QuerySense.FEASIBILITY, w_min=0.0, w_max=10.0
        )
        path = tmp_path / "p.json"
        save_problem(spec, path)
        back = load_problem(path)
        assert back.n_states == spec.n_states
        assert back.m_features == spec.m_features
        assert back.discount == spec.discount
        assert back.query == spec.query
        assert back.absorbing_states == spec.absorbing_states
        for t in spec.links:
            assert np.array_equal(back.links[t].A, spec.links[t].A)
            assert np.array_equal(back.links[t].b, spec.links[t].b)
        assert len(back.ineqs) == 1
        assert np.array_equal(back.ineqs[0].C, spec.ineqs[0].C)
        assert back.feature_set.integrality == spec.feature_set.integrality
        assert len(back.models) == len(spec.models)
        x = np.array([1.0, -1.0])
        for m1, m2 in zip(spec.models, back.models):
            assert m2.evaluate(x) == pytest.approx(m1.evaluate(x))
        assert validate(back).is_valid

    def test_infinite_window_round_trip(self, tmp_path):
        spec = grid_instance(2, n_states=3)
        spec.query = PropertyQuery(
            QueryKind.TOTAL_REWARD, QuerySense.FEASIBILITY, w_min=1.0, w_max=math.inf
        )
        path = tmp_path / "p.json"
        save_problem(spec, path)
        back = load_problem(path)
        assert back.query.w_min == 1.0
        assert math.isinf(back.query.w_max)

    def test_model_references(self, tmp_path):
        spec = grid_instance(3, n_states=3)
        from chainbound.models import save_model

        for i, m in enumerate(spec.models):
            save_model(m, tmp_path / f"m{i}.json")
        save_problem(spec, tmp_path / "p.json", model_refs=[f"m{i}.json" for i in range(3)])
        back = load_problem(tmp_path / "p.json")
        assert len(back.models) == 3

    def test_missing_field_reported_with_path(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text(json.dumps({"version": "1", "n_states": 2}))
        with pytest.raises(InvalidParameter, match="broken.json"):
            load_problem(p)

    def test_bad_version(self):
        with pytest.raises(InvalidParameter, match="version"):
            problem_from_json({"version": "99"})


class TestCli:
    def test_verify_golden(self, capsys):
        rc = main(["verify", str(FIXTURES / "fixed_two_state.json")])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert out["status"] == "optimal"
        assert out["value"] == pytest.approx(2.0)

    def test_missing_model_file(self, tmp_path, capsys):
        spec_json = json.loads((FIXTURES / "interval_two_state.json").read_text())
        (tmp_path / "p.json").write_text(json.dumps(spec_json))  # model ref now dangling
        rc = main(["verify", str(tmp_path / "p.json")])
        assert rc == 3

    def test_malformed_file(self, tmp_path):
        p = tmp_path / "junk.json"
        p.write_text("{not json")
        assert main(["verify", str(p)]) == 3

    def test_bounds_only_ledger(self, capsys):
        rc = main(["verify", str(FIXTURES / "interval_two_state.json"), "--bounds-only"])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert out["status"] == "bounds_only"
        assert out["value"] is None
        v = out["ledger"]["v"]
        assert v[0][1] == pytest.approx(2688.38, abs=0.01)
        assert v[1][1] == pytest.approx(2110.81, abs=0.01)
        assert out["ledger"]["hull_certified"] is True

    def test_sense_override_and_json_out(self, tmp_path, capsys):
        out_path = tmp_path / "report.json"
        rc = main(
            [
                "verify",
                str(FIXTURES / "fixed_two_state.json"),
                "--sense",
                "min",
                "--json-out",
                str(out_path),
            ]
        )
        assert rc == 0
        report = json.loads(out_path.read_text())
        assert report["value"] == pytest.approx(2.0)  # everything fixed: min == max

    def test_report_deterministic(self, tmp_path, capsys):
        def run():
            rc = main(["verify", str(FIXTURES / "fixed_two_state.json")])
            assert rc == 0
            out = json.loads(capsys.readouterr().out)
            out["ledger"].pop("timings")
            out.pop("runtime_sec")
            return json.dumps(out, sort_keys=True)

        assert run() == run()

    def test_infeasible_exit_code(self, tmp_path, capsys):
        spec = grid_instance(4, n_states=3)
        spec.query = PropertyQuery(
            QueryKind.TOTAL_REWARD, QuerySense.FEASIBILITY, w_min=1e8, w_max=2e8
        )
        save_problem(spec, tmp_path / "p.json")
        assert main(["verify", str(tmp_path / "p.json")]) == 1

    def test_debug_dump(self, tmp_path, capsys):
        spec = grid_instance(5, n_states=3)
        save_problem(spec, tmp_path / "p.json")
        dump = tmp_path / "program.txt"
        rc = main(["verify", str(tmp_path / "p.json"), "--debug-dump-lp", str(dump)])
        assert rc == 0
        text = dump.read_text()
        assert "bellman0" in text
        assert "product:" in text

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "chainbound", "verify", str(FIXTURES / "fixed_two_state.json")],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert json.loads(proc.stdout)["value"] == pytest.approx(2.0)

    def test_check_model_linear(self, tmp_path, capsys):
        from chainbound.models import ModelArtifact, save_model

        m = ModelArtifact("LinearRegression", 1, W=[[1.0, -0.5]], b=[0.2])
        save_model(m, tmp_path / "m.json")
        rc = main(["check-model", str(tmp_path / "m.json"), "--box=-1:1", "--samples", "20"])
        out = json.loads(capsys.readouterr().out)
        assert rc == 0
        assert out["max_deviation"] <= 1e-9

    def test_check_model_parse_failure(self, tmp_path):
        (tmp_path / "m.json").write_text("{")
        assert main(["check-model", str(tmp_path / "m.json")]) == 3

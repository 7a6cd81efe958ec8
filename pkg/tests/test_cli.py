import json

import pytest

from symbolic_models import io
from symbolic_models.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out else None), (json.loads(err) if err else None)


@pytest.fixture
def pendulum(configs_dir):
    return configs_dir / "pendulum.json"


@pytest.fixture
def linear(configs_dir):
    return configs_dir / "linear.json"


@pytest.fixture
def unstable(configs_dir):
    return configs_dir / "unstable.json"


def edit_config(src, tmp_path, **blocks):
    doc = json.loads(src.read_text())
    for name, changes in blocks.items():
        doc[name].update(changes)
    path = tmp_path / src.name
    path.write_text(json.dumps(doc))
    return path


class TestParams:
    def test_pendulum(self, capsys, pendulum):
        code, rep, _ = run(capsys, "params", pendulum)
        assert code == 0
        assert rep["holds"] is True
        assert rep["iss"]["slack"] == pytest.approx(0.00155, abs=1e-5)
        assert rep["suggested"]["eta"] == pytest.approx(0.225924, abs=2e-6)

    def test_failing_condition_exits_one(self, capsys, pendulum, tmp_path):
        cfg = edit_config(pendulum, tmp_path, params={"eta": 0.6})
        code, rep, _ = run(capsys, "params", cfg)
        assert code == 1 and rep["holds"] is False

    def test_linear_reports_both_conditions(self, capsys, linear):
        code, rep, _ = run(capsys, "params", linear)
        assert code == 0
        assert rep["gas"]["lhs"] == pytest.approx(0.31767, abs=1e-5)
        assert rep["iss"]["lhs"] == pytest.approx(0.31767, abs=1e-5)


class TestAbstract:
    def test_condition_violated(self, capsys, pendulum, tmp_path):
        cfg = edit_config(pendulum, tmp_path, params={"eta": 0.6})
        code, out, err = run(capsys, "abstract", cfg)
        assert code == 1 and out is None
        assert err["error"] == "condition_violated" and err["exit"] == 1

    def test_linear_artifacts(self, capsys, linear, tmp_path):
        code, rep, _ = run(capsys, "abstract", linear, "--out", tmp_path / "t.json", "--dot", tmp_path / "t.dot")
        assert code == 0
        assert rep["states"] == 13 and rep["labels"] == 21
        doc = io.read_json(tmp_path / "t.json")
        io.validate(doc, io.TS_SCHEMA)
        assert len(doc["transitions"]) == rep["transitions"]
        assert (tmp_path / "t.dot").read_text().startswith("digraph")

    def test_byte_identical(self, capsys, linear, tmp_path):
        run(capsys, "abstract", linear, "--out", tmp_path / "a.json", "--threads", 1)
        run(capsys, "abstract", linear, "--out", tmp_path / "b.json", "--threads", 3)
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_force_without_certificate(self, capsys, unstable):
        code, out, err = run(capsys, "abstract", unstable)
        assert code == 2 and err["error"] == "config_error"
        code, out, _ = run(capsys, "abstract", unstable, "--force")
        assert code == 0 and out["states"] == 41


class TestBisim:
    def test_self_and_coarser(self, capsys, linear, tmp_path):
        run(capsys, "abstract", linear, "--out", tmp_path / "a.json")
        code, rep, _ = run(capsys, "bisim", tmp_path / "a.json", tmp_path / "a.json", "--eps", 0)
        assert code == 0 and rep["bisimilar"] is True
        coarse = edit_config(linear, tmp_path, params={"eta": 0.5})
        run(capsys, "abstract", coarse, "--out", tmp_path / "c.json")
        code, rep, _ = run(
            capsys, "bisim", tmp_path / "a.json", tmp_path / "c.json", "--eps", 0.01, "--relation", tmp_path / "r.json"
        )
        assert code == 1 and rep["bisimilar"] is False
        io.validate(io.read_json(tmp_path / "r.json"), io.RELATION_SCHEMA)

    def test_missing_eps(self, capsys, tmp_path, linear):
        run(capsys, "abstract", linear, "--out", tmp_path / "a.json")
        code, _, err = run(capsys, "bisim", tmp_path / "a.json", tmp_path / "a.json")
        assert code == 2 and err["error"] == "usage"

    def test_not_a_transition_system(self, capsys, linear):
        code, _, err = run(capsys, "bisim", linear, linear, "--eps", 0.1)
        assert code == 2 and err["error"] == "config_error"


class TestVerify:
    def test_linear_passes(self, capsys, linear, tmp_path):
        code, rep, _ = run(capsys, "verify", linear, "--samples", 200, "--horizon", 5, "--out", tmp_path / "v.json")
        assert code == 0 and rep["passed"] is True
        assert io.read_json(tmp_path / "v.json") == rep

    def test_unstable_fails(self, capsys, unstable):
        code, rep, _ = run(capsys, "verify", unstable, "--force", "--horizon", 5)
        assert code == 1 and rep["passed"] is False
        assert rep["violation"]["round"] <= 5

    def test_seeded_output_identical(self, capsys, linear, tmp_path):
        for name in ("a", "b"):
            run(capsys, "verify", linear, "--samples", 30, "--seed", 7, "--out", tmp_path / name)
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


class TestSynthAndSimulate:
    def test_linear_synth(self, capsys, linear, tmp_path):
        code, plan, _ = run(capsys, "synth", linear, "--controller", tmp_path / "c.json", "--out", tmp_path / "p.json")
        assert code == 0
        assert plan["waypoints"][-1] == 6
        io.validate(io.read_json(tmp_path / "c.json"), io.CONTROLLER_SCHEMA)
        io.validate(plan, io.PLAN_SCHEMA)

    def test_infeasible_leg(self, capsys, linear, tmp_path):
        cfg = edit_config(linear, tmp_path, spec={"legs": [[12]]})
        code, _, err = run(capsys, "synth", cfg)
        assert code == 1
        assert err["error"] == "synthesis_error" and err["leg"] == 0

    def test_pendulum_reference_sequence(self, capsys, pendulum, tmp_path):
        code, rep, _ = run(capsys, "simulate", pendulum, "--csv", tmp_path / "t.csv")
        assert code == 0
        assert len(rep["distances"]) == 12 and max(rep["distances"]) <= 0.25
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0] == "t,x1,x2,u1" and len(lines) == 1 + 12 * 10 + 1

    def test_unstable_tube_fails(self, capsys, unstable, tmp_path):
        code, rep, _ = run(capsys, "simulate", unstable, "--out", tmp_path / "r.json")
        assert code == 1 and rep["violations"]
        io.validate(io.read_json(tmp_path / "r.json"), io.TUBE_SCHEMA)

    def test_linear_synthesised_and_feedback(self, capsys, linear):
        code, rep, _ = run(capsys, "simulate", linear)
        assert code == 0 and rep["passed"]
        code, rep, _ = run(capsys, "simulate", linear, "--feedback")
        assert code == 0 and rep["passed"]

    def test_precondition_is_usage_error(self, capsys, pendulum, tmp_path):
        cfg = edit_config(pendulum, tmp_path, sim={"x0": [0.5, 0.5]})
        code, _, err = run(capsys, "simulate", cfg)
        assert code == 2 and err["error"] == "precondition"


class TestUsage:
    def test_unknown_command(self, capsys):
        code, _, err = run(capsys, "frobnicate")
        assert code == 2 and err["error"] == "usage"

    def test_missing_config_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "params", tmp_path / "nope.json")
        assert code == 2 and err["error"] == "config_error"

    def test_schema_violation(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"system": {"f": ["x1"]}}))
        code, _, err = run(capsys, "params", bad)
        assert code == 2 and err["error"] == "config_error"

    def test_bad_expression(self, capsys, linear, tmp_path):
        cfg = edit_config(linear, tmp_path, system={"f": ["-x1 +* u1"]})
        code, _, err = run(capsys, "params", cfg)
        assert code == 2 and err["error"] == "config_error"
        assert "at byte 5" in err["message"]

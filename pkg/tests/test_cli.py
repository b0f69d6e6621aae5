import json
import threading

import numpy as np
import pytest

from moldkit.cli import main
from moldkit.dimg import respond_once, read_dimg
from moldkit.pgm import read_pgm


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def poke_dataset(tmp_path_factory):
    d = tmp_path_factory.mktemp("ds") / "poke"
    assert main(["gen", "--action", "poke", "--pairs", "12", "--seed", "7", "--out", str(d)]) == 0
    return d


@pytest.fixture(scope="module")
def scenario_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("scn") / "single_poke"
    assert main(["gen", "--scenario", "single_poke", "--seed", "3", "--out", str(d)]) == 0
    return d


@pytest.fixture(scope="module")
def model_root(tmp_path_factory, poke_dataset):
    root = tmp_path_factory.mktemp("models")
    for action in ("grasp", "knock", "poke"):
        ds_dir = root / f"ds_{action}"
        assert main(["gen", "--action", action, "--pairs", "12", "--seed", "7", "--out", str(ds_dir)]) == 0
        assert main(["fit", str(ds_dir), "--out", str(root), "--seed", "1"]) == 0
    return root


class TestGen:
    def test_dataset_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["gen", "--action", "poke", "--pairs", "4", "--seed", "9", "--out", str(out)]) == 0
        for name in ("priors.dimg", "posteriors.dimg", "manifest.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_scenario_smoke(self, scenario_dir):
        manifest = json.loads((scenario_dir / "manifest.json").read_text())
        assert manifest["kind"] == "scenario"
        assert (scenario_dir / "initial.pgm").exists()
        assert (scenario_dir / "goal.pgm").exists()

    def test_invalid_action_exit_2(self, tmp_path, capsys):
        code, _, err = run(["gen", "--action", "slap", "--out", str(tmp_path / "x")], capsys)
        assert code == 2
        assert "unknown action" in err

    def test_gen_requires_one_mode(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["gen", "--out", str(tmp_path / "x")])
        assert exc.value.code == 2


class TestFit:
    def test_fold_report_and_model(self, poke_dataset, tmp_path, capsys):
        code, out, _ = run(["fit", str(poke_dataset), "--out", str(tmp_path), "--seed", "1"], capsys)
        assert code == 0
        assert out.count("holdout error") == 4
        assert "cross-validation" in out
        assert (tmp_path / "poke" / "delta.dimg").exists()

    def test_refit_identical_bytes(self, poke_dataset, tmp_path):
        for sub in ("m1", "m2"):
            assert main(["fit", str(poke_dataset), "--out", str(tmp_path / sub), "--seed", "1"]) == 0
        for name in ("delta.dimg", "mask.dimg", "meta.json"):
            assert (tmp_path / "m1" / "poke" / name).read_bytes() == (tmp_path / "m2" / "poke" / name).read_bytes()

    def test_missing_dataset_exit_2(self, tmp_path, capsys):
        code, _, _ = run(["fit", str(tmp_path / "nope"), "--out", str(tmp_path)], capsys)
        assert code == 2


class TestEval:
    def test_identical_images(self, scenario_dir, capsys):
        img = str(scenario_dir / "initial.pgm")
        code, out, _ = run(["eval", img, img], capsys)
        assert code == 0
        payload = json.loads(out)
        assert payload == {"d_mm": 0.0, "d_unit": 0.0}

    def test_scenario_distance_positive(self, scenario_dir, capsys):
        code, out, _ = run(
            ["eval", str(scenario_dir / "initial.pgm"), str(scenario_dir / "goal.pgm")], capsys
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["d_mm"] > 0
        assert set(payload) == {"d_unit", "d_mm"}


class TestPlan:
    def test_identical_images_empty_plan(self, scenario_dir, model_root, tmp_path, capsys):
        img = str(scenario_dir / "initial.pgm")
        code, out, _ = run(
            ["plan", img, img, "--actions", str(scenario_dir / "actions.json"),
             "--models", str(model_root), "--out", str(tmp_path)],
            capsys,
        )
        assert code == 0
        payload = json.loads((tmp_path / "plan.json").read_text())
        assert payload["sequence"] == []
        assert payload["trace_mm"] == [0.0]

    def test_planted_scenario_recovered(self, scenario_dir, model_root, tmp_path, capsys):
        code, out, _ = run(
            ["plan", str(scenario_dir / "initial.pgm"), str(scenario_dir / "goal.pgm"),
             "--actions", str(scenario_dir / "actions.json"),
             "--models", str(model_root), "--out", str(tmp_path)],
            capsys,
        )
        assert code == 0
        payload = json.loads((tmp_path / "plan.json").read_text())
        assert payload["sequence"] == [{"action": "poke", "position": 7}]
        assert (tmp_path / "predicted.pgm").exists()
        read_pgm(tmp_path / "predicted.pgm")  # parses

    def test_missing_model_exit_2(self, scenario_dir, tmp_path, capsys):
        code, _, err = run(
            ["plan", str(scenario_dir / "initial.pgm"), str(scenario_dir / "goal.pgm"),
             "--actions", str(scenario_dir / "actions.json"),
             "--models", str(tmp_path / "empty"), "--predictor", "CR",
             "--exchange", str(tmp_path), "--out", str(tmp_path / "o")],
            capsys,
        )
        assert code == 2

    def test_cr_requires_exchange(self, scenario_dir, model_root, tmp_path, capsys):
        code, _, err = run(
            ["plan", str(scenario_dir / "initial.pgm"), str(scenario_dir / "goal.pgm"),
             "--actions", str(scenario_dir / "actions.json"),
             "--models", str(model_root), "--predictor", "CR", "--out", str(tmp_path)],
            capsys,
        )
        assert code == 2
        assert "--exchange" in err


class TestReplay:
    def test_replay_trace(self, scenario_dir, model_root, tmp_path, capsys):
        plan_dir = tmp_path / "plan"
        assert main(
            ["plan", str(scenario_dir / "initial.pgm"), str(scenario_dir / "goal.pgm"),
             "--actions", str(scenario_dir / "actions.json"),
             "--models", str(model_root), "--out", str(plan_dir)]
        ) == 0
        code, out, _ = run(
            ["replay", "--plan", str(plan_dir / "plan.json"), "--scenario", str(scenario_dir),
             "--seed", "5", "--out", str(tmp_path / "replay.json")],
            capsys,
        )
        assert code == 0
        assert "d_0" in out and "poke@7" in out
        result = json.loads((tmp_path / "replay.json").read_text())
        assert result["failure_index"] is None
        assert result["monotone"] is True
        assert len(result["trace_mm"]) == 2


class TestBench:
    def test_quick_bench(self, tmp_path, capsys):
        code, out, _ = run(["bench", "--quick", "--repeats", "3", "--out", str(tmp_path / "b.json")], capsys)
        assert code == 0
        payload = json.loads((tmp_path / "b.json").read_text())
        entry = payload["sizes"][0]
        assert entry["distance_ms"] > 0
        assert entry["chamfer_ms"] > 0
        assert entry["speedup"] > 1

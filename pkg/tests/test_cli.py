"""Command-line surface: flags, exit codes, output schemas."""

import json

import numpy as np
import pytest

import slfnet.cli as cli
from slfnet.errors import DivergenceError


def run(capsys, argv):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_config(tmp_path, **sections):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(sections))
    return str(path)


SMALL_GRAMMAR = {
    "action_phrases": ["turn on", "turn off", "open", "close"],
    "object_phrases": ["light", "fan", "door"],
    "location_phrases": ["kitchen", "garage"],
    "connectors": ["and"],
    "k_weights": [0.7, 0.3],
    "p_omit_location": 0.3,
    "p_omit_object": 0.1,
    "seed": 11,
}


class TestGenData:
    def test_deterministic_bytes_and_summary(self, tmp_path, capsys):
        cfg = write_config(tmp_path, grammar=SMALL_GRAMMAR)
        out1, out2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        code, stdout, _ = run(capsys, ["gen-data", "--config", cfg,
                                       "--out", str(out1), "--n", "50"])
        assert code == 0
        summary = json.loads(stdout)
        assert summary["n"] == 50
        assert sum(summary["k_histogram"].values()) == 50
        assert summary["vocab_size"] > 0
        code, _, _ = run(capsys, ["gen-data", "--config", cfg,
                                  "--out", str(out2), "--n", "50"])
        assert code == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_n_zero_is_usage_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, grammar=SMALL_GRAMMAR)
        code, _, err = run(capsys, ["gen-data", "--config", cfg,
                                    "--out", str(tmp_path / "x.jsonl"),
                                    "--n", "0"])
        assert code == 2
        assert "--n" in err

    def test_unwritable_path(self, tmp_path, capsys):
        cfg = write_config(tmp_path, grammar=SMALL_GRAMMAR)
        code, _, err = run(capsys, ["gen-data", "--config", cfg,
                                    "--out", "/nonexistent/dir/x.jsonl",
                                    "--n", "3"])
        assert code == 2
        assert "error" in err

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, grammar=dict(SMALL_GRAMMAR, typo=1))
        code, _, err = run(capsys, ["gen-data", "--config", cfg,
                                    "--out", str(tmp_path / "x.jsonl"),
                                    "--n", "3"])
        assert code == 2
        assert "typo" in err


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """One small end-to-end training run shared by the eval/predict tests."""
    tmp_path = tmp_path_factory.mktemp("cli_train")
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps({
        "grammar": SMALL_GRAMMAR,
        "train": {"d": 12, "epochs": 12, "seed": 5,
                  "learning_rate": 0.02, "num_layers": 1, "num_heads": 1,
                  "k_max": 2}}))
    data_path = tmp_path / "data.jsonl"
    out_dir = tmp_path / "run"
    code = cli.main(["gen-data", "--config", str(config_path),
                     "--out", str(data_path), "--n", "24"])
    assert code == 0
    code = cli.main(["train", "--config", str(config_path),
                     "--data", str(data_path), "--out", str(out_dir)])
    assert code == 0
    return {"config": str(config_path), "data": str(data_path),
            "checkpoint": str(out_dir / "checkpoint.json"),
            "log": str(out_dir / "train_log.jsonl"), "dir": str(out_dir)}


class TestTrain:
    def test_outputs_exist_with_schema(self, trained, capsys):
        log_lines = open(trained["log"]).read().splitlines()
        assert len(log_lines) == 12
        for line in log_lines:
            assert set(json.loads(line)) == {"epoch", "loss", "dev_accuracy",
                                             "dev_f"}
        doc = json.load(open(trained["checkpoint"]))
        assert doc["format_version"] == 1
        assert doc["config"]["seed"] == 5

    def test_missing_data_file(self, tmp_path, capsys):
        code, _, err = run(capsys, ["train", "--data",
                                    str(tmp_path / "none.jsonl"),
                                    "--out", str(tmp_path / "o")])
        assert code == 2

    def test_rerun_reproduces_dev_metrics(self, trained, tmp_path_factory,
                                          capsys):
        out2 = tmp_path_factory.mktemp("rerun")
        code, stdout, _ = run(capsys, ["train", "--config",
                                       trained["config"], "--data",
                                       trained["data"], "--out", str(out2)])
        assert code == 0
        first = open(trained["log"]).read()
        second = open(out2 / "train_log.jsonl").read()
        assert first == second
        ck1 = open(trained["checkpoint"], "rb").read()
        ck2 = open(out2 / "checkpoint.json", "rb").read()
        assert ck1 == ck2

    def test_divergence_maps_to_exit_3(self, tmp_path, capsys, monkeypatch):
        cfg = write_config(tmp_path, grammar=SMALL_GRAMMAR)
        data = tmp_path / "d.jsonl"
        cli.main(["gen-data", "--config", cfg, "--out", str(data),
                  "--n", "10"])
        capsys.readouterr()

        def explode(*args, **kwargs):
            raise DivergenceError("epoch 1: loss became non-finite")

        monkeypatch.setattr(cli, "train", explode)
        code, _, err = run(capsys, ["train", "--config", cfg, "--data",
                                    str(data), "--out",
                                    str(tmp_path / "o")])
        assert code == 3
        assert "non-finite" in err


class TestEval:
    def test_report_schema(self, trained, capsys):
        code, stdout, _ = run(capsys, ["eval", "--checkpoint",
                                       trained["checkpoint"], "--data",
                                       trained["data"], "--split", "dev"])
        assert code == 0
        report = json.loads(stdout)
        assert set(report) == {"accuracy", "precision", "recall", "f_score",
                               "C", "T", "L_correct", "P_pred", "R_gold"}

    def test_split_sizes_follow_6_2_2(self, trained, tmp_path, capsys):
        # 10-line dataset: the test split holds exactly 2 examples.
        data = tmp_path / "ten.jsonl"
        data.write_text("".join(
            open(trained["data"]).read().splitlines(True)[:10]))
        code, stdout, _ = run(capsys, ["eval", "--checkpoint",
                                       trained["checkpoint"], "--data",
                                       str(data), "--split", "test"])
        assert code == 0
        assert json.loads(stdout)["T"] == 2

    def test_all_split(self, trained, capsys):
        code, stdout, _ = run(capsys, ["eval", "--checkpoint",
                                       trained["checkpoint"], "--data",
                                       trained["data"], "--split", "all"])
        assert code == 0
        assert json.loads(stdout)["T"] == 24

    def test_bad_checkpoint_exits_2(self, trained, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        doc = json.load(open(trained["checkpoint"]))
        doc["params"]["action.w_out"]["shape"] = [3, 3]
        bad.write_text(json.dumps(doc))
        code, _, err = run(capsys, ["eval", "--checkpoint", str(bad),
                                    "--data", trained["data"]])
        assert code == 2
        assert "action.w_out" in err


class TestPredict:
    def test_prediction_prints_rendered_groups(self, trained, capsys):
        code, stdout, _ = run(capsys, [
            "predict", "--checkpoint", trained["checkpoint"],
            "--text", "turn on the light in the kitchen",
            "--heads", "0,0,3,0,6,6,0"])
        assert code == 0
        for line in stdout.splitlines():
            assert line.startswith("ALO(action_name_")

    def test_head_count_mismatch_exits_2(self, trained, capsys):
        code, _, err = run(capsys, [
            "predict", "--checkpoint", trained["checkpoint"],
            "--text", "open the door", "--heads", "0,0"])
        assert code == 2
        assert "3 tokens" in err

    def test_malformed_heads_exits_2(self, trained, capsys):
        code, _, err = run(capsys, [
            "predict", "--checkpoint", trained["checkpoint"],
            "--text", "open the door", "--heads", "0,zero,0"])
        assert code == 2

    def test_k0_prints_nothing(self, trained, capsys):
        from slfnet.training import load_checkpoint, save_checkpoint
        import os
        model = load_checkpoint(trained["checkpoint"])
        # uniform class scores; the tie-break lands on k = 0
        model.count.w_cls.data = np.zeros_like(model.count.w_cls.data)
        forced = os.path.join(trained["dir"], "k0.json")
        save_checkpoint(model, forced)
        code, stdout, _ = run(capsys, [
            "predict", "--checkpoint", forced,
            "--text", "open the door", "--heads", "0,2,0"])
        assert code == 0
        assert stdout == ""

    def test_trace_output_parses(self, trained, capsys):
        code, stdout, _ = run(capsys, [
            "predict", "--checkpoint", trained["checkpoint"],
            "--text", "open the door", "--heads", "0,2,0", "--trace"])
        assert code == 0
        trace = json.loads(stdout.splitlines()[-1])
        assert "count_probs" in trace and "action_scores" in trace


class TestGradCheckCommand:
    def test_default_run_passes(self, capsys):
        code, stdout, _ = run(capsys, ["grad-check"])
        assert code == 0
        lines = [l for l in stdout.splitlines() if l.startswith("PASS")]
        summary = json.loads(stdout.splitlines()[-1])
        assert summary["passed"] is True
        assert summary["max_rel_error"] <= 1e-4
        # every parameter group reported exactly once
        names = [l.split()[1] for l in stdout.splitlines()
                 if l.startswith(("PASS", "FAIL"))]
        assert len(names) == len(set(names)) == summary["parameters"]

    def test_corrupted_gradient_exits_1_naming_parameter(self, capsys):
        code, stdout, _ = run(capsys, ["grad-check", "--corrupt-param",
                                       "action.w_out"])
        assert code == 1
        summary = json.loads(stdout.splitlines()[-1])
        assert summary["worst"] == ["action.w_out"]

    def test_unknown_corrupt_param_exits_2(self, capsys):
        code, _, err = run(capsys, ["grad-check", "--corrupt-param",
                                    "not.a.param"])
        assert code == 2


class TestUsage:
    def test_missing_required_flag_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["gen-data", "--n", "5"])
        assert exc.value.code == 2

    def test_unknown_subcommand_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["frobnicate"])
        assert exc.value.code == 2

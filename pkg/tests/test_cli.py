import io
import json

import pandas as pd
import pytest

import run
from src.cli import main

SUBCOMMANDS = ("train", "predict", "explain", "importance", "ale", "tree", "synth", "bench", "chat")


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A synthetic CSV and a small model trained from it through the CLI."""
    root = tmp_path_factory.mktemp("cli")
    data, model = root / "friedman.csv", root / "model.json"
    assert main(["synth", "--family", "Friedman", "--n", "200", "--seed", "4", "--out", str(data)]) == 0
    assert main(["train", "--data", str(data), "--target", "y", "--out", str(model), "--max-leaves", "2", "--cv-folds", "3"]) == 0
    return root, data, model


class TestUsage:
    @pytest.mark.parametrize("command", SUBCOMMANDS)
    def test_help(self, command, capsys):
        assert main([command, "--help"]) == 0
        assert "usage:" in capsys.readouterr().out

    def test_no_arguments(self, capsys):
        assert main([]) == 1

    def test_missing_required_flag(self, capsys):
        assert main(["train", "--target", "y", "--out", "m.json"]) == 1
        assert "--data" in capsys.readouterr().err

    def test_invalid_setting(self, workspace, tmp_path, capsys):
        _, data, _ = workspace
        code = main(["train", "--data", str(data), "--target", "y", "--out", str(tmp_path / "m.json"), "--max-leaves", "0"])
        assert code == 1
        assert "❌" in capsys.readouterr().err


class TestRuntimeErrors:
    def test_missing_model_file(self, workspace, tmp_path, capsys):
        _, data, _ = workspace
        absent = tmp_path / "absent.json"
        assert main(["predict", "--model", str(absent), "--data", str(data)]) == 2
        assert str(absent) in capsys.readouterr().err

    def test_missing_target_column(self, workspace, tmp_path, capsys):
        _, data, _ = workspace
        assert main(["train", "--data", str(data), "--target", "nope", "--out", str(tmp_path / "m.json")]) == 2

    def test_row_out_of_range(self, workspace, capsys):
        _, data, model = workspace
        assert main(["explain", "--model", str(model), "--data", str(data), "--row", "5000"]) == 2


class TestPipeline:
    def test_synth_writes_csv(self, workspace):
        _, data, _ = workspace
        frame = pd.read_csv(data)
        assert list(frame.columns) == [f"x{j}" for j in range(1, 11)] + ["y"]
        assert len(frame) == 200

    def test_synth_to_stdout(self, capsys):
        assert main(["synth", "--family", "Max", "--n", "5"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "x1,x2,x3,x4,y"
        assert len(lines) == 6

    def test_predict(self, workspace, capsys):
        _, data, model = workspace
        assert main(["predict", "--model", str(model), "--data", str(data)]) == 0
        frame = pd.read_csv(io.StringIO(capsys.readouterr().out))
        assert list(frame.columns) == ["row", "prediction", "leaf"]
        assert len(frame) == 200

    def test_predict_with_ood(self, workspace, tmp_path, capsys):
        _, data, model = workspace
        out = tmp_path / "pred.csv"
        assert main(["predict", "--model", str(model), "--data", str(data), "--out", str(out), "--check-ood"]) == 0
        frame = pd.read_csv(out)
        assert {"ood_distance", "ood_flag", "breaches"} <= set(frame.columns)
        assert "✅" in capsys.readouterr().err

    def test_predictions_are_reproducible(self, workspace, tmp_path):
        root, data, _ = workspace
        outputs = []
        for k in range(2):
            model, out = tmp_path / f"m{k}.json", tmp_path / f"p{k}.csv"
            assert main(["train", "--data", str(data), "--target", "y", "--out", str(model), "--max-leaves", "2", "--cv-folds", "3"]) == 0
            assert main(["predict", "--model", str(model), "--data", str(data), "--out", str(out)]) == 0
            outputs.append((model.read_bytes(), out.read_bytes()))
        assert outputs[0] == outputs[1]

    def test_explain_report_and_svg(self, workspace, tmp_path):
        _, data, model = workspace
        report, svg = tmp_path / "row.txt", tmp_path / "row.svg"
        assert main(["explain", "--model", str(model), "--data", str(data), "--row", "3", "--report", str(report), "--svg", str(svg)]) == 0
        assert report.read_text(encoding="utf-8").startswith("Local explanation for row 3")
        assert "<svg" in svg.read_text(encoding="utf-8")

    def test_importance_is_reproducible(self, workspace, tmp_path):
        _, data, model = workspace
        files = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for out in files:
            assert main(["importance", "--model", str(model), "--data", str(data), "--replications", "0", "--out", str(out)]) == 0
        assert files[0].read_bytes() == files[1].read_bytes()
        assert len(pd.read_csv(files[0])) == 10

    def test_ale_by_name_and_index(self, workspace, capsys):
        _, data, model = workspace
        assert main(["ale", "--model", str(model), "--data", str(data), "--feature", "x4", "--bins", "5"]) == 0
        by_name = capsys.readouterr().out
        assert by_name.splitlines()[0] == "edge,effect"
        assert main(["ale", "--model", str(model), "--data", str(data), "--feature", "3", "--bins", "5"]) == 0
        assert capsys.readouterr().out == by_name

    def test_tree_text_and_svg(self, workspace, tmp_path, capsys):
        _, _, model = workspace
        assert main(["tree", "--model", str(model)]) == 0
        assert capsys.readouterr().out.split(" ")[1] == "0"
        svg = tmp_path / "tree.svg"
        assert main(["tree", "--model", str(model), "--format", "svg", "--out", str(svg)]) == 0
        assert svg.read_text(encoding="utf-8").startswith("<?xml")


def test_bench(tmp_path, capsys):
    spec = tmp_path / "tiny.json"
    spec.write_text(
        json.dumps(
            {
                "datasets": [{"name": "Max", "synthetic": {"family": "Max", "n": 90, "noise_sd": 1.0}}],
                "models": ["CartMode", "LassoMode"],
                "seeds": [3],
                "folds": 3,
                "train": {"max_leaves": 2, "cv_folds": 3, "n_lambdas": 20},
            }
        )
    )
    assert main(["bench", "--spec", str(spec)]) == 0
    captured = capsys.readouterr()
    assert captured.out.splitlines()[0].split() == ["Dataset", "CartMode", "LassoMode"]
    results = tmp_path / "tiny_results.csv"
    assert results.read_text().startswith("dataset,CartMode,LassoMode")
    assert str(results) in captured.err


def test_chat_dry_run(workspace, tmp_path, monkeypatch, capsys):
    _, data, model = workspace
    monkeypatch.setattr("sys.stdin", io.StringIO("What would change this?\n\n"))
    transcript = tmp_path / "chat.txt"
    code = main(["chat", "--model", str(model), "--data", str(data), "--row", "0", "--dry-run", "--transcript", str(transcript)])
    assert code == 0
    out = capsys.readouterr().out
    assert "--- system ---" in out
    assert "[dry-run reply 1]" in out
    text = transcript.read_text(encoding="utf-8")
    assert "What would change this?" in text


def test_launcher_exits_1_on_missing_dependency(monkeypatch, capsys):
    monkeypatch.setattr(run, "REQUIRED_PACKAGES", {"not-a-package": "trust_absent_module"})
    monkeypatch.setattr("sys.argv", ["run.py", "synth"])
    with pytest.raises(SystemExit) as exc:
        run.main()
    assert exc.value.code == 1
    assert "not-a-package" in capsys.readouterr().err

import json

import pytest

from app.cli import main
from app.core.exceptions import EXCEPTION_EXIT_CODE_MAP, ConfigValidationException, DatasetParseException

TRAIN_FLAGS = ["--epochs", "2", "--batch-size", "8", "--hidden-dim", "8", "--feature-dim", "4", "--log-level", "warning"]


@pytest.fixture
def bench_dir(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "name": "cli", "C": 4, "d": 4, "n_per_class_source": 12, "n_per_class_target": 8,
        "source_sigma": 0.5, "target_sigma": 0.8, "seed": 0,
    }))
    out = tmp_path / "bench"
    assert main(["generate", "--spec", str(spec), "--seed", "7", "--out", str(out), "--log-level", "warning"]) == 0
    return out


def test_generate_is_deterministic(bench_dir, tmp_path):
    again = tmp_path / "again"
    assert main(["generate", "--spec", str(tmp_path / "spec.json"), "--seed", "7", "--out", str(again)]) == 0
    for name in ("source.csv", "target.csv", "source_test.csv"):
        assert (bench_dir / name).read_bytes() == (again / name).read_bytes()


def test_generate_preset(tmp_path):
    assert main(["generate", "--preset", "null-16", "--seed", "1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "target.csv").exists()


def test_adapt_then_evaluate_reproduces_final_metrics(bench_dir, tmp_path):
    report_path = tmp_path / "adapt.json"
    ckpt = tmp_path / "model.ckpt"
    code = main([
        "adapt", "--source", str(bench_dir / "source.csv"), "--target", str(bench_dir / "target.csv"),
        "--policy", "soft", "--k", "3", "--lambda", "0.5", "--seed", "1",
        "--out-checkpoint", str(ckpt), "--report", str(report_path), *TRAIN_FLAGS,
    ])
    assert code == 0

    eval_path = tmp_path / "eval.json"
    assert main([
        "evaluate", "--checkpoint", str(ckpt), "--data", str(bench_dir / "target.csv"), "--report", str(eval_path),
    ]) == 0
    adapted = json.loads(report_path.read_text())["report"]["final_metrics"]
    evaluated = json.loads(eval_path.read_text())["report"]
    assert adapted == evaluated


def test_reruns_give_identical_report_and_checkpoint_bytes(bench_dir, tmp_path):
    outputs = []
    for run in ("a", "b"):
        report, ckpt = tmp_path / f"{run}.json", tmp_path / f"{run}.ckpt"
        assert main([
            "train-source", "--source", str(bench_dir / "source.csv"), "--target", str(bench_dir / "target.csv"),
            "--seed", "3", "--report", str(report), "--out-checkpoint", str(ckpt), *TRAIN_FLAGS,
        ]) == 0
        outputs.append((report.read_bytes(), ckpt.read_bytes()))
    assert outputs[0] == outputs[1]
    assert b"wall_clock_seconds" not in outputs[0][0]


def test_chain_and_dump_features(bench_dir, tmp_path):
    ckpt_dir = tmp_path / "stages"
    final = tmp_path / "final.ckpt"
    assert main([
        "chain", "--source", str(bench_dir / "source.csv"),
        "--targets", str(bench_dir / "source_test.csv"), str(bench_dir / "target.csv"),
        "--seed", "2", "--checkpoint-dir", str(ckpt_dir), "--out-checkpoint", str(final), *TRAIN_FLAGS,
    ]) == 0
    assert (ckpt_dir / "stage_00.ckpt").exists() and (ckpt_dir / "stage_01.ckpt").exists()

    features = tmp_path / "features.csv"
    assert main(["dump-features", "--checkpoint", str(final), "--data", str(bench_dir / "target.csv"), "--out", str(features)]) == 0
    header = features.read_text().splitlines()[0]
    assert header == "f0,f1,f2,f3,label"


def test_grid_command(bench_dir, tmp_path, capsys):
    report = tmp_path / "grid.json"
    assert main([
        "grid", "--source", str(bench_dir / "source.csv"), "--target", str(bench_dir / "target.csv"),
        "--seeds", "0", "--epochs", "1", "--batch-size", "8", "--hidden-dim", "8", "--feature-dim", "4",
        "--report", str(report),
    ]) == 0
    rows = json.loads(report.read_text())["report"]["rows"]
    assert len(rows) == 9
    assert "SM k=3" in capsys.readouterr().out


def test_gradcheck_exit_code(tmp_path):
    assert main(["gradcheck", "--instances", "2", "--report", str(tmp_path / "g.json")]) == 0


def test_seed_is_required_for_training(bench_dir):
    assert main(["adapt", "--source", str(bench_dir / "source.csv"), "--target", str(bench_dir / "target.csv")]) == 2


def test_unknown_subcommand_and_flag_are_usage_errors():
    assert main(["frobnicate"]) == 2
    assert main(["gradcheck", "--no-such-flag"]) == 2


def test_config_validation_error_names_field(bench_dir, capsys):
    code = main([
        "adapt", "--source", str(bench_dir / "source.csv"), "--target", str(bench_dir / "target.csv"),
        "--seed", "1", "--batch-size", "1",
    ])
    assert code == EXCEPTION_EXIT_CODE_MAP[ConfigValidationException]
    assert "batch_size" in capsys.readouterr().err


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("f0,label\nx,0\n")
    code = main(["adapt", "--source", str(bad), "--target", str(bad), "--seed", "1"])
    assert code == EXCEPTION_EXIT_CODE_MAP[DatasetParseException]
    assert "line 2" in capsys.readouterr().err

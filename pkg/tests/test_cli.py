"""Tests de la ligne de commande ``hlps``: codes de sortie et fichiers produits."""

import json

import pytest

from hlps.cli import EXIT_OK, EXIT_RUNTIME, EXIT_TOLERANCE, EXIT_USAGE, main, parse_seeds
from hlps.errors import ConfigError
from hlps.trainer import UpdateCounters, read_metrics


@pytest.fixture
def trained_run(tiny_toml, tmp_path):
    run = tmp_path / "run"
    assert main(["train", "--config", str(tiny_toml), "--out", str(run)]) == EXIT_OK
    return run


def test_layouts(capsys):
    assert main(["layouts"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "u_maze" in out and "four_rooms" in out


def test_parse_seeds():
    assert parse_seeds("0..3") == [0, 1, 2, 3]
    assert parse_seeds("0,2,5") == [0, 2, 5]
    assert parse_seeds("7") == [7]
    for bad in ("3..1", "a,b", "0..x"):
        with pytest.raises(ConfigError):
            parse_seeds(bad)


def test_train_writes_run_directory(trained_run, capsys):
    manifest = json.loads((trained_run / "manifest.json").read_text())
    assert manifest["seed"] == 0
    assert manifest["config"]["train"]["total_steps"] == 60
    assert manifest["transfer_source"] is None
    assert [row.step for row in read_metrics(trained_run / "metrics.csv")] == [30, 60]
    assert (trained_run / "final.ckpt").exists()
    assert json.loads((trained_run / "summary.json").read_text())["steps"] == 60


def test_configuration_errors_exit_with_1(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[train]\nk = 10\nbogus = 3\n")
    assert main(["train", "--config", str(bad)]) == EXIT_USAGE
    assert "line 3" in capsys.readouterr().err
    assert main(["train", "--override", "train.k"]) == EXIT_USAGE
    assert main(["train", "--seeds", "5..2"]) == EXIT_USAGE


def test_usage_errors_exit_with_1():
    with pytest.raises(SystemExit) as excinfo:
        main(["conquer"])
    assert excinfo.value.code == EXIT_USAGE


def test_eval_checkpoint_and_scripted(trained_run, capsys):
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(trained_run / "final.ckpt"), "--episodes", "1"]) == EXIT_OK
    rate = float(capsys.readouterr().out.strip())
    assert rate in (0.0, 1.0)
    args = ["eval", "--scripted", "--episodes", "3", "--override", "env.layout=open", "--override", "env.horizon=100"]
    assert main(args) == EXIT_OK
    assert capsys.readouterr().out.strip() == "1.0"


def test_missing_checkpoint_is_a_runtime_error(tmp_path):
    assert main(["eval", "--checkpoint", str(tmp_path / "missing.ckpt")]) == EXIT_RUNTIME


def test_transfer(trained_run, tiny_toml, tmp_path):
    source = str(trained_run / "final.ckpt")
    out = tmp_path / "target"
    assert main(["transfer", "--config", str(tiny_toml), "--checkpoint", source, "--seed", "1", "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "manifest.json").read_text())["transfer_source"] == source
    mismatch = ["transfer", "--config", str(tiny_toml), "--override", "train.encoder_hidden=16",
                "--checkpoint", source, "--out", str(tmp_path / "bad")]
    assert main(mismatch) == EXIT_RUNTIME
    assert (tmp_path / "bad" / "FAILED").exists()


def test_dump_writes_jsonl_and_svg(trained_run, tmp_path):
    out = tmp_path / "latents.jsonl"
    assert main(["dump", "--checkpoint", str(trained_run / "final.ckpt"), "--episodes", "2", "--out", str(out)]) == EXIT_OK
    assert out.read_text().count("\n") > 0
    assert out.with_suffix(".svg").exists()


def test_multi_seed_training_aggregates(tiny_toml, tmp_path, capsys):
    out = tmp_path / "many"
    assert main(["train", "--config", str(tiny_toml), "--seeds", "0,1", "--out", str(out)]) == EXIT_OK
    summaries = [json.loads((out / f"seed_{seed}" / "summary.json").read_text()) for seed in (0, 1)]
    total = UpdateCounters(*summaries[0]["updates"]) + UpdateCounters(*summaries[1]["updates"])
    assert total.low == 100
    assert f"updates over 2 finished seeds: {total}" in capsys.readouterr().out
    lines = (out / "aggregate.csv").read_text().splitlines()
    assert lines[0] == "step,n,mean,ci_low,ci_high"
    assert [line.split(",")[:2] for line in lines[1:]] == [["30", "2"], ["60", "2"]]


def test_selftest_exit_codes(capsys):
    assert main(["selftest", "--cases", "10", "--grad-cases", "2"]) == EXIT_OK
    assert "all suites passed" in capsys.readouterr().out
    assert main(["selftest", "--cases", "10", "--grad-cases", "1", "--sigma0-variant", "printed"]) == EXIT_TOLERANCE


def test_single_run_prints_update_counters(tiny_toml, tmp_path, capsys):
    run = tmp_path / "single"
    assert main(["train", "--config", str(tiny_toml), "--out", str(run)]) == EXIT_OK
    updates = UpdateCounters(*json.loads((run / "summary.json").read_text())["updates"])
    assert str(updates) in capsys.readouterr().out.splitlines()

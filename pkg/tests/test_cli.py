"""CLI contracts at small scale: subcommands, exit codes, determinism."""

from __future__ import annotations

import hashlib
import json

import pytest
import yaml

from vtlab.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small end-to-end CLI workspace shared by the tests in this module."""
    root = tmp_path_factory.mktemp("cliws")
    cfg = root / "config.yaml"
    cfg.write_text(yaml.safe_dump({
        "repr": {"steps": 5, "batch_size": 16, "checkpoint_every": 0},
        "policy": {"epochs": 1, "unet_channels": [16, 32, 64]},
        "eval": {"max_ticks": 40},
    }))
    code = main(["--config", str(cfg), "--seed", "1", "gen-data", "--task", "lift-place",
                 "--episodes", "4", "--out", str(root / "raw")])
    assert code == EXIT_OK
    code = main(["--config", str(cfg), "sync", "--data", str(root / "raw"),
                 "--out", str(root / "aligned")])
    assert code == EXIT_OK
    code = main(["--config", str(cfg), "--seed", "1", "pretrain",
                 "--data", str(root / "aligned"), "--out", str(root / "repr")])
    assert code == EXIT_OK
    code = main(["--config", str(cfg), "--seed", "1", "train",
                 "--data", str(root / "aligned"), "--repr", str(root / "repr" / "repr_final.ckpt"),
                 "--variant", "vision-only", "--out", str(root / "policy")])
    assert code == EXIT_OK
    return root, cfg


def test_gen_data_writes_episodes_and_manifest(workspace):
    root, _ = workspace
    manifest = json.loads((root / "raw" / "manifest.json").read_text())
    assert len(manifest["episodes"]) == 4
    for entry in manifest["episodes"]:
        assert (root / "raw" / entry["file"]).exists()
    assert (root / "raw" / "resolved_config.yaml").exists()


def test_sync_writes_aligned_episodes(workspace):
    root, _ = workspace
    manifest = json.loads((root / "aligned" / "manifest.json").read_text())
    assert len(manifest["episodes"]) == 4
    assert all(e["ticks"] > 0 for e in manifest["episodes"])


def test_stats_reports_counts(workspace, capsys):
    root, cfg = workspace
    code = main(["stats", "--data", str(root / "raw"), "--out", str(root / "stats.txt")])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "lift-place" in out
    kv = (root / "stats.txt").read_text()
    assert "lift_place.raw_count=4" in kv


def test_pretrain_deterministic_checkpoints(workspace, tmp_path):
    root, cfg = workspace
    for name in ("p1", "p2"):
        code = main(["--config", str(cfg), "--seed", "7", "pretrain",
                     "--data", str(root / "aligned"), "--out", str(tmp_path / name)])
        assert code == EXIT_OK
    digest = [hashlib.sha256((tmp_path / n / "repr_final.ckpt").read_bytes()).hexdigest()
              for n in ("p1", "p2")]
    assert digest[0] == digest[1]


def test_eval_writes_csv_with_one_row_per_trial(workspace):
    root, cfg = workspace
    csv_path = root / "eval.csv"
    code = main(["--config", str(cfg), "--seed", "0", "eval",
                 "--policy", str(root / "policy" / "policy_vision-only.ckpt"),
                 "--task", "lift-place", "--variant", "vision-only",
                 "--trials", "3", "--out", str(csv_path)])
    assert code == EXIT_OK
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "task,variant,fraction_or_epoch,seed,stage_1,stage_2,overall,ticks"
    assert len(lines) == 1 + 3


def test_rollout_writes_trace(workspace):
    root, cfg = workspace
    trace_path = root / "trace.vtmn"
    code = main(["--config", str(cfg), "--seed", "2", "rollout",
                 "--policy", str(root / "policy" / "policy_vision-only.ckpt"),
                 "--task", "lift-place", "--out", str(trace_path)])
    assert code == EXIT_OK
    from vtlab.deploy import read_trace

    trace = read_trace(trace_path)
    assert len(trace) > 0


def test_plot_emits_png(workspace):
    root, cfg = workspace
    code = main(["plot", "--csv", str(root / "eval.csv"), "--experiment", "smoke",
                 "--out", str(root / "plots")])
    assert code == EXIT_OK
    assert (root / "plots" / "smoke_lift-place.png").exists()


def test_usage_error_exit_code():
    assert main(["gen-data", "--task", "fly-to-moon", "--episodes", "1",
                 "--out", "/tmp/x"]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE


def test_data_error_exit_code(tmp_path):
    assert main(["stats", "--data", str(tmp_path)]) == EXIT_DATA


def test_eval_variant_mismatch_is_usage_error(workspace):
    root, cfg = workspace
    code = main(["--config", str(cfg), "eval",
                 "--policy", str(root / "policy" / "policy_vision-only.ckpt"),
                 "--task", "lift-place", "--variant", "visuotactile-pretrained",
                 "--trials", "1"])
    assert code == EXIT_USAGE

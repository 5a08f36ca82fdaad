"""Configuration loading, validation, and echoing."""

from __future__ import annotations

import yaml

import pytest

from vtlab.config import RunConfig, load_config, write_resolved_config
from vtlab.errors import UsageError


def test_defaults_match_stated_values():
    cfg = RunConfig()
    assert cfg.simworld.vision_hz == 60.0
    assert cfg.simworld.tactile_hz == 30.0
    assert cfg.simworld.control_hz == 10.0
    assert cfg.simworld.tracking_failure_prob == 0.2
    assert cfg.simworld.tactile_offset_range == (0.0, 2.0)
    assert cfg.simworld.expert_noise_sigma == 0.002
    assert cfg.repr.mask_ratio == (0.5, 0.75)
    assert cfg.repr.learning_rate == 1e-4
    assert cfg.repr.batch_size == 256
    assert (cfg.repr.adam_beta1, cfg.repr.adam_beta2) == (0.95, 0.999)
    assert cfg.policy.action_horizon == 16
    assert cfg.policy.train_diffusion_steps == 50
    assert cfg.policy.inference_steps == 16
    assert cfg.policy.image_obs_horizon == 2
    assert cfg.policy.learning_rate == 3e-4
    assert cfg.policy.encoder_learning_rate == 3e-5
    assert cfg.policy.batch_size == 64
    assert cfg.policy.epochs == 60
    assert cfg.deploy.inference_latency == 0.25
    assert cfg.deploy.perception_latency == 0.05
    assert cfg.deploy.control_period == 0.1
    assert cfg.eval.trials == 20
    assert cfg.eval.data_fractions == (0.25, 0.5, 1.0)
    assert cfg.eval.epoch_checkpoints == (10, 20, 40, 60)
    assert cfg.eval.angle_tolerance_deg == 10.0


def test_yaml_overrides(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump({
        "simworld": {"tracking_failure_prob": 0.1, "tactile_offset_range": [0.0, 1.0]},
        "policy": {"epochs": 3},
    }))
    cfg = load_config(path)
    assert cfg.simworld.tracking_failure_prob == 0.1
    assert cfg.simworld.tactile_offset_range == (0.0, 1.0)
    assert cfg.policy.epochs == 3
    assert cfg.policy.batch_size == 64  # untouched default


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump({"simworld": {"frame_rate": 30}}))
    with pytest.raises(UsageError, match="simworld.frame_rate"):
        load_config(path)


def test_unknown_section_rejected(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump({"swimworld": {}}))
    with pytest.raises(UsageError, match="swimworld"):
        load_config(path)


def test_resolved_config_echo(tmp_path):
    cfg = load_config(None, overrides={"policy": {"epochs": 5}})
    out = write_resolved_config(cfg, tmp_path / "run")
    doc = yaml.safe_load(out.read_text())
    assert doc["policy"]["epochs"] == 5
    assert doc["simworld"]["vision_hz"] == 60.0
    assert doc["repr"]["mask_ratio"] == [0.5, 0.75]

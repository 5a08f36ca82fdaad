"""Run configuration: defaults, YAML overrides, and config echoing.

The configuration is a nested key/value document with one section per
pipeline stage. Unknown keys are rejected rather than ignored, and every
run writes the fully resolved configuration into its output directory so
results stay reproducible.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .errors import UsageError


@dataclass
class SimWorldConfig:
    vision_hz: float = 60.0
    tactile_hz: float = 30.0
    proprio_hz: float = 60.0
    control_hz: float = 10.0
    vision_res: int = 64
    tactile_res: int = 32
    # constant clock offset of the tactile/sync-camera clock, drawn per episode
    tactile_offset_range: tuple[float, float] = (0.0, 2.0)
    tracking_failure_prob: float = 0.2
    expert_noise_sigma: float = 0.002
    max_expert_steps: int = 600
    workspace_extent: float = 0.64
    calibration_markers: int = 6
    marker_period: float = 0.4


@dataclass
class SyncConfig:
    policy_hz: float = 10.0


@dataclass
class ReprConfig:
    embed_dim: int = 128
    patch_size: int = 8
    mask_ratio: tuple[float, float] = (0.5, 0.75)
    learning_rate: float = 1e-4
    adam_beta1: float = 0.95
    adam_beta2: float = 0.999
    weight_decay: float = 0.01
    batch_size: int = 256
    steps: int = 2000
    temperature_init: float = 0.07
    temperature_min: float = 0.01
    temperature_max: float = 100.0
    checkpoint_every: int = 500
    # optional checkpoint to initialize the frozen vision trunk from
    vision_weights: str = ""


@dataclass
class PolicyConfig:
    action_horizon: int = 16
    train_diffusion_steps: int = 50
    inference_steps: int = 16
    image_obs_horizon: int = 2
    proprio_obs_horizon: int = 2
    learning_rate: float = 3e-4
    encoder_learning_rate: float = 3e-5
    adam_beta1: float = 0.95
    adam_beta2: float = 0.999
    weight_decay: float = 0.01
    batch_size: int = 64
    epochs: int = 60
    freeze_vision_encoder: bool = False
    freeze_tactile_encoder: bool = False
    unet_channels: tuple[int, ...] = (32, 64, 128)
    schedule_offset: float = 0.008
    ema_decay: float = 0.999


@dataclass
class DeployConfig:
    inference_latency: float = 0.25
    perception_latency: float = 0.05
    control_period: float = 0.1
    replan_interval: int = 10
    max_ticks: int = 600


@dataclass
class EvalConfig:
    trials: int = 20
    data_fractions: tuple[float, ...] = (0.25, 0.5, 1.0)
    epoch_checkpoints: tuple[int, ...] = (10, 20, 40, 60)
    position_tolerance: float = 0.02
    angle_tolerance_deg: float = 10.0
    # evaluation rollouts run latency-free by default; the deploy section
    # holds the deployment-style latencies exercised by `vtlab rollout`
    inference_latency: float = 0.0
    perception_latency: float = 0.0
    max_ticks: int = 150


@dataclass
class RunConfig:
    simworld: SimWorldConfig = field(default_factory=SimWorldConfig)
    sync: SyncConfig = field(default_factory=SyncConfig)
    repr: ReprConfig = field(default_factory=ReprConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    deploy: DeployConfig = field(default_factory=DeployConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)


def _apply_overrides(obj, overrides: dict, path: str) -> None:
    known = {f.name: f for f in fields(obj)}
    for key, value in overrides.items():
        if key not in known:
            raise UsageError(f"unknown config key '{path}{key}'")
        current = getattr(obj, key)
        if dataclasses.is_dataclass(current):
            if not isinstance(value, dict):
                raise UsageError(f"config section '{path}{key}' must be a mapping")
            _apply_overrides(current, value, f"{path}{key}.")
        else:
            if isinstance(current, tuple):
                if not isinstance(value, (list, tuple)):
                    raise UsageError(f"config key '{path}{key}' must be a sequence")
                value = tuple(value)
            elif current is not None and not isinstance(value, type(current)):
                # YAML loads 1 as int where a float default exists, etc.
                if isinstance(current, float) and isinstance(value, int):
                    value = float(value)
                elif isinstance(current, bool) != isinstance(value, bool):
                    raise UsageError(f"config key '{path}{key}' has wrong type")
            setattr(obj, key, value)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from defaults, an optional YAML file, and overrides."""
    cfg = RunConfig()
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh) or {}
        if not isinstance(doc, dict):
            raise UsageError(f"config file {path} must contain a mapping")
        _apply_overrides(cfg, doc, "")
    if overrides:
        _apply_overrides(cfg, overrides, "")
    return cfg


def config_dict(cfg: RunConfig) -> dict:
    """Fully resolved configuration as plain nested dicts/lists."""

    def convert(value):
        if dataclasses.is_dataclass(value):
            return {f.name: convert(getattr(value, f.name)) for f in fields(value)}
        if isinstance(value, tuple):
            return [convert(v) for v in value]
        return value

    return convert(cfg)


def write_resolved_config(cfg: RunConfig, out_dir: str | Path) -> Path:
    """Echo the resolved configuration into an output directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "resolved_config.yaml"
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_dict(cfg), fh, sort_keys=True)
    return path

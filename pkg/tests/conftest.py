"""Shared fixtures: small generated datasets and tiny trained models."""

from __future__ import annotations

import numpy as np
import pytest

from vtlab.config import PolicyConfig, ReprConfig, SimWorldConfig
from vtlab.dataio import filter_valid
from vtlab.pretrain import pretrain
from vtlab.policy import Variant, train_policy
from vtlab.seeding import child_seed
from vtlab.simworld import TaskId, collect_episode
from vtlab.sync import align_episode


@pytest.fixture(scope="session")
def sim_cfg() -> SimWorldConfig:
    return SimWorldConfig()


@pytest.fixture(scope="session")
def tiny_dataset(sim_cfg):
    """Twelve aligned episodes across both tasks, tracking failures included."""
    episodes = []
    for task in (TaskId.LIFT_PLACE, TaskId.OCCLUDED_ADJUST):
        for i in range(6):
            seed = child_seed(7, "tiny", task.value, i)
            episodes.append(align_episode(collect_episode(task, seed, sim_cfg)))
    return episodes


@pytest.fixture(scope="session")
def tiny_repr(tiny_dataset):
    """A briefly pre-trained representation model for mechanics tests."""
    cfg = ReprConfig(steps=20, batch_size=32, checkpoint_every=0)
    return pretrain(tiny_dataset, cfg, seed=11)


@pytest.fixture(scope="session")
def tiny_policy_cfg() -> PolicyConfig:
    return PolicyConfig(epochs=2, batch_size=32, unet_channels=(16, 32, 64))


@pytest.fixture(scope="session")
def tiny_policies(tiny_dataset, tiny_repr, tiny_policy_cfg):
    """Small trained policies per variant on the occluded task."""
    episodes = [e for e in filter_valid(tiny_dataset)
                if e.task_id == TaskId.OCCLUDED_ADJUST.value]
    models = {}
    for variant in (Variant.VISION_ONLY, Variant.VISUOTACTILE_SCRATCH,
                    Variant.VISUOTACTILE_PRETRAINED, Variant.VISUOTACTILE_LOWRES):
        models[variant] = train_policy(episodes, tiny_repr, variant,
                                       tiny_policy_cfg, seed=3)
    return models


def record_criterion(request, number: int, description: str, passed: bool) -> None:
    """Collect acceptance-criterion outcomes for the terminal summary."""
    lines = request.session.__dict__.setdefault("acceptance_lines", {})
    lines[number] = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {description}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(terminalreporter._session, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])


@pytest.fixture(scope="session")
def thousand_episode_flags(sim_cfg):
    """Tracking flags plus the filter's retained count over 1000 generated
    episodes, produced in chunks so memory stays bounded."""
    flags = []
    retained = 0
    chunk: list = []
    for i in range(1000):
        task = TaskId.LIFT_PLACE if i % 2 == 0 else TaskId.OCCLUDED_ADJUST
        episode = collect_episode(task, child_seed(123, "bulk", i), sim_cfg)
        flags.append(episode.tracking_failed)
        chunk.append(episode)
        if len(chunk) == 25:
            retained += len(filter_valid(chunk))
            chunk = []
    retained += len(filter_valid(chunk))
    return np.array(flags, dtype=bool), retained

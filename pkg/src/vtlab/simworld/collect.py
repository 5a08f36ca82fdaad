"""Demonstration collection: expert rollouts recorded as multi-rate streams.

The recording begins with a marker-calibration phase (the scene is idle while
a marker board is shown to both camera clocks), then the start signal fires
and the expert demonstrates the task. Vision and proprioception are sampled
at 60 Hz, both tactile pads at 30 Hz on their own clock (offset by a constant
draw), and expert actions at the 10 Hz control rate. The world state only
changes at control ticks, so all frames within a tick share one rendering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import SimWorldConfig
from ..episodes import (
    ACTION,
    PROPRIO,
    TACTILE_LEFT,
    TACTILE_RIGHT,
    VISION,
    FrameStream,
    MarkerEvent,
    RawEpisode,
)
from .dynamics import step, task_complete
from .expert import scripted_expert
from .types import Action, Finger, TaskId, WorldState, MAX_DXY
from .rendering import render_tactile, render_vision

HOLD_TICKS = 2  # extra ticks recorded after the task completes

_MARGIN = 0.10
_MIN_GOAL_DIST = 0.15
_MIN_EE_DIST = 0.06


def sample_initial_state(task_id: TaskId, rng: np.random.Generator,
                         cfg: SimWorldConfig) -> WorldState:
    """Randomized initial conditions; shared by collection and evaluation."""
    lo, hi = _MARGIN, cfg.workspace_extent - _MARGIN

    def point():
        return rng.uniform(lo, hi, size=2)

    obj = point()
    goal = point()
    while np.hypot(*(goal - obj)) < _MIN_GOAL_DIST:
        goal = point()
    ee = point()
    while np.hypot(*(ee - obj)) < _MIN_EE_DIST:
        ee = point()

    ee_theta = rng.uniform(-0.3, 0.3)
    if task_id == TaskId.LIFT_PLACE:
        obj_theta = rng.uniform(-1.0, 1.0)
    else:
        # always requires a real adjustment: at least 15 degrees off
        obj_theta = rng.choice([-1.0, 1.0]) * rng.uniform(np.deg2rad(15.0), np.deg2rad(60.0))

    return WorldState(
        ee_pose=np.array([ee[0], ee[1], ee_theta], dtype=np.float64),
        gripper_width=0.05,
        object_pose=np.array([obj[0], obj[1], obj_theta], dtype=np.float64),
        object_inhand_angle=0.0,
        goal_pose=np.array([goal[0], goal[1], 0.0], dtype=np.float64),
        grasped=False,
        task_id=task_id,
        sim_time=0.0,
    )


@dataclass
class ExpertRollout:
    states: list[WorldState]  # states at ticks 0..N (N = len(actions))
    actions: list[Action]  # actions executed during ticks 0..N-1
    timed_out: bool

    @property
    def success(self) -> bool:
        return (not self.timed_out) and task_complete(self.states[-1])


def run_expert(task_id: TaskId, state: WorldState, rng: np.random.Generator,
               cfg: SimWorldConfig, noise_sigma: float | None = None) -> ExpertRollout:
    """Roll the scripted expert to termination with Gaussian position jitter."""
    sigma = cfg.expert_noise_sigma if noise_sigma is None else noise_sigma
    states = [state]
    actions: list[Action] = []
    timed_out = False
    for _ in range(cfg.max_expert_steps):
        if task_complete(state):
            break
        action = scripted_expert(state)
        if sigma > 0.0:
            jitter = rng.normal(0.0, sigma, size=2)
            action = Action(
                dx=float(np.clip(action.dx + jitter[0], -MAX_DXY, MAX_DXY)),
                dy=float(np.clip(action.dy + jitter[1], -MAX_DXY, MAX_DXY)),
                dtheta=action.dtheta,
                dwidth=action.dwidth,
            )
        state = step(state, action, cfg.workspace_extent)
        states.append(state)
        actions.append(action)
    else:
        timed_out = True
    return ExpertRollout(states=states, actions=actions, timed_out=timed_out)


def _detection_times(show_times: np.ndarray, rate: float) -> np.ndarray:
    """A camera at `rate` detects a marker on its first frame at/after the show time."""
    return np.ceil(show_times * rate - 1e-9) / rate


def collect_episode(task_id: TaskId, rng_seed: int,
                    cfg: SimWorldConfig | None = None) -> RawEpisode:
    """Collect one demonstration as an unsynchronized RawEpisode."""
    cfg = cfg or SimWorldConfig()
    task_id = TaskId(task_id)
    rng = np.random.default_rng(rng_seed)

    tracking_failed = bool(rng.random() < cfg.tracking_failure_prob)
    lo, hi = cfg.tactile_offset_range
    tactile_offset = float(rng.uniform(lo, hi)) if hi > lo else float(lo)

    state0 = sample_initial_state(task_id, rng, cfg)

    control_hz = cfg.control_hz
    calibration_span = cfg.calibration_markers * cfg.marker_period
    start_tick = int(np.ceil(calibration_span * control_hz - 1e-9))
    start_signal = start_tick / control_hz

    rollout = run_expert(task_id, state0, rng, cfg)
    demo_states = rollout.states + [rollout.states[-1]] * HOLD_TICKS
    demo_actions = [a.as_array() for a in rollout.actions]
    demo_actions += [np.zeros(4)] * (len(demo_states) - 1 - len(demo_actions))
    timed_out = rollout.timed_out
    if timed_out:
        # a failed demonstration is kept but flagged so the filter drops it
        tracking_failed = True

    last_tick = start_tick + len(demo_states) - 1
    stop_signal = last_tick / control_hz

    # renders per control tick; the idle calibration prefix shares one render
    tick_states = [state0] * start_tick + demo_states
    vision_renders: list[np.ndarray] = []
    tactile_renders: list[tuple[np.ndarray, np.ndarray]] = []
    for tick, st in enumerate(tick_states):
        if tick > 0 and st is tick_states[tick - 1]:
            vision_renders.append(vision_renders[-1])
            tactile_renders.append(tactile_renders[-1])
            continue
        vision_renders.append(render_vision(st, cfg.vision_res, cfg.workspace_extent).pixels)
        tactile_renders.append((
            render_tactile(st, Finger.LEFT, cfg.tactile_res).pixels,
            render_tactile(st, Finger.RIGHT, cfg.tactile_res).pixels,
        ))

    def sample_stream(name: str, rate: float, offset: float, extract) -> FrameStream:
        per_tick = int(round(rate / control_hz))
        n_frames = last_tick * per_tick + 1
        times = np.arange(n_frames, dtype=np.float64) / rate + offset
        first = extract(0)
        data = np.empty((n_frames,) + np.shape(first), dtype=np.float32)
        for tick in range(last_tick + 1):
            # all frames within one control tick show the same state
            data[tick * per_tick:min((tick + 1) * per_tick, n_frames)] = extract(tick)
        return FrameStream(name=name, rate=rate, timestamps=times, data=data)

    streams = {
        VISION: sample_stream(VISION, cfg.vision_hz, 0.0, lambda t: vision_renders[t]),
        TACTILE_LEFT: sample_stream(TACTILE_LEFT, cfg.tactile_hz, tactile_offset,
                                    lambda t: tactile_renders[t][0]),
        TACTILE_RIGHT: sample_stream(TACTILE_RIGHT, cfg.tactile_hz, tactile_offset,
                                     lambda t: tactile_renders[t][1]),
        PROPRIO: sample_stream(PROPRIO, cfg.proprio_hz, 0.0,
                               lambda t: tick_states[t].proprio()),
    }
    action_times = np.arange(start_tick, last_tick + 1, dtype=np.float64) / control_hz
    action_data = np.stack(demo_actions + [np.zeros(4)]).astype(np.float32)
    streams[ACTION] = FrameStream(name=ACTION, rate=control_hz,
                                  timestamps=action_times, data=action_data)

    show_times = (np.arange(cfg.calibration_markers) + 0.5) * cfg.marker_period
    vision_events = [MarkerEvent(i, float(t)) for i, t in
                     enumerate(_detection_times(show_times, cfg.vision_hz))]
    tactile_events = [MarkerEvent(i, float(t) + tactile_offset) for i, t in
                      enumerate(_detection_times(show_times, cfg.tactile_hz))]

    return RawEpisode(
        task_id=task_id.value,
        seed=int(rng_seed),
        streams=streams,
        marker_events={"vision": vision_events, "tactile": tactile_events},
        start_signal=start_signal,
        stop_signal=stop_signal,
        tracking_failed=tracking_failed,
        injected_offsets={VISION: 0.0, TACTILE_LEFT: tactile_offset,
                          TACTILE_RIGHT: tactile_offset, PROPRIO: 0.0, ACTION: 0.0},
    )

"""Deterministic top-down vision and contact-blob tactile rendering.

Vision draws flat sprites on a workspace-filling grid. In the occluded task
the object is drawn as an orientation-free disk and the gripper sprite is
drawn on top of it, so the in-hand angle never influences any pixel; the
tactile image is the only observation that carries it.

The tactile image is a single anisotropic Gaussian blob: its center encodes
the contact location along the pad, its peak the squeeze force, and its
elongation direction the in-hand angle (mirrored between the two fingers).
"""

from __future__ import annotations

import numpy as np

from .dynamics import squeeze_force
from .types import Finger, TactileImage, TaskId, VisionImage, WorldState

# sprite geometry, meters
FINGER_LENGTH = 0.044
FINGER_THICKNESS = 0.010
PALM_THICKNESS = 0.010
GOAL_RADIUS = 0.034
LIFT_OBJECT_HALF = (0.034, 0.013)  # oriented rectangle half-extents
ADJUST_OBJECT_RADIUS = 0.016

# mid-gray background with bipolar sprite colors: random conv channels then
# split by sign across sprites, which keeps even an untrained encoder's
# keypoint features object-selective
BACKGROUND = (0.45, 0.45, 0.45)
GOAL_COLOR = (0.10, 0.85, 0.15)
LIFT_OBJECT_COLOR = (1.0, 0.45, 0.05)
ADJUST_OBJECT_COLOR = (0.85, 0.20, 0.75)
FINGER_COLOR = (0.15, 0.15, 0.55)
PALM_COLOR = (0.10, 0.10, 0.40)

# tactile blob shape in units of the pad image width
BLOB_SIGMA_MAJOR = 0.17
BLOB_SIGMA_MINOR = 0.055
BLOB_CENTER_SWING = 0.30

_GRID_CACHE: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = {}


def _grid(res: int, extent: float) -> tuple[np.ndarray, np.ndarray]:
    key = (res, extent)
    if key not in _GRID_CACHE:
        centers = (np.arange(res, dtype=np.float64) + 0.5) * (extent / res)
        gx, gy = np.meshgrid(centers, centers, indexing="xy")
        # row index increases with world y
        _GRID_CACHE[key] = (gx, gy)
    return _GRID_CACHE[key]


def _paint(img: np.ndarray, mask: np.ndarray, color: tuple[float, float, float]) -> None:
    img[mask] = color


def _disk_mask(gx, gy, cx, cy, radius) -> np.ndarray:
    return (gx - cx) ** 2 + (gy - cy) ** 2 <= radius * radius


def _rect_mask(gx, gy, cx, cy, theta, half_len, half_thick) -> np.ndarray:
    dx = gx - cx
    dy = gy - cy
    c, s = np.cos(theta), np.sin(theta)
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return (np.abs(u) <= half_len) & (np.abs(v) <= half_thick)


def _draw_gripper(img, gx, gy, state: WorldState) -> None:
    x, y, theta = state.ee_pose
    half_gap = state.gripper_width / 2.0 + FINGER_THICKNESS / 2.0
    c, s = np.cos(theta + np.pi / 2.0), np.sin(theta + np.pi / 2.0)
    for side in (-1.0, 1.0):
        fx = x + side * half_gap * c
        fy = y + side * half_gap * s
        mask = _rect_mask(gx, gy, fx, fy, theta, FINGER_LENGTH / 2.0, FINGER_THICKNESS / 2.0)
        _paint(img, mask, FINGER_COLOR)
    # palm bar behind the pads, perpendicular to the fingers
    px = x - (FINGER_LENGTH / 2.0 + PALM_THICKNESS / 2.0) * np.cos(theta)
    py = y - (FINGER_LENGTH / 2.0 + PALM_THICKNESS / 2.0) * np.sin(theta)
    mask = _rect_mask(gx, gy, px, py, theta + np.pi / 2.0,
                      half_gap + FINGER_THICKNESS, PALM_THICKNESS / 2.0)
    _paint(img, mask, PALM_COLOR)


def _draw_object(img, gx, gy, state: WorldState) -> None:
    ox, oy, otheta = state.object_pose
    if state.task_id == TaskId.LIFT_PLACE:
        mask = _rect_mask(gx, gy, ox, oy, otheta, *LIFT_OBJECT_HALF)
        _paint(img, mask, LIFT_OBJECT_COLOR)
    else:
        # orientation-free sprite: the adjust-task object shows no angle cue
        mask = _disk_mask(gx, gy, ox, oy, ADJUST_OBJECT_RADIUS)
        _paint(img, mask, ADJUST_OBJECT_COLOR)


def render_vision(state: WorldState, res: int = 64, extent: float = 0.64) -> VisionImage:
    """Render the workspace top-down; deterministic in the state."""
    gx, gy = _grid(res, extent)
    img = np.empty((res, res, 3), dtype=np.float32)
    img[:] = BACKGROUND

    _paint(img, _disk_mask(gx, gy, state.goal_pose[0], state.goal_pose[1], GOAL_RADIUS),
           GOAL_COLOR)
    if state.task_id == TaskId.LIFT_PLACE:
        _draw_gripper(img, gx, gy, state)
        _draw_object(img, gx, gy, state)
    else:
        _draw_object(img, gx, gy, state)
        _draw_gripper(img, gx, gy, state)
    return VisionImage(pixels=img, timestamp=state.sim_time)


def render_tactile(state: WorldState, finger: Finger, res: int = 32) -> TactileImage:
    """Render one finger pad's contact image; all-zero without contact."""
    force = squeeze_force(state)
    if force <= 0.0:
        return TactileImage(pixels=np.zeros((res, res), dtype=np.float32),
                            finger=finger, timestamp=state.sim_time)

    mirror = 1.0 if finger == Finger.LEFT else -1.0
    angle = mirror * state.object_inhand_angle
    # the contact patch slides along the pad as the object rotates in hand
    center_u = 0.5 + mirror * BLOB_CENTER_SWING * np.sin(state.object_inhand_angle)
    center_v = 0.5

    coords = (np.arange(res, dtype=np.float64) + 0.5) / res
    gu, gv = np.meshgrid(coords, coords, indexing="xy")
    du = gu - center_u
    dv = gv - center_v
    c, s = np.cos(angle), np.sin(angle)
    major = c * du + s * dv
    minor = -s * du + c * dv
    q = (major / BLOB_SIGMA_MAJOR) ** 2 + (minor / BLOB_SIGMA_MINOR) ** 2
    peak = 0.15 + 0.85 * force
    pixels = (peak * np.exp(-0.5 * q)).astype(np.float32)
    return TactileImage(pixels=pixels, finger=finger, timestamp=state.sim_time)

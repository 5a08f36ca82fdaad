"""World state, actions, and observation types for the planar gripper world."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from ..errors import UsageError

# gripper stroke from fully open to closed, meters
GRIPPER_MAX_WIDTH = 0.08

# per-control-tick action limits
MAX_DXY = 0.02
MAX_DTHETA = 0.1
MAX_DWIDTH = 0.01

CONTROL_PERIOD = 0.1

# manipulated object: circular footprint for grasp logic regardless of sprite
OBJECT_DIAMETER = 0.03
# the pads cage the object once the gripper center is this close
CAPTURE_RADIUS = 0.025
# widths in [OBJECT_DIAMETER - LOOSE_BAND, OBJECT_DIAMETER) hold the object
# loosely: the gripper can rotate around it without dragging it along
LOOSE_BAND = 0.006


class TaskId(str, enum.Enum):
    LIFT_PLACE = "lift-place"
    OCCLUDED_ADJUST = "occluded-adjust"


class Finger(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = (theta + np.pi) % (2.0 * np.pi) - np.pi
    if wrapped == -np.pi:
        wrapped = np.pi
    return float(wrapped)


@dataclass(frozen=True)
class Action:
    """Per-tick delta command: planar pose delta plus gripper width delta."""

    dx: float = 0.0
    dy: float = 0.0
    dtheta: float = 0.0
    dwidth: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dtheta, self.dwidth], dtype=np.float64)

    @staticmethod
    def from_array(a) -> "Action":
        return Action(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    def validate(self, tol: float = 1e-9) -> None:
        limits = (("dx", self.dx, MAX_DXY), ("dy", self.dy, MAX_DXY),
                  ("dtheta", self.dtheta, MAX_DTHETA), ("dwidth", self.dwidth, MAX_DWIDTH))
        for name, value, limit in limits:
            if not np.isfinite(value):
                raise ActionBoundsError(f"action component '{name}' is not finite")
            if abs(value) > limit + tol:
                raise ActionBoundsError(
                    f"action component '{name}' = {value:+.6f} exceeds limit {limit}")

    def clamped(self) -> "Action":
        return Action(
            dx=float(np.clip(self.dx, -MAX_DXY, MAX_DXY)),
            dy=float(np.clip(self.dy, -MAX_DXY, MAX_DXY)),
            dtheta=float(np.clip(self.dtheta, -MAX_DTHETA, MAX_DTHETA)),
            dwidth=float(np.clip(self.dwidth, -MAX_DWIDTH, MAX_DWIDTH)),
        )


class ActionBoundsError(UsageError):
    """An action component exceeds its per-tick limit."""


@dataclass
class WorldState:
    """Full simulator state. Poses are (x, y, theta) in the world frame."""

    ee_pose: np.ndarray  # (3,) float64
    gripper_width: float
    object_pose: np.ndarray  # (3,) float64
    object_inhand_angle: float  # object orientation relative to gripper, valid while grasped
    goal_pose: np.ndarray  # (3,) float64
    grasped: bool
    task_id: TaskId
    sim_time: float

    def copy(self) -> "WorldState":
        return replace(
            self,
            ee_pose=self.ee_pose.copy(),
            object_pose=self.object_pose.copy(),
            goal_pose=self.goal_pose.copy(),
        )

    def proprio(self) -> np.ndarray:
        """Pose + gripper width observation vector (4,)."""
        return np.array(
            [self.ee_pose[0], self.ee_pose[1], self.ee_pose[2], self.gripper_width],
            dtype=np.float64,
        )


@dataclass
class TactileImage:
    """Single-channel contact image from one finger pad, values in [0, 1]."""

    pixels: np.ndarray  # (H, W) float32
    finger: Finger
    timestamp: float


@dataclass
class VisionImage:
    """Top-down RGB rendering of the workspace, values in [0, 1]."""

    pixels: np.ndarray  # (H, W, 3) float32
    timestamp: float

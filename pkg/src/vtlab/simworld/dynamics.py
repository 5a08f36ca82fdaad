"""Kinematic stepping of the planar gripper world.

The grasp model is deliberately simple: the object is caged once the gripper
closes below the object diameter while the pads overlap it. A tightly held
object rotates with the gripper; a loosely held one keeps its world
orientation while the gripper rotates around it, which is what makes the
in-hand angle controllable (and is the analog of adjusting a grasped part
against an external constraint).
"""

from __future__ import annotations

import numpy as np

from .types import (
    CAPTURE_RADIUS,
    CONTROL_PERIOD,
    GRIPPER_MAX_WIDTH,
    LOOSE_BAND,
    OBJECT_DIAMETER,
    Action,
    TaskId,
    WorldState,
    wrap_angle,
)

TIGHT_WIDTH_THRESHOLD = OBJECT_DIAMETER - LOOSE_BAND
# compliant pads cage a grasped object: release needs a clearly wider opening
# than engagement (hysteresis), like the caging fingers the gripper mimics
RELEASE_WIDTH = OBJECT_DIAMETER + 0.004


def step(state: WorldState, action: Action, workspace_extent: float = 0.64) -> WorldState:
    """Advance the world by one control tick.

    Raises ActionBoundsError for out-of-bounds actions; the resulting pose and
    gripper width are clamped to their physical ranges.
    """
    action.validate()
    action = action.clamped()

    new = state.copy()
    new.ee_pose[0] = float(np.clip(state.ee_pose[0] + action.dx, 0.0, workspace_extent))
    new.ee_pose[1] = float(np.clip(state.ee_pose[1] + action.dy, 0.0, workspace_extent))
    new.ee_pose[2] = wrap_angle(state.ee_pose[2] + action.dtheta)
    new.gripper_width = float(np.clip(state.gripper_width + action.dwidth, 0.0, GRIPPER_MAX_WIDTH))

    if state.grasped:
        if new.gripper_width >= RELEASE_WIDTH:
            # released: the object stays where it was being held
            new.grasped = False
        else:
            new.grasped = True
            if new.gripper_width < TIGHT_WIDTH_THRESHOLD:
                # tight grip: object rotates with the gripper
                pass
            else:
                # loose grip: object keeps its world orientation
                object_world_theta = state.object_pose[2]
                new.object_inhand_angle = wrap_angle(object_world_theta - new.ee_pose[2])
            new.object_pose[0] = new.ee_pose[0]
            new.object_pose[1] = new.ee_pose[1]
            new.object_pose[2] = wrap_angle(new.ee_pose[2] + new.object_inhand_angle)
    else:
        distance = float(np.hypot(state.object_pose[0] - new.ee_pose[0],
                                  state.object_pose[1] - new.ee_pose[1]))
        if new.gripper_width < OBJECT_DIAMETER and distance <= CAPTURE_RADIUS:
            new.grasped = True
            new.object_inhand_angle = wrap_angle(state.object_pose[2] - new.ee_pose[2])
            new.object_pose[0] = new.ee_pose[0]
            new.object_pose[1] = new.ee_pose[1]
            new.object_pose[2] = wrap_angle(new.ee_pose[2] + new.object_inhand_angle)

    new.sim_time = state.sim_time + CONTROL_PERIOD
    return new


def squeeze_force(state: WorldState) -> float:
    """Normalized squeeze on the grasped object, 0 when not grasped.

    Positive for every grasped width below the release opening, so a caged
    object always leaves a contact signature on the pads.
    """
    if not state.grasped:
        return 0.0
    deficit = RELEASE_WIDTH - state.gripper_width
    return float(np.clip(deficit / (OBJECT_DIAMETER * 0.5), 0.0, 1.0))


def task_complete(state: WorldState, position_tol: float = 0.01,
                  angle_tol: float = np.deg2rad(10.0)) -> bool:
    """Terminal success predicate used by the expert and rollout termination."""
    goal_dist = float(np.hypot(state.object_pose[0] - state.goal_pose[0],
                               state.object_pose[1] - state.goal_pose[1]))
    if state.task_id == TaskId.LIFT_PLACE:
        return (not state.grasped) and goal_dist <= position_tol
    ee_goal_dist = float(np.hypot(state.ee_pose[0] - state.goal_pose[0],
                                  state.ee_pose[1] - state.goal_pose[1]))
    return (state.grasped and abs(state.object_inhand_angle) <= angle_tol
            and ee_goal_dist <= position_tol)

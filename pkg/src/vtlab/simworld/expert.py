"""Finite-state scripted expert standing in for the human demonstrator.

The phase is inferred from the state alone, so the expert is a pure function
and recovers gracefully if an action was perturbed: approach the object,
close until the grasp engages, (occluded task only) loosen and rotate the
gripper until the in-hand angle vanishes, then re-tighten, carry the object
to the goal, and either release it there or hold it.
"""

from __future__ import annotations

import numpy as np

from .dynamics import TIGHT_WIDTH_THRESHOLD, task_complete
from .types import (
    LOOSE_BAND,
    MAX_DTHETA,
    MAX_DWIDTH,
    MAX_DXY,
    OBJECT_DIAMETER,
    Action,
    TaskId,
    WorldState,
    wrap_angle,
)

APPROACH_WIDTH = 0.05
TIGHT_WIDTH = 0.020
LOOSE_WIDTH = OBJECT_DIAMETER - LOOSE_BAND / 2.0
POSITION_TOL = 0.004
ANGLE_DONE = 0.03  # rad; well inside the 10 degree success band


def _move_toward(dx: float, dy: float) -> tuple[float, float]:
    return (float(np.clip(dx, -MAX_DXY, MAX_DXY)), float(np.clip(dy, -MAX_DXY, MAX_DXY)))


def _width_toward(current: float, target: float) -> float:
    return float(np.clip(target - current, -MAX_DWIDTH, MAX_DWIDTH))


def scripted_expert(state: WorldState) -> Action:
    """Bounded expert action for the current state; deterministic."""
    if task_complete(state):
        return Action()

    if not state.grasped:
        dx = state.object_pose[0] - state.ee_pose[0]
        dy = state.object_pose[1] - state.ee_pose[1]
        dtheta = float(np.clip(wrap_angle(-state.ee_pose[2]), -MAX_DTHETA, MAX_DTHETA))
        if np.hypot(dx, dy) > POSITION_TOL:
            # approach with the gripper open and levelled
            return Action(*_move_toward(dx, dy), dtheta,
                          _width_toward(state.gripper_width, APPROACH_WIDTH))
        return Action(0.0, 0.0, dtheta, -MAX_DWIDTH)

    if state.task_id == TaskId.OCCLUDED_ADJUST and abs(state.object_inhand_angle) > ANGLE_DONE:
        if state.gripper_width < TIGHT_WIDTH_THRESHOLD:
            # too tight to rotate around the object: loosen first
            return Action(0.0, 0.0, 0.0, _width_toward(state.gripper_width, LOOSE_WIDTH))
        dtheta = float(np.clip(state.object_inhand_angle, -MAX_DTHETA, MAX_DTHETA))
        return Action(0.0, 0.0, dtheta,
                      _width_toward(state.gripper_width, LOOSE_WIDTH))

    dx = state.goal_pose[0] - state.ee_pose[0]
    dy = state.goal_pose[1] - state.ee_pose[1]
    if np.hypot(dx, dy) > POSITION_TOL:
        return Action(*_move_toward(dx, dy), 0.0,
                      _width_toward(state.gripper_width, TIGHT_WIDTH))
    if state.task_id == TaskId.LIFT_PLACE:
        return Action(0.0, 0.0, 0.0, MAX_DWIDTH)
    return Action()

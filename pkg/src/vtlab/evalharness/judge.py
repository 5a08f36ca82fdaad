"""Stage-wise trial grading from rollout traces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..deploy import RolloutTrace
from ..errors import DataError
from ..simworld import TaskId

STAGES = {
    TaskId.LIFT_PLACE: ("grasp", "place"),
    TaskId.OCCLUDED_ADJUST: ("grasp", "reorient"),
}


class MalformedTraceError(DataError):
    """The trace lacks the states needed for grading."""


@dataclass
class TrialResult:
    task_id: str
    variant: str
    seed: int
    stage_success: dict[str, bool]
    overall: bool
    ticks_used: int

    @property
    def stages(self) -> tuple[bool, ...]:
        return tuple(self.stage_success[name] for name in STAGES[TaskId(self.task_id)])


def judge(trace: RolloutTrace, task_id: TaskId | str | None = None,
          variant: str = "", position_tolerance: float = 0.02,
          angle_tolerance_deg: float = 10.0) -> TrialResult:
    """Deterministic grading of a trace; later stages imply earlier ones."""
    task_id = TaskId(task_id if task_id is not None else trace.task_id)
    states = trace.states
    if states.ndim != 2 or states.shape[0] < 1 or states.shape[1] < 12:
        raise MalformedTraceError("trace has no gradeable state history")

    grasped = states[:, 8] > 0.5
    ever_grasped = bool(np.any(grasped))
    final = states[-1]

    if task_id == TaskId.LIFT_PLACE:
        goal_dist = float(np.hypot(final[4] - final[9], final[5] - final[10]))
        placed = ever_grasped and (not bool(grasped[-1])) and goal_dist <= position_tolerance
        stage_success = {"grasp": ever_grasped, "place": placed}
    else:
        if ever_grasped:
            last_grasped = int(np.nonzero(grasped)[0][-1])
            angle = abs(float(states[last_grasped, 7]))
            reoriented = angle < np.deg2rad(angle_tolerance_deg)
        else:
            reoriented = False
        stage_success = {"grasp": ever_grasped, "reorient": ever_grasped and reoriented}

    overall = all(stage_success.values())
    return TrialResult(task_id=task_id.value, variant=variant, seed=trace.seed,
                       stage_success=stage_success, overall=overall,
                       ticks_used=len(trace))

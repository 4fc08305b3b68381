"""Closed-loop grasp simulation: PID, gripper plant, slip model, arm schedule."""
from .arm import ArmPhase, ArmPlan, arm_profile
from .detect import detect_slip_event
from .pid import DEFAULT_GAINS, PID, PidGains, pid_step
from .plant import GripperPlantState, PlantParams, plant_step
from .slip import DEMO_OBJECTS, ObjectSpec, SlipMode, SlipState, slip_step
from .task import TaskLog, TaskPhase, TaskTiming, run_pick_and_place, simulate_object

__all__ = [
    "ArmPhase", "ArmPlan", "arm_profile", "detect_slip_event", "DEFAULT_GAINS", "PID",
    "PidGains", "pid_step", "GripperPlantState", "PlantParams", "plant_step",
    "DEMO_OBJECTS", "ObjectSpec", "SlipMode", "SlipState", "slip_step", "TaskLog",
    "TaskPhase", "TaskTiming", "run_pick_and_place", "simulate_object",
]

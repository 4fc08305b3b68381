"""Rate-limited first-order abstraction of the twining gripper."""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import InvariantViolation


@dataclass(frozen=True)
class PlantParams:
    # Defaults come from the rise-time sweep in fbgforce.control.tuning.
    rate_limit: float = 0.365  # N/s of engagement change
    tau: float = 0.05  # s, contact-force lag behind engagement

    def __post_init__(self):
        if self.rate_limit <= 0 or self.tau <= 0:
            raise InvariantViolation("rate_limit and tau must be positive")


@dataclass(frozen=True)
class GripperPlantState:
    engagement: float = 0.0
    contact_force: float = 0.0
    params: PlantParams = PlantParams()


def plant_step(plant: GripperPlantState, command: float, dt: float) -> GripperPlantState:
    """Advance one step.

    ``command`` is an engagement rate in N/s, clipped to the rate limit.
    The contact force relaxes toward the new engagement with the exact
    discrete solution of the first-order lag.
    """
    if dt <= 0:
        raise InvariantViolation("dt must be positive")
    p = plant.params
    rate = min(max(command, -p.rate_limit), p.rate_limit)
    engagement = max(0.0, plant.engagement + rate * dt)
    decay = math.exp(-dt / p.tau)
    force = engagement + (plant.contact_force - engagement) * decay
    return GripperPlantState(engagement, max(0.0, force), p)

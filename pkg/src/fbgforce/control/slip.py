"""Friction-balance slip model for a grasped object."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from ..errors import InvariantViolation

G = 9.81
HOLD_MARGIN = 1.2
TAU_SLIP = 0.5
DROP_FRACTION = 0.05


class SlipMode(enum.IntEnum):
    HOLDING = 0
    SLIPPING = 1
    DROPPED = 2


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    mass: float
    setpoint: float
    mu_eff: float | None = None

    def __post_init__(self):
        if self.mass <= 0 or self.setpoint <= 0:
            raise InvariantViolation("mass and setpoint must be positive")
        if self.mu_eff is None:
            # Setpoint holds the object at rest with a fixed safety margin.
            object.__setattr__(self, "mu_eff", HOLD_MARGIN * self.mass * G / self.setpoint)
        if self.mu_eff <= 0:
            raise InvariantViolation("mu_eff must be positive")

    @property
    def weight(self) -> float:
        return self.mass * G


DEMO_OBJECTS = (
    ObjectSpec("crimper", 0.351, 0.6),
    ObjectSpec("bottle", 0.222, 0.8),
    ObjectSpec("hammer", 0.419, 1.6),
)


@dataclass(frozen=True)
class SlipState:
    """Grasp state plus the fraction of gripper force still reaching the sensor."""

    mode: SlipMode = SlipMode.HOLDING
    slip_speed: float = 0.0
    contact_fraction: float = 1.0


def holds(obj: ObjectSpec, contact_force: float, external_accel: float) -> bool:
    return obj.mu_eff * contact_force >= obj.mass * (G + external_accel)


def slip_step(
    obj: ObjectSpec,
    contact_force: float,
    external_accel: float,
    slip: SlipState,
    dt: float,
    tau_slip: float = TAU_SLIP,
    drop_fraction: float = DROP_FRACTION,
) -> SlipState:
    """One step of the slip state machine.

    The measured contact force is ``contact_force * contact_fraction``.  While
    the friction balance fails the fraction decays with ``tau_slip``; once the
    measured force falls to ``drop_fraction`` of the setpoint the object is
    dropped, which is absorbing.
    """
    if dt <= 0:
        raise InvariantViolation("dt must be positive")
    if slip.mode is SlipMode.DROPPED:
        return slip
    if holds(obj, contact_force, external_accel):
        if slip.mode is SlipMode.HOLDING:
            return slip
        return SlipState(SlipMode.HOLDING, 0.0, slip.contact_fraction)
    excess = G + external_accel - obj.mu_eff * contact_force / obj.mass
    fraction = slip.contact_fraction * math.exp(-dt / tau_slip)
    if contact_force * fraction <= drop_fraction * obj.setpoint:
        return SlipState(SlipMode.DROPPED, 0.0, 0.0)
    return SlipState(SlipMode.SLIPPING, slip.slip_speed + excess * dt, fraction)

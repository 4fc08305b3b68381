"""Positional PID with conditional-integration anti-windup."""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..errors import InvariantViolation


@dataclass(frozen=True)
class PidGains:
    kp: float = 20.0
    ki: float = 0.05
    kd: float = 0.0
    out_min: float = -10.0
    out_max: float = 10.0

    def __post_init__(self):
        if not all(math.isfinite(g) for g in (self.kp, self.ki, self.kd)):
            raise InvariantViolation("PID gains must be finite")
        if not self.out_min < self.out_max:
            raise InvariantViolation("PID output limits must be ordered")


DEFAULT_GAINS = PidGains(kp=20.0, ki=0.05, kd=0.0)


class PID:
    """PID controller acting on a force error.

    The derivative term acts on the measurement, not the error, so setpoint
    steps do not kick the output.  While the output is saturated the
    integral is held at its last value.
    """

    def __init__(self, gains: PidGains):
        self.gains = gains
        self.integral = 0.0
        self.prev_measurement: float | None = None
        self.saturated = False

    def reset(self) -> None:
        self.integral = 0.0
        self.prev_measurement = None
        self.saturated = False

    def step(self, setpoint: float, measurement: float, dt: float) -> float:
        if dt <= 0:
            raise InvariantViolation("dt must be positive")
        g = self.gains
        error = setpoint - measurement
        deriv = 0.0
        if self.prev_measurement is not None:
            deriv = -(measurement - self.prev_measurement) / dt
        self.prev_measurement = measurement
        candidate = self.integral + error * dt
        raw = g.kp * error + g.ki * candidate + g.kd * deriv
        if g.out_min <= raw <= g.out_max:
            self.integral = candidate
            self.saturated = False
            return raw
        self.saturated = True
        held = g.kp * error + g.ki * self.integral + g.kd * deriv
        return min(max(held, g.out_min), g.out_max)


def pid_step(controller: PID, setpoint: float, measurement: float, dt: float) -> float:
    return controller.step(setpoint, measurement, dt)

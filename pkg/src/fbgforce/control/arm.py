"""Arm motion schedule as an effective acceleration load on the grasp."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvariantViolation, OutOfPlan

PHASE_NAMES = ("lift", "transfer", "approach")
VIBRATION_FREQS = (3.1, 5.7, 8.3)  # Hz


@dataclass(frozen=True)
class ArmPhase:
    name: str
    duration: float
    peak_accel: float

    def __post_init__(self):
        if self.duration <= 0:
            raise InvariantViolation(f"phase {self.name}: duration must be positive")
        if self.peak_accel < 0:
            raise InvariantViolation(f"phase {self.name}: peak_accel must be >= 0")


@dataclass(frozen=True)
class ArmPlan:
    """Post-grasp arm schedule.

    ``lead_time`` is the stationary interval between the end of grasp
    stabilisation (motion start, t=0 on the plan clock) and lift-off.  Each
    phase contributes one trapezoidal acceleration pulse with ``ramp_time``
    edges; a small deterministic vibration is superimposed everywhere.
    """

    phases: tuple[ArmPhase, ...] = field(default_factory=lambda: (
        ArmPhase("lift", 3.0, 1.0),
        ArmPhase("transfer", 4.0, 1.0),
        ArmPhase("approach", 3.0, 1.0),
    ))
    lead_time: float = 10.0
    ramp_time: float = 0.5
    accel_limit: float = 4.0
    vibration_amplitude: float = 0.05
    vibration_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise InvariantViolation("plan needs at least one phase")
        if self.lead_time < 0 or self.ramp_time <= 0 or self.vibration_amplitude < 0:
            raise InvariantViolation("invalid plan timing")
        for ph in self.phases:
            if ph.peak_accel > self.accel_limit:
                raise InvariantViolation(
                    f"phase {ph.name}: peak {ph.peak_accel} exceeds limit {self.accel_limit}"
                )
            if 2 * self.ramp_time > ph.duration:
                raise InvariantViolation(f"phase {ph.name}: shorter than its two ramps")

    @property
    def duration(self) -> float:
        return self.lead_time + sum(p.duration for p in self.phases)

    def phase_starts(self) -> list[tuple[str, float]]:
        out, t = [], self.lead_time
        for ph in self.phases:
            out.append((ph.name, t))
            t += ph.duration
        return out

    def phase_at(self, t: float) -> str | None:
        for (name, start), ph in zip(self.phase_starts(), self.phases):
            if start <= t < start + ph.duration:
                return name
        return None

    def motion_accel(self, t) -> np.ndarray:
        """Trapezoidal pulse part of the profile (no vibration)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        r = self.ramp_time
        for (_, start), ph in zip(self.phase_starts(), self.phases):
            s = t - start
            up = np.clip(s / r, 0.0, 1.0)
            down = np.clip((ph.duration - s) / r, 0.0, 1.0)
            out += np.where((s >= 0) & (s < ph.duration), ph.peak_accel * np.minimum(up, down), 0.0)
        return out

    def vibration(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.vibration_amplitude == 0:
            return np.zeros_like(t)
        phases = np.random.default_rng(self.vibration_seed).uniform(0, 2 * math.pi, len(VIBRATION_FREQS))
        amp = self.vibration_amplitude / len(VIBRATION_FREQS)
        return sum(amp * np.sin(2 * math.pi * f * t + p) for f, p in zip(VIBRATION_FREQS, phases))

    def sample(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.duration):
            raise OutOfPlan(f"time outside plan [0, {self.duration}]")
        return self.motion_accel(t) + self.vibration(t)


def arm_profile(plan: ArmPlan, t: float) -> float:
    """Effective external acceleration (m/s^2) at plan time ``t``."""
    return float(plan.sample(np.array([t]))[0])

"""Design sweeps that fix the plant and disturbance parameters.

The plant rate limit is bisected so the published gains reach 90 % of a
1.6 N setpoint in 4 s.  Each object's disturbance peak in its designated
phase is bisected so the noise-free in-motion dip with feedback on equals a
fixed fraction of the published fluctuation ceiling (measurement noise adds
the remainder), but never below a margin over the acceleration at which the
setpoint grip starts to slip, so that the open-loop drop is not marginal.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..sensorsim import SyntheticSensorConfig
from .arm import ArmPhase, ArmPlan
from .pid import DEFAULT_GAINS, PidGains
from .plant import PlantParams
from .slip import G, DEMO_OBJECTS, ObjectSpec
from .task import SensorPath, TaskPhase, simulate_object

NOISE_FREE = SensorPath(SyntheticSensorConfig(noise_sigma=0.0))

# Phase in which each object must drop with feedback off, and its published
# in-motion fluctuation ceiling (%) with feedback on.
DESIGNATED_PHASE = {"crimper": "lift", "bottle": "transfer", "hammer": "approach"}
FLUCTUATION_CEILING_PCT = {"crimper": 28.0, "bottle": 12.0, "hammer": 25.0}
DIP_FRACTION = 0.6
SLIP_MARGIN = 1.1
BACKGROUND_PEAK = 1.0

# Frozen outputs of tune_rate_limit() and tune_plans(); tests re-run the sweeps.
TUNED_RATE_LIMIT = 0.365
TUNED_PEAKS = {"crimper": 2.36, "bottle": 2.16, "hammer": 2.16}


def rise_time(t, force, setpoint: float, fraction: float = 0.9) -> float:
    above = np.flatnonzero(np.asarray(force) >= fraction * setpoint)
    if above.size == 0:
        return float("inf")
    return float(t[above[0]] - t[0])


def step_response(
    setpoint: float = 1.6,
    gains: PidGains = DEFAULT_GAINS,
    plant: PlantParams = PlantParams(),
    sensor: SensorPath = NOISE_FREE,
    dt: float = 0.001,
    seed: int = 0,
):
    """Grasp-phase response ``(t, contact_force, measured_force)`` from contact."""
    obj = ObjectSpec("probe", 0.1, setpoint)
    log = simulate_object(obj, gains, ArmPlan(vibration_amplitude=0.0), True, dt, seed,
                          plant=plant, sensor=sensor)
    grasp = log.phase == TaskPhase.GRASP
    return log.t[grasp] - log.t[grasp][0], log.contact_force[grasp], log.measured_force[grasp]


def tune_rate_limit(target: float = 4.0, setpoint: float = 1.6, gains: PidGains = DEFAULT_GAINS,
                    tau: float = PlantParams().tau, tol: float = 1e-3) -> float:
    lo, hi = 0.05, 5.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        t, f, _ = step_response(setpoint, gains, PlantParams(mid, tau))
        if rise_time(t, f, setpoint) > target:
            lo = mid
        else:
            hi = mid
    return round(0.5 * (lo + hi), 3)


def plan_with_peak(name: str, peak: float, base: ArmPlan = ArmPlan()) -> ArmPlan:
    phase = DESIGNATED_PHASE[name]
    phases = tuple(
        ArmPhase(p.name, p.duration, peak if p.name == phase else BACKGROUND_PEAK)
        for p in base.phases
    )
    return replace(base, phases=phases)


def noise_free_dip(obj: ObjectSpec, plan: ArmPlan, plant: PlantParams = PlantParams(),
                   gains: PidGains = DEFAULT_GAINS) -> float:
    log = simulate_object(obj, gains, replace(plan, vibration_amplitude=0.0), True,
                          plant=plant, sensor=NOISE_FREE)
    return float(100.0 * (1.0 - log.true_force[log.in_motion].min() / obj.setpoint))


def slip_threshold_accel(obj: ObjectSpec) -> float:
    """External acceleration at which a grip held exactly at setpoint slips."""
    return obj.mu_eff * obj.setpoint / obj.mass - G


def tune_peak(obj: ObjectSpec, target_dip: float, plant: PlantParams = PlantParams(),
              gains: PidGains = DEFAULT_GAINS, tol: float = 0.005) -> float:
    floor = SLIP_MARGIN * slip_threshold_accel(obj)
    if noise_free_dip(obj, plan_with_peak(obj.name, floor), plant, gains) >= target_dip:
        return round(floor, 2)
    lo, hi = floor, ArmPlan().accel_limit
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if noise_free_dip(obj, plan_with_peak(obj.name, mid), plant, gains) < target_dip:
            lo = mid
        else:
            hi = mid
    return round(0.5 * (lo + hi), 2)


def tune_plans(objects=DEMO_OBJECTS, plant: PlantParams = PlantParams()) -> dict[str, float]:
    return {
        o.name: tune_peak(o, DIP_FRACTION * FLUCTUATION_CEILING_PCT[o.name], plant)
        for o in objects
    }


def frozen_plans(base: ArmPlan = ArmPlan()) -> dict[str, ArmPlan]:
    """Per-object plans with the frozen tuned disturbance peaks."""
    return {name: plan_with_peak(name, peak, base) for name, peak in TUNED_PEAKS.items()}

"""Fixed-step pick-and-place simulator with the force loop closed through the sensor."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from ..core import Baseline, QuadCalib, TempCharacterization, convert_arrays, force_from_strain_shift
from ..errors import ConfigError
from ..sensorsim import PlayOperator, SyntheticSensorConfig, sensor_wavelengths
from .arm import ArmPlan
from .pid import PID, DEFAULT_GAINS, PidGains
from .plant import PlantParams
from .slip import DROP_FRACTION, TAU_SLIP, ObjectSpec, SlipMode, SlipState, slip_step

CONTROL_PERIOD = 0.01


class TaskPhase(enum.IntEnum):
    HOME = 0
    APPROACH = 1
    GRASP = 2
    HOLD = 3
    LIFT = 4
    TRANSFER = 5
    PLACE = 6
    RELEASE = 7
    RETURN = 8


PLAN_PHASES = {"lift": TaskPhase.LIFT, "transfer": TaskPhase.TRANSFER, "approach": TaskPhase.PLACE}
MOTION_PHASES = (TaskPhase.LIFT, TaskPhase.TRANSFER, TaskPhase.PLACE)
ACTIVE_PHASES = (TaskPhase.GRASP, TaskPhase.HOLD) + MOTION_PHASES


@dataclass(frozen=True)
class TaskTiming:
    home: float = 0.5
    approach: float = 2.0
    grasp: float = 15.0
    release: float = 1.0
    return_home: float = 1.5


@dataclass(frozen=True)
class SensorPath:
    """Sensor used inside the loop: ground truth plus the characterization the
    controller converts with."""

    truth: SyntheticSensorConfig = SyntheticSensorConfig()
    calib: QuadCalib | None = None
    temp: TempCharacterization | None = None
    baseline: Baseline | None = None

    def resolved(self) -> tuple[QuadCalib, TempCharacterization, Baseline]:
        return (
            self.calib or self.truth.true_calib,
            self.temp or self.truth.true_temp,
            self.baseline or self.truth.baseline,
        )


@dataclass
class TaskLog:
    object: ObjectSpec
    feedback: bool
    seed: int
    dt: float
    t: np.ndarray
    phase: np.ndarray
    setpoint: np.ndarray
    measured_force: np.ndarray
    controller_output: np.ndarray
    engagement: np.ndarray
    contact_force: np.ndarray
    true_force: np.ndarray
    slip_mode: np.ndarray
    accel: np.ndarray
    events: list[tuple[float, str]] = field(default_factory=list)
    motion_start: float = 0.0

    def __len__(self) -> int:
        return len(self.t)

    def event_times(self, kind: str) -> list[float]:
        return [t for t, k in self.events if k == kind]

    @property
    def dropped(self) -> bool:
        return bool(self.event_times("drop"))

    @property
    def drop_phase(self) -> TaskPhase | None:
        drops = self.event_times("drop")
        if not drops:
            return None
        i = int(round(drops[0] / self.dt))
        return TaskPhase(int(self.phase[i]))

    @property
    def in_motion(self) -> np.ndarray:
        return np.isin(self.phase, [int(p) for p in MOTION_PHASES])

    def fluctuation_pct(self) -> float:
        """Largest in-motion deviation of the measured force from setpoint, in %."""
        m = self.in_motion
        sp = self.object.setpoint
        return float(100.0 * np.max(np.abs(self.measured_force[m] - sp)) / sp)

    def min_in_motion(self) -> float:
        return float(np.min(self.measured_force[self.in_motion]))


def _check_plan(plan: ArmPlan) -> None:
    names = [p.name for p in plan.phases]
    if names != list(PLAN_PHASES):
        raise ConfigError(f"plan phases must be {list(PLAN_PHASES)}, got {names}")


def _resolve_plans(objects: Sequence[ObjectSpec], plan) -> dict[str, ArmPlan]:
    names = [o.name for o in objects]
    if len(set(names)) != len(names):
        raise ConfigError("object names must be unique")
    if isinstance(plan, ArmPlan):
        plans = {n: plan for n in names}
    elif isinstance(plan, Mapping):
        if set(plan) != set(names):
            raise ConfigError(
                f"plan objects {sorted(plan)} do not match task objects {sorted(names)}"
            )
        plans = dict(plan)
    else:
        raise ConfigError("plan must be an ArmPlan or a mapping of object name to ArmPlan")
    for p in plans.values():
        _check_plan(p)
    return plans


def simulate_object(
    obj: ObjectSpec,
    gains: PidGains,
    plan: ArmPlan,
    feedback: bool,
    dt: float = 0.001,
    seed: int = 0,
    plant: PlantParams = PlantParams(),
    sensor: SensorPath = SensorPath(),
    timing: TaskTiming = TaskTiming(),
    tau_slip: float = TAU_SLIP,
    drop_fraction: float = DROP_FRACTION,
) -> TaskLog:
    if not 0 < dt <= 0.05:
        raise ConfigError("dt must lie in (0, 0.05]")
    _check_plan(plan)
    plan = replace(plan, vibration_seed=seed)
    calib, temp, base = sensor.resolved()
    truth = sensor.truth

    # Phase boundaries on the task clock.
    bounds = [(TaskPhase.HOME, timing.home), (TaskPhase.APPROACH, timing.approach),
              (TaskPhase.GRASP, timing.grasp), (TaskPhase.HOLD, plan.lead_time)]
    bounds += [(PLAN_PHASES[p.name], p.duration) for p in plan.phases]
    bounds += [(TaskPhase.RELEASE, timing.release), (TaskPhase.RETURN, timing.return_home)]
    edges = np.cumsum([0.0] + [d for _, d in bounds])
    n = int(round(edges[-1] / dt))
    t = np.arange(n) * dt
    phase = np.empty(n, dtype=np.int8)
    for (ph, _), lo, hi in zip(bounds, edges[:-1], edges[1:]):
        phase[(t >= lo - 1e-9) & (t < hi - 1e-9)] = int(ph)
    motion_start = float(edges[3])

    accel = np.zeros(n)
    window = (t >= motion_start) & (t <= motion_start + plan.duration)
    accel[window] = plan.sample(t[window] - motion_start)

    rng = np.random.default_rng(seed)
    if truth.noise_sigma > 0:
        noise = rng.normal(0.0, truth.noise_sigma, (n, 2))
        n1, n2 = noise[:, 0], noise[:, 1]
    else:
        n1 = n2 = np.zeros(n)
    ref_temp = truth.ref_temp

    def measure(eff_force: float, k: int) -> float:
        lam1, lam2 = sensor_wavelengths(eff_force, ref_temp, truth, n1[k], n2[k])
        dl1 = lam1 - base.lambda1_0
        dl2 = lam2 - base.lambda2_0
        return float(force_from_strain_shift(dl1 - temp.r * dl2, calib))

    every = max(1, int(round(CONTROL_PERIOD / dt)))
    ctrl_dt = every * dt
    decay = math.exp(-dt / plant.tau)
    rate_lim = plant.rate_limit
    sp = obj.setpoint
    pid = PID(gains)
    play = PlayOperator(truth.play_half_width) if truth.play_half_width > 0 else None
    pw = truth.play_weight

    controlled = {int(TaskPhase.GRASP)}
    if feedback:
        controlled |= {int(TaskPhase.HOLD)} | {int(p) for p in MOTION_PHASES}
    carried = {int(p) for p in MOTION_PHASES}
    released = {int(TaskPhase.RELEASE), int(TaskPhase.RETURN)}

    eff_log = np.empty(n)
    true_log = np.empty(n)
    out_log = np.empty(n)
    eng_log = np.empty(n)
    force_log = np.empty(n)
    mode_log = np.empty(n, dtype=np.int8)
    events: list[tuple[float, str]] = []

    E = F = 0.0
    u = 0.0
    slip = SlipState()
    prev_phase = -1
    phase_l = phase.tolist()
    accel_l = accel.tolist()
    for k in range(n):
        ph = phase_l[k]
        tk = k * dt
        if ph != prev_phase:
            if ph == TaskPhase.GRASP:
                pid.reset()
            elif prev_phase == TaskPhase.GRASP:
                events.append((tk, "grasp_complete"))
            if ph == TaskPhase.RELEASE:
                events.append((tk, "place"))
                events.append((tk, "release"))
            prev_phase = ph
        m_true = F * slip.contact_fraction
        eff = m_true if play is None else (1.0 - pw) * m_true + pw * play.step(m_true)
        eff_log[k] = eff
        true_log[k] = m_true
        if ph in controlled:
            if k % every == 0:
                u = pid.step(sp, measure(eff, k), ctrl_dt)
        else:
            u = 0.0
        if ph in released:
            E = 0.0
        else:
            rate = u if -rate_lim <= u <= rate_lim else (rate_lim if u > 0 else -rate_lim)
            E = E + rate * dt
            if E < 0.0:
                E = 0.0
        F = E + (F - E) * decay
        if F < 0.0:
            F = 0.0
        if ph in carried:
            before = slip.mode
            slip = slip_step(obj, F, accel_l[k], slip, dt, tau_slip, drop_fraction)
            if slip.mode != before:
                if slip.mode is SlipMode.SLIPPING:
                    events.append((tk, "slip_onset"))
                elif slip.mode is SlipMode.DROPPED:
                    if before is SlipMode.HOLDING:
                        events.append((tk, "slip_onset"))
                    events.append((tk, "drop"))
        out_log[k] = u
        eng_log[k] = E
        force_log[k] = F
        mode_log[k] = int(slip.mode)

    lam1, lam2 = sensor_wavelengths(eff_log, np.full(n, ref_temp), truth, n1, n2)
    measured = convert_arrays(lam1, lam2, base, calib, temp)["force"]
    return TaskLog(
        object=obj, feedback=feedback, seed=seed, dt=dt, t=t, phase=phase,
        setpoint=np.where(np.isin(phase, [int(p) for p in ACTIVE_PHASES]), sp, 0.0),
        measured_force=measured, controller_output=out_log, engagement=eng_log,
        contact_force=force_log, true_force=true_log, slip_mode=mode_log, accel=accel,
        events=sorted(events, key=lambda e: e[0]), motion_start=motion_start,
    )


def run_pick_and_place(
    objects: Sequence[ObjectSpec],
    gains: PidGains = DEFAULT_GAINS,
    plan: ArmPlan | Mapping[str, ArmPlan] | None = None,
    feedback: bool = True,
    dt: float = 0.001,
    seed: int = 0,
    **kwargs,
) -> dict[str, TaskLog]:
    """Run the task once per object; returns logs keyed by object name.

    ``plan`` may be one plan shared by every object or a mapping from object
    name to plan.  Object ``i`` is simulated with seed ``seed * 1000 + i``.
    """
    if plan is None:
        plan = ArmPlan()
    plans = _resolve_plans(objects, plan)
    return {
        obj.name: simulate_object(obj, gains, plans[obj.name], feedback, dt, seed * 1000 + i, **kwargs)
        for i, obj in enumerate(objects)
    }

"""Scenario files: one YAML document describing a reproducible experiment.

See docs/scenario-format.md for the full key reference.  Every key is
optional except ``seed``; unknown keys are rejected so typos never fall back
to defaults silently.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .control.arm import ArmPhase, ArmPlan
from .control.pid import DEFAULT_GAINS, PidGains
from .control.plant import PlantParams
from .control.slip import DEMO_OBJECTS, ObjectSpec
from .control.tuning import frozen_plans
from .core import Baseline, QuadCalib, TempCharacterization
from .errors import ConfigError, FbgError
from .sensorsim import BathProfile, RigProfile, SyntheticSensorConfig, tuned_sensor


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    sensor: SyntheticSensorConfig = field(default_factory=tuned_sensor)
    rig: RigProfile = RigProfile()
    bath: BathProfile = BathProfile()
    objects: tuple[ObjectSpec, ...] = DEMO_OBJECTS
    gains: PidGains = DEFAULT_GAINS
    plant: PlantParams = PlantParams()
    plans: dict = field(default_factory=frozen_plans)
    pnp_runs: int = 1
    dt: float = 0.001
    characterization: Path | None = None
    output_dir: Path | None = None

    def pnp_seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.pnp_runs)]


def _check_keys(section: str, data: dict, allowed) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected a mapping")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {', '.join(unknown)}")


def _dataclass_from(cls, section: str, data: dict, **extra):
    names = [f.name for f in fields(cls)]
    _check_keys(section, data, names)
    try:
        return cls(**{**data, **extra})
    except (TypeError, FbgError) as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def _sensor(data: dict, seed: int) -> SyntheticSensorConfig:
    data = dict(data)
    _check_keys("sensor", data, [f.name for f in fields(SyntheticSensorConfig)
                                 if f.name not in ("true_calib", "true_temp")] + ["calib", "temp"])
    kw = {}
    if "calib" in data:
        kw["true_calib"] = _dataclass_from(QuadCalib, "sensor.calib", data.pop("calib"))
    if "temp" in data:
        t = data.pop("temp")
        _check_keys("sensor.temp", t, ("kt1", "kt2"))
        try:
            kw["true_temp"] = TempCharacterization.from_sensitivities(t["kt1"], t["kt2"])
        except (KeyError, FbgError) as exc:
            raise ConfigError(f"sensor.temp: {exc}") from exc
    if "baseline" in data:
        kw["baseline"] = _dataclass_from(Baseline, "sensor.baseline", data.pop("baseline"))
    data.setdefault("rng_seed", seed)
    return _dataclass_from(SyntheticSensorConfig, "sensor", data, **kw)


def _plan(name: str, data: dict) -> ArmPlan:
    data = dict(data)
    section = f"plans.{name}"
    _check_keys(section, data, ("phases", "lead_time", "ramp_time", "accel_limit", "vibration_amplitude"))
    phases = data.pop("phases", None)
    if phases is not None:
        if not isinstance(phases, dict):
            raise ConfigError(f"{section}.phases: expected a mapping of phase name to settings")
        data["phases"] = tuple(
            _dataclass_from(ArmPhase, f"{section}.phases.{p}", spec, name=p) for p, spec in phases.items()
        )
    return _dataclass_from(ArmPlan, section, data)


def scenario_from_dict(doc: dict, base_dir: Path = Path(".")) -> ScenarioConfig:
    allowed = ("seed", "sensor", "rig", "bath", "objects", "gains", "plant", "plans",
               "pnp_runs", "dt", "characterization", "output_dir")
    _check_keys("scenario", doc, allowed)
    if "seed" not in doc:
        raise ConfigError("scenario: 'seed' is required (no implicit randomness)")
    seed = doc["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("scenario: seed must be a non-negative integer")
    kw: dict = {"seed": seed, "sensor": _sensor(doc.get("sensor", {}), seed)}
    if "rig" in doc:
        kw["rig"] = _dataclass_from(RigProfile, "rig", doc["rig"])
    if "bath" in doc:
        kw["bath"] = _dataclass_from(BathProfile, "bath", doc["bath"])
    if "objects" in doc:
        objs = doc["objects"]
        if not isinstance(objs, list) or not objs:
            raise ConfigError("objects: expected a non-empty list")
        kw["objects"] = tuple(_dataclass_from(ObjectSpec, f"objects[{i}]", o) for i, o in enumerate(objs))
    if "gains" in doc:
        kw["gains"] = _dataclass_from(PidGains, "gains", doc["gains"])
    if "plant" in doc:
        kw["plant"] = _dataclass_from(PlantParams, "plant", doc["plant"])
    plans = doc.get("plans", "tuned")
    if plans == "tuned":
        kw["plans"] = frozen_plans()
    elif isinstance(plans, dict):
        kw["plans"] = {name: _plan(name, spec or {}) for name, spec in plans.items()}
    else:
        raise ConfigError("plans: expected 'tuned' or a mapping of object name to plan")
    names = {o.name for o in kw.get("objects", DEMO_OBJECTS)}
    if set(kw["plans"]) != names:
        raise ConfigError(f"plans: objects {sorted(kw['plans'])} do not match {sorted(names)}")
    for key in ("pnp_runs", "dt"):
        if key in doc:
            kw[key] = doc[key]
    if kw.get("pnp_runs", 1) < 1:
        raise ConfigError("pnp_runs must be >= 1")
    if "characterization" in doc:
        path = (base_dir / doc["characterization"]).resolve()
        if not path.is_file():
            raise ConfigError(f"characterization file not found: {path}")
        kw["characterization"] = path
    if "output_dir" in doc:
        kw["output_dir"] = (base_dir / doc["output_dir"]).resolve()
    return ScenarioConfig(**kw)


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return scenario_from_dict(doc, path.parent)


def default_scenario(seed: int = 0) -> ScenarioConfig:
    return ScenarioConfig(seed=seed, sensor=tuned_sensor(rng_seed=seed))


def with_seed(config: ScenarioConfig, seed: int) -> ScenarioConfig:
    return replace(config, seed=seed, sensor=replace(config.sensor, rng_seed=seed))

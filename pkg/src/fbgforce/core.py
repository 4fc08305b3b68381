"""Dual-FBG wavelength to contact-force conversion.

FBG1 sits under the loaded uvula and sees strain plus temperature; FBG2 is
strain free and sees temperature only.  Scaling the FBG2 shift by the
sensitivity ratio ``r = kt1 / kt2`` removes the thermal part of the FBG1
shift, and the remaining strain shift is mapped to force by inverting the
quadratic calibration ``shift = a2*N**2 + a1*N + a0``.

Units throughout: picometres for wavelengths and shifts, newtons for force,
degrees Celsius for temperature.

Every conversion function accepts plain floats or numpy arrays and uses the
same floating point expression for both, so a sample converted alone is
bit-identical to the same sample converted inside a batch.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation, NegativeDiscriminant

R_TOLERANCE = 1e-9


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class WavelengthSample:
    t: float
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if not _finite(self.t, self.lambda1, self.lambda2):
            raise InvariantViolation("wavelength sample must be finite")
        if self.lambda1 <= 0 or self.lambda2 <= 0:
            raise InvariantViolation("peak wavelengths must be positive")


@dataclass(frozen=True)
class Baseline:
    """Unloaded peak wavelengths at the reference temperature (pm)."""

    lambda1_0: float
    lambda2_0: float

    def __post_init__(self):
        if not _finite(self.lambda1_0, self.lambda2_0):
            raise InvariantViolation("baseline must be finite")
        if self.lambda1_0 <= 0 or self.lambda2_0 <= 0:
            raise InvariantViolation("baseline wavelengths must be positive")


@dataclass(frozen=True)
class ShiftPair:
    dl1: float
    dl2: float


@dataclass(frozen=True)
class QuadCalib:
    """Quadratic strain-shift calibration ``a2*N**2 + a1*N + a0`` in pm."""

    a2: float
    a1: float
    a0: float
    force_max: float

    def __post_init__(self):
        if not _finite(self.a2, self.a1, self.a0, self.force_max):
            raise InvariantViolation("calibration coefficients must be finite")
        if self.a2 <= 0:
            raise InvariantViolation(f"a2 must be positive, got {self.a2}")
        if self.a1 <= 0:
            raise InvariantViolation(f"a1 must be positive, got {self.a1}")
        if self.force_max <= 0:
            raise InvariantViolation(f"force_max must be positive, got {self.force_max}")

    @property
    def vertex_shift(self) -> float:
        """Lowest strain shift the calibration can invert."""
        return self.a0 - self.a1 * self.a1 / (4.0 * self.a2)


@dataclass(frozen=True)
class TempCharacterization:
    kt1: float
    kt2: float
    r: float

    def __post_init__(self):
        if not _finite(self.kt1, self.kt2, self.r):
            raise InvariantViolation("temperature sensitivities must be finite")
        if self.kt1 <= 0 or self.kt2 <= 0:
            raise InvariantViolation("temperature sensitivities must be positive")
        if abs(self.r - self.kt1 / self.kt2) >= R_TOLERANCE:
            raise InvariantViolation(
                f"ratio r={self.r} inconsistent with kt1/kt2={self.kt1 / self.kt2}"
            )

    @classmethod
    def from_sensitivities(cls, kt1: float, kt2: float) -> "TempCharacterization":
        return cls(kt1, kt2, kt1 / kt2)


@dataclass(frozen=True)
class ForceReading:
    t: float
    force: float
    strain_shift: float
    thermal_shift: float
    temp_delta: float


# Published calibration of the prototype sensor.
NOMINAL_CALIB = QuadCalib(a2=144.99, a1=527.62, a0=-91.42, force_max=4.69)
NOMINAL_TEMP = TempCharacterization.from_sensitivities(24.29, 10.31)


def wavelength_shift(sample: WavelengthSample, base: Baseline) -> ShiftPair:
    return ShiftPair(sample.lambda1 - base.lambda1_0, sample.lambda2 - base.lambda2_0)


def strain_shift(shifts: ShiftPair, temp: TempCharacterization):
    """FBG1 shift with the scaled reference-grating shift removed."""
    return shifts.dl1 - temp.r * shifts.dl2


def temperature_delta(dl2, temp: TempCharacterization):
    return dl2 / temp.kt2


def strain_shift_from_force(n, calib: QuadCalib):
    if np.any(np.asarray(n) < 0):
        raise InvariantViolation("force must be non-negative")
    return calib.a2 * n * n + calib.a1 * n + calib.a0


def force_from_strain_shift(dl_eps, calib: QuadCalib, clamp_negative: bool = False):
    """Invert the calibration parabola on its increasing branch.

    Uses the conjugate form ``2*(d - a0) / (a1 + sqrt(disc))`` of the usual
    root formula; it is algebraically identical but has no cancellation when
    ``d`` is close to ``a0``, so a shift equal to the intercept maps to
    exactly zero force.
    """
    excess = dl_eps - calib.a0
    disc = calib.a1 * calib.a1 + 4.0 * calib.a2 * excess
    if np.any(np.asarray(disc) < 0):
        raise NegativeDiscriminant(
            f"strain shift below calibration vertex {calib.vertex_shift:.3f} pm"
        )
    force = 2.0 * excess / (calib.a1 + np.sqrt(disc))
    if clamp_negative:
        force = np.maximum(force, 0.0)
    return force


def compensated_force(
    sample: WavelengthSample,
    base: Baseline,
    calib: QuadCalib,
    temp: TempCharacterization,
    clamp_negative: bool = False,
) -> ForceReading:
    shifts = wavelength_shift(sample, base)
    eps = strain_shift(shifts, temp)
    force = force_from_strain_shift(eps, calib, clamp_negative)
    return ForceReading(
        t=sample.t,
        force=float(force),
        strain_shift=float(eps),
        thermal_shift=float(shifts.dl1 - eps),
        temp_delta=float(temperature_delta(shifts.dl2, temp)),
    )


def convert_arrays(
    lambda1,
    lambda2,
    base: Baseline,
    calib: QuadCalib,
    temp: TempCharacterization | None,
    clamp_negative: bool = False,
) -> dict[str, np.ndarray]:
    """Vectorised :func:`compensated_force` over whole wavelength columns.

    ``temp=None`` disables compensation (the raw FBG1 shift is inverted).
    """
    lambda1 = np.asarray(lambda1, dtype=float)
    lambda2 = np.asarray(lambda2, dtype=float)
    shifts = ShiftPair(lambda1 - base.lambda1_0, lambda2 - base.lambda2_0)
    if temp is None:
        eps = shifts.dl1
        temp_delta = np.full_like(eps, np.nan)
    else:
        eps = strain_shift(shifts, temp)
        temp_delta = temperature_delta(shifts.dl2, temp)
    force = force_from_strain_shift(eps, calib, clamp_negative)
    return {
        "force": np.asarray(force, dtype=float),
        "strain_shift": eps,
        "thermal_shift": shifts.dl1 - eps,
        "temp_delta": temp_delta,
    }

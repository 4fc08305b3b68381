"""Temperature-compensated force sensing with a dual-FBG gripper sensor.

The package converts FBG peak wavelengths to contact force, fits the
calibrations that conversion needs, simulates the bench experiments and the
force-controlled pick-and-place task, and moves traces through files or a
TCP stream.
"""
from .core import (
    NOMINAL_CALIB,
    NOMINAL_TEMP,
    Baseline,
    ForceReading,
    QuadCalib,
    ShiftPair,
    TempCharacterization,
    WavelengthSample,
    compensated_force,
    convert_arrays,
    force_from_strain_shift,
    strain_shift,
    strain_shift_from_force,
    temperature_delta,
    wavelength_shift,
)
from .trace import Trace, TraceRecord

__version__ = "0.1.0"

__all__ = [
    "NOMINAL_CALIB", "NOMINAL_TEMP", "Baseline", "ForceReading", "QuadCalib", "ShiftPair",
    "TempCharacterization", "WavelengthSample", "compensated_force", "convert_arrays",
    "force_from_strain_shift", "strain_shift", "strain_shift_from_force", "temperature_delta",
    "wavelength_shift", "Trace", "TraceRecord", "__version__",
]

"""Calibration fits and the metrology figures derived from them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import QuadCalib
from .errors import (
    DegenerateSystem,
    InsufficientData,
    InvariantViolation,
    LengthMismatch,
    NoOverlap,
    ZeroDivisor,
)

HYSTERESIS_GRID_STEP = 0.01
HYSTERESIS_MIN_POINTS = 50


@dataclass(frozen=True)
class ForceCalPoint:
    force: float
    shift: float

    def __post_init__(self):
        if not (math.isfinite(self.force) and math.isfinite(self.shift)):
            raise InvariantViolation("calibration point must be finite")
        if self.force < 0:
            raise InvariantViolation("calibration force must be non-negative")


@dataclass(frozen=True)
class TempCalPoint:
    temperature: float
    shift: float

    def __post_init__(self):
        if not (math.isfinite(self.temperature) and math.isfinite(self.shift)):
            raise InvariantViolation("calibration point must be finite")


@dataclass(frozen=True)
class FitReport:
    coefficients: tuple[float, ...]  # highest power first
    r_squared: float
    rmse: float
    n_points: int

    @property
    def slope(self) -> float:
        return self.coefficients[-2]

    @property
    def intercept(self) -> float:
        return self.coefficients[-1]


@dataclass(frozen=True)
class HysteresisReport:
    grid: np.ndarray
    deviation_pct: np.ndarray
    max_pct: float
    force_at_max: float
    full_scale_shift: float


@dataclass(frozen=True)
class MetrologySummary:
    sensitivity: float
    resolution: float
    noise_equiv_force: float
    rmse_force: float
    pct_error: float


def _xy(points, xname: str) -> tuple[np.ndarray, np.ndarray]:
    points = list(points)
    x = np.array([getattr(p, xname) for p in points], dtype=float)
    y = np.array([p.shift for p in points], dtype=float)
    return x, y


def _polyfit(x: np.ndarray, y: np.ndarray, order: int) -> FitReport:
    # Columns are scaled to unit max-abs before the SVD solve so the
    # conditioning does not depend on the units of x.
    scale = float(np.max(np.abs(x))) or 1.0
    design = np.vander(x / scale, order + 1)
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < order + 1:
        raise DegenerateSystem(f"design matrix rank {rank} < {order + 1}")
    coef = coef / scale ** np.arange(order, -1, -1)
    fitted = np.polyval(coef, x)
    resid = y - fitted
    ss_res = float(resid @ resid)
    centred = y - y.mean()
    ss_tot = float(centred @ centred)
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return FitReport(
        coefficients=tuple(float(c) for c in coef),
        r_squared=r2,
        rmse=math.sqrt(ss_res / len(x)),
        n_points=len(x),
    )


def fit_quadratic_xy(force, shift) -> tuple[QuadCalib, FitReport]:
    force = np.asarray(force, dtype=float)
    shift = np.asarray(shift, dtype=float)
    if force.shape != shift.shape:
        raise LengthMismatch("force and shift arrays differ in length")
    if len(np.unique(force)) < 3:
        raise InsufficientData("quadratic fit needs at least 3 distinct forces")
    report = _polyfit(force, shift, 2)
    a2, a1, a0 = report.coefficients
    return QuadCalib(a2, a1, a0, float(force.max())), report


def fit_quadratic(points: Iterable[ForceCalPoint]) -> tuple[QuadCalib, FitReport]:
    """Least-squares ``shift = a2*f**2 + a1*f + a0`` through the points.

    ``force_max`` of the returned calibration is the largest observed force.
    Raises :class:`InvariantViolation` if the fitted curve is not increasing
    on ``f >= 0`` (``a2 <= 0`` or ``a1 <= 0``).
    """
    return fit_quadratic_xy(*_xy(points, "force"))


def fit_linear_xy(temperature, shift) -> FitReport:
    temperature = np.asarray(temperature, dtype=float)
    shift = np.asarray(shift, dtype=float)
    if temperature.shape != shift.shape:
        raise LengthMismatch("temperature and shift arrays differ in length")
    if len(np.unique(temperature)) < 2:
        raise InsufficientData("linear fit needs at least 2 distinct temperatures")
    return _polyfit(temperature, shift, 1)


def fit_linear(points: Iterable[TempCalPoint]) -> FitReport:
    return fit_linear_xy(*_xy(points, "temperature"))


def sensitivity_ratio(kt1: float, kt2: float) -> float:
    if kt2 == 0:
        raise ZeroDivisor("reference grating sensitivity is zero")
    return kt1 / kt2


def metrology(
    calib: QuadCalib | None,
    max_shift: float | None,
    max_force: float,
    interrogator_resolution: float = 1.0,
    interrogator_noise: float = 3.0,
    rmse_force: float = 0.0,
) -> MetrologySummary:
    """Average sensitivity over the range and the figures that follow from it.

    When ``max_shift`` is None it is taken as the calibrated shift span
    between zero and ``max_force``.
    """
    if max_force <= 0:
        raise InvariantViolation("max_force must be positive")
    if max_shift is None:
        if calib is None:
            raise InvariantViolation("need either max_shift or a calibration")
        max_shift = calib.a2 * max_force**2 + calib.a1 * max_force
    sensitivity = max_shift / max_force
    if sensitivity <= 0:
        raise InvariantViolation("sensitivity must be positive")
    return MetrologySummary(
        sensitivity=sensitivity,
        resolution=interrogator_resolution / sensitivity,
        noise_equiv_force=interrogator_noise / sensitivity,
        rmse_force=rmse_force,
        pct_error=100.0 * rmse_force / max_force,
    )


def _binned_branch(force: np.ndarray, shift: np.ndarray, origin: float, step: float):
    # Average samples into grid-sized bins so repeated cycles and noise do
    # not produce a zig-zag interpolant.
    idx = np.rint((force - origin) / step).astype(np.int64)
    idx -= idx.min()
    counts = np.bincount(idx)
    keep = counts > 0
    fx = np.bincount(idx, weights=force)[keep] / counts[keep]
    fy = np.bincount(idx, weights=shift)[keep] / counts[keep]
    order = np.argsort(fx, kind="stable")
    return fx[order], fy[order]


def hysteresis_analysis(
    loading: Sequence[ForceCalPoint] | tuple[np.ndarray, np.ndarray],
    unloading: Sequence[ForceCalPoint] | tuple[np.ndarray, np.ndarray],
    full_scale_shift: float,
    grid_step: float = HYSTERESIS_GRID_STEP,
) -> HysteresisReport:
    """Branch deviation as a percentage of full-scale output.

    Each branch may be a sequence of :class:`ForceCalPoint` or a
    ``(force, shift)`` pair of arrays.  Both branches are resampled onto a
    shared force grid over their overlapping range.
    """
    if full_scale_shift <= 0:
        raise InvariantViolation("full_scale_shift must be positive")
    lf, ls = loading if isinstance(loading, tuple) else _xy(loading, "force")
    uf, us = unloading if isinstance(unloading, tuple) else _xy(unloading, "force")
    lf, ls, uf, us = (np.asarray(a, dtype=float) for a in (lf, ls, uf, us))
    if len(lf) < 2 or len(uf) < 2:
        raise NoOverlap("each branch needs at least two points")
    lo = max(lf.min(), uf.min())
    hi = min(lf.max(), uf.max())
    if not hi > lo:
        raise NoOverlap(f"branches do not overlap (lo={lo:.4g}, hi={hi:.4g})")
    n = max(HYSTERESIS_MIN_POINTS, int(math.floor((hi - lo) / grid_step)) + 1)
    grid = np.linspace(lo, hi, n)
    step = grid[1] - grid[0]
    lx, ly = _binned_branch(lf, ls, lo, step)
    ux, uy = _binned_branch(uf, us, lo, step)
    dev = 100.0 * np.abs(np.interp(grid, ux, uy) - np.interp(grid, lx, ly)) / full_scale_shift
    i = int(np.argmax(dev))
    return HysteresisReport(grid, dev, float(dev[i]), float(grid[i]), float(full_scale_shift))


def compare_to_reference(predicted, reference) -> tuple[float, float]:
    """RMSE between two aligned force series and RMSE as % of reference range."""
    p = np.asarray(predicted, dtype=float)
    r = np.asarray(reference, dtype=float)
    if p.shape != r.shape:
        raise LengthMismatch(f"series lengths differ: {p.shape} vs {r.shape}")
    if p.size == 0:
        raise InsufficientData("empty series")
    diff = p - r
    rmse = math.sqrt(float(diff @ diff) / diff.size)
    span = float(r.max() - r.min())
    if rmse == 0.0:
        return 0.0, 0.0
    pct = math.inf if span == 0.0 else 100.0 * rmse / span
    return rmse, pct


def split_branches(force, shift):
    """Split a cyclic record into loading and unloading ``(force, shift)`` pairs.

    Samples are classified by the sign of the force derivative; dwell samples
    (zero derivative) belong to neither branch.
    """
    force = np.asarray(force, dtype=float)
    shift = np.asarray(shift, dtype=float)
    direction = np.sign(np.gradient(force))
    load, unload = direction > 0, direction < 0
    return (force[load], shift[load]), (force[unload], shift[unload])


def branch_span(force, shift, grid_step: float = HYSTERESIS_GRID_STEP) -> float:
    """Full-scale output of one branch: range of its bin-averaged shift."""
    force = np.asarray(force, dtype=float)
    _, y = _binned_branch(force, np.asarray(shift, dtype=float), float(force.min()), grid_step)
    return float(y.max() - y.min())

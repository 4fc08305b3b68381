"""Slip onset detection from a measured force series."""
from __future__ import annotations

import numpy as np


def rolling_slope(force, dt: float, window: float) -> np.ndarray:
    """Least-squares slope over a trailing window; NaN until the window fills."""
    y = np.asarray(force, dtype=float)
    m = max(2, int(round(window / dt)) + 1)
    out = np.full(y.shape, np.nan)
    if len(y) < m:
        return out
    k = np.arange(m, dtype=float)
    kc = k - k.mean()
    # Correlate with the centred ramp: sum(kc * y[i-m+1 .. i]).
    num = np.convolve(y, kc[::-1], mode="valid")
    out[m - 1:] = num / (kc @ kc) / dt
    return out


def detect_slip_event(force, dt: float, window: float = 0.1, slope_threshold: float = 0.5,
                      active=None) -> list[tuple[float, int]]:
    """Times and indices where the windowed slope first drops below ``-slope_threshold``.

    Consecutive below-threshold samples form one event, reported at the
    first sample of the run.  ``active`` masks the samples eligible for
    detection (hold and motion phases in a task log).
    """
    slope = rolling_slope(force, dt, window)
    below = np.nan_to_num(slope, nan=0.0) < -slope_threshold
    if active is not None:
        below &= np.asarray(active, dtype=bool)
    starts = np.flatnonzero(below & ~np.concatenate([[False], below[:-1]]))
    return [(float(i * dt), int(i)) for i in starts]

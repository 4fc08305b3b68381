"""Columnar container for timestamped wavelength traces."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np

from .core import WavelengthSample
from .errors import InvariantViolation, LengthMismatch

OPTIONAL_COLUMNS = ("true_force", "load_cell", "temp")


class TraceRecord(NamedTuple):
    t: float
    lambda1: float
    lambda2: float
    true_force: Optional[float] = None
    load_cell: Optional[float] = None
    temp: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Trace:
    """Wavelength trace stored as parallel numpy columns.

    The optional columns are ``None`` when absent.  Simulated traces fill all
    of them; files recorded from hardware usually carry only the wavelengths
    and perhaps a load-cell channel.
    """

    t: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    true_force: Optional[np.ndarray] = None
    load_cell: Optional[np.ndarray] = None
    temp: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.t)
        for name in ("t", "lambda1", "lambda2") + OPTIONAL_COLUMNS:
            col = getattr(self, name)
            if col is None:
                continue
            col = np.asarray(col, dtype=float)
            col.setflags(write=False)
            object.__setattr__(self, name, col)
            if len(col) != n:
                raise LengthMismatch(f"column {name} has {len(col)} rows, expected {n}")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise InvariantViolation("trace timestamps must be strictly increasing")
        if not (np.all(np.isfinite(self.lambda1)) and np.all(np.isfinite(self.lambda2))):
            raise InvariantViolation("wavelength columns must be finite")
        if n and (self.lambda1.min() <= 0 or self.lambda2.min() <= 0):
            raise InvariantViolation("wavelengths must be positive")

    def __len__(self) -> int:
        return len(self.t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        for name in ("t", "lambda1", "lambda2") + OPTIONAL_COLUMNS:
            a, b = getattr(self, name), getattr(other, name)
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True

    @property
    def columns(self) -> tuple[str, ...]:
        return ("t", "lambda1", "lambda2") + tuple(
            c for c in OPTIONAL_COLUMNS if getattr(self, c) is not None
        )

    def samples(self) -> Iterator[WavelengthSample]:
        for t, l1, l2 in zip(self.t.tolist(), self.lambda1.tolist(), self.lambda2.tolist()):
            yield WavelengthSample(t, l1, l2)

    def records(self) -> Iterator[TraceRecord]:
        opt = [getattr(self, c) for c in OPTIONAL_COLUMNS]
        for i in range(len(self)):
            yield TraceRecord(
                float(self.t[i]),
                float(self.lambda1[i]),
                float(self.lambda2[i]),
                *(None if col is None else float(col[i]) for col in opt),
            )

    @classmethod
    def from_records(cls, records) -> "Trace":
        records = list(records)
        if not records:
            return cls(np.empty(0), np.empty(0), np.empty(0))
        cols = list(zip(*records))
        kwargs = {}
        for i, name in enumerate(OPTIONAL_COLUMNS, start=3):
            values = cols[i] if i < len(cols) else (None,) * len(records)
            present = [v is not None for v in values]
            if any(present) and not all(present):
                raise InvariantViolation(f"column {name} missing in some records")
            kwargs[name] = np.array(values, dtype=float) if all(present) else None
        return cls(np.array(cols[0]), np.array(cols[1]), np.array(cols[2]), **kwargs)

    def slice(self, mask) -> "Trace":
        kw = {
            name: (None if getattr(self, name) is None else getattr(self, name)[mask])
            for name in ("t", "lambda1", "lambda2") + OPTIONAL_COLUMNS
        }
        return Trace(**kw, meta=dict(self.meta))

"""Trace CSV files, characterization documents and task-log exports."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

import numpy as np

from ..core import Baseline, QuadCalib, TempCharacterization
from ..errors import InvariantViolation, MonotonicityError, ParseError, SchemaError
from ..trace import Trace, TraceRecord

log = logging.getLogger(__name__)

# Field name -> CSV header name.  The first three are mandatory.
TRACE_HEADER = {
    "t": "t_s",
    "lambda1": "fbg1_pm",
    "lambda2": "fbg2_pm",
    "true_force": "true_force_n",
    "load_cell": "load_cell_n",
    "temp": "temp_c",
}
_FIELD_FOR_HEADER = {v: k for k, v in TRACE_HEADER.items()}

CHARACTERIZATION_SCHEMA = "fbgforce.characterization"
CHARACTERIZATION_VERSION = 1
R_LOAD_TOLERANCE = 1e-6


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file in the same directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- traces -----------------------------------------------------------------

def trace_to_csv(trace: Trace | Iterable[TraceRecord]) -> str:
    if not isinstance(trace, Trace):
        trace = Trace.from_records(trace)
    names = trace.columns
    cols = [getattr(trace, n).tolist() for n in names]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([TRACE_HEADER[n] for n in names])
    # repr() of a Python float is the shortest string that parses back to the
    # same double, which makes the round-trip exact.
    writer.writerows([repr(v) for v in row] for row in zip(*cols))
    return buf.getvalue()


def write_trace(path, trace: Trace | Iterable[TraceRecord]) -> None:
    atomic_write_text(path, trace_to_csv(trace))


def parse_trace(text: str, source: str = "<string>") -> Trace:
    """Parse trace CSV text.

    Unknown columns are skipped; their names are kept in
    ``trace.meta["ignored_columns"]`` and a warning is logged.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file, header row required", 1) from None
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise ParseError("duplicate column in header", 1)
    missing = [TRACE_HEADER[f] for f in ("t", "lambda1", "lambda2") if TRACE_HEADER[f] not in header]
    if missing:
        raise ParseError(f"missing mandatory column(s) {', '.join(missing)}", 1)
    known = [(i, _FIELD_FOR_HEADER[h]) for i, h in enumerate(header) if h in _FIELD_FOR_HEADER]
    ignored = [h for h in header if h not in _FIELD_FOR_HEADER]
    if ignored:
        log.warning("%s: ignoring %d unknown column(s): %s", source, len(ignored), ", ".join(ignored))

    columns: dict[str, list[float]] = {name: [] for _, name in known}
    prev_t = -math.inf
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
        for i, name in known:
            cell = row[i].strip()
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(f"column {header[i]}: not a number: {cell!r}", lineno) from None
            if not math.isfinite(value):
                raise ParseError(f"column {header[i]}: non-finite value {cell!r}", lineno)
            columns[name].append(value)
        t = columns["t"][-1]
        if not t > prev_t:
            raise MonotonicityError(f"time {t!r} does not increase (previous {prev_t!r})", lineno)
        prev_t = t
        if columns["lambda1"][-1] <= 0 or columns["lambda2"][-1] <= 0:
            raise ParseError("wavelengths must be positive", lineno)

    arrays = {name: np.array(vals, dtype=float) for name, vals in columns.items()}
    return Trace(**arrays, meta={"source": str(source), "ignored_columns": ignored})


def read_trace(path) -> Trace:
    with open(path, newline="") as fh:
        return parse_trace(fh.read(), source=str(path))


# -- characterization ---------------------------------------------------------

@dataclass(frozen=True)
class CharacterizationFile:
    """Everything needed to turn wavelengths into force.

    Any section may be None while a characterization is built up step by
    step (temperature first, then force, or the reverse); conversion needs
    ``calib`` and ``baseline``.  ``temp`` is None for an uncompensated sensor.
    """

    calib: QuadCalib | None
    temp: TempCharacterization | None = None
    baseline: Baseline | None = None
    provenance: dict = field(default_factory=dict)


def characterization_to_dict(char: CharacterizationFile) -> dict:
    c = char.calib
    return {
        "schema": CHARACTERIZATION_SCHEMA,
        "schema_version": CHARACTERIZATION_VERSION,
        "quad": None if c is None else {"a2": c.a2, "a1": c.a1, "a0": c.a0, "force_max": c.force_max},
        "temperature": None if char.temp is None else
        {"kt1": char.temp.kt1, "kt2": char.temp.kt2, "r": char.temp.r},
        "baseline": None if char.baseline is None else
        {"lambda1_0": char.baseline.lambda1_0, "lambda2_0": char.baseline.lambda2_0},
        "provenance": dict(char.provenance),
    }


def _section(doc: dict, key: str, fields: tuple[str, ...], optional: bool) -> dict | None:
    if key not in doc:
        raise SchemaError(f"missing section {key!r}")
    sec = doc[key]
    if sec is None:
        if optional:
            return None
        raise SchemaError(f"section {key!r} may not be null")
    if not isinstance(sec, dict):
        raise SchemaError(f"section {key!r} must be an object")
    out = {}
    for f in fields:
        v = sec.get(f)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(f"{key}.{f} must be a number")
        out[f] = float(v)
    return out


def characterization_from_dict(doc) -> CharacterizationFile:
    if not isinstance(doc, dict):
        raise SchemaError("characterization must be a JSON object")
    if doc.get("schema") != CHARACTERIZATION_SCHEMA:
        raise SchemaError(f"not a characterization document (schema={doc.get('schema')!r})")
    if doc.get("schema_version") != CHARACTERIZATION_VERSION:
        raise SchemaError(
            f"unsupported schema_version {doc.get('schema_version')!r}, "
            f"expected {CHARACTERIZATION_VERSION}"
        )
    quad = _section(doc, "quad", ("a2", "a1", "a0", "force_max"), optional=True)
    temp = _section(doc, "temperature", ("kt1", "kt2", "r"), optional=True)
    base = _section(doc, "baseline", ("lambda1_0", "lambda2_0"), optional=True)
    prov = doc.get("provenance", {})
    if not isinstance(prov, dict):
        raise SchemaError("provenance must be an object")

    tc = None
    if temp is not None:
        if temp["kt1"] <= 0 or temp["kt2"] <= 0:
            raise InvariantViolation("temperature sensitivities must be positive")
        ratio = temp["kt1"] / temp["kt2"]
        if abs(temp["r"] - ratio) >= R_LOAD_TOLERANCE:
            raise InvariantViolation(f"stored r={temp['r']} inconsistent with kt1/kt2={ratio}")
        # Within the load tolerance the stored ratio is a rounded copy of kt1/kt2.
        r = temp["r"] if abs(temp["r"] - ratio) < 1e-9 else ratio
        tc = TempCharacterization(temp["kt1"], temp["kt2"], r)
    return CharacterizationFile(
        calib=None if quad is None else QuadCalib(**quad),
        temp=tc,
        baseline=None if base is None else Baseline(**base),
        provenance=prov,
    )


def now_utc() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def store_characterization(path, char: CharacterizationFile) -> None:
    atomic_write_text(path, json.dumps(characterization_to_dict(char), indent=2) + "\n")


def load_characterization(path) -> CharacterizationFile:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    return characterization_from_dict(doc)


# -- task logs ----------------------------------------------------------------

TASK_LOG_COLUMNS = (
    "t", "phase", "setpoint", "measured_force", "controller_output", "engagement",
    "contact_force", "true_force", "slip_mode", "accel",
)


def task_log_to_csv(log_) -> str:
    from ..control.task import TaskPhase

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TASK_LOG_COLUMNS)
    names = [TaskPhase(p).name.lower() for p in range(len(TaskPhase))]
    cols = [getattr(log_, c).tolist() for c in TASK_LOG_COLUMNS]
    for row in zip(*cols):
        row = list(row)
        row[1] = names[row[1]]
        writer.writerow(row)
    return buf.getvalue()

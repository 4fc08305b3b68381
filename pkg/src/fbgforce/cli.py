"""``fbgforce`` command line: one workflow per invocation, composed through files.

Every command prints a single JSON object on stdout.  Exit status is 0 on
success, 1 when the workflow fails (bad data, invariant violation, I/O) and
2 for usage errors.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .calib import (
    branch_span,
    compare_to_reference,
    fit_linear_xy,
    fit_quadratic_xy,
    hysteresis_analysis,
    metrology,
    split_branches,
)
from .control.task import run_pick_and_place
from .core import Baseline, TempCharacterization, convert_arrays
from .errors import FbgError, SchemaError
from .scenario import ScenarioConfig, default_scenario, load_scenario, with_seed
from .sensorsim import live_rig_source, simulate_bath, simulate_rig
from .streamio.files import (
    CharacterizationFile,
    atomic_write_text,
    load_characterization,
    parse_trace,
    store_characterization,
    task_log_to_csv,
    write_trace,
)
from .streamio.stream import serve_stream
from .trace import Trace

log = logging.getLogger("fbgforce")

FORCE_COLUMN = "force_n"
TARE_FRACTION = 0.01


class UsageError(Exception):
    pass


def _emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


def _read_text(path) -> str:
    with open(path, newline="") as fh:
        return fh.read()


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _load_trace(path) -> tuple[Trace, str]:
    text = _read_text(path)
    return parse_trace(text, source=str(path)), text


def _reference(trace: Trace, name: str | None) -> tuple[np.ndarray, str]:
    order = [name] if name else ["load_cell", "true_force"]
    for col in order:
        values = getattr(trace, col, None)
        if values is not None:
            return values, col
    raise SchemaError(f"trace has no reference force column ({' or '.join(order)})")


def _tare(trace: Trace, force: np.ndarray) -> Baseline:
    """Mean wavelengths over the unloaded samples of a calibration record."""
    unloaded = force <= force.min() + TARE_FRACTION * (force.max() - force.min())
    return Baseline(float(trace.lambda1[unloaded].mean()), float(trace.lambda2[unloaded].mean()))


def _parse_pair(text: str) -> tuple[float, float]:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"expected two comma-separated numbers, got {text!r}") from None
    return a, b


def _char_or_empty(path) -> CharacterizationFile:
    return load_characterization(path) if path else CharacterizationFile(calib=None)


def _provenance(args, **fields) -> dict:
    prov = {k: v for k, v in fields.items() if v is not None}
    if getattr(args, "created", None):
        prov["created"] = args.created
    return prov


def _scenario(args) -> ScenarioConfig:
    if getattr(args, "scenario", None):
        cfg = load_scenario(args.scenario)
    else:
        cfg = default_scenario()
    if getattr(args, "seed", None) is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


# -- calibrate ------------------------------------------------------------------

def cmd_calibrate_force(args) -> dict:
    trace, text = _load_trace(args.input)
    force, ref_name = _reference(trace, args.reference)
    base_char = _char_or_empty(args.char)
    if args.baseline:
        baseline = Baseline(*_parse_pair(args.baseline))
    elif base_char.baseline is not None:
        baseline = base_char.baseline
    else:
        baseline = _tare(trace, force)
    dl1 = trace.lambda1 - baseline.lambda1_0
    if args.compensate:
        if base_char.temp is None:
            raise SchemaError("--compensate needs a characterization with a temperature section (--char)")
        shift = dl1 - base_char.temp.r * (trace.lambda2 - baseline.lambda2_0)
    else:
        shift = dl1
    calib, report = fit_quadratic_xy(force, shift)
    char = CharacterizationFile(
        calib=calib,
        temp=base_char.temp,
        baseline=baseline,
        provenance={
            **base_char.provenance,
            "force_fit": _provenance(
                args, source_sha256=_sha256(text), reference=ref_name, compensated=args.compensate,
                r_squared=report.r_squared, rmse_pm=report.rmse, n_points=report.n_points,
            ),
        },
    )
    store_characterization(args.out, char)
    return {
        "command": "calibrate force", "out": str(args.out), "reference": ref_name,
        "a2": calib.a2, "a1": calib.a1, "a0": calib.a0, "force_max": calib.force_max,
        "r_squared": report.r_squared, "rmse_pm": report.rmse, "n_points": report.n_points,
        "baseline": [baseline.lambda1_0, baseline.lambda2_0],
    }


def cmd_calibrate_temp(args) -> dict:
    trace, text = _load_trace(args.input)
    if trace.temp is None:
        raise SchemaError("trace has no temp_c column")
    mask = trace.t >= args.t_min
    if args.t_max is not None:
        mask &= trace.t <= args.t_max
    temp = trace.temp[mask]
    fit1 = fit_linear_xy(temp, trace.lambda1[mask])
    fit2 = fit_linear_xy(temp, trace.lambda2[mask])
    tc = TempCharacterization.from_sensitivities(fit1.slope, fit2.slope)
    base_char = _char_or_empty(args.char)
    char = replace(base_char, temp=tc, provenance={
        **base_char.provenance,
        "temp_fit": _provenance(
            args, source_sha256=_sha256(text), r_squared_fbg1=fit1.r_squared,
            r_squared_fbg2=fit2.r_squared, n_points=fit1.n_points,
        ),
    })
    store_characterization(args.out, char)
    return {
        "command": "calibrate temp", "out": str(args.out), "kt1": tc.kt1, "kt2": tc.kt2, "r": tc.r,
        "r_squared_fbg1": fit1.r_squared, "r_squared_fbg2": fit2.r_squared, "n_points": fit1.n_points,
    }


# -- convert / evaluate -------------------------------------------------------------

def _converter(char: CharacterizationFile, uncompensated: bool):
    if char.calib is None:
        raise SchemaError("characterization has no force calibration (quad is null)")
    if char.baseline is None:
        raise SchemaError("characterization has no baseline")
    temp = None if uncompensated else char.temp
    return lambda l1, l2, clamp: convert_arrays(l1, l2, char.baseline, char.calib, temp, clamp)


def cmd_convert(args) -> dict:
    char = load_characterization(args.char)
    convert = _converter(char, args.uncompensated)
    text = _read_text(args.input)
    trace = parse_trace(text, source=str(args.input))
    force = convert(trace.lambda1, trace.lambda2, args.clamp)["force"]

    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if FORCE_COLUMN in header:
        col = header.index(FORCE_COLUMN)
        for row, f in zip(body, force.tolist()):
            row[col] = repr(f)
    else:
        header.append(FORCE_COLUMN)
        for row, f in zip(body, force.tolist()):
            row.append(repr(f))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(body)
    atomic_write_text(args.out, buf.getvalue())
    return {
        "command": "convert", "out": str(args.out), "n_samples": len(trace),
        "compensated": char.temp is not None and not args.uncompensated,
        "force_min": float(force.min()) if len(force) else None,
        "force_max": float(force.max()) if len(force) else None,
        "ignored_columns": [c for c in trace.meta["ignored_columns"] if c != FORCE_COLUMN],
    }


def cmd_evaluate(args) -> dict:
    char = load_characterization(args.char)
    trace, _ = _load_trace(args.input)
    ref, ref_name = _reference(trace, args.reference)
    mask = trace.t >= args.t_min
    force = _converter(char, args.uncompensated)(trace.lambda1[mask], trace.lambda2[mask], args.clamp)["force"]
    rmse, pct = compare_to_reference(force, ref[mask])
    return {
        "command": "evaluate", "reference": ref_name, "n_samples": int(mask.sum()),
        "rmse_n": rmse, "rmse_pct_of_range": pct,
        "max_abs_error_n": float(np.max(np.abs(force - ref[mask]))),
    }


# -- analysis -------------------------------------------------------------------------

def cmd_analyze_hysteresis(args) -> dict:
    trace, _ = _load_trace(args.input)
    force, ref_name = _reference(trace, args.reference)
    if args.char:
        char = load_characterization(args.char)
        baseline, temp = char.baseline or _tare(trace, force), char.temp
    else:
        baseline, temp = _tare(trace, force), None
    shift = trace.lambda1 - baseline.lambda1_0
    if temp is not None:
        shift = shift - temp.r * (trace.lambda2 - baseline.lambda2_0)
    load, unload = split_branches(force, shift)
    fso = branch_span(*load, grid_step=args.grid_step)
    report = hysteresis_analysis(load, unload, fso, grid_step=args.grid_step)
    if args.out:
        lines = ["force_n,deviation_pct"] + [
            f"{g!r},{d!r}" for g, d in zip(report.grid.tolist(), report.deviation_pct.tolist())
        ]
        atomic_write_text(args.out, "\n".join(lines) + "\n")
    return {
        "command": "analyze hysteresis", "reference": ref_name, "max_pct": report.max_pct,
        "force_at_max_n": report.force_at_max, "full_scale_shift_pm": report.full_scale_shift,
    }


def cmd_metrology(args) -> dict:
    calib = None
    if args.char:
        calib = load_characterization(args.char).calib
    if args.max_shift is None and calib is None:
        raise UsageError("metrology needs --max-shift or --char with a force calibration")
    max_force = args.max_force if args.max_force is not None else (calib.force_max if calib else None)
    if max_force is None:
        raise UsageError("metrology needs --max-force")
    m = metrology(calib, args.max_shift, max_force, args.resolution, args.noise, args.rmse_force)
    return {
        "command": "metrology", "max_force_n": max_force,
        "sensitivity_pm_per_n": m.sensitivity, "resolution_n": m.resolution,
        "noise_equiv_force_n": m.noise_equiv_force, "rmse_force_n": m.rmse_force,
        "pct_error": m.pct_error,
    }


# -- simulation --------------------------------------------------------------------------

def cmd_sim_rig(args) -> dict:
    cfg = _scenario(args)
    rig = cfg.rig if args.cycles is None else replace(cfg.rig, cycle_count=args.cycles)
    trace = simulate_rig(cfg.sensor, rig)
    write_trace(args.out, trace)
    return {"command": "sim rig", "out": str(args.out), "n_samples": len(trace),
            "cycles": rig.cycle_count, "seed": cfg.sensor.rng_seed}


def cmd_sim_bath(args) -> dict:
    cfg = _scenario(args)
    trace = simulate_bath(cfg.sensor, cfg.bath)
    write_trace(args.out, trace)
    return {"command": "sim bath", "out": str(args.out), "n_samples": len(trace),
            "heating_start_s": cfg.bath.heating_start, "seed": cfg.sensor.rng_seed}


def cmd_sim_pnp(args) -> dict:
    cfg = _scenario(args)
    feedback = args.feedback == "on"
    seeds = cfg.pnp_seeds() if args.runs is None else [cfg.seed + i for i in range(args.runs)]
    out_dir = Path(args.out_dir) if args.out_dir else cfg.output_dir
    runs = []
    for seed in seeds:
        logs = run_pick_and_place(cfg.objects, cfg.gains, cfg.plans, feedback, cfg.dt, seed, plant=cfg.plant)
        objects = {}
        for name, lg in logs.items():
            objects[name] = {
                "dropped": lg.dropped,
                "drop_phase": lg.drop_phase.name.lower() if lg.dropped else None,
                "drop_time_s": lg.event_times("drop")[0] if lg.dropped else None,
                "fluctuation_pct": lg.fluctuation_pct(),
                "min_force_in_motion_n": lg.min_in_motion(),
                "setpoint_n": lg.object.setpoint,
            }
            if out_dir is not None:
                out_dir.mkdir(parents=True, exist_ok=True)
                atomic_write_text(out_dir / f"pnp_{args.feedback}_{name}_seed{seed}.csv", task_log_to_csv(lg))
        runs.append({"seed": seed, "dropped": sum(o["dropped"] for o in objects.values()), "objects": objects})
    n_obj = len(cfg.objects)
    return {
        "command": "sim pnp", "feedback": args.feedback, "objects": n_obj, "runs": runs,
        "dropped": f"{runs[0]['dropped']}/{n_obj}" if len(runs) == 1 else
        [f"{r['dropped']}/{n_obj}" for r in runs],
        "total_drops": sum(r["dropped"] for r in runs),
    }


# -- serve ----------------------------------------------------------------------------------

def cmd_serve(args) -> dict:
    if args.input:
        source, _ = _load_trace(args.input)
        label = str(args.input)
    else:
        cfg = _scenario(args)
        source = live_rig_source(cfg.sensor, cfg.rig)
        label = "live rig simulator"
    server = serve_stream(source, port=args.port, rate=args.rate, host=args.host,
                          min_subscribers=args.min_subscribers)
    print(json.dumps({"event": "listening", "host": server.address[0], "port": server.port,
                      "rate_hz": args.rate, "source": label}), flush=True)
    try:
        server.wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return {"command": "serve", "frames": server.stats.frames, "subscribers": server.stats.connected,
            "disconnected_slow": server.stats.dropped_slow}


# -- parser ---------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fbgforce", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log warnings to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="fit calibration curves").add_subparsers(dest="what", required=True)
    f = cal.add_parser("force", help="quadratic force calibration from a rig trace")
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--out", required=True)
    f.add_argument("--char", help="existing characterization to extend")
    f.add_argument("--reference", choices=["load_cell", "true_force"])
    f.add_argument("--compensate", action="store_true",
                   help="fit the temperature-compensated strain shift (needs --char with temperature)")
    f.add_argument("--baseline", help="unloaded wavelengths 'fbg1,fbg2' in pm (default: tare)")
    f.add_argument("--created", help="creation timestamp to record in provenance")
    f.set_defaults(func=cmd_calibrate_force)

    t = cal.add_parser("temp", help="linear temperature sensitivities from a bath trace")
    t.add_argument("--in", dest="input", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--char", help="existing characterization to extend")
    t.add_argument("--t-min", type=float, default=0.0, help="ignore samples before this time (s)")
    t.add_argument("--t-max", type=float)
    t.add_argument("--created")
    t.set_defaults(func=cmd_calibrate_temp)

    c = sub.add_parser("convert", help="append a force column to a trace")
    c.add_argument("--char", required=True)
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--clamp", action="store_true", help="clamp negative forces to zero")
    c.add_argument("--uncompensated", action="store_true", help="ignore the reference grating")
    c.set_defaults(func=cmd_convert)

    e = sub.add_parser("evaluate", help="compare converted force with a reference channel")
    e.add_argument("--char", required=True)
    e.add_argument("--in", dest="input", required=True)
    e.add_argument("--reference", choices=["load_cell", "true_force"])
    e.add_argument("--t-min", type=float, default=-np.inf)
    e.add_argument("--clamp", action="store_true")
    e.add_argument("--uncompensated", action="store_true")
    e.set_defaults(func=cmd_evaluate)

    an = sub.add_parser("analyze", help="trace analyses").add_subparsers(dest="what", required=True)
    h = an.add_parser("hysteresis", help="loading/unloading branch deviation")
    h.add_argument("--in", dest="input", required=True)
    h.add_argument("--char")
    h.add_argument("--reference", choices=["load_cell", "true_force"])
    h.add_argument("--grid-step", type=float, default=0.01)
    h.add_argument("--out", help="write the deviation curve as CSV")
    h.set_defaults(func=cmd_analyze_hysteresis)

    m = sub.add_parser("metrology", help="sensitivity, resolution and noise floor")
    m.add_argument("--char")
    m.add_argument("--max-shift", type=float)
    m.add_argument("--max-force", type=float)
    m.add_argument("--resolution", type=float, default=1.0, help="interrogator resolution (pm)")
    m.add_argument("--noise", type=float, default=3.0, help="interrogator noise (pm)")
    m.add_argument("--rmse-force", type=float, default=0.0, help="validation RMSE (N)")
    m.set_defaults(func=cmd_metrology)

    sim = sub.add_parser("sim", help="simulated experiments").add_subparsers(dest="what", required=True)
    for name, func, helptext in (("rig", cmd_sim_rig, "cyclic loading on the calibration rig"),
                                 ("bath", cmd_sim_bath, "clamped sensor in a heated bath")):
        s = sim.add_parser(name, help=helptext)
        s.add_argument("--scenario")
        s.add_argument("--seed", type=int)
        s.add_argument("--out", required=True)
        if name == "rig":
            s.add_argument("--cycles", type=int)
        s.set_defaults(func=func)
    s = sim.add_parser("pnp", help="pick-and-place with or without force feedback")
    s.add_argument("--scenario")
    s.add_argument("--seed", type=int)
    s.add_argument("--feedback", choices=["on", "off"], required=True)
    s.add_argument("--runs", type=int, help="number of consecutive seeds (default from scenario)")
    s.add_argument("--out-dir", help="write one log CSV per object and seed")
    s.set_defaults(func=cmd_sim_pnp)

    sv = sub.add_parser("serve", help="stream a trace (or the live rig simulator) over TCP")
    sv.add_argument("--in", dest="input", help="trace to replay (default: live simulator)")
    sv.add_argument("--scenario")
    sv.add_argument("--seed", type=int)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--port", type=int, default=0)
    sv.add_argument("--rate", type=float, default=100.0)
    sv.add_argument("--min-subscribers", type=int, default=1)
    sv.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        summary = args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"fbgforce: error: {exc}", file=sys.stderr)
        return 2
    except (FbgError, OSError, ValueError) as exc:
        print(f"fbgforce: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _emit(summary)
    return 0

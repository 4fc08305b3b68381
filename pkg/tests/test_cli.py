import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from fbgforce.cli import main
from fbgforce.errors import ConfigError
from fbgforce.scenario import default_scenario, load_scenario, scenario_from_dict
from fbgforce.streamio import read_trace, subscribe, write_trace

ROOT = Path(__file__).resolve().parents[1]
REFERENCE_SCENARIO = ROOT / "scenarios" / "reference.yaml"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out.strip()
    return code, (json.loads(out) if code == 0 else out)


def digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["sim", "rig", "--seed", "3", "--out", str(d / "rig.csv")]) == 0
    assert main(["sim", "bath", "--seed", "4", "--out", str(d / "bath.csv")]) == 0
    return d


class TestCalibrateConvert:
    def test_calibrate_force(self, workdir, capsys):
        code, s = run(capsys, "calibrate", "force", "--in", workdir / "rig.csv", "--out", workdir / "char.json")
        assert code == 0
        assert s["r_squared"] >= 0.99
        doc = json.loads((workdir / "char.json").read_text())
        assert doc["schema_version"] == 1 and doc["quad"]["a2"] == s["a2"]

    def test_convert_appends_and_is_idempotent(self, workdir, capsys):
        char = workdir / "char.json"
        if not char.exists():
            run(capsys, "calibrate", "force", "--in", workdir / "rig.csv", "--out", char)
        before = digest(workdir / "rig.csv")
        code, s = run(capsys, "convert", "--char", char, "--in", workdir / "rig.csv", "--out", workdir / "f1.csv")
        assert code == 0 and s["n_samples"] > 0
        assert digest(workdir / "rig.csv") == before
        header = (workdir / "f1.csv").read_text().splitlines()[0].split(",")
        assert header[-1] == "force_n" and header.count("force_n") == 1
        run(capsys, "convert", "--char", char, "--in", workdir / "f1.csv", "--out", workdir / "f2.csv")
        assert digest(workdir / "f1.csv") == digest(workdir / "f2.csv")
        # The appended column is an unknown column for the trace reader.
        assert read_trace(workdir / "f1.csv").meta["ignored_columns"] == ["force_n"]

    def test_evaluate_rig(self, workdir, capsys):
        run(capsys, "calibrate", "force", "--in", workdir / "rig.csv", "--out", workdir / "char.json")
        code, s = run(capsys, "evaluate", "--char", workdir / "char.json", "--in", workdir / "rig.csv")
        assert code == 0 and s["rmse_n"] <= 0.15

    def test_temperature_then_compensated_force(self, workdir, capsys):
        code, t = run(capsys, "calibrate", "temp", "--in", workdir / "bath.csv", "--t-min", "32",
                      "--out", workdir / "temp.json")
        assert code == 0
        assert t["r"] == pytest.approx(24.29 / 10.31, rel=0.01)
        code, f = run(capsys, "calibrate", "force", "--in", workdir / "rig.csv", "--char", workdir / "temp.json",
                      "--compensate", "--out", workdir / "full.json")
        assert code == 0 and f["r_squared"] >= 0.99
        code, e = run(capsys, "evaluate", "--char", workdir / "full.json", "--in", workdir / "bath.csv",
                      "--t-min", "32")
        code_u, u = run(capsys, "evaluate", "--char", workdir / "full.json", "--in", workdir / "bath.csv",
                        "--t-min", "32", "--uncompensated")
        # The residual is the loop of the hysteretic sensor at the 0.1 N clamp,
        # not temperature: compensation removes most of the drift error.
        assert u["rmse_n"] > 0.18
        assert e["rmse_n"] < 0.1 and e["rmse_n"] < 0.5 * u["rmse_n"]

    def test_compensate_without_temperature(self, workdir, capsys):
        code, _ = run(capsys, "calibrate", "force", "--in", workdir / "rig.csv", "--compensate",
                      "--out", workdir / "x.json")
        assert code == 1
        assert not (workdir / "x.json").exists()

    def test_byte_identical_reruns(self, workdir, capsys):
        for name in ("a", "b"):
            run(capsys, "calibrate", "force", "--in", workdir / "rig.csv", "--out", workdir / f"{name}.json")
        assert digest(workdir / "a.json") == digest(workdir / "b.json")

    def test_created_timestamp_is_explicit(self, workdir, capsys):
        run(capsys, "calibrate", "force", "--in", workdir / "rig.csv", "--created", "2024-01-01T00:00:00Z",
            "--out", workdir / "c.json")
        doc = json.loads((workdir / "c.json").read_text())
        assert doc["provenance"]["force_fit"]["created"] == "2024-01-01T00:00:00Z"


class TestAnalysis:
    def test_hysteresis(self, workdir, capsys):
        code, s = run(capsys, "analyze", "hysteresis", "--in", workdir / "rig.csv", "--out", workdir / "h.csv")
        assert code == 0
        assert s["max_pct"] == pytest.approx(4.83, abs=0.2)
        assert 2.0 <= s["force_at_max_n"] <= 3.4
        assert (workdir / "h.csv").read_text().startswith("force_n,deviation_pct")

    def test_metrology(self, capsys):
        code, s = run(capsys, "metrology", "--max-shift", 5482.78, "--max-force", 4.69, "--rmse-force", 0.12)
        assert code == 0
        assert s["sensitivity_pm_per_n"] == pytest.approx(5482.78 / 4.69)
        assert s["pct_error"] == pytest.approx(100 * 0.12 / 4.69)

    def test_metrology_usage(self, capsys):
        assert main(["metrology", "--max-force", "4.69"]) == 2


class TestSimulation:
    def test_pnp_feedback_off(self, capsys):
        code, s = run(capsys, "sim", "pnp", "--scenario", REFERENCE_SCENARIO, "--feedback", "off")
        assert code == 0
        assert s["dropped"] == "3/3"
        phases = {k: v["drop_phase"] for k, v in s["runs"][0]["objects"].items()}
        assert phases == {"crimper": "lift", "bottle": "transfer", "hammer": "place"}

    def test_pnp_feedback_on_writes_logs(self, tmp_path, capsys):
        code, s = run(capsys, "sim", "pnp", "--feedback", "on", "--out-dir", tmp_path)
        assert code == 0 and s["dropped"] == "0/3"
        files = sorted(p.name for p in tmp_path.iterdir())
        assert files == [f"pnp_on_{n}_seed0.csv" for n in ("bottle", "crimper", "hammer")]
        header = (tmp_path / files[0]).read_text().splitlines()[0]
        assert header.startswith("t,phase,setpoint,measured_force")

    def test_sim_outputs_reproducible(self, tmp_path, capsys):
        for name in ("a", "b"):
            main(["sim", "rig", "--seed", "9", "--cycles", "1", "--out", str(tmp_path / f"{name}.csv")])
        assert digest(tmp_path / "a.csv") == digest(tmp_path / "b.csv")
        main(["sim", "rig", "--seed", "10", "--cycles", "1", "--out", str(tmp_path / "c.csv")])
        assert digest(tmp_path / "a.csv") != digest(tmp_path / "c.csv")


class TestErrors:
    def test_usage_errors_exit_2(self, capsys):
        for argv in ([], ["bogus"], ["convert", "--char", "x"], ["sim", "pnp", "--feedback", "maybe"]):
            with pytest.raises(SystemExit) as err:
                main(argv)
            assert err.value.code == 2

    def test_runtime_errors_exit_1(self, tmp_path, capsys):
        (tmp_path / "bad.csv").write_text("t_s,fbg1_pm,fbg2_pm\n1,1,1\n0,1,1\n")
        assert main(["analyze", "hysteresis", "--in", str(tmp_path / "bad.csv")]) == 1
        assert "MonotonicityError" in capsys.readouterr().err
        assert main(["convert", "--char", str(tmp_path / "missing.json"), "--in", str(tmp_path / "bad.csv"),
                     "--out", str(tmp_path / "o.csv")]) == 1

    def test_bad_scenario_exit_1(self, tmp_path, capsys):
        (tmp_path / "s.yaml").write_text("seed: 1\ngians: {}\n")
        assert main(["sim", "pnp", "--scenario", str(tmp_path / "s.yaml"), "--feedback", "on"]) == 1
        assert "gians" in capsys.readouterr().err


class TestScenario:
    def test_reference_file_equals_default(self):
        assert load_scenario(REFERENCE_SCENARIO) == default_scenario()

    def test_seed_required(self):
        with pytest.raises(ConfigError):
            scenario_from_dict({})

    @pytest.mark.parametrize("doc", [
        {"seed": 0, "sensor": {"noise": 1}},
        {"seed": -1},
        {"seed": True},
        {"seed": 0, "plans": {"crimper": {}}},
        {"seed": 0, "plans": "fastest"},
        {"seed": 0, "characterization": "nope.json"},
        {"seed": 0, "sensor": {"calib": {"a2": -1, "a1": 1, "a0": 0, "force_max": 1}}},
        {"seed": 0, "pnp_runs": 0},
        {"seed": 0, "objects": []},
    ])
    def test_invalid(self, doc, tmp_path):
        with pytest.raises(ConfigError):
            scenario_from_dict(doc, tmp_path)

    def test_references_resolved_relative_to_file(self, tmp_path):
        (tmp_path / "c.json").write_text("{}")
        (tmp_path / "s.yaml").write_text(yaml.safe_dump({"seed": 2, "characterization": "c.json"}))
        cfg = load_scenario(tmp_path / "s.yaml")
        assert cfg.characterization == (tmp_path / "c.json").resolve()
        assert cfg.sensor.rng_seed == 2


def test_serve_subprocess(workdir):
    trace = read_trace(workdir / "rig.csv").slice(slice(0, 5000))
    write_trace(workdir / "short.csv", trace)
    proc = subprocess.Popen(
        [sys.executable, "-m", "fbgforce", "serve", "--in", str(workdir / "short.csv"), "--rate", "20000"],
        stdout=subprocess.PIPE, text=True,
    )
    try:
        hello = json.loads(proc.stdout.readline())
        sub = subscribe((hello["host"], hello["port"]))
        samples = list(sub)
        summary = json.loads(proc.stdout.readline())
        assert proc.wait(20) == 0
    finally:
        proc.kill()
    assert sub.ended
    assert np.array_equal([s.lambda1 for s in samples], trace.lambda1)
    assert summary["frames"] == len(trace)

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbgforce.core import NOMINAL_CALIB, NOMINAL_TEMP, convert_arrays
from fbgforce.errors import InvariantViolation
from fbgforce.sensorsim import (
    TUNED_PLAY_HALF_WIDTH,
    TUNED_PLAY_WEIGHT,
    BathProfile,
    PlayOperator,
    RigProfile,
    SyntheticSensorConfig,
    bath_force,
    forward_sensor,
    live_rig_source,
    play_hysteresis,
    simulate_bath,
    simulate_rig,
    tune_hysteresis,
)

CLEAN = SyntheticSensorConfig(noise_sigma=0.0)


class TestForwardModel:
    def test_inverse_of_forward_rig(self):
        tr = simulate_rig(CLEAN, RigProfile(cycle_count=1))
        out = convert_arrays(tr.lambda1, tr.lambda2, CLEAN.baseline, NOMINAL_CALIB, NOMINAL_TEMP)
        assert np.max(np.abs(out["force"] - tr.true_force)) <= 1e-9

    def test_inverse_of_forward_bath(self):
        tr = simulate_bath(CLEAN, BathProfile())
        out = convert_arrays(tr.lambda1, tr.lambda2, CLEAN.baseline, NOMINAL_CALIB, NOMINAL_TEMP)
        assert np.max(np.abs(out["force"] - tr.true_force)) <= 1e-9
        assert out["temp_delta"][-1] == pytest.approx(11.0)

    @given(st.floats(0.0, 4.69), st.floats(-10.0, 30.0))
    def test_single_sample(self, f, temp):
        s = forward_sensor(f, temp, CLEAN)
        out = convert_arrays([s.lambda1], [s.lambda2], CLEAN.baseline, NOMINAL_CALIB, NOMINAL_TEMP)
        assert out["force"][0] == pytest.approx(f, abs=1e-9)

    def test_noisy_forward_needs_rng(self):
        with pytest.raises(InvariantViolation):
            forward_sensor(1.0, 25.0, SyntheticSensorConfig(noise_sigma=3.0))

    def test_seeded_determinism(self):
        cfg = SyntheticSensorConfig(rng_seed=7)
        assert simulate_rig(cfg, RigProfile(cycle_count=1)) == simulate_rig(cfg, RigProfile(cycle_count=1))
        other = simulate_rig(replace(cfg, rng_seed=8), RigProfile(cycle_count=1))
        assert other != simulate_rig(cfg, RigProfile(cycle_count=1))

    def test_noise_level(self):
        cfg = SyntheticSensorConfig(noise_sigma=144.0, rng_seed=3)
        tr = simulate_rig(cfg, RigProfile(cycle_count=2))
        clean = simulate_rig(replace(cfg, noise_sigma=0.0), RigProfile(cycle_count=2))
        assert np.std(tr.lambda1 - clean.lambda1) == pytest.approx(144.0, rel=0.02)

    def test_peak_beyond_range(self):
        with pytest.raises(InvariantViolation):
            simulate_rig(CLEAN, RigProfile(peak_force=5.0))


class TestPlay:
    @given(st.lists(st.floats(0, 5, allow_nan=False), min_size=1, max_size=60), st.floats(0, 1))
    def test_output_within_band(self, xs, w):
        x = np.array(xs)
        y = play_hysteresis(x, w)
        assert np.all(y >= x - w - 1e-12) and np.all(y <= x + w + 1e-12)

    @given(st.lists(st.floats(0, 5, allow_nan=False), min_size=1, max_size=60), st.floats(0, 1))
    def test_stateful_matches_vector(self, xs, w):
        op = PlayOperator(w)
        assert [op.step(x) for x in xs] == play_hysteresis(np.array(xs), w).tolist()

    def test_rate_independence(self):
        up = np.linspace(0, 3, 31)
        path = np.concatenate([up, up[::-1]])
        fine = np.interp(np.linspace(0, len(path) - 1, 10 * len(path)), np.arange(len(path)), path)
        coarse_y = play_hysteresis(path, 0.4)
        fine_y = play_hysteresis(fine, 0.4)
        assert coarse_y[-1] == pytest.approx(fine_y[-1])
        assert coarse_y.max() == pytest.approx(fine_y.max())

    def test_negative_width(self):
        with pytest.raises(InvariantViolation):
            play_hysteresis([0.0], -0.1)


class TestProfiles:
    def test_bath_force_shape(self):
        p = BathProfile()
        assert bath_force(np.array([0.0, 9.99]), p).tolist() == [0.0, 0.0]
        assert bath_force(np.array([11.0]), p)[0] == pytest.approx(p.press_peak)
        assert bath_force(np.array([p.heating_start, 100.0]), p) == pytest.approx([p.clamp_force] * 2)
        tail = bath_force(np.linspace(11.0, p.heating_start, 500), p)
        assert np.all(np.diff(tail) <= 1e-15)

    def test_bath_temperature_ramp(self):
        p = BathProfile()
        tr = simulate_bath(CLEAN, p)
        assert tr.temp[0] == p.start_temp and tr.temp[-1] == pytest.approx(p.end_temp)
        assert tr.t[-1] == pytest.approx(p.heating_start + 11.0 / p.heat_rate)

    def test_rig_cycles(self):
        tr = simulate_rig(CLEAN, RigProfile(cycle_count=3))
        above = tr.true_force > 0.5 * 4.69
        rising = np.flatnonzero(above[1:] & ~above[:-1])
        assert tr.true_force.max() == pytest.approx(4.69)
        assert len(rising) == 3

    def test_live_source_continuous(self):
        src = live_rig_source(CLEAN, RigProfile(cycle_count=1, dwell=0.1, peak_force=0.1, ramp_rate=1.0))
        ts = [next(src).t for _ in range(1000)]
        assert np.all(np.diff(ts) > 0)


class TestHysteresisTuning:
    def test_frozen_values_match_tuning(self):
        tuned = tune_hysteresis(CLEAN)
        assert tuned.play_half_width == pytest.approx(TUNED_PLAY_HALF_WIDTH)
        assert tuned.play_weight == pytest.approx(TUNED_PLAY_WEIGHT, abs=1e-4)
        assert tuned.max_pct == pytest.approx(4.83, abs=1e-3)
        assert tuned.force_at_max == pytest.approx(2.68, abs=0.01)

    def test_unreachable_target(self):
        with pytest.raises(InvariantViolation):
            tune_hysteresis(CLEAN, target_force=5.0)

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wearrhythm.errors import AllMissing, DayRejected, EmptySeries, InvalidSpec, LengthMismatch
from wearrhythm.preprocess import (MINUTES_PER_DAY, WindowSpec, build_day_series, gate_missing,
                                   interpolate_linear, minute_grid, resting_heart_rate, segment,
                                   smooth_sma, window_starts)

bpm = st.floats(30, 200, allow_nan=False)


def _rhr_loop(hr, steps):
    """Pseudocode transcription: carried value starts at 0."""
    pre = 0.0
    out = []
    for k in range(len(hr)):
        if sum(steps[k:k + 6]) == 0:
            pre = hr[k]
        out.append(pre)
    return out


class TestRestingHeartRate:
    def test_hand_example(self):
        out = resting_heart_rate([70, 72, 74, 76, 78, 80, 82], [0, 0, 0, 0, 0, 0, 5])
        assert list(out) == [70] * 7

    def test_all_rest_is_identity(self):
        hr = np.linspace(50, 90, 30)
        np.testing.assert_array_equal(resting_heart_rate(hr, np.zeros(30)), hr)

    def test_leading_activity_gives_zero(self):
        steps = np.zeros(20)
        steps[1:7] = 3
        out = resting_heart_rate(np.full(20, 60.0), steps)
        assert np.all(out[:7] == 0) and out[7] == 60

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            resting_heart_rate([1, 2], [0])

    @given(st.lists(st.tuples(bpm, st.integers(0, 3)), min_size=1, max_size=40))
    def test_matches_pseudocode(self, pairs):
        hr, steps = map(list, zip(*pairs))
        np.testing.assert_array_equal(resting_heart_rate(hr, steps), _rhr_loop(hr, steps))

    @given(st.lists(st.tuples(bpm, st.integers(0, 3)), min_size=1, max_size=40))
    def test_never_exceeds_max_hr(self, pairs):
        hr, steps = map(list, zip(*pairs))
        assert resting_heart_rate(hr, steps).max() <= max(hr)


class TestGate:
    def test_boundary(self):
        day = np.full(MINUTES_PER_DAY, 60.0)
        assert gate_missing(day)
        day[:144] = np.nan
        assert gate_missing(day)
        day[144] = np.nan
        assert not gate_missing(day)

    def test_fully_missing(self):
        assert not gate_missing(np.full(MINUTES_PER_DAY, np.nan))

    def test_build_rejects(self):
        hr = np.full(MINUTES_PER_DAY, 60.0)
        hr[:145] = np.nan
        with pytest.raises(DayRejected):
            build_day_series(hr, np.zeros(MINUTES_PER_DAY))


class TestInterpolate:
    def test_midpoint(self):
        filled, obs = interpolate_linear([60, np.nan, 70])
        assert filled[1] == 65
        assert list(obs) == [True, False, True]

    def test_three_gap(self):
        filled, _ = interpolate_linear([60, np.nan, np.nan, np.nan, 80])
        assert list(filled) == [60, 65, 70, 75, 80]

    def test_no_gaps_identity(self):
        x = np.array([1.0, 5.0, 2.0])
        np.testing.assert_array_equal(interpolate_linear(x)[0], x)

    def test_edges_extend_nearest(self):
        filled, _ = interpolate_linear([np.nan, 3, np.nan, 5, np.nan])
        assert list(filled) == [3, 3, 4, 5, 5]

    def test_all_missing(self):
        with pytest.raises(AllMissing):
            interpolate_linear([np.nan, np.nan])

    @given(st.floats(-5, 5), st.floats(-100, 100),
           arrays(bool, 30, elements=st.booleans()))
    def test_exact_on_affine(self, a, b, keep):
        keep[0] = keep[-1] = True
        x = np.arange(30.0)
        line = a * x + b
        filled, _ = interpolate_linear(np.where(keep, line, np.nan))
        np.testing.assert_allclose(filled, line, atol=1e-9)


class TestSMA:
    def test_constant(self):
        np.testing.assert_array_equal(smooth_sma(np.full(10, 3.0), 4), np.full(10, 3.0))

    def test_mean_of_three(self):
        assert smooth_sma([1, 2, 3], 3)[-1] == 2

    def test_hand_example(self):
        assert list(smooth_sma([1, 1, 4, 4], 2)) == [1, 1, 2.5, 4]

    def test_empty(self):
        with pytest.raises(EmptySeries):
            smooth_sma([], 3)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50), st.integers(1, 10))
    def test_trailing_definition(self, xs, w):
        out = smooth_sma(xs, w)
        for i, v in enumerate(out):
            ref = np.mean(xs[max(0, i - w + 1):i + 1])
            assert v == pytest.approx(ref, abs=1e-9)


class TestSegment:
    @pytest.mark.parametrize("overlap,count", [(0.5, 47), (0.0, 24), (0.25, 31)])
    def test_counts(self, overlap, count):
        spec = WindowSpec(60, overlap)
        wins = segment(np.arange(MINUTES_PER_DAY), spec)
        assert len(wins) == count
        assert all(w.size == 60 for w in wins)

    def test_non_integer_step_rejected(self):
        with pytest.raises(InvalidSpec):
            WindowSpec(60, 0.3333)

    @given(st.integers(1, 120), st.sampled_from([0.0, 0.25, 0.5, 0.75]))
    def test_tiling(self, width, overlap):
        try:
            spec = WindowSpec(width, overlap)
        except InvalidSpec:
            return
        starts = window_starts(MINUTES_PER_DAY, spec)
        assert starts[0] == 0
        assert np.all(np.diff(starts) == spec.step_minutes)
        assert starts[-1] + width <= MINUTES_PER_DAY < starts[-1] + spec.step_minutes + width


def test_minute_grid_last_and_sum():
    t0 = np.datetime64("2020-01-01", "ms")
    times = t0 + np.array([0, 30_000, 60_000, 90_000 * 1000], dtype="timedelta64[ms]")
    hr = minute_grid(times, [60, 62, 64, 99], t0, how="last")
    assert hr[0] == 62 and hr[1] == 64 and np.isnan(hr[2])
    steps = minute_grid(times, [1, 2, 3, 4], t0, how="sum")
    assert steps[0] == 3 and steps[1] == 3 and steps.sum() == 6


def test_build_day_series_order_of_operations():
    rng = np.random.default_rng(0)
    hr = 60 + rng.normal(0, 1, MINUTES_PER_DAY)
    hr[100:110] = np.nan
    steps = np.zeros(MINUTES_PER_DAY)
    steps[500:520] = 40
    day = build_day_series(hr, steps, sma_minutes=5, label=0)
    filled, observed = interpolate_linear(hr)
    np.testing.assert_allclose(day.rhr, smooth_sma(resting_heart_rate(filled, steps), 5))
    np.testing.assert_allclose(day.steps, smooth_sma(steps, 5))
    assert day.interpolated_fraction == pytest.approx(10 / MINUTES_PER_DAY)
    assert day.meta["sma_minutes"] == 5

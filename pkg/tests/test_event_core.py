"""
Unit tests for threshold sampling, event detection and stream merging.
"""

import numpy as np
import pytest

from src.errors import InvalidArgumentError
from src.event_core import (
    EVENT_DTYPE,
    Event,
    EventCameraConfig,
    EventStream,
    PixelEventState,
    PixelTrace,
    detect_events,
    merge_streams,
    pixel_rng,
    sample_pixel_thresholds,
)
from src.filter_engine import FilterState
from src.pixel_model import PixelBandwidthParams
from src.simulator import filter_trace


def ramp_trace(u0=5.0, rate=10.0, duration=0.1, n=777):
    """Infinite-bandwidth trace of u = u0 + rate·t on an irregularly aligned grid."""
    times = np.linspace(0.0, duration, n)
    return PixelTrace.ideal(times, u0 + rate * times)


def fresh_state(trace, cfg, pixel=(3, 4)):
    start = FilterState.steady(float(trace.log_sf[0]), float(trace.times[0]))
    return PixelEventState.start(pixel, start, sample_pixel_thresholds(cfg, pixel))


class TestCameraConfig:
    """Test camera parameter validation."""

    def test_defaults(self):
        cfg = EventCameraConfig()
        assert cfg.c_pos == 0.25 and cfg.c_neg == 0.25
        assert cfg.tau == 0.0

    def test_rejects_bad_values(self):
        with pytest.raises(InvalidArgumentError):
            EventCameraConfig(c_pos=0.0)
        with pytest.raises(InvalidArgumentError):
            EventCameraConfig(sigma_c=-0.1)
        with pytest.raises(InvalidArgumentError):
            EventCameraConfig(tau=-1e-3)

    def test_from_dict_case_insensitive(self):
        cfg = EventCameraConfig.from_dict({'C_pos': 0.3, 'C_neg': 0.2, 'seed': 7})
        assert cfg.c_pos == 0.3 and cfg.c_neg == 0.2 and cfg.seed == 7

    def test_from_dict_unknown_key(self):
        with pytest.raises(InvalidArgumentError):
            EventCameraConfig.from_dict({'threshold': 0.2})


class TestThresholds:
    """Test per-pixel contrast threshold sampling."""

    def test_no_spread_returns_nominal(self):
        cfg = EventCameraConfig(c_pos=0.3, c_neg=0.2)
        assert sample_pixel_thresholds(cfg, (5, 5)) == (0.2, 0.3)

    def test_standard_deviation(self):
        cfg = EventCameraConfig(c_pos=0.25, c_neg=0.25, sigma_c=0.03)
        rng = np.random.default_rng(0)
        draws = np.array([sample_pixel_thresholds(cfg, (0, 0), rng) for _ in range(100_000)])
        assert np.std(draws[:, 0]) == pytest.approx(0.03, rel=0.02)
        assert np.std(draws[:, 1]) == pytest.approx(0.03, rel=0.02)
        assert np.mean(draws[:, 1]) == pytest.approx(0.25, abs=1e-3)

    def test_floor(self):
        cfg = EventCameraConfig(c_pos=0.25, c_neg=0.25, sigma_c=10.0)
        rng = np.random.default_rng(1)
        draws = np.array([sample_pixel_thresholds(cfg, (0, 0), rng) for _ in range(2000)])
        assert np.all(draws >= 0.0025 - 1e-15)
        assert np.any(np.isclose(draws, 0.0025))

    def test_per_pixel_reproducible(self):
        cfg = EventCameraConfig(sigma_c=0.05, seed=42)
        assert sample_pixel_thresholds(cfg, (10, 3)) == sample_pixel_thresholds(cfg, (10, 3))
        assert sample_pixel_thresholds(cfg, (10, 3)) != sample_pixel_thresholds(cfg, (3, 10))

    def test_seed_changes_draws(self):
        a = pixel_rng(1, (2, 2)).normal()
        b = pixel_rng(2, (2, 2)).normal()
        assert a != b


class TestDetection:
    """Test threshold crossing detection on filter traces."""

    def test_constant_trace_no_events(self):
        times = np.linspace(0.0, 0.1, 50)
        trace = PixelTrace.ideal(times, np.full(times.size, 4.0))
        cfg = EventCameraConfig()
        events, _ = detect_events(trace, fresh_state(trace, cfg), cfg)
        assert events == []

    def test_ramp_event_times(self):
        """Events at j·C/r exactly, with the previous event time carried along."""
        cfg = EventCameraConfig(c_pos=0.25, c_neg=0.25)
        trace = ramp_trace(duration=0.09)
        events, _ = detect_events(trace, fresh_state(trace, cfg), cfg)

        assert len(events) == 3
        expected = [0.025, 0.05, 0.075]
        for event, t in zip(events, expected):
            assert event.p == 1
            assert abs(event.t_curr - t) < 1e-9
        assert events[0].t_prev == 0.0
        assert abs(events[1].t_prev - 0.025) < 1e-9
        assert (events[0].x, events[0].y) == (3, 4)

    def test_falling_ramp_negative_events(self):
        cfg = EventCameraConfig(c_pos=0.25, c_neg=0.2)
        trace = ramp_trace(u0=6.0, rate=-10.0, duration=0.09)
        events, _ = detect_events(trace, fresh_state(trace, cfg), cfg)

        assert [e.p for e in events] == [-1, -1, -1, -1]
        for j, event in enumerate(events, start=1):
            assert abs(event.t_curr - j * 0.02) < 1e-9

    def test_refractory_spacing(self):
        """With a refractory period the spacing becomes τ + C/r."""
        tau = 0.005
        cfg = EventCameraConfig(c_pos=0.25, c_neg=0.25, tau=tau)
        trace = ramp_trace(duration=0.1)
        events, state = detect_events(trace, fresh_state(trace, cfg), cfg)

        expected = [0.025, 0.055, 0.085]
        assert len(events) == len(expected)
        for event, t in zip(events, expected):
            assert abs(event.t_curr - t) < 1e-9
        assert abs(state.refractory_until - (0.085 + tau)) < 1e-9

    def test_crossings_inside_refractory_window_dropped(self):
        """A step larger than several thresholds yields one event per window."""
        times = np.linspace(0.0, 0.01, 101)
        u = np.where(times > 0.002, 6.0, 5.0)
        trace = PixelTrace.ideal(times, u)
        cfg = EventCameraConfig(c_pos=0.25, tau=1.0)
        events, _ = detect_events(trace, fresh_state(trace, cfg), cfg)
        assert len(events) == 1
        assert events[0].p == 1

    def test_step_without_refractory_fires_per_threshold(self):
        times = np.linspace(0.0, 0.01, 101)
        u = np.where(times > 0.002, 6.1, 5.0)
        trace = PixelTrace.ideal(times, u)
        cfg = EventCameraConfig(c_pos=0.25)
        events, _ = detect_events(trace, fresh_state(trace, cfg), cfg)
        assert len(events) == 4
        assert all(0.0019 - 1e-12 <= e.t_curr <= 0.0021 + 1e-12 for e in events)

    def test_filtered_trace_with_refractory_matches_dense_trace(self):
        """A finite-bandwidth trace gives the same events when resampled 1000x finer."""
        params = PixelBandwidthParams.default()
        tau = 1e-3
        cfg = EventCameraConfig(c_pos=0.25, c_neg=0.25, tau=tau)
        duration = 0.05
        times = np.linspace(0.0, duration, 251)
        u = 7.0 + 1.5 * np.sin(np.pi * times / duration)
        trace = filter_trace(params, times, np.diff(times), u)

        events, state = detect_events(trace, fresh_state(trace, cfg), cfg, params.omega_c_diff)
        t_curr = np.array([e.t_curr for e in events])
        polarity = [e.p for e in events]

        assert 1 in polarity and -1 in polarity
        assert np.all(np.diff(t_curr) >= tau - 1e-12)
        assert events[0].t_prev == 0.0
        assert all(b.t_prev == a.t_curr for a, b in zip(events, events[1:]))
        # Rising then falling input: positives first, then negatives
        assert polarity == sorted(polarity, reverse=True)
        assert state.refractory_until == pytest.approx(t_curr[-1] + tau)

        fine = np.linspace(0.0, duration, (times.size - 1) * 1000 + 1)
        dense = PixelTrace(times=fine,
                           log_sf=np.interp(fine, times, trace.log_sf),
                           log_diff=np.interp(fine, times, trace.log_diff))
        dense_events, _ = detect_events(dense, fresh_state(dense, cfg), cfg, params.omega_c_diff)

        assert [e.p for e in dense_events] == polarity
        dense_t = np.array([e.t_curr for e in dense_events])
        assert np.allclose(dense_t, t_curr, rtol=0, atol=times[1] - times[0])

    def test_trace_must_start_at_state_time(self):
        cfg = EventCameraConfig()
        trace = ramp_trace()
        state = PixelEventState.start((0, 0), FilterState.steady(5.0, 1.0), (0.25, 0.25))
        with pytest.raises(InvalidArgumentError):
            detect_events(trace, state, cfg)

    def test_trace_validation(self):
        with pytest.raises(InvalidArgumentError):
            PixelTrace(times=[0.0, 0.0], log_sf=[1.0, 1.0], log_diff=[1.0, 1.0])
        with pytest.raises(InvalidArgumentError):
            PixelTrace(times=[0.0, 1.0], log_sf=[1.0], log_diff=[1.0, 1.0])


class TestMerge:
    """Test global ordering of per-pixel event lists."""

    def per_pixel(self):
        return [
            [Event(1, 0, 1, 0.0, 0.002), Event(1, 0, -1, 0.002, 0.004)],
            [Event(0, 1, 1, 0.0, 0.002)],
            [Event(0, 0, -1, 0.0, 0.003), Event(0, 0, 1, 0.003, 0.005)],
            [],
            [Event(0, 0, 1, 0.0, 0.002)],
        ]

    def test_order(self):
        stream = merge_streams(self.per_pixel(), width=2, height=2, duration=0.01)
        keys = [(e['t'], e['y'], e['x'], e['p']) for e in stream.events]
        assert keys == sorted(keys)
        assert len(stream) == 6
        first = stream.to_events()[0]
        assert (first.x, first.y, first.t_curr) == (0, 0, 0.002)

    def test_independent_of_input_order(self):
        lists = self.per_pixel()
        reference = merge_streams(lists, 2, 2, 0.01).events.tobytes()
        rng = np.random.default_rng(5)
        for _ in range(5):
            order = rng.permutation(len(lists))
            shuffled = [lists[i] for i in order]
            assert merge_streams(shuffled, 2, 2, 0.01).events.tobytes() == reference

    def test_empty(self):
        stream = merge_streams([[], []], width=4, height=4, duration=1.0)
        assert len(stream) == 0
        assert stream.events.dtype == EVENT_DTYPE

    def test_record_layout(self):
        assert EVENT_DTYPE.itemsize == 21

    def test_stream_rejects_out_of_range_pixels(self):
        with pytest.raises(InvalidArgumentError):
            merge_streams([[Event(5, 0, 1, 0.0, 0.1)]], width=2, height=2, duration=1.0)

    def test_header(self):
        stream = EventStream(width=8, height=4, duration=0.5, fingerprint="abc", t_start=0.1)
        assert stream.header() == {'width': 8, 'height': 4, 'duration': 0.5,
                                   't_start': 0.1, 'fingerprint': "abc"}

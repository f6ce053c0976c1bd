import logging

import numpy as np
import pytest

from uavtwin.airsim import gen_clock_state
from uavtwin.exceptions import EmptySeriesException, InvalidParameterException, TimestampMismatchException
from uavtwin.scene import ClockSpec, Node, Position3, los_delay
from uavtwin.sync import (OffsetEstimate, TimeErrorSeries, beacon_calibrate, calibrate, compensate, correction_at,
                          filter_gnss, pairwise_tdoa, read_time_errors, rect_lowpass, sweep_windows, tdoa_variance,
                          window_samples, write_time_errors)

WINDOWS = (1, 3, 5, 11, 21, 31, 61, 121, 301, 601)
BEACON = Position3(0.0, 0.0, 40.0)


@pytest.fixture
def receivers():
    return [
        Node('rx1', 'rx', Position3(-800.0, -700.0, 20.0)),
        Node('rx2', 'rx', Position3(900.0, -800.0, 25.0)),
    ]


def series(errors, interval=1.0):
    return TimeErrorSeries(np.arange(len(errors)) * interval, errors)


class TestTimeErrorSeries:
    def test_non_uniform(self):
        with pytest.raises(TimestampMismatchException):
            TimeErrorSeries([0.0, 1.0, 3.0], [0.0, 0.0, 0.0])

    def test_shape_mismatch(self):
        with pytest.raises(TimestampMismatchException):
            TimeErrorSeries([0.0, 1.0], [0.0])

    def test_interpolation(self):
        s = series([0.0, 2.0, 4.0])
        assert s.interval == 1.0
        assert s.at(1.5) == pytest.approx(3.0)


class TestRectLowpass:
    def test_identity(self):
        s = series(np.random.default_rng(0).standard_normal(50))
        assert np.array_equal(rect_lowpass(s, 1.0).errors, s.errors)

    def test_constant(self):
        s = series(np.full(20, 3e-9))
        assert np.allclose(rect_lowpass(s, 7.0).errors, 3e-9, rtol=1e-12)

    def test_ramp_and_edges(self):
        s = series(np.arange(10.0))
        filtered = rect_lowpass(s, 5.0)
        assert len(filtered) == 10
        assert np.allclose(filtered.errors, s.errors)
        assert np.array_equal(filtered.times, s.times)

    def test_box_mean(self):
        filtered = rect_lowpass(series([0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0]), 3.0)
        assert np.allclose(filtered.errors, [0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0])

    def test_even_window_is_centered(self, caplog):
        caplog.set_level(logging.DEBUG, logger='sync')
        assert window_samples(31.0, 1.0) == 31
        assert not caplog.records
        assert window_samples(30.0, 1.0) == 29
        assert 'using 29' in caplog.text

        impulse = series(np.eye(1, 61, 30)[0])
        assert np.allclose(rect_lowpass(impulse, 30.0).errors[30], 1 / 29)

    def test_window_too_short(self):
        with pytest.raises(InvalidParameterException):
            rect_lowpass(series([0.0, 1.0, 2.0], interval=2.0), 1.0)

    def test_empty(self):
        with pytest.raises(EmptySeriesException):
            rect_lowpass(TimeErrorSeries([], []), 3.0)


class TestCalibration:
    def test_beacon_calibrate(self, receivers):
        noise = np.random.default_rng(1).standard_normal(200) * 0.1e-9
        offsets = {'rx1': 40e-9, 'rx2': -25e-9}
        measured = {rx.id: los_delay(BEACON, rx.position) + offsets[rx.id] + noise for rx in receivers}
        estimates = beacon_calibrate(BEACON, receivers, measured)
        for rx in receivers:
            assert estimates[rx.id].constant_offset == pytest.approx(offsets[rx.id], abs=0.05e-9)
            assert estimates[rx.id].residual_std == pytest.approx(np.std(noise))

    def test_missing_receiver(self, receivers):
        with pytest.raises(EmptySeriesException):
            beacon_calibrate(BEACON, receivers, {'rx1': [1e-6]})

    def test_calibrate_with_gnss(self, receivers):
        times = np.arange(100.0)
        drift = {'rx1': 2e-9 * np.sin(times / 20), 'rx2': 1e-9 * np.cos(times / 15)}
        gnss = {rx_id: TimeErrorSeries(times, d) for rx_id, d in drift.items()}
        measured = {
            rx.id: TimeErrorSeries(times, los_delay(BEACON, rx.position) + 10e-9 + drift[rx.id])
            for rx in receivers
        }
        estimates = calibrate(BEACON, receivers, measured, filter_gnss(gnss, 1.0))
        for estimate in estimates.values():
            assert estimate.constant_offset == pytest.approx(10e-9, abs=1e-15)
            assert estimate.residual_std < 1e-15

    def test_invalid_residual(self):
        with pytest.raises(InvalidParameterException):
            OffsetEstimate('rx1', 0.0, -1.0)


class TestCompensation:
    def test_compensate(self):
        times = np.arange(30.0)
        gnss = TimeErrorSeries(times, 1e-9 * np.sin(times))
        delays = {'rx1': TimeErrorSeries(times, 5e-9 + gnss.errors)}
        offsets = {'rx1': OffsetEstimate('rx1', 5e-9, 0.0)}
        corrected = compensate(delays, offsets, {'rx1': gnss})
        assert np.allclose(corrected['rx1'].errors, 0.0, atol=1e-18)

    def test_offset_only(self):
        delays = {'rx1': series([3.0, 3.0])}
        corrected = compensate(delays, {'rx1': OffsetEstimate('rx1', 1.0, 0.0)}, {})
        assert np.allclose(corrected['rx1'].errors, 2.0)
        assert np.allclose(correction_at(None, None, [0.0, 1.0]), 0.0)

    def test_no_overlap(self):
        delays = {'rx1': TimeErrorSeries([50.0, 51.0], [0.0, 0.0])}
        with pytest.raises(TimestampMismatchException):
            compensate(delays, {}, {'rx1': series(np.zeros(10))})

    def test_common_error_cancels(self):
        times = np.arange(20.0)
        common = 3e-9 * np.cos(times)
        d_i = TimeErrorSeries(times, 1e-6 + 4e-9 + common)
        d_j = TimeErrorSeries(times, 2e-6 - 1e-9 + common)
        tdoa = pairwise_tdoa(d_i, d_j, 1e-6, 2e-6)
        assert np.allclose(tdoa.errors, 5e-9, rtol=0, atol=1e-18)

    def test_pairwise_mismatch(self):
        with pytest.raises(TimestampMismatchException):
            pairwise_tdoa(series([0.0, 0.0]), series([0.0, 0.0, 0.0]), 0.0, 0.0)


class TestSweep:
    @pytest.fixture
    def clocks(self):
        spec = ClockSpec()
        return [
            gen_clock_state(5, spec.sigma_white, spec.drift_scale, spec.correlation_time, 3600.0, spec.gnss_noise,
                            key=(k, )) for k in (0, 1)
        ]

    def test_best_window_halves_variance(self, clocks):
        a, b = clocks
        raw_pair = TimeErrorSeries(a.drift_times, a.drift_errors - b.drift_errors)
        rows = sweep_windows(raw_pair, TimeErrorSeries(a.gnss_times, a.gnss_errors),
                             TimeErrorSeries(b.gnss_times, b.gnss_errors), WINDOWS)
        variances = [variance for _, variance in rows]
        assert [window for window, _ in rows] == list(map(float, WINDOWS))
        assert min(variances) <= tdoa_variance(raw_pair) / 2
        best = int(np.argmin(variances))
        assert 0 < best < len(WINDOWS) - 1
        assert variances[0] > variances[best] and variances[-1] > variances[best]

    def test_empty_variance(self):
        with pytest.raises(EmptySeriesException):
            tdoa_variance(TimeErrorSeries([], []))


class TestCsv:
    def test_write_read(self, tmpdir):
        s = TimeErrorSeries(np.arange(5.0) * 0.5, np.array([1e-9, -2.5e-9, 0.0, 3.25e-10, 7e-12]))
        path = write_time_errors(s, tmpdir / 'gnss_rx1.csv')
        assert path.read_text().splitlines()[0] == 't_seconds,error_seconds'
        loaded = read_time_errors(path)
        assert np.array_equal(loaded.times, s.times)
        assert np.array_equal(loaded.errors, s.errors)

    def test_missing_column(self, tmpdir):
        path = tmpdir / 'bad.csv'
        path.write_text('t,error\n0,1\n', encoding='utf-8')
        with pytest.raises(TimestampMismatchException):
            read_time_errors(path)

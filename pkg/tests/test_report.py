import math

import numpy as np
import pytest

from uavtwin.emitter import TdoaMeasurement
from uavtwin.exceptions import EmptySeriesException, InvalidParameterException
from uavtwin.radar import DelayDetection
from uavtwin.report import (DETECTION_COLUMNS, ERROR_COLUMNS, FIX_COLUMNS, TDOA_COLUMNS, build_report,
                            error_quantiles, read_fixes, run_name, write_report)
from uavtwin.scene import Position3
from uavtwin.solver import PositionFix


def sorted_quantile(values, q):
    ordered = sorted(values)
    h = (len(ordered) - 1) * q
    low = math.floor(h)
    high = min(low + 1, len(ordered) - 1)
    return ordered[low] + (h - low) * (ordered[high] - ordered[low])


def make_fixes(count=10):
    fixes = []
    for i in range(count):
        truth = np.array([10.0 * i, -5.0 * i, 30.0])
        fix = PositionFix(Position3.from_array(truth + [0.3 * i, 0.4 * i, 0.0]), 1e-10 * i, 3 + i, timestamp=0.5 * i)
        fixes.append(fix.with_truth(truth))
    return fixes


class TestQuantiles:
    @pytest.mark.parametrize('count', [1, 2, 7, 100, 1001])
    def test_against_sorted(self, count):
        values = np.random.default_rng(count).exponential(2.0, count)
        stats = error_quantiles(values)
        assert stats.count == count
        assert stats.median == pytest.approx(sorted_quantile(values, 0.5))
        assert stats.p90 == pytest.approx(sorted_quantile(values, 0.9))
        assert stats.p99 == pytest.approx(sorted_quantile(values, 0.99))
        assert stats.median <= stats.p90 <= stats.p99

    def test_empty(self):
        with pytest.raises(EmptySeriesException):
            error_quantiles([])


class TestReport:
    def test_build(self):
        report = build_report('test', 'emitter', 7, 20, make_fixes())
        assert report.name == run_name('emitter', 7) == 'emitter-7'
        assert report.detection_fraction == 0.5
        assert report.horizontal.median == pytest.approx(sorted_quantile([0.5 * i for i in range(10)], 0.5))
        assert np.allclose(report.truth[3], [30.0, -15.0, 30.0])

    def test_summary(self):
        report = build_report('test', 'radar', 1, 10, make_fixes(4), 0.4, in_beam_fraction=0.35,
                              offsets={'rx2': 2e-9, 'rx1': -1.5e-9})
        summary = report.summary().splitlines()
        assert summary[0] == 'run: radar-1'
        assert 'detection_fraction: 0.4000' in summary
        assert 'in_beam_fraction: 0.3500' in summary
        assert summary[-2:] == ['offset_ns[rx1]: -1.500', 'offset_ns[rx2]: 2.000']

    def test_no_fixes(self):
        report = build_report('test', 'radar', 0, 5, [])
        assert report.horizontal is None
        assert report.truth.shape == (0, 3)
        assert 'horizontal_error_m: n/a' in report.summary()

    def test_invalid_fraction(self):
        with pytest.raises(InvalidParameterException):
            build_report('test', 'radar', 0, 5, [], 1.2)


class TestFiles:
    def test_emitter_files(self, tmpdir):
        fixes = make_fixes()
        tdoas = [TdoaMeasurement(('rx1', 'rx2'), 1.5e-7, 25.0, 0.5)]
        written = write_report(build_report('test', 'emitter', 0, 10, fixes), tmpdir / 'out', tdoas=tdoas)
        assert sorted(written) == ['errors', 'fixes', 'summary', 'tdoas']
        frame = read_fixes(written['fixes'])
        assert tuple(frame.columns) == FIX_COLUMNS
        assert len(frame) == 10
        assert np.allclose(frame['east_m'], [fix.position.east for fix in fixes])
        header = written['errors'].read_text().splitlines()[0]
        assert header == ','.join(ERROR_COLUMNS)
        assert written['tdoas'].read_text().splitlines()[0] == ','.join(TDOA_COLUMNS)

    def test_radar_files(self, tmpdir):
        detections = [DelayDetection(7.5e-7, 0.2, 1.0, 'rx1'), DelayDetection(7.6e-7, 0.3, 1.0, 'rx2')]
        written = write_report(build_report('test', 'radar', 0, 10, make_fixes(2)), tmpdir, detections=detections)
        assert 'tdoas' not in written
        lines = written['detections'].read_text().splitlines()
        assert lines[0] == ','.join(DETECTION_COLUMNS)
        assert lines[1].split(',')[1] == 'rx1'

    def test_deterministic(self, tmpdir):
        for name in ('a', 'b'):
            write_report(build_report('test', 'emitter', 0, 10, make_fixes()), tmpdir / name)
        for filename in ('fixes.csv', 'errors.csv', 'summary.txt'):
            assert (tmpdir / 'a' / filename).read_binary() == (tmpdir / 'b' / filename).read_binary()

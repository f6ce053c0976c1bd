"""Receiver synchronization: beacon offset calibration and GNSS time error post-processing.

Per receiver, the correction subtracted from a measured delay at time t is the constant
offset found with the beacon plus the low-pass filtered GNSS time error at t. Pairwise
corrections follow by subtraction.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
import pandas as pd

from uavtwin.exceptions import (EmptySeriesException, InvalidParameterException, TimestampMismatchException)
from uavtwin.scene import Node, Position3, los_delay

LOG = logging.getLogger('sync')

CSV_COLUMNS = ('t_seconds', 'error_seconds')


@dataclass(frozen=True)
class OffsetEstimate:
    receiver_id: str
    constant_offset: float
    residual_std: float

    def __post_init__(self):
        if not self.residual_std >= 0:
            raise InvalidParameterException('residual_std', self.residual_std)


@dataclass(frozen=True, eq=False)
class TimeErrorSeries:
    """Uniformly sampled (t, error) series."""
    times: np.ndarray
    errors: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        errors = np.asarray(self.errors, dtype=float)
        object.__setattr__(self, 'times', times)
        object.__setattr__(self, 'errors', errors)
        if times.shape != errors.shape or times.ndim != 1:
            raise TimestampMismatchException('errors')
        if not np.all(np.isfinite(errors)) or not np.all(np.isfinite(times)):
            raise InvalidParameterException('errors', 'not finite')
        if len(times) > 1:
            steps = np.diff(times)
            if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=1e-6, atol=0):
                raise TimestampMismatchException('times')

    def __len__(self):
        return len(self.times)

    @property
    def interval(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else float('inf')

    def at(self, t: npt.ArrayLike) -> np.ndarray:
        """Linear interpolation of the error at time(s) t."""
        return np.interp(t, self.times, self.errors)

    def with_errors(self, errors: npt.ArrayLike) -> 'TimeErrorSeries':
        return TimeErrorSeries(self.times, errors)


def beacon_calibrate(beacon_position: Position3, rx_nodes: Sequence[Node],
                     measured_delays: Mapping[str, npt.ArrayLike]) -> Dict[str, OffsetEstimate]:
    """Constant offset of every receiver from beacon arrival delays.

    The offset is the mean excess of the measured delay over the geometric LOS delay, the
    residual std is the spread of that excess.
    """
    estimates = {}
    for rx in rx_nodes:
        delays = np.asarray(measured_delays.get(rx.id, ()), dtype=float)
        if delays.size == 0:
            raise EmptySeriesException(rx.id)
        excess = delays - los_delay(beacon_position, rx.position)
        estimates[rx.id] = OffsetEstimate(rx.id, float(np.mean(excess)), float(np.std(excess)))
        LOG.debug('Receiver %s: offset %.3f ns, residual std %.3f ns', rx.id, estimates[rx.id].constant_offset * 1e9,
                  estimates[rx.id].residual_std * 1e9)
    return estimates


def pairwise_tdoa(delays_i: TimeErrorSeries, delays_j: TimeErrorSeries, geometric_i: float,
                  geometric_j: float) -> TimeErrorSeries:
    """Synchronization error between two receivers; anything common to both cancels."""
    if len(delays_i) != len(delays_j) or not np.array_equal(delays_i.times, delays_j.times):
        raise TimestampMismatchException('delays_j')
    return delays_i.with_errors((delays_i.errors - geometric_i) - (delays_j.errors - geometric_j))


def window_samples(window_length: float, interval: float) -> int:
    """Odd number of samples a window of `window_length` seconds spans at `interval`.

    An even count is shortened by one sample to keep the window centered.
    """
    count = max(int(round(window_length / interval)), 1)
    if count % 2 == 0:
        LOG.debug('Window of %.6g s spans %d samples, using %d', window_length, count, count - 1)
        count -= 1
    return count


def rect_lowpass(series: TimeErrorSeries, window_length: float) -> TimeErrorSeries:
    """Centered moving average over `window_length` seconds.

    The window spans an odd number of samples. Near the edges it shrinks symmetrically so the
    output stays aligned and keeps the input length.
    """
    if len(series) == 0:
        raise EmptySeriesException('series')
    if len(series) == 1:
        return series.with_errors(series.errors.copy())
    interval = series.interval
    if window_length < interval * (1 - 1e-9):
        raise InvalidParameterException('window_length', window_length)
    half = (window_samples(window_length, interval) - 1) // 2
    n = len(series)
    index = np.arange(n)
    reach = np.minimum(half, np.minimum(index, n - 1 - index))
    cumulative = np.concatenate([[0.0], np.cumsum(series.errors)])
    means = (cumulative[index + reach + 1] - cumulative[index - reach]) / (2 * reach + 1)
    # single-sample windows are copied so the identity filter is exact
    means = np.where(reach == 0, series.errors, means)
    return series.with_errors(means)


def correction_at(offset: Union[OffsetEstimate, float, None], filtered: Optional[TimeErrorSeries],
                  t: npt.ArrayLike) -> np.ndarray:
    """Clock correction of one receiver at time(s) t."""
    constant = offset.constant_offset if isinstance(offset, OffsetEstimate) else (offset or 0.0)
    if filtered is None:
        return np.full(np.shape(t), constant, dtype=float)
    return constant + filtered.at(t)


def _check_overlap(name: str, series: TimeErrorSeries, filtered: Optional[TimeErrorSeries]):
    if filtered is None or len(series) == 0:
        return
    if series.times.min() < filtered.times[0] or series.times.max() > filtered.times[-1]:
        raise TimestampMismatchException(name)


def compensate(delays: Mapping[str, TimeErrorSeries], offsets: Mapping[str, OffsetEstimate],
               filtered_gnss: Mapping[str, TimeErrorSeries]) -> Dict[str, TimeErrorSeries]:
    """Remove the constant offset and the filtered GNSS error from every receiver's delays."""
    corrected = {}
    for rx_id, series in delays.items():
        filtered = filtered_gnss.get(rx_id)
        _check_overlap(rx_id, series, filtered)
        corrected[rx_id] = series.with_errors(series.errors - correction_at(offsets.get(rx_id), filtered, series.times))
    return corrected


def filter_gnss(gnss: Mapping[str, TimeErrorSeries], window_length: float) -> Dict[str, TimeErrorSeries]:
    return {rx_id: rect_lowpass(series, window_length) for rx_id, series in gnss.items()}


def calibrate(beacon_position: Position3, rx_nodes: Sequence[Node], measured: Mapping[str, TimeErrorSeries],
              filtered_gnss: Mapping[str, TimeErrorSeries]) -> Dict[str, OffsetEstimate]:
    """Beacon calibration on delays from which the filtered GNSS error was already removed."""
    residual = compensate(measured, {}, filtered_gnss)
    return beacon_calibrate(beacon_position, rx_nodes, {rx_id: s.errors for rx_id, s in residual.items()})


def tdoa_variance(series: TimeErrorSeries) -> float:
    if len(series) == 0:
        raise EmptySeriesException('series')
    return float(np.var(series.errors))


def sweep_windows(raw_pair: TimeErrorSeries, gnss_i: TimeErrorSeries, gnss_j: TimeErrorSeries,
                  windows: Iterable[float]) -> List[Tuple[float, float]]:
    """Pairwise TDoA variance after GNSS compensation with each window length."""
    rows = []
    for window in windows:
        correction = rect_lowpass(gnss_i, window).at(raw_pair.times) - rect_lowpass(gnss_j, window).at(raw_pair.times)
        variance = tdoa_variance(raw_pair.with_errors(raw_pair.errors - correction))
        LOG.debug('Window %.1f s: variance %.4f ns^2', window, variance * 1e18)
        rows.append((float(window), variance))
    return rows


def write_time_errors(series: TimeErrorSeries, path) -> Path:
    """Two-column CSV t_seconds,error_seconds."""
    path = Path(path)
    pd.DataFrame({CSV_COLUMNS[0]: series.times, CSV_COLUMNS[1]: series.errors}).to_csv(path, index=False)
    return path


def read_time_errors(path) -> TimeErrorSeries:
    frame = pd.read_csv(path, float_precision='round_trip')
    missing = [column for column in CSV_COLUMNS if column not in frame.columns]
    if missing:
        raise TimestampMismatchException(f'{path}: missing columns {missing}')
    return TimeErrorSeries(frame[CSV_COLUMNS[0]].to_numpy(dtype=float), frame[CSV_COLUMNS[1]].to_numpy(dtype=float))

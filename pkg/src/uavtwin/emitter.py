"""Emitter chain: TDoA by pairwise cross-correlation and hyperbolic least squares."""
import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from uavtwin.airsim import CaptureResult
from uavtwin.exceptions import (InsufficientMeasurementsException, InvalidParameterException,
                                LengthMismatchException, TwinBaseException)
from uavtwin.scene import C, ScenarioConfig
from uavtwin.solver import PositionFix, coarse_grid_guess, solve_position, unit_vectors
from uavtwin.waveform import interpolate_peak, signed_bins

LOG = logging.getLogger('emitter')

SIDELOBE_GUARD = 2


@dataclass(frozen=True)
class TdoaMeasurement:
    """tdoa = arrival at rx_pair[1] minus arrival at rx_pair[0]."""
    rx_pair: Tuple[str, str]
    tdoa: float
    peak_quality: float
    timestamp: float = 0.0

    def reversed(self) -> 'TdoaMeasurement':
        return replace(self, rx_pair=(self.rx_pair[1], self.rx_pair[0]), tdoa=-self.tdoa)


@dataclass(frozen=True, eq=False)
class EmitterRun:
    epoch_times: np.ndarray
    fixes: List[PositionFix]
    tdoas: List[TdoaMeasurement] = field(default_factory=list)


def xcorr_tdoa(sig_i: npt.ArrayLike,
               sig_j: npt.ArrayLike,
               sample_rate: float,
               search_window: Optional[float] = None,
               rx_pair: Tuple[str, str] = ('i', 'j'),
               timestamp: float = 0.0) -> TdoaMeasurement:
    """Arrival time difference of sig_j over sig_i by circular cross-correlation.

    The integer lag maximum inside +-search_window is refined on the band-limited correlation.
    Peak quality is the peak power over the highest correlation power outside the peak's
    immediate neighbourhood, in dB.
    """
    sig_i = np.asarray(sig_i)
    sig_j = np.asarray(sig_j)
    if len(sig_i) != len(sig_j):
        raise LengthMismatchException(len(sig_i), len(sig_j))
    n = len(sig_i)
    max_window = n / 2 / sample_rate
    if search_window is None:
        search_window = max_window
    if search_window > max_window or search_window < 0:
        raise InvalidParameterException('search_window', search_window)
    for name, signal in (('sig_i', sig_i), ('sig_j', sig_j)):
        if not np.any(signal):
            raise InvalidParameterException(name, 'all zero')

    cross = np.fft.fft(sig_j) * np.conj(np.fft.fft(sig_i))
    power = np.abs(np.fft.ifft(cross))**2
    lags = signed_bins(n)
    inside = np.abs(lags) <= search_window * sample_rate
    coarse = int(np.flatnonzero(inside)[np.argmax(power[inside])])
    lag, _ = interpolate_peak(cross, int(lags[coarse]))

    distance = np.abs((np.arange(n) - coarse + n // 2) % n - n // 2)
    sidelobes = power[distance > SIDELOBE_GUARD]
    sidelobe = sidelobes.max() if sidelobes.size and sidelobes.max() > 0 else np.finfo(float).tiny
    quality = 10 * np.log10(power[coarse] / sidelobe)
    return TdoaMeasurement(rx_pair=tuple(rx_pair), tdoa=lag / sample_rate, peak_quality=float(quality),
                           timestamp=timestamp)


def pairwise_tdoas(signals: Mapping[str, npt.ArrayLike],
                   sample_rate: float,
                   search_window: Optional[float] = None,
                   timestamp: float = 0.0) -> List[TdoaMeasurement]:
    """TDoA of every receiver pair (i, j) with i before j in `signals`."""
    return [
        xcorr_tdoa(signals[i], signals[j], sample_rate, search_window, (i, j), timestamp)
        for i, j in itertools.combinations(signals, 2)
    ]


def reference_differences(tdoas: Sequence[TdoaMeasurement], reference_rx: str) -> Dict[str, float]:
    """Arrival time of every receiver relative to the reference receiver.

    The full pairwise set is reduced to one value per receiver by least squares over all
    pairs, so a consistent set is reproduced exactly whatever the reference.
    """
    receivers = [reference_rx]
    for measurement in tdoas:
        for rx_id in measurement.rx_pair:
            if rx_id not in receivers:
                receivers.append(rx_id)
    others = receivers[1:]
    if not others:
        return {}
    design = np.zeros((len(tdoas), len(others)))
    values = np.array([m.tdoa for m in tdoas])
    for row, measurement in enumerate(tdoas):
        first, second = measurement.rx_pair
        if second != reference_rx:
            design[row, others.index(second)] += 1
        if first != reference_rx:
            design[row, others.index(first)] -= 1
    if np.linalg.matrix_rank(design) < len(others):
        raise InsufficientMeasurementsException(len(others), int(np.linalg.matrix_rank(design)))
    arrivals, *_ = np.linalg.lstsq(design, values, rcond=None)
    return dict(zip(others, arrivals))


def _hyperbolic_residuals(reference: np.ndarray, receivers: np.ndarray,
                          differences: np.ndarray) -> Tuple[Callable, Callable]:

    def residual_fn(point):
        reference_distance, _ = unit_vectors(point, reference[None, :])
        distances, _ = unit_vectors(point, receivers)
        return distances - reference_distance[0] - differences

    def jacobian_fn(point):
        _, reference_unit = unit_vectors(point, reference[None, :])
        _, units = unit_vectors(point, receivers)
        return units - reference_unit

    return residual_fn, jacobian_fn


def _reduced(tdoas: Sequence[TdoaMeasurement], rx_positions: Mapping[str, npt.ArrayLike], reference_rx: str,
             altitude_constraint: Optional[float]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    arrivals = reference_differences(tdoas, reference_rx)
    required = 2 if altitude_constraint is not None else 3
    if len(arrivals) < required:
        raise InsufficientMeasurementsException(required, len(arrivals))
    reference = np.asarray(rx_positions[reference_rx], dtype=float)
    receivers = np.array([np.asarray(rx_positions[rx_id], dtype=float) for rx_id in arrivals])
    return reference, receivers, np.array(list(arrivals.values())) * C


def hyperbolic_ls(tdoas: Sequence[TdoaMeasurement],
                  rx_positions: Mapping[str, npt.ArrayLike],
                  reference_rx: str,
                  initial_guess: npt.ArrayLike,
                  altitude_constraint: Optional[float] = None,
                  max_iterations: int = 50,
                  timestamp: float = 0.0) -> PositionFix:
    """Emitter position from TDoAs referenced to `reference_rx`."""
    reference, receivers, differences = _reduced(tdoas, rx_positions, reference_rx, altitude_constraint)
    residual_fn, jacobian_fn = _hyperbolic_residuals(reference, receivers, differences)
    return solve_position(residual_fn, jacobian_fn, initial_guess, altitude_constraint, max_iterations, timestamp)


def hyperbolic_cost(tdoas: Sequence[TdoaMeasurement],
                    rx_positions: Mapping[str, npt.ArrayLike],
                    reference_rx: str,
                    altitude_constraint: Optional[float] = None) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized least squares cost over candidate points, for grid searches."""
    reference, receivers, differences = _reduced(tdoas, rx_positions, reference_rx, altitude_constraint)

    def cost(points):
        if altitude_constraint is not None:
            points = np.column_stack([points, np.full(len(points), altitude_constraint)])
        reference_distance = np.linalg.norm(points - reference, axis=-1)
        distances = np.linalg.norm(points[:, None, :] - receivers[None, :, :], axis=-1)
        return np.sum((distances - reference_distance[:, None] - differences)**2, axis=-1)

    return cost


def dilution_of_precision(position: npt.ArrayLike, rx_positions: Mapping[str, npt.ArrayLike],
                          reference_rx: str) -> Tuple[float, float]:
    """Position and horizontal dilution of precision.

    Both scale the per-receiver timing error (in meters) to the position error; the
    differencing against the reference receiver is accounted for in the weighting.
    """
    position = np.asarray(position, dtype=float)
    reference = np.asarray(rx_positions[reference_rx], dtype=float)
    receivers = np.array([np.asarray(p, dtype=float) for rx_id, p in rx_positions.items() if rx_id != reference_rx])
    _, reference_unit = unit_vectors(position, reference[None, :])
    _, units = unit_vectors(position, receivers)
    jacobian = units - reference_unit
    correlation = np.eye(len(receivers)) + np.ones((len(receivers), len(receivers)))
    covariance = np.linalg.inv(jacobian.T @ np.linalg.solve(correlation, jacobian))
    return float(np.sqrt(np.trace(covariance))), float(np.sqrt(covariance[0, 0] + covariance[1, 1]))


def run_emitter_pipeline(capture: CaptureResult,
                         scene: ScenarioConfig,
                         sync_correction: Optional[Callable[[str, float], float]] = None,
                         receivers: Optional[Sequence[str]] = None) -> EmitterRun:
    """Fix per snapshot; the first is seeded by a coarse grid, the others by the previous fix.

    `sync_correction(rx_id, t)` is the clock correction of a receiver, a pair's TDoA is
    corrected by the difference of the two.
    """
    settings = scene.emitter
    receivers = list(receivers) if receivers is not None else list(capture.receiver_ids)
    rx_positions = {rx_id: scene.node(rx_id).position for rx_id in receivers}
    reference_rx = scene.reference_rx if scene.reference_rx in receivers else receivers[0]
    sample_rate = scene.waveform.sample_rate
    fixes, measurements = [], []
    previous: Optional[np.ndarray] = None
    for i, t in enumerate(capture.timestamps):
        t = float(t)
        signals = {rx_id: capture.samples[rx_id][i] for rx_id in receivers}
        tdoas = pairwise_tdoas(signals, sample_rate, settings.search_window, t)
        if sync_correction is not None:
            tdoas = [
                replace(m, tdoa=m.tdoa - (sync_correction(m.rx_pair[1], t) - sync_correction(m.rx_pair[0], t)))
                for m in tdoas
            ]
        measurements.extend(tdoas)
        try:
            if previous is None:
                previous = coarse_grid_guess(
                    hyperbolic_cost(tdoas, rx_positions, reference_rx, settings.altitude_constraint),
                    scene.surveillance.bounds, scene.surveillance.grid_step, settings.altitude_constraint)
            fix = hyperbolic_ls(tdoas, rx_positions, reference_rx, previous, settings.altitude_constraint,
                                settings.max_iterations, t)
        except TwinBaseException as e:
            LOG.warning('Snapshot %d: no fix, %s', i, e)
            continue
        fix = fix.with_truth(capture.truth_positions[i])
        LOG.debug('Snapshot %d: horizontal error %.3f m', i, fix.horizontal_error)
        previous = np.asarray(fix.position)
        fixes.append(fix)
    LOG.info('Emitter run: %d snapshots, %d fixes', capture.n_snapshots, len(fixes))
    return EmitterRun(np.asarray(capture.timestamps, dtype=float), fixes, measurements)

"""Bistatic radar chain.

Per epoch every receiver averages a burst of snapshots into blocks, cancels static clutter
with a delay line canceler and extracts path delays with a maximum-likelihood estimator.
A Kalman tracker per receiver keeps the delay of the moving target and the confirmed delays
of all receivers are fused into a position by least squares.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy.optimize import linear_sum_assignment

from uavtwin.airsim import ClockState, ClutterPath, simulate_radar_capture
from uavtwin.exceptions import (EmptySeriesException, InsufficientMeasurementsException, InvalidParameterException,
                                TwinBaseException)
from uavtwin.scene import C, ScenarioConfig, TrackerParams, antenna_gain
from uavtwin.solver import PositionFix, coarse_grid_guess, solve_position, unit_vectors
from uavtwin.waveform import CIRSnapshot, interpolate_peak, signed_bins

LOG = logging.getLogger('radar')

NOISE_FLOOR_EPSILON = 1e-30
UNASSIGNED_COST = 1e9


@dataclass(frozen=True)
class DelayDetection:
    delay: float
    amplitude: float
    snapshot_time: float
    receiver_id: str = ''


@dataclass(frozen=True, eq=False)
class DelayTrack:
    """Delay and delay rate of one path seen by one receiver."""
    id: int
    state: np.ndarray
    covariance: np.ndarray
    age: int = 1
    misses: int = 0
    hits: Tuple[bool, ...] = (True, )
    confirmed: bool = False

    @property
    def delay(self) -> float:
        return float(self.state[0])


@dataclass(frozen=True, eq=False)
class TrackUpdate:
    tracks: List[DelayTrack]
    confirmed: List[DelayTrack]
    next_id: int


@dataclass(frozen=True, eq=False)
class EpochDetections:
    """Detections of all receivers for one epoch with the ground truth at that time."""
    index: int
    timestamp: float
    detections: Dict[str, List[DelayDetection]]
    truth_position: np.ndarray
    truth_delays: Dict[str, float]


@dataclass(frozen=True, eq=False)
class RadarRun:
    epoch_times: np.ndarray
    detected: np.ndarray
    fixes: List[PositionFix]
    detections: List[DelayDetection] = field(default_factory=list)

    @property
    def detection_fraction(self) -> float:
        return float(np.mean(self.detected)) if len(self.detected) else 0.0


def average_snapshots(cirs: Sequence[CIRSnapshot], k: int, sliding: bool = False) -> List[CIRSnapshot]:
    """Means of k consecutive snapshots, in non-overlapping blocks unless `sliding`.

    Each output is stamped with the mean time of its block.
    """
    if k < 1:
        raise InvalidParameterException('k', k)
    if len(cirs) == 0:
        raise EmptySeriesException('cirs')
    if len(cirs) < k:
        raise InvalidParameterException('k', k)
    taps = np.stack([cir.taps for cir in cirs])
    times = np.array([cir.timestamp for cir in cirs])
    if sliding:
        cumulative = np.concatenate([np.zeros((1, taps.shape[1]), dtype=complex), np.cumsum(taps, axis=0)])
        means = (cumulative[k:] - cumulative[:-k]) / k
        centers = np.convolve(times, np.ones(k) / k, mode='valid')
    else:
        blocks = len(cirs) // k
        means = taps[:blocks * k].reshape(blocks, k, -1).mean(axis=1)
        centers = times[:blocks * k].reshape(blocks, k).mean(axis=1)
    return [cirs[0].with_taps(row, float(t)) for row, t in zip(means, centers)]


def delay_line_canceler(cirs: Sequence[CIRSnapshot], order: int = 1) -> List[CIRSnapshot]:
    """order-th difference of consecutive snapshots, stamped with the later snapshot time."""
    if order < 1:
        raise InvalidParameterException('order', order)
    if len(cirs) < order + 1:
        raise InsufficientMeasurementsException(order + 1, len(cirs))
    differences = np.diff(np.stack([cir.taps for cir in cirs]), n=order, axis=0)
    return [cir.with_taps(row) for cir, row in zip(cirs[order:], differences)]


def noise_floor(taps: npt.ArrayLike) -> float:
    """Mean noise power estimated from the median tap power."""
    return max(float(np.median(np.abs(taps)**2)) / math.log(2), NOISE_FLOOR_EPSILON)


def _path_spectrum(n: int, position: float, amplitude: complex) -> np.ndarray:
    return amplitude * np.exp(-2j * np.pi * signed_bins(n) * position / n)


def ml_delay_estimate(cir: CIRSnapshot,
                      max_targets: int,
                      threshold_db: float,
                      refinement_passes: int = 2,
                      receiver_id: str = '') -> List[DelayDetection]:
    """Path delays by successive interference cancellation.

    The strongest remaining tap is refined to a fractional delay and its response subtracted
    until `max_targets` paths are found or the remaining peak falls below the threshold over
    the noise floor. Each refinement pass then re-estimates every path with all others
    removed.
    """
    n = cir.n
    residual = np.fft.fft(cir.taps)
    threshold = noise_floor(cir.taps) * 10**(threshold_db / 10)
    paths: List[Tuple[float, complex]] = []
    while len(paths) < max_targets:
        power = np.abs(np.fft.ifft(residual))**2
        coarse = int(np.argmax(power))
        if power[coarse] < threshold:
            break
        position, amplitude = interpolate_peak(residual, coarse)
        residual = residual - _path_spectrum(n, position, amplitude)
        paths.append((position, amplitude))

    for _ in range(refinement_passes):
        for i, (position, amplitude) in enumerate(paths):
            residual = residual + _path_spectrum(n, position, amplitude)
            position, amplitude = interpolate_peak(residual, int(round(position)))
            residual = residual - _path_spectrum(n, position, amplitude)
            paths[i] = (position, amplitude)

    detections = [
        DelayDetection(delay=float(np.mod(position, n) * cir.delay_resolution),
                       amplitude=float(abs(amplitude)),
                       snapshot_time=cir.timestamp,
                       receiver_id=receiver_id) for position, amplitude in paths
    ]
    LOG.debug('Receiver %s at t=%.3f s: %d detections', receiver_id, cir.timestamp, len(detections))
    return detections


def _transition(dt: float) -> np.ndarray:
    return np.array([[1.0, dt], [0.0, 1.0]])


def _process_noise(dt: float, params: TrackerParams) -> np.ndarray:
    return params.acceleration_std**2 * np.array([[dt**4 / 4, dt**3 / 2], [dt**3 / 2, dt**2]])


def predict(track: DelayTrack, dt: float, params: TrackerParams) -> DelayTrack:
    transition = _transition(dt)
    covariance = transition @ track.covariance @ transition.T + _process_noise(dt, params)
    return replace(track, state=transition @ track.state, covariance=covariance)


def innovation_variance(track: DelayTrack, params: TrackerParams) -> float:
    return float(track.covariance[0, 0] + params.measurement_std**2)


def assignment_costs(tracks: Sequence[DelayTrack], detections: Sequence[DelayDetection],
                     params: TrackerParams) -> np.ndarray:
    """Squared Mahalanobis distance of every detection (columns) to every predicted track (rows)."""
    costs = np.empty((len(tracks), len(detections)))
    for i, track in enumerate(tracks):
        variance = innovation_variance(track, params)
        for j, detection in enumerate(detections):
            costs[i, j] = (detection.delay - track.delay)**2 / variance
    return costs


def associate(costs: np.ndarray, gate: float) -> List[Tuple[int, int]]:
    """Globally optimal (track, detection) pairs, pairs beyond the gate left unassigned."""
    if costs.size == 0:
        return []
    rows, cols = linear_sum_assignment(np.where(costs > gate, UNASSIGNED_COST, costs))
    return [(int(r), int(c)) for r, c in zip(rows, cols) if costs[r, c] <= gate]


def kalman_update(track: DelayTrack, delay: float, params: TrackerParams) -> DelayTrack:
    """Joseph form update with a delay measurement."""
    observation = np.array([[1.0, 0.0]])
    variance = innovation_variance(track, params)
    gain = track.covariance @ observation.T / variance
    state = track.state + gain[:, 0] * (delay - track.delay)
    identity_minus = np.eye(2) - gain @ observation
    covariance = (identity_minus @ track.covariance @ identity_minus.T +
                  gain @ gain.T * params.measurement_std**2)
    return replace(track, state=state, covariance=covariance)


def _record(track: DelayTrack, hit: bool, params: TrackerParams) -> DelayTrack:
    hits = (track.hits + (hit, ))[-params.confirm_window:]
    confirmed = track.confirmed or sum(hits) >= params.confirm_hits
    return replace(track, hits=hits, confirmed=confirmed, age=track.age + 1, misses=0 if hit else track.misses + 1)


def _alive(track: DelayTrack, params: TrackerParams) -> bool:
    if track.misses >= params.max_misses:
        return False
    if not track.confirmed and len(track.hits) >= params.confirm_window:
        return sum(track.hits) >= params.confirm_hits
    return True


def track_step(tracks: Sequence[DelayTrack],
               detections: Sequence[DelayDetection],
               dt: float,
               params: TrackerParams,
               next_id: Optional[int] = None) -> TrackUpdate:
    """Advance all tracks by dt and associate the new detections.

    Returns the surviving tracks, the confirmed tracks that were hit in this step, and the
    id the next new track will get.
    """
    if not dt > 0:
        raise InvalidParameterException('dt', dt)
    if next_id is None:
        next_id = max((track.id for track in tracks), default=-1) + 1
    predicted = [predict(track, dt, params) for track in tracks]
    pairs = associate(assignment_costs(predicted, detections, params), params.gate)
    assigned = dict(pairs)
    used = set(assigned.values())

    updated, confirmed = [], []
    for i, track in enumerate(predicted):
        if i in assigned:
            track = _record(kalman_update(track, detections[assigned[i]].delay, params), True, params)
            if track.confirmed:
                confirmed.append(track)
        else:
            track = _record(track, False, params)
        if _alive(track, params):
            updated.append(track)
        else:
            LOG.debug('Dropped track %d at %.3f us', track.id, track.delay * 1e6)
    for j, detection in enumerate(detections):
        if j in used:
            continue
        covariance = np.diag([params.measurement_std**2, params.initial_rate_std**2])
        updated.append(DelayTrack(id=next_id, state=np.array([detection.delay, 0.0]), covariance=covariance))
        next_id += 1
    return TrackUpdate(updated, confirmed, next_id)


class DelayTracker:
    """Tracks of one receiver across epochs."""
    def __init__(self, params: TrackerParams):
        self.params = params
        self.tracks: List[DelayTrack] = []
        self.next_id = 0

    def step(self, detections: Sequence[DelayDetection], dt: float) -> List[DelayTrack]:
        """Returns the confirmed tracks hit by this step's detections."""
        update = track_step(self.tracks, detections, dt, self.params, self.next_id)
        self.tracks, self.next_id = update.tracks, update.next_id
        return update.confirmed


def _bistatic_residuals(tx: np.ndarray, receivers: np.ndarray, ranges: np.ndarray) -> Tuple[Callable, Callable]:

    def residual_fn(point):
        tx_distance, _ = unit_vectors(point, tx[None, :])
        rx_distances, _ = unit_vectors(point, receivers)
        return tx_distance[0] + rx_distances - ranges

    def jacobian_fn(point):
        _, tx_unit = unit_vectors(point, tx[None, :])
        _, rx_units = unit_vectors(point, receivers)
        return tx_unit + rx_units

    return residual_fn, jacobian_fn


def localize_bistatic(tx: npt.ArrayLike,
                      rx_delays: Sequence[Tuple[npt.ArrayLike, float]],
                      initial_guess: npt.ArrayLike,
                      altitude_constraint: Optional[float] = None,
                      max_iterations: int = 50,
                      timestamp: float = 0.0) -> PositionFix:
    """Position whose bistatic delays best match the measured ones in the least squares sense."""
    required = 2 if altitude_constraint is not None else 3
    if len(rx_delays) < required:
        raise InsufficientMeasurementsException(required, len(rx_delays))
    receivers = np.array([np.asarray(position, dtype=float) for position, _ in rx_delays])
    ranges = np.array([delay for _, delay in rx_delays]) * C
    residual_fn, jacobian_fn = _bistatic_residuals(np.asarray(tx, dtype=float), receivers, ranges)
    return solve_position(residual_fn, jacobian_fn, initial_guess, altitude_constraint, max_iterations, timestamp)


def bistatic_cost(tx: npt.ArrayLike, rx_delays: Sequence[Tuple[npt.ArrayLike, float]],
                  altitude_constraint: Optional[float] = None) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized least squares cost over candidate points, for grid searches."""
    tx = np.asarray(tx, dtype=float)
    receivers = np.array([np.asarray(position, dtype=float) for position, _ in rx_delays])
    ranges = np.array([delay for _, delay in rx_delays]) * C

    def cost(points):
        if altitude_constraint is not None:
            points = np.column_stack([points, np.full(len(points), altitude_constraint)])
        tx_distance = np.linalg.norm(points - tx, axis=-1)
        rx_distances = np.linalg.norm(points[:, None, :] - receivers[None, :, :], axis=-1)
        return np.sum((tx_distance[:, None] + rx_distances - ranges)**2, axis=-1)

    return cost


def in_beam(scene: ScenarioConfig, position: npt.ArrayLike) -> Dict[str, bool]:
    """Whether the target sits in the transmit and receive beams of each receiver."""
    tx = scene.transmitter
    tx_gain = antenna_gain(tx.antenna, tx.position, position)
    return {rx.id: tx_gain + antenna_gain(rx.antenna, rx.position, position) == 0 for rx in scene.receivers}


def in_beam_fraction(scene: ScenarioConfig, times: npt.ArrayLike, min_receivers: Optional[int] = None) -> float:
    """Share of `times` at which enough receivers have the target in both beams."""
    min_receivers = scene.radar.min_receivers if min_receivers is None else min_receivers
    positions = scene.trajectory.positions_at(times)
    flags = [sum(in_beam(scene, p).values()) >= min_receivers for p in positions]
    return float(np.mean(flags)) if flags else 0.0


def burst_length(scene: ScenarioConfig) -> int:
    """Snapshots captured per epoch: enough averaged blocks for one canceler output."""
    settings = scene.radar
    blocks = settings.canceler_order + 1
    return blocks * settings.averaging if not settings.sliding else settings.averaging + settings.canceler_order


def epoch_times(scene: ScenarioConfig, max_epochs: Optional[int] = None) -> np.ndarray:
    """Epoch start times whose whole burst lies on the trajectory."""
    settings = scene.radar
    burst = (burst_length(scene) - 1) * settings.snapshot_interval
    last = scene.trajectory.end - burst
    times = scene.trajectory.start + np.arange(0, int(np.floor(
        (last - scene.trajectory.start) / settings.epoch_interval + 1e-9)) + 1) * settings.epoch_interval
    return times if max_epochs is None else times[:max_epochs]


def process_epoch(scene: ScenarioConfig,
                  index: int,
                  t0: float,
                  snr_db: Optional[float],
                  clutter: Sequence[ClutterPath] = (),
                  clocks: Optional[Dict[str, ClockState]] = None,
                  seed: int = 0,
                  correction: Optional[Callable[[str, float], float]] = None) -> EpochDetections:
    """Capture one burst and run averaging, cancellation and delay estimation for all receivers.

    Pure given its arguments, so epochs can be processed in any order.
    """
    settings = scene.radar
    n_snapshots = burst_length(scene)
    capture = simulate_radar_capture(scene,
                                     scene.waveform,
                                     t0,
                                     n_snapshots,
                                     settings.snapshot_interval,
                                     snr_db,
                                     clutter,
                                     clocks,
                                     seed=seed,
                                     counter_base=index * n_snapshots)
    detections, truth_delays = {}, {}
    for rx_id in capture.receiver_ids:
        averaged = average_snapshots(capture.cirs[rx_id], settings.averaging, settings.sliding)
        canceled = delay_line_canceler(averaged, settings.canceler_order)[-1]
        found = ml_delay_estimate(canceled, settings.max_targets, settings.threshold_db, settings.refinement_passes,
                                  rx_id)
        if correction is not None:
            found = [replace(d, delay=d.delay - correction(rx_id, d.snapshot_time)) for d in found]
        detections[rx_id] = found
        truth_delays[rx_id] = float(capture.truth_delays[rx_id][-1])
    return EpochDetections(index, float(capture.timestamps[-1]), detections, capture.truth_positions[-1], truth_delays)


def fuse_epochs(scene: ScenarioConfig, epochs: Sequence[EpochDetections]) -> RadarRun:
    """Track delays per receiver and fuse confirmed delays into fixes, epoch by epoch."""
    settings = scene.radar
    trackers = {rx.id: DelayTracker(settings.tracker) for rx in scene.receivers}
    positions = {rx.id: rx.position for rx in scene.receivers}
    tx = scene.transmitter.position
    altitude = settings.altitude_constraint
    required = 2 if altitude is not None else 3
    fixes, detected, all_detections = [], [], []
    previous: Optional[np.ndarray] = None
    for epoch in epochs:
        chosen = {}
        for rx_id, tracker in trackers.items():
            found = epoch.detections.get(rx_id, [])
            all_detections.extend(found)
            hit = tracker.step(found, settings.epoch_interval)
            if hit:
                chosen[rx_id] = min(hit, key=lambda track: (-track.age, track.id)).delay
        detected.append(len(chosen) >= settings.min_receivers)
        if len(chosen) < required:
            LOG.debug('Epoch %d: %d receivers with a target track', epoch.index, len(chosen))
            continue
        rx_delays = [(positions[rx_id], delay) for rx_id, delay in chosen.items()]
        if previous is None:
            previous = coarse_grid_guess(bistatic_cost(tx, rx_delays, altitude), scene.surveillance.bounds,
                                         scene.surveillance.grid_step, altitude)
        try:
            fix = localize_bistatic(tx, rx_delays, previous, altitude, settings.max_iterations, epoch.timestamp)
        except TwinBaseException as e:
            LOG.warning('Epoch %d: no fix, %s', epoch.index, e)
            continue
        fix = fix.with_truth(epoch.truth_position)
        previous = np.asarray(fix.position)
        fixes.append(fix)
    run = RadarRun(np.array([epoch.timestamp for epoch in epochs]), np.array(detected, dtype=bool), fixes,
                   all_detections)
    LOG.info('Radar run: %d epochs, %d fixes, detection fraction %.3f', len(epochs), len(fixes),
             run.detection_fraction)
    return run


def run_radar_pipeline(scene: ScenarioConfig,
                       snr_db: Optional[float],
                       clutter: Sequence[ClutterPath] = (),
                       clocks: Optional[Dict[str, ClockState]] = None,
                       seed: int = 0,
                       max_epochs: Optional[int] = None,
                       correction: Optional[Callable[[str, float], float]] = None) -> RadarRun:
    """Whole radar chain over the trajectory, one epoch after the other."""
    epochs = [
        process_epoch(scene, i, t, snr_db, clutter, clocks, seed, correction)
        for i, t in enumerate(epoch_times(scene, max_epochs))
    ]
    return fuse_epochs(scene, epochs)

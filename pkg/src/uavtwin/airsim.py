"""Coherent multi-receiver capture simulation.

Every receiver sees the same sounding symbol through its own set of propagation paths. Paths
carry their geometric delay, antenna gains, free space attenuation and carrier phase. The
receiver clock error shifts the whole baseband response without rotating the carrier. Noise
is drawn from counter-based streams keyed per (receiver, snapshot), so a burst simulates to
the same samples whatever order it is computed in.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy.signal import lfilter

from uavtwin import rng
from uavtwin.exceptions import InvalidParameterException
from uavtwin.scene import C, ClockSpec, Node, ScenarioConfig, antenna_gain, ranges
from uavtwin.waveform import CIRSnapshot, ReferenceSymbol, WaveformSpec, estimate_cirs, interpolate_peak, synth_symbol

LOG = logging.getLogger('airsim')

OFFSET_RANGE = 100e-9
THERMAL_NOISE_DBM_HZ = -174.0


@dataclass(frozen=True, eq=False)
class ClockState:
    """Time error of one receiver: a fixed power-cycle offset plus a slowly drifting part.

    `gnss_errors` is what the GNSS timing receiver reports, the drift seen through
    independent observation noise.
    """
    constant_offset: float
    drift_times: np.ndarray
    drift_errors: np.ndarray
    gnss_times: np.ndarray
    gnss_errors: np.ndarray

    def error_at(self, t: npt.ArrayLike) -> np.ndarray:
        """Total clock error at time(s) t."""
        return self.constant_offset + np.interp(t, self.drift_times, self.drift_errors)

    @classmethod
    def perfect(cls, duration: float = 0.0, sample_interval: float = 1.0) -> 'ClockState':
        times = np.arange(0.0, duration + sample_interval / 2, sample_interval)
        zeros = np.zeros_like(times)
        return cls(0.0, times, zeros, times, zeros.copy())


@dataclass(frozen=True)
class ClutterPath:
    """Static scatterer, complex gain relative to the reference path."""
    delay: float
    complex_gain: complex

    def __post_init__(self):
        if self.delay < 0:
            raise InvalidParameterException('delay', self.delay)
        if not np.isfinite(self.complex_gain):
            raise InvalidParameterException('complex_gain', self.complex_gain)


@dataclass(frozen=True, eq=False)
class CaptureResult:
    """Simultaneous capture at all receivers on one snapshot time base.

    truth_delays holds the geometric delay of the target (radar) or emitter (LOS) path
    without clock error, truth_clock_errors the clock error applied at each snapshot.
    """
    timestamps: np.ndarray
    receiver_ids: Tuple[str, ...]
    samples: Dict[str, np.ndarray]
    cirs: Dict[str, List[CIRSnapshot]]
    truth_delays: Dict[str, np.ndarray]
    truth_clock_errors: Dict[str, np.ndarray]
    truth_positions: np.ndarray

    @property
    def n_snapshots(self) -> int:
        return len(self.timestamps)


@lru_cache(maxsize=8)
def reference_symbol(spec: WaveformSpec) -> ReferenceSymbol:
    """Sounding symbol of a waveform, computed once per spec."""
    return synth_symbol(spec)


def gen_clock_state(seed: int,
                    sigma_white: float,
                    drift_scale: float,
                    correlation_time: float,
                    duration: float,
                    gnss_noise: float = 1e-9,
                    sample_interval: float = 1.0,
                    key: Sequence[int] = ()) -> ClockState:
    """Draw a receiver clock.

    The drift is a first order Gauss-Markov process with stationary std `drift_scale` plus
    white jitter `sigma_white`, sampled every `sample_interval` seconds over `duration`.
    `key` separates the clocks of different receivers drawn from the same seed.
    """
    for name, value in (('sigma_white', sigma_white), ('drift_scale', drift_scale), ('gnss_noise', gnss_noise)):
        if not value >= 0:
            raise InvalidParameterException(name, value)
    for name, value in (('correlation_time', correlation_time), ('duration', duration), ('sample_interval',
                                                                                          sample_interval)):
        if not value > 0:
            raise InvalidParameterException(name, value)

    generator = rng.stream(seed, rng.STREAM_CLOCK, *key)
    offset = generator.uniform(-OFFSET_RANGE, OFFSET_RANGE)
    times = np.arange(0.0, duration + sample_interval / 2, sample_interval)
    a = math.exp(-sample_interval / correlation_time)
    innovations = generator.standard_normal(len(times)) * drift_scale * math.sqrt(1 - a * a)
    # stationary start
    innovations[0] = generator.standard_normal() * drift_scale
    markov = lfilter([1.0], [1.0, -a], innovations)
    drift = markov + sigma_white * generator.standard_normal(len(times))
    gnss = markov + gnss_noise * generator.standard_normal(len(times))
    LOG.debug('Clock %s: offset %.2f ns, drift std %.3f ns', tuple(key), offset * 1e9, np.std(drift) * 1e9)
    return ClockState(constant_offset=float(offset),
                      drift_times=times,
                      drift_errors=drift,
                      gnss_times=times.copy(),
                      gnss_errors=gnss)


def gen_receiver_clocks(config: ScenarioConfig,
                        seed: int,
                        duration: float,
                        model: Optional[ClockSpec] = None) -> Dict[str, ClockState]:
    """One clock per receiver, perfect clocks when neither `model` nor the scenario gives one."""
    clock = model or config.impairments.clock
    if clock is None:
        return {rx.id: ClockState.perfect(duration) for rx in config.receivers}
    return {
        rx.id: gen_clock_state(seed,
                               clock.sigma_white,
                               clock.drift_scale,
                               clock.correlation_time,
                               duration,
                               gnss_noise=clock.gnss_noise,
                               sample_interval=clock.sample_interval,
                               key=(i, ))
        for i, rx in enumerate(config.receivers)
    }


def pathloss(tx_eirp: float,
             d1: float,
             d2: Optional[float] = None,
             rcs_gain: float = 0.0,
             wavelength: float = C / 3.75e9) -> float:
    """Received power in mW.

    Free space over d1 for a direct link, the bistatic radar equation over d1 and d2 with a
    radar cross section of `rcs_gain` dBsm otherwise.
    """
    if not d1 > 0:
        raise InvalidParameterException('d1', d1)
    if d2 is not None and not d2 > 0:
        raise InvalidParameterException('d2', d2)
    eirp = 10**(tx_eirp / 10)
    if d2 is None:
        return eirp * (wavelength / (4 * math.pi * d1))**2
    rcs = 10**(rcs_gain / 10)
    return eirp * wavelength**2 * rcs / ((4 * math.pi)**3 * d1**2 * d2**2)


def noise_power_dbm(bandwidth: float, noise_figure_db: float) -> float:
    return THERMAL_NOISE_DBM_HZ + 10 * math.log10(bandwidth) + noise_figure_db


def link_snr_db(tx_eirp: float,
                d1: float,
                d2: Optional[float],
                rcs_gain: float,
                spec: WaveformSpec,
                noise_figure_db: float = 5.0) -> float:
    """Per-sample SNR of a link over the sounding bandwidth."""
    power = pathloss(tx_eirp, d1, d2, rcs_gain, spec.wavelength)
    return 10 * math.log10(power) - noise_power_dbm(spec.sample_rate, noise_figure_db)


def integrated_snr_db(snr_db: float, n_subcarriers: int, averaging: int = 1) -> float:
    """SNR of a CIR tap after matched filtering and snapshot averaging."""
    return snr_db + 10 * math.log10(n_subcarriers * averaging)


def reference_power(config: ScenarioConfig) -> float:
    """Power in mW of the path that defines the configured SNR."""
    impairments = config.impairments
    distance = impairments.reference_range
    if config.mode == 'radar':
        return pathloss(config.transmitter.eirp, distance, distance, impairments.rcs_db, config.waveform.wavelength)
    return pathloss(config.mobile.eirp, distance, wavelength=config.waveform.wavelength)


def scenario_snr_db(config: ScenarioConfig, override: Optional[float] = None) -> Optional[float]:
    """SNR of the reference path; None for a noiseless scenario.

    Without an explicit value it follows from the link budget.
    """
    if override is not None:
        return override
    impairments = config.impairments
    if impairments.noiseless:
        return None
    if impairments.snr_db is not None:
        return impairments.snr_db
    power_dbm = 10 * math.log10(reference_power(config))
    snr = power_dbm - noise_power_dbm(config.waveform.sample_rate, impairments.noise_figure_db)
    LOG.info('Reference path SNR from link budget: %.1f dB', snr)
    return snr


def clutter_paths(config: ScenarioConfig) -> List[ClutterPath]:
    return [
        ClutterPath(spec.delay, 10**(spec.gain_db / 20) * complex(math.cos(spec.phase), math.sin(spec.phase)))
        for spec in config.impairments.clutter
    ]


def _carrier(spec: WaveformSpec, delay: npt.ArrayLike) -> np.ndarray:
    return np.exp(-2j * np.pi * spec.center_frequency * np.asarray(delay))


def _path_response(freqs: np.ndarray, delays: npt.ArrayLike, amplitudes: npt.ArrayLike) -> np.ndarray:
    """Frequency response of paths; rows follow the leading axis of delays."""
    delays = np.asarray(delays, dtype=float)
    return np.asarray(amplitudes)[..., None] * np.exp(-2j * np.pi * delays[..., None] * freqs)


def _receive(reference: ReferenceSymbol, response: np.ndarray, clock_errors: Optional[np.ndarray],
             noise_power: Optional[float], seed: int, keys: Sequence[Tuple[int, ...]]) -> np.ndarray:
    """Received symbols for a stack of channel responses, noise added in the sample domain."""
    freqs = np.fft.fftfreq(reference.n, d=1 / reference.sample_rate)
    if clock_errors is not None and np.any(clock_errors != 0):
        response = response * np.exp(-2j * np.pi * np.asarray(clock_errors)[:, None] * freqs)
    samples = np.fft.ifft(reference.spectrum * response, norm='ortho', axis=-1)
    if noise_power is not None:
        for i, key in enumerate(keys):
            samples[i] += rng.complex_normal(rng.stream(seed, *key), reference.n, noise_power)
    return samples


def _noise_power(snr_db: Optional[float]) -> Optional[float]:
    return None if snr_db is None else 10**(-snr_db / 10)


def _cir_series(reference: ReferenceSymbol, samples: np.ndarray, timestamps: np.ndarray) -> List[CIRSnapshot]:
    taps = estimate_cirs(samples, reference)
    return [CIRSnapshot(taps=row, delay_resolution=1 / reference.sample_rate, timestamp=float(t))
            for row, t in zip(taps, timestamps)]


def _clock_errors(clocks: Optional[Dict[str, ClockState]], rx: Node, times: np.ndarray) -> np.ndarray:
    if clocks is None or rx.id not in clocks:
        return np.zeros_like(times)
    return np.asarray(clocks[rx.id].error_at(times), dtype=float)


def _gains_db(node: Node, origin: npt.ArrayLike, points: np.ndarray) -> np.ndarray:
    return np.array([antenna_gain(node.antenna, origin, p) for p in points])


def simulate_radar_capture(scene: ScenarioConfig,
                           spec: WaveformSpec,
                           t0: float,
                           n_snapshots: int,
                           snapshot_interval: float,
                           snr_db: Optional[float],
                           clutter: Sequence[ClutterPath] = (),
                           clocks: Optional[Dict[str, ClockState]] = None,
                           seed: int = 0,
                           counter_base: int = 0,
                           target: bool = True) -> CaptureResult:
    """Burst of `n_snapshots` radar snapshots starting at t0.

    Each receiver sees the attenuated direct path, the static clutter taps and the target
    reflection; `target=False` mutes the reflection. Snapshot i draws its noise from the
    counter `counter_base + i`.
    """
    if n_snapshots < 1:
        raise InvalidParameterException('n_snapshots', n_snapshots)
    if snapshot_interval < spec.symbol_length:
        raise InvalidParameterException('snapshot_interval', snapshot_interval)
    reference = reference_symbol(spec)
    freqs = np.fft.fftfreq(reference.n, d=1 / reference.sample_rate)
    times = t0 + np.arange(n_snapshots) * snapshot_interval
    positions = scene.trajectory.positions_at(times)
    tx = scene.transmitter
    tx_position = np.asarray(tx.position)
    impairments = scene.impairments
    reference_mw = reference_power(scene)
    tx_ranges = ranges(tx_position, positions)
    tx_gains = _gains_db(tx, tx_position, positions)
    noise_power = _noise_power(snr_db)

    samples, cirs, truth_delays, truth_clock = {}, {}, {}, {}
    for r, rx in enumerate(scene.receivers):
        rx_position = np.asarray(rx.position)
        direct_delay = float(np.linalg.norm(tx_position - rx_position) / C)
        direct_gain_db = (antenna_gain(tx.antenna, tx_position, rx_position) +
                          antenna_gain(rx.antenna, rx_position, tx_position) - impairments.absorber_db)
        direct_power = pathloss(tx.eirp, direct_delay * C, wavelength=spec.wavelength) / reference_mw
        static_delays = [direct_delay] + [path.delay for path in clutter]
        static_amplitudes = [math.sqrt(direct_power) * 10**(direct_gain_db / 20) * _carrier(spec, direct_delay)]
        static_amplitudes += [path.complex_gain for path in clutter]
        response = np.sum(_path_response(freqs, static_delays, static_amplitudes), axis=0)
        response = np.broadcast_to(response, (n_snapshots, reference.n))

        rx_ranges = ranges(rx_position, positions)
        delays = (tx_ranges + rx_ranges) / C
        if target:
            power = np.array([
                pathloss(tx.eirp, d1, d2, impairments.rcs_db, spec.wavelength) for d1, d2 in zip(tx_ranges, rx_ranges)
            ]) / reference_mw
            gains_db = tx_gains + _gains_db(rx, rx_position, positions)
            amplitudes = np.sqrt(power) * 10**(gains_db / 20) * _carrier(spec, delays)
            response = response + _path_response(freqs, delays, amplitudes)

        errors = _clock_errors(clocks, rx, times)
        keys = [(rng.STREAM_NOISE, r, counter_base + i) for i in range(n_snapshots)]
        samples[rx.id] = _receive(reference, np.array(response), errors, noise_power, seed, keys)
        cirs[rx.id] = _cir_series(reference, samples[rx.id], times)
        truth_delays[rx.id] = delays
        truth_clock[rx.id] = errors

    LOG.debug('Radar burst at t=%.3f s: %d snapshots, %d receivers', t0, n_snapshots, len(samples))
    return CaptureResult(times, tuple(samples), samples, cirs, truth_delays, truth_clock, positions)


def simulate_emitter_capture(scene: ScenarioConfig,
                             spec: WaveformSpec,
                             t0: float,
                             n_snapshots: int,
                             snapshot_interval: float,
                             snr_db: Optional[float],
                             clocks: Optional[Dict[str, ClockState]] = None,
                             seed: int = 0,
                             counter_base: int = 0) -> CaptureResult:
    """Symbols of the flying emitter as received over line of sight at every receiver."""
    if n_snapshots < 1:
        raise InvalidParameterException('n_snapshots', n_snapshots)
    reference = reference_symbol(spec)
    freqs = np.fft.fftfreq(reference.n, d=1 / reference.sample_rate)
    times = t0 + np.arange(n_snapshots) * snapshot_interval
    positions = scene.trajectory.positions_at(times)
    mobile = scene.mobile
    reference_mw = reference_power(scene)
    noise_power = _noise_power(snr_db)

    samples, cirs, truth_delays, truth_clock = {}, {}, {}, {}
    for r, rx in enumerate(scene.receivers):
        rx_position = np.asarray(rx.position)
        distances = ranges(rx_position, positions)
        delays = distances / C
        power = np.array([pathloss(mobile.eirp, d, wavelength=spec.wavelength) for d in distances]) / reference_mw
        gains_db = np.array([
            antenna_gain(mobile.antenna, p, rx_position) + antenna_gain(rx.antenna, rx_position, p) for p in positions
        ])
        amplitudes = np.sqrt(power) * 10**(gains_db / 20) * _carrier(spec, delays)
        errors = _clock_errors(clocks, rx, times)
        keys = [(rng.STREAM_NOISE, r, counter_base + i) for i in range(n_snapshots)]
        samples[rx.id] = _receive(reference, _path_response(freqs, delays, amplitudes), errors, noise_power, seed,
                                  keys)
        cirs[rx.id] = _cir_series(reference, samples[rx.id], times)
        truth_delays[rx.id] = delays
        truth_clock[rx.id] = errors

    LOG.debug('Emitter capture at t=%.3f s: %d snapshots', t0, n_snapshots)
    return CaptureResult(times, tuple(samples), samples, cirs, truth_delays, truth_clock, positions)


def los_peak_delay(cir: CIRSnapshot) -> float:
    """Delay of the strongest tap refined to a fraction of a bin."""
    coarse = int(np.argmax(np.abs(cir.taps)))
    position, _ = interpolate_peak(np.fft.fft(cir.taps), coarse)
    return float(np.mod(position, cir.n) * cir.delay_resolution)


def simulate_beacon_capture(scene: ScenarioConfig,
                            beacon: Node,
                            times: npt.ArrayLike,
                            clocks: Optional[Dict[str, ClockState]] = None,
                            beacon_clock: Optional[ClockState] = None,
                            snr_db: Optional[float] = None,
                            seed: int = 0,
                            via_cir: bool = False) -> Dict[str, np.ndarray]:
    """Arrival delay series of a beacon at every receiver.

    Each delay is the LOS delay plus the receiver clock error plus the beacon's own emission
    time error. With `via_cir` the delays are estimated from simulated CIRs, otherwise they
    are taken from geometry directly.
    """
    times = np.asarray(times, dtype=float)
    beacon_position = np.asarray(beacon.position)
    common = beacon_clock.error_at(times) if beacon_clock is not None else np.zeros_like(times)
    spec = scene.waveform
    reference = reference_symbol(spec)
    freqs = np.fft.fftfreq(reference.n, d=1 / reference.sample_rate)
    beacon_index = [b.id for b in scene.beacons].index(beacon.id)
    noise_power = _noise_power(snr_db)

    delays = {}
    for r, rx in enumerate(scene.receivers):
        los = float(np.linalg.norm(beacon_position - np.asarray(rx.position)) / C)
        arrival = los + _clock_errors(clocks, rx, times) + common
        if not via_cir:
            delays[rx.id] = arrival
            continue
        keys = [(rng.STREAM_BEACON, beacon_index, r, i) for i in range(len(times))]
        response = np.broadcast_to(_path_response(freqs, [los], [1.0])[0], (len(times), reference.n))
        samples = _receive(reference, np.array(response), arrival - los, noise_power, seed, keys)
        delays[rx.id] = np.array([los_peak_delay(cir) for cir in _cir_series(reference, samples, times)])
    LOG.info('Beacon %s captured at %d receivers, %d samples each', beacon.id, len(delays), len(times))
    return delays

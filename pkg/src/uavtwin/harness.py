"""Campaign orchestration.

A campaign loads a scenario, draws the receiver clocks, calibrates them with the beacon if
the scenario has one and then runs the radar or emitter chain over the whole flight. The
per-epoch work is pure and fans out to a thread pool; results are gathered in epoch order
so the outcome does not depend on the number of workers.
"""
import asyncio
import concurrent.futures
import itertools
import logging
import os
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
import pandas as pd

from uavtwin.airsim import (CaptureResult, ClockState, clutter_paths, gen_receiver_clocks, link_snr_db,
                            scenario_snr_db, simulate_beacon_capture, simulate_emitter_capture,
                            simulate_radar_capture)
from uavtwin.emitter import run_emitter_pipeline
from uavtwin.exceptions import ScenarioValidationException
from uavtwin.radar import epoch_times, fuse_epochs, in_beam_fraction, process_epoch
from uavtwin.recording import capture_streams, random_frame_loss, write_streams
from uavtwin.report import CampaignReport, build_report, write_report
from uavtwin.scene import ScenarioConfig, load_scenario, los_delay, ranges
from uavtwin.store import CampaignStore
from uavtwin.sync import (OffsetEstimate, TimeErrorSeries, calibrate, correction_at, filter_gnss, pairwise_tdoa,
                          sweep_windows, tdoa_variance, write_time_errors)

LOG = logging.getLogger('harness')

WORKERS = int(os.environ.get('UAVTWIN_WORKERS', '0'))
STORE_NAME = os.environ.get('UAVTWIN_STORE', 'campaigns.fs')

DEFAULT_WINDOWS = (1.0, 3.0, 5.0, 11.0, 21.0, 31.0, 61.0, 121.0, 301.0, 601.0)
RECORDING_SNAPSHOTS = 64
FRAME_SIZE = 256
VERIFY_TOLERANCE = 1e-9

T = TypeVar('T')


def worker_count(workers: Optional[int] = None) -> int:
    """Pool size: the argument, else $UAVTWIN_WORKERS; 0 means one per CPU."""
    workers = WORKERS if workers is None else workers
    return workers if workers > 0 else (os.cpu_count() or 1)


async def run_in_pool(calls: Sequence[Callable[[], T]], workers: Optional[int] = None) -> List[T]:
    """Run the calls on a thread pool, results in the order of `calls`."""
    loop = asyncio.get_running_loop()
    with concurrent.futures.ThreadPoolExecutor(max_workers=worker_count(workers)) as pool:
        return list(await asyncio.gather(*(loop.run_in_executor(pool, call) for call in calls)))


@dataclass(frozen=True, eq=False)
class Calibration:
    """Per-receiver clock correction: beacon offset plus filtered GNSS time error.

    `verification` holds, per receiver, the offset found with the second beacon minus the
    offset found with the first one.
    """
    offsets: Dict[str, OffsetEstimate]
    filtered_gnss: Dict[str, TimeErrorSeries]
    window: float
    verification: Dict[str, float] = field(default_factory=dict)

    def correction(self, rx_id: str, t: float) -> float:
        return float(correction_at(self.offsets.get(rx_id), self.filtered_gnss.get(rx_id), t))

    def offset_table(self) -> pd.DataFrame:
        rows = [(rx_id, est.constant_offset, est.residual_std, self.verification.get(rx_id, np.nan))
                for rx_id, est in self.offsets.items()]
        return pd.DataFrame(rows, columns=('receiver', 'offset_seconds', 'residual_std_seconds',
                                           'verification_seconds'))


@dataclass(frozen=True)
class SweepTable:
    """Mean pairwise TDoA variance after compensation, per filter window."""
    rows: Tuple[Tuple[float, float], ...]
    raw_variance: float

    @property
    def best_window(self) -> float:
        return min(self.rows, key=lambda row: row[1])[0]

    @property
    def best_variance(self) -> float:
        return min(variance for _, variance in self.rows)

    def to_frame(self) -> pd.DataFrame:
        best = self.best_window
        return pd.DataFrame({
            'window_seconds': [w for w, _ in self.rows],
            'variance_s2': [v for _, v in self.rows],
            'std_ns': [np.sqrt(v) * 1e9 for _, v in self.rows],
            'best': [w == best for w, _ in self.rows],
        })


def clock_duration(scene: ScenarioConfig) -> float:
    """Span the clocks are drawn over: the flight and the calibration period."""
    duration = scene.trajectory.end
    if scene.sync is not None:
        duration = max(duration, scene.sync.duration)
    return duration + scene.clock.sample_interval


def scenario_clocks(scene: ScenarioConfig, seed: int) -> Optional[Dict[str, ClockState]]:
    if scene.impairments.clock is None:
        return None
    return gen_receiver_clocks(scene, seed, clock_duration(scene))


def gnss_series(clocks: Dict[str, ClockState]) -> Dict[str, TimeErrorSeries]:
    return {rx_id: TimeErrorSeries(clock.gnss_times, clock.gnss_errors) for rx_id, clock in clocks.items()}


def beacon_snr_db(scene: ScenarioConfig, beacon_id: str) -> Optional[float]:
    """SNR of the weakest beacon link, None for a noiseless scenario."""
    if scene.impairments.noiseless:
        return None
    beacon = scene.node(beacon_id)
    distances = ranges(np.asarray(beacon.position), np.array([np.asarray(rx.position) for rx in scene.receivers]))
    return min(
        link_snr_db(beacon.eirp, float(d), None, 0.0, scene.waveform, scene.impairments.noise_figure_db)
        for d in distances)


def _beacon_offsets(scene: ScenarioConfig, beacon_id: str, clocks: Dict[str, ClockState], times: np.ndarray,
                    filtered: Dict[str, TimeErrorSeries], seed: int) -> Dict[str, OffsetEstimate]:
    beacon = scene.node(beacon_id)
    delays = simulate_beacon_capture(scene, beacon, times, clocks, None, beacon_snr_db(scene, beacon_id), seed,
                                     scene.sync.via_cir)
    measured = {rx_id: TimeErrorSeries(times, series) for rx_id, series in delays.items()}
    return calibrate(beacon.position, scene.receivers, measured, filtered)


def calibrate_scene(scene: ScenarioConfig, clocks: Dict[str, ClockState], seed: int) -> Optional[Calibration]:
    """Beacon calibration of all receivers; None without a calibration beacon."""
    if scene.sync is None or scene.sync.beacon is None:
        return None
    settings = scene.sync
    filtered = filter_gnss(gnss_series(clocks), settings.window)
    grid = next(iter(clocks.values())).gnss_times
    times = grid[grid <= settings.duration]
    offsets = _beacon_offsets(scene, settings.beacon, clocks, times, filtered, seed)
    verification = {}
    if settings.verify_beacon is not None:
        check = _beacon_offsets(scene, settings.verify_beacon, clocks, times, filtered, seed)
        verification = {rx_id: check[rx_id].constant_offset - offsets[rx_id].constant_offset for rx_id in offsets}
        worst = max(abs(v) for v in verification.values())
        if worst > VERIFY_TOLERANCE:
            LOG.warning('Beacons %s and %s disagree on the offsets by up to %.3f ns', settings.beacon,
                        settings.verify_beacon, worst * 1e9)
    LOG.info('Calibrated %d receivers with beacon %s', len(offsets), settings.beacon)
    return Calibration(offsets, filtered, settings.window, verification)


def _prepare(scenario_path, mode: Optional[str]) -> ScenarioConfig:
    scene = load_scenario(scenario_path)
    if mode is not None and mode != scene.mode:
        raise ScenarioValidationException('mode', f'{mode} requested for a {scene.mode} scenario')
    return scene


def snapshot_times(scene: ScenarioConfig, max_snapshots: Optional[int] = None) -> np.ndarray:
    """Emitter snapshot times along the trajectory."""
    interval = scene.emitter.epoch_interval
    count = int(np.floor((scene.trajectory.end - scene.trajectory.start) / interval + 1e-9)) + 1
    times = scene.trajectory.start + np.arange(count) * interval
    return times if max_snapshots is None else times[:max_snapshots]


def merge_captures(captures: Sequence[CaptureResult]) -> CaptureResult:
    """Concatenate captures of the same receivers in the given order."""
    ids = captures[0].receiver_ids
    return CaptureResult(
        timestamps=np.concatenate([c.timestamps for c in captures]),
        receiver_ids=ids,
        samples={rx_id: np.concatenate([c.samples[rx_id] for c in captures]) for rx_id in ids},
        cirs={rx_id: list(itertools.chain.from_iterable(c.cirs[rx_id] for c in captures)) for rx_id in ids},
        truth_delays={rx_id: np.concatenate([c.truth_delays[rx_id] for c in captures]) for rx_id in ids},
        truth_clock_errors={rx_id: np.concatenate([c.truth_clock_errors[rx_id] for c in captures]) for rx_id in ids},
        truth_positions=np.concatenate([c.truth_positions for c in captures]),
    )


async def _radar_campaign(scene, snr_db, clocks, calibration, seed, snapshots, workers):
    correction = calibration.correction if calibration is not None else None
    clutter = clutter_paths(scene)
    times = epoch_times(scene, snapshots)
    calls = [
        partial(process_epoch, scene, i, float(t), snr_db, clutter, clocks, seed, correction)
        for i, t in enumerate(times)
    ]
    epochs = await run_in_pool(calls, workers)
    run = fuse_epochs(scene, epochs)
    return run.fixes, run.detection_fraction, in_beam_fraction(scene, run.epoch_times), {
        'detections': run.detections
    }


async def _emitter_campaign(scene, snr_db, clocks, calibration, seed, snapshots, workers):
    correction = calibration.correction if calibration is not None else None
    times = snapshot_times(scene, snapshots)
    calls = [
        partial(simulate_emitter_capture, scene, scene.waveform, float(t), 1, scene.emitter.epoch_interval, snr_db,
                clocks, seed, i) for i, t in enumerate(times)
    ]
    capture = merge_captures(await run_in_pool(calls, workers))
    run = run_emitter_pipeline(capture, scene, correction)
    return run.fixes, None, None, {'tdoas': run.tdoas}


async def run_campaign(scenario_path,
                       mode: Optional[str] = None,
                       seed: int = 0,
                       output_dir='.',
                       snapshots: Optional[int] = None,
                       snr_db: Optional[float] = None,
                       workers: Optional[int] = None,
                       store: Optional[CampaignStore] = None) -> CampaignReport:
    """Simulate and process a whole flight and write its report.

    `snapshots` limits the number of epochs, `snr_db` overrides the scenario SNR. The report
    is also archived in `store` when one is given.
    """
    scene = _prepare(scenario_path, mode)
    snr = scenario_snr_db(scene, snr_db)
    clocks = scenario_clocks(scene, seed)
    calibration = calibrate_scene(scene, clocks or gen_receiver_clocks(scene, seed, clock_duration(scene)), seed)
    if clocks is not None and calibration is None:
        LOG.warning('Scenario %s models receiver clocks but has no beacon, errors stay uncorrected', scene.name)

    stage = _radar_campaign if scene.mode == 'radar' else _emitter_campaign
    fixes, detection_fraction, in_beam, extra = await stage(scene, snr, clocks, calibration, seed, snapshots, workers)
    n_epochs = len(epoch_times(scene, snapshots)) if scene.mode == 'radar' else len(snapshot_times(scene, snapshots))
    offsets = {rx_id: est.constant_offset for rx_id, est in calibration.offsets.items()} if calibration else {}
    report = build_report(scene.name, scene.mode, seed, n_epochs, fixes, detection_fraction, in_beam, offsets)
    write_report(report, output_dir, extra.get('detections'), extra.get('tdoas'))
    if store is not None:
        store.save(report)
    LOG.info('Campaign %s: %d fixes over %d epochs', report.name, len(report.fixes), report.epochs)
    return report


def _simulate(scene: ScenarioConfig, seed: int, output_dir: Path, snapshots: int, snr_db: Optional[float],
              frame_loss: float) -> List[Path]:
    snr = scenario_snr_db(scene, snr_db)
    clocks = scenario_clocks(scene, seed)
    spec = scene.waveform
    t0 = scene.trajectory.start
    if scene.mode == 'radar':
        capture = simulate_radar_capture(scene, spec, t0, snapshots, spec.symbol_length, snr, clutter_paths(scene),
                                         clocks, seed)
    else:
        capture = simulate_emitter_capture(scene, spec, t0, snapshots, spec.symbol_length, snr, clocks, seed)
    streams = capture_streams(capture, spec.sample_rate)
    if frame_loss > 0:
        streams = {
            rx_id: random_frame_loss(stream, FRAME_SIZE, frame_loss, seed, key)
            for key, (rx_id, stream) in enumerate(streams.items())
        }
    output_dir.mkdir(parents=True, exist_ok=True)
    written = write_streams(streams, output_dir)
    truth = pd.DataFrame(capture.truth_positions, columns=('east_m', 'north_m', 'up_m'))
    truth.insert(0, 't_seconds', capture.timestamps)
    truth.to_csv(output_dir / 'truth.csv', index=False, float_format='%.12g')
    written.append(output_dir / 'truth.csv')
    for rx_id, series in gnss_series(clocks or {}).items():
        written.append(write_time_errors(series, output_dir / f'gnss_{rx_id}.csv'))
    return written


async def simulate(scenario_path,
                   seed: int = 0,
                   output_dir='.',
                   snapshots: Optional[int] = None,
                   snr_db: Optional[float] = None,
                   frame_loss: float = 0.0) -> List[Path]:
    """Write IQ recordings of a contiguous burst at the start of the flight.

    Besides one recording per receiver this writes truth.csv and, with modelled clocks, the
    GNSS time error of every receiver.
    """
    scene = load_scenario(scenario_path)
    loop = asyncio.get_running_loop()
    with concurrent.futures.ThreadPoolExecutor(max_workers=1) as pool:
        written = await loop.run_in_executor(
            pool,
            partial(_simulate, scene, seed, Path(output_dir), snapshots or RECORDING_SNAPSHOTS, snr_db, frame_loss))
    LOG.info('Simulated %s: %d files in %s', scene.name, len(written), output_dir)
    return written


async def calibrate_campaign(scenario_path, seed: int = 0, output_dir='.') -> Calibration:
    """Run the beacon calibration alone and write offsets.csv and the filtered GNSS errors."""
    scene = load_scenario(scenario_path)
    if scene.sync is None or scene.sync.beacon is None:
        raise ScenarioValidationException('sync.beacon', 'calibration needs a beacon')
    clocks = gen_receiver_clocks(scene, seed, clock_duration(scene))
    loop = asyncio.get_running_loop()
    with concurrent.futures.ThreadPoolExecutor(max_workers=1) as pool:
        calibration = await loop.run_in_executor(pool, partial(calibrate_scene, scene, clocks, seed))
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    calibration.offset_table().to_csv(output_dir / 'offsets.csv', index=False, float_format='%.12g')
    for rx_id, series in calibration.filtered_gnss.items():
        write_time_errors(series, output_dir / f'gnss_filtered_{rx_id}.csv')
    return calibration


def _raw_pairs(scene: ScenarioConfig, clocks: Dict[str, ClockState],
               seed: int) -> Dict[Tuple[str, str], TimeErrorSeries]:
    """Pairwise synchronization error before any compensation, over the calibration period."""
    grid = next(iter(clocks.values())).gnss_times
    times = grid[grid <= scene.sync.duration]
    receivers = scene.receivers
    if scene.sync.beacon is not None:
        beacon = scene.node(scene.sync.beacon)
        delays = simulate_beacon_capture(scene, beacon, times, clocks, None, beacon_snr_db(scene, beacon.id), seed,
                                         scene.sync.via_cir)
        geometric = {rx.id: los_delay(beacon.position, rx.position) for rx in receivers}
        series = {rx.id: TimeErrorSeries(times, delays[rx.id]) for rx in receivers}
        return {(i.id, j.id): pairwise_tdoa(series[i.id], series[j.id], geometric[i.id], geometric[j.id])
                for i, j in itertools.combinations(receivers, 2)}
    errors = {rx.id: TimeErrorSeries(times, clocks[rx.id].error_at(times)) for rx in receivers}
    return {(i.id, j.id): errors[i.id].with_errors(errors[i.id].errors - errors[j.id].errors)
            for i, j in itertools.combinations(receivers, 2)}


def sweep(scene: ScenarioConfig, windows: Sequence[float], seed: int = 0) -> SweepTable:
    """Mean pairwise TDoA variance over all receiver pairs for every window.

    The scenario's clock model is used, the defaults if it has none.
    """
    clocks = gen_receiver_clocks(scene, seed, clock_duration(scene), scene.clock)
    gnss = gnss_series(clocks)
    pairs = _raw_pairs(scene, clocks, seed)
    per_pair = [sweep_windows(raw, gnss[i], gnss[j], windows) for (i, j), raw in pairs.items()]
    rows = tuple((float(window), float(np.mean([table[k][1] for table in per_pair])))
                 for k, window in enumerate(windows))
    raw_variance = float(np.mean([tdoa_variance(raw) for raw in pairs.values()]))
    return SweepTable(rows, raw_variance)


async def sweep_filter_window(scenario_path,
                              windows: Sequence[float] = DEFAULT_WINDOWS,
                              seed: int = 0,
                              output_dir=None) -> SweepTable:
    """Post-compensation TDoA variance per GNSS filter window; sweep.csv marks the minimizer."""
    scene = load_scenario(scenario_path)
    if scene.sync is None:
        raise ScenarioValidationException('sync', 'the filter sweep needs a sync section')
    loop = asyncio.get_running_loop()
    with concurrent.futures.ThreadPoolExecutor(max_workers=1) as pool:
        table = await loop.run_in_executor(pool, partial(sweep, scene, list(windows), seed))
    LOG.info('Best window %.1f s: std %.3f ns, raw std %.3f ns', table.best_window, np.sqrt(table.best_variance) * 1e9,
             np.sqrt(table.raw_variance) * 1e9)
    if output_dir is not None:
        output_dir = Path(output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        table.to_frame().to_csv(output_dir / 'sweep.csv', index=False, float_format='%.12g')
    return table

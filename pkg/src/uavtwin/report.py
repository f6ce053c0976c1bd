"""Campaign reports: error statistics and the CSV and text files written for every run."""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import numpy.typing as npt
import pandas as pd

from uavtwin.emitter import TdoaMeasurement
from uavtwin.exceptions import EmptySeriesException, InvalidParameterException
from uavtwin.radar import DelayDetection
from uavtwin.solver import PositionFix

LOG = logging.getLogger('report')

QUANTILES = (0.5, 0.9, 0.99)
FLOAT_FORMAT = '%.12g'

FIX_COLUMNS = ('t_seconds', 'east_m', 'north_m', 'up_m', 'residual_seconds', 'iterations', 'converged')
ERROR_COLUMNS = ('t_seconds', 'error_east_m', 'error_north_m', 'error_up_m', 'horizontal_m', 'error_3d_m')
DETECTION_COLUMNS = ('t_seconds', 'receiver', 'delay_seconds', 'amplitude')
TDOA_COLUMNS = ('t_seconds', 'rx_i', 'rx_j', 'tdoa_seconds', 'peak_quality_db')


@dataclass(frozen=True)
class ErrorStats:
    median: float
    p90: float
    p99: float
    count: int


def error_quantiles(errors: npt.ArrayLike) -> ErrorStats:
    """Median, 90 % and 99 % quantile with linear interpolation between order statistics."""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise EmptySeriesException('errors')
    median, p90, p99 = np.quantile(errors, QUANTILES, method='linear')
    return ErrorStats(float(median), float(p90), float(p99), int(errors.size))


@dataclass(frozen=True, eq=False)
class CampaignReport:
    """Outcome of one campaign run.

    `detection_fraction` is the share of epochs with a detection (radar) or with a fix
    (emitter). `in_beam_fraction` is the geometric expectation for radar runs.
    """
    scenario: str
    mode: str
    seed: int
    epochs: int
    fixes: List[PositionFix]
    detection_fraction: float
    horizontal: Optional[ErrorStats] = None
    error_3d: Optional[ErrorStats] = None
    in_beam_fraction: Optional[float] = None
    offsets: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.detection_fraction <= 1:
            raise InvalidParameterException('detection_fraction', self.detection_fraction)

    @property
    def name(self) -> str:
        return run_name(self.mode, self.seed)

    @property
    def truth(self) -> np.ndarray:
        """Ground truth position of every fix."""
        if not self.fixes:
            return np.empty((0, 3))
        return np.array([np.asarray(fix.position) - np.asarray(fix.error) for fix in self.fixes])

    def summary(self) -> str:
        lines = [
            f'run: {self.name}',
            f'scenario: {self.scenario}',
            f'mode: {self.mode}',
            f'seed: {self.seed}',
            f'epochs: {self.epochs}',
            f'fixes: {len(self.fixes)}',
            f'detection_fraction: {self.detection_fraction:.4f}',
        ]
        if self.in_beam_fraction is not None:
            lines.append(f'in_beam_fraction: {self.in_beam_fraction:.4f}')
        for label, stats in (('horizontal_error_m', self.horizontal), ('error_3d_m', self.error_3d)):
            if stats is None:
                lines.append(f'{label}: n/a')
            else:
                lines.append(f'{label}: median {stats.median:.4f} p90 {stats.p90:.4f} p99 {stats.p99:.4f}')
        for rx_id, offset in sorted(self.offsets.items()):
            lines.append(f'offset_ns[{rx_id}]: {offset * 1e9:.3f}')
        return '\n'.join(lines) + '\n'


def run_name(mode: str, seed: int) -> str:
    return f'{mode}-{seed}'


def build_report(scenario: str,
                 mode: str,
                 seed: int,
                 epochs: int,
                 fixes: Sequence[PositionFix],
                 detection_fraction: Optional[float] = None,
                 in_beam_fraction: Optional[float] = None,
                 offsets: Optional[Dict[str, float]] = None) -> CampaignReport:
    """Report with error statistics over all fixes that know their ground truth."""
    fixes = list(fixes)
    known = [fix for fix in fixes if fix.error is not None]
    horizontal = error_quantiles([fix.horizontal_error for fix in known]) if known else None
    error_3d = error_quantiles([fix.error_3d for fix in known]) if known else None
    if detection_fraction is None:
        detection_fraction = len(fixes) / epochs if epochs else 0.0
    return CampaignReport(scenario, mode, seed, epochs, fixes, float(detection_fraction), horizontal, error_3d,
                          in_beam_fraction, dict(offsets or {}))


def _write(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    LOG.debug('Wrote %d rows to %s', len(frame), path)
    return path


def fixes_frame(fixes: Sequence[PositionFix]) -> pd.DataFrame:
    rows = [(fix.timestamp, *fix.position.to_list(), fix.residual_norm, fix.iterations, fix.converged)
            for fix in fixes]
    return pd.DataFrame(rows, columns=FIX_COLUMNS)


def errors_frame(fixes: Sequence[PositionFix]) -> pd.DataFrame:
    rows = [(fix.timestamp, *fix.error, fix.horizontal_error, fix.error_3d) for fix in fixes if fix.error is not None]
    return pd.DataFrame(rows, columns=ERROR_COLUMNS)


def detections_frame(detections: Sequence[DelayDetection]) -> pd.DataFrame:
    rows = [(d.snapshot_time, d.receiver_id, d.delay, d.amplitude) for d in detections]
    return pd.DataFrame(rows, columns=DETECTION_COLUMNS)


def tdoas_frame(tdoas: Sequence[TdoaMeasurement]) -> pd.DataFrame:
    rows = [(m.timestamp, m.rx_pair[0], m.rx_pair[1], m.tdoa, m.peak_quality) for m in tdoas]
    return pd.DataFrame(rows, columns=TDOA_COLUMNS)


def write_summary(report: CampaignReport, path) -> Path:
    path = Path(path)
    path.write_text(report.summary(), encoding='utf-8')
    return path


def write_report(report: CampaignReport,
                 output_dir,
                 detections: Optional[Sequence[DelayDetection]] = None,
                 tdoas: Optional[Sequence[TdoaMeasurement]] = None) -> Dict[str, Path]:
    """Write fixes.csv, errors.csv, detections.csv or tdoas.csv and summary.txt."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written = {
        'fixes': _write(fixes_frame(report.fixes), output_dir / 'fixes.csv'),
        'errors': _write(errors_frame(report.fixes), output_dir / 'errors.csv'),
    }
    if detections is not None:
        written['detections'] = _write(detections_frame(detections), output_dir / 'detections.csv')
    if tdoas is not None:
        written['tdoas'] = _write(tdoas_frame(tdoas), output_dir / 'tdoas.csv')
    written['summary'] = write_summary(report, output_dir / 'summary.txt')
    LOG.info('Report %s written to %s', report.name, output_dir)
    return written


def read_fixes(path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision='round_trip')

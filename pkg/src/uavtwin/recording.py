"""Coherent IQ recordings.

A recording is a `<name>.iq` file of little-endian complex64 samples with a YAML sidecar
`<name>.iq.meta`. Samples lost on the way to the disk are written as zeros and listed as
gaps, so sample i is always taken at epoch + i / sample_rate.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Tuple

import numpy as np
import numpy.typing as npt
import yaml

from uavtwin import rng
from uavtwin.airsim import CaptureResult
from uavtwin.exceptions import FrameIndexException, InvalidParameterException, RecordingFormatException

LOG = logging.getLogger('recording')

SCHEMA_VERSION = 1
SAMPLE_DTYPE = np.dtype('<c8')
SAMPLE_FORMAT = 'cf32_le'
META_SUFFIX = '.meta'

Gap = Tuple[int, int]


def merge_gaps(gaps: Iterable[Gap]) -> Tuple[Gap, ...]:
    """Sorted gaps with overlapping and touching regions joined."""
    merged: List[List[int]] = []
    for start, length in sorted((int(s), int(n)) for s, n in gaps if n > 0):
        if merged and start <= merged[-1][0] + merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], start + length - merged[-1][0])
        else:
            merged.append([start, length])
    return tuple((start, length) for start, length in merged)


@dataclass(frozen=True, eq=False)
class IQStream:
    """Complex baseband samples on an uninterrupted time base.

    `gaps` lists (start_index, length) regions that were lost and hold zeros.
    """
    samples: np.ndarray
    sample_rate: float
    epoch: float = 0.0
    gaps: Tuple[Gap, ...] = ()

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex64)
        if samples.ndim != 1:
            raise InvalidParameterException('samples', f'{samples.ndim} dimensions')
        if not self.sample_rate > 0:
            raise InvalidParameterException('sample_rate', self.sample_rate)
        gaps = merge_gaps(self.gaps)
        for start, length in gaps:
            if start < 0 or start + length > len(samples):
                raise InvalidParameterException('gaps', (start, length))
            if np.any(samples[start:start + length]):
                raise InvalidParameterException('gaps', f'non-zero samples in ({start}, {length})')
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'gaps', gaps)

    def __len__(self):
        return len(self.samples)

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    @property
    def lost_samples(self) -> int:
        return sum(length for _, length in self.gaps)

    def sample_time(self, index: npt.ArrayLike) -> np.ndarray:
        """Absolute time of sample index(es), gaps included."""
        return self.epoch + np.asarray(index, dtype=float) / self.sample_rate


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + META_SUFFIX)


def write_iq(stream: IQStream, path) -> Path:
    """Write the samples and the sidecar; every sample takes exactly 8 bytes."""
    path = Path(path)
    stream.samples.astype(SAMPLE_DTYPE, copy=False).tofile(path)
    meta = {
        'schema_version': SCHEMA_VERSION,
        'sample_format': SAMPLE_FORMAT,
        'sample_rate': float(stream.sample_rate),
        'epoch': float(stream.epoch),
        'n_samples': stream.n_samples,
        'gaps': [[start, length] for start, length in stream.gaps],
    }
    with open(meta_path(path), 'w', encoding='utf-8') as meta_file:
        yaml.safe_dump(meta, meta_file, sort_keys=False)
    LOG.debug('Wrote %d samples (%d lost) to %s', stream.n_samples, stream.lost_samples, path)
    return path


def _read_meta(path: Path) -> Dict:
    try:
        with open(meta_path(path), encoding='utf-8') as meta_file:
            meta = yaml.safe_load(meta_file)
    except OSError as e:
        raise RecordingFormatException(path, f'no sidecar: {e}') from e
    except yaml.YAMLError as e:
        raise RecordingFormatException(path, f'invalid sidecar: {e}') from e
    if not isinstance(meta, dict):
        raise RecordingFormatException(path, 'sidecar must be a mapping')
    if meta.get('schema_version') != SCHEMA_VERSION:
        raise RecordingFormatException(path, f'unsupported schema_version {meta.get("schema_version")!r}')
    if meta.get('sample_format', SAMPLE_FORMAT) != SAMPLE_FORMAT:
        raise RecordingFormatException(path, f'unsupported sample_format {meta.get("sample_format")!r}')
    for key in ('sample_rate', 'epoch', 'n_samples'):
        if key not in meta:
            raise RecordingFormatException(path, f'missing {key}')
    return meta


def read_iq(path) -> IQStream:
    path = Path(path)
    meta = _read_meta(path)
    try:
        size = path.stat().st_size
    except OSError as e:
        raise RecordingFormatException(path, str(e)) from e
    expected = int(meta['n_samples']) * SAMPLE_DTYPE.itemsize
    if size != expected:
        raise RecordingFormatException(path, f'{size} bytes, sidecar announces {expected}')
    samples = np.fromfile(path, dtype=SAMPLE_DTYPE)
    try:
        return IQStream(samples, float(meta['sample_rate']), float(meta['epoch']),
                        tuple((int(s), int(n)) for s, n in meta.get('gaps') or ()))
    except InvalidParameterException as e:
        raise RecordingFormatException(path, str(e)) from e


def simulate_frame_loss(stream: IQStream, frame_size: int, loss_indices: Iterable[int]) -> IQStream:
    """Zero the given frames and record them as gaps; the length stays the same.

    The last frame may be shorter than `frame_size`.
    """
    if frame_size <= 0:
        raise InvalidParameterException('frame_size', frame_size)
    n_frames = math.ceil(stream.n_samples / frame_size)
    samples = stream.samples.copy()
    gaps = list(stream.gaps)
    for index in loss_indices:
        if not 0 <= index < n_frames:
            raise FrameIndexException(index, n_frames)
        start = index * frame_size
        stop = min(start + frame_size, stream.n_samples)
        samples[start:stop] = 0
        gaps.append((start, stop - start))
    lossy = IQStream(samples, stream.sample_rate, stream.epoch, tuple(gaps))
    LOG.debug('Frame loss: %d of %d samples now in gaps', lossy.lost_samples, lossy.n_samples)
    return lossy


def random_frame_loss(stream: IQStream, frame_size: int, fraction: float, seed: int = 0, key: int = 0) -> IQStream:
    """Lose a `fraction` of the frames, chosen from the frame loss random stream."""
    if not 0 <= fraction <= 1:
        raise InvalidParameterException('fraction', fraction)
    if frame_size <= 0:
        raise InvalidParameterException('frame_size', frame_size)
    n_frames = math.ceil(stream.n_samples / frame_size)
    generator = rng.stream(seed, rng.STREAM_FRAME_LOSS, key)
    lost = generator.choice(n_frames, size=int(round(fraction * n_frames)), replace=False)
    return simulate_frame_loss(stream, frame_size, sorted(int(i) for i in lost))


def alignment_lag(reference: npt.ArrayLike, recorded: npt.ArrayLike) -> int:
    """Lag in samples at which `recorded` correlates best with `reference`."""
    reference = np.asarray(reference, dtype=complex)
    recorded = np.asarray(recorded, dtype=complex)
    n = len(reference) + len(recorded) - 1
    size = 1 << (n - 1).bit_length()
    correlation = np.fft.ifft(np.fft.fft(recorded, size) * np.conj(np.fft.fft(reference, size)))
    lag = int(np.argmax(np.abs(correlation)))
    return lag if lag < size // 2 else lag - size


def capture_streams(capture: CaptureResult, sample_rate: float) -> Dict[str, IQStream]:
    """One stream per receiver from a capture whose snapshots follow each other without pause."""
    streams = {}
    for rx_id in capture.receiver_ids:
        rows = capture.samples[rx_id]
        if capture.n_snapshots > 1:
            step = np.diff(capture.timestamps)
            if not np.allclose(step, rows.shape[1] / sample_rate, rtol=1e-9, atol=0):
                raise InvalidParameterException('capture', 'snapshots are not contiguous')
        streams[rx_id] = IQStream(np.ravel(rows), sample_rate, float(capture.timestamps[0]))
    return streams


def write_streams(streams: Dict[str, IQStream], output_dir, prefix: str = '') -> List[Path]:
    output_dir = Path(output_dir)
    return [write_iq(stream, output_dir / f'{prefix}{rx_id}.iq') for rx_id, stream in streams.items()]


"""Geometry, node roster, trajectories and scenario files.

Everything is expressed in a local east/north/up frame in meters. The scene is the single
source of ground truth for propagation delays; all scene types are immutable once loaded.
"""
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import numpy.typing as npt
import yaml

from uavtwin.exceptions import (DegenerateDirectionException, InvalidParameterException, ScenarioParseException,
                                ScenarioValidationException, TrajectoryRangeException)
from uavtwin.waveform import SPEED_OF_LIGHT as C
from uavtwin.waveform import WaveformSpec

LOG = logging.getLogger('scene')

SCHEMA_VERSION = 1
ROLES = ('tx', 'rx', 'beacon', 'mobile')
MODES = ('radar', 'emitter')
ANTENNA_KINDS = ('omni', 'directional')


@dataclass(frozen=True)
class Position3:
    """Point in the local ENU frame."""
    east: float
    north: float
    up: float

    def __post_init__(self):
        for name in ('east', 'north', 'up'):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterException(name, getattr(self, name))

    def __array__(self, dtype=None, copy=None):
        return np.array([self.east, self.north, self.up], dtype=dtype or float)

    @classmethod
    def from_array(cls, values: npt.ArrayLike) -> 'Position3':
        east, north, up = (float(v) for v in np.asarray(values, dtype=float))
        return cls(east, north, up)

    def translated(self, offset: npt.ArrayLike) -> 'Position3':
        return Position3.from_array(np.asarray(self) + np.asarray(offset, dtype=float))

    def to_list(self) -> List[float]:
        return [self.east, self.north, self.up]


@dataclass(frozen=True)
class Antenna:
    """Step pattern: 0 dB inside half the 10 dB beamwidth, -out_of_beam_loss/2 outside.

    Azimuth is clockwise from north, elevation up from the horizon, both in degrees.
    """
    kind: str = 'omni'
    boresight_azimuth: float = 0.0
    boresight_elevation: float = 0.0
    beamwidth_10db: float = 40.0
    out_of_beam_loss: float = 20.0

    def __post_init__(self):
        if self.kind not in ANTENNA_KINDS:
            raise InvalidParameterException('kind', self.kind)
        if self.kind == 'directional' and not self.beamwidth_10db > 0:
            raise InvalidParameterException('beamwidth_10db', self.beamwidth_10db)
        if not self.out_of_beam_loss >= 0:
            raise InvalidParameterException('out_of_beam_loss', self.out_of_beam_loss)

    @property
    def boresight(self) -> np.ndarray:
        azimuth = math.radians(self.boresight_azimuth)
        elevation = math.radians(self.boresight_elevation)
        return np.array([
            math.sin(azimuth) * math.cos(elevation),
            math.cos(azimuth) * math.cos(elevation),
            math.sin(elevation),
        ])


@dataclass(frozen=True)
class Node:
    """A testbed node. Mobile nodes have no static position, they follow the trajectory."""
    id: str
    role: str
    position: Optional[Position3] = None
    antenna: Antenna = field(default_factory=Antenna)
    eirp: Optional[float] = None


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped positions, linearly interpolated in between."""
    times: Tuple[float, ...]
    positions: Tuple[Position3, ...]

    @property
    def start(self) -> float:
        return self.times[0]

    @property
    def end(self) -> float:
        return self.times[-1]

    @cached_property
    def _time_array(self) -> np.ndarray:
        return np.asarray(self.times, dtype=float)

    @cached_property
    def _position_array(self) -> np.ndarray:
        return np.array([np.asarray(p) for p in self.positions])

    def positions_at(self, times: npt.ArrayLike) -> np.ndarray:
        """Interpolated positions, one row per time."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if times.size and (times.min() < self.start or times.max() > self.end):
            bad = times.min() if times.min() < self.start else times.max()
            raise TrajectoryRangeException(float(bad), self.start, self.end)
        return np.stack([np.interp(times, self._time_array, self._position_array[:, axis]) for axis in range(3)],
                        axis=-1)


@dataclass(frozen=True)
class ClockSpec:
    """Receiver clock model, defaults calibrated to a raw pairwise TDoA std of about 1.27 ns."""
    sigma_white: float = 0.2e-9
    drift_scale: float = 0.875e-9
    correlation_time: float = 120.0
    gnss_noise: float = 1.0e-9
    sample_interval: float = 1.0


@dataclass(frozen=True)
class ClutterSpec:
    """Static scatterer: absolute delay and power relative to the reference target path."""
    delay: float
    gain_db: float
    phase: float = 0.0


@dataclass(frozen=True)
class Impairments:
    snr_db: Optional[float] = None
    noiseless: bool = False
    reference_range: float = 100.0
    rcs_db: float = -20.0
    noise_figure_db: float = 5.0
    absorber_db: float = 40.0
    clutter: Tuple[ClutterSpec, ...] = ()
    clock: Optional[ClockSpec] = None


@dataclass(frozen=True)
class TrackerParams:
    """Constant-velocity delay tracker settings."""
    measurement_std: float = 1e-9
    acceleration_std: float = 1.5e-8
    initial_rate_std: float = 2e-7
    gate: float = 9.21
    confirm_hits: int = 2
    confirm_window: int = 3
    max_misses: int = 5


@dataclass(frozen=True)
class RadarSettings:
    snapshot_interval: float = 1e-4
    averaging: int = 20
    sliding: bool = False
    canceler_order: int = 1
    max_targets: int = 3
    threshold_db: float = 13.0
    refinement_passes: int = 2
    epoch_interval: float = 0.25
    min_receivers: int = 2
    altitude_constraint: Optional[float] = None
    max_iterations: int = 50
    tracker: TrackerParams = field(default_factory=TrackerParams)


@dataclass(frozen=True)
class EmitterSettings:
    epoch_interval: float = 0.5
    reference_rx: Optional[str] = None
    altitude_constraint: Optional[float] = None
    search_window: Optional[float] = None
    max_iterations: int = 50


@dataclass(frozen=True)
class SyncSettings:
    """Beacon calibration before the flight, GNSS post-processing during it."""
    beacon: Optional[str] = None
    verify_beacon: Optional[str] = None
    duration: float = 3600.0
    window: float = 30.0
    via_cir: bool = False


@dataclass(frozen=True)
class Surveillance:
    """Box searched for the initial position guess."""
    east: Tuple[float, float] = (-250.0, 250.0)
    north: Tuple[float, float] = (-250.0, 250.0)
    up: Tuple[float, float] = (0.0, 100.0)
    grid_step: float = 10.0

    @property
    def bounds(self) -> Tuple[Tuple[float, float], ...]:
        return (self.east, self.north, self.up)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    mode: str
    nodes: Tuple[Node, ...]
    trajectory: Trajectory
    waveform: WaveformSpec = field(default_factory=WaveformSpec)
    impairments: Impairments = field(default_factory=Impairments)
    radar: RadarSettings = field(default_factory=RadarSettings)
    emitter: EmitterSettings = field(default_factory=EmitterSettings)
    sync: Optional[SyncSettings] = None
    surveillance: Surveillance = field(default_factory=Surveillance)
    origin: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    schema_version: int = SCHEMA_VERSION

    def with_role(self, role: str) -> Tuple[Node, ...]:
        return tuple(node for node in self.nodes if node.role == role)

    def node(self, node_id: str) -> Node:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise KeyError(node_id)

    @property
    def mobile(self) -> Node:
        return self.with_role('mobile')[0]

    @property
    def transmitter(self) -> Node:
        return self.with_role('tx')[0]

    @property
    def receivers(self) -> Tuple[Node, ...]:
        return self.with_role('rx')

    @property
    def beacons(self) -> Tuple[Node, ...]:
        return self.with_role('beacon')

    @property
    def reference_rx(self) -> str:
        return self.emitter.reference_rx or self.receivers[0].id

    @property
    def clock(self) -> ClockSpec:
        """Clock model of the receivers, the defaults when the scenario has perfect clocks."""
        return self.impairments.clock or ClockSpec()

    @property
    def altitude_constraint(self) -> Optional[float]:
        settings = self.radar if self.mode == 'radar' else self.emitter
        return settings.altitude_constraint


def los_delay(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    """Line of sight propagation time between two points."""
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)) / C)


def bistatic_delay(tx: npt.ArrayLike, target: npt.ArrayLike, rx: npt.ArrayLike) -> float:
    """Propagation time transmitter -> target -> receiver."""
    target = np.asarray(target, dtype=float)
    return float((np.linalg.norm(np.asarray(tx, dtype=float) - target) +
                  np.linalg.norm(target - np.asarray(rx, dtype=float))) / C)


def ranges(origin: npt.ArrayLike, points: npt.ArrayLike) -> np.ndarray:
    """Distances from one point to every row of `points`."""
    return np.linalg.norm(np.atleast_2d(points) - np.asarray(origin, dtype=float), axis=-1)


def antenna_gain(antenna: Antenna, from_: npt.ArrayLike, to: npt.ArrayLike) -> float:
    """One-way gain in dB of `antenna` placed at `from_` towards `to`."""
    direction = np.asarray(to, dtype=float) - np.asarray(from_, dtype=float)
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise DegenerateDirectionException(from_)
    if antenna.kind == 'omni':
        return 0.0
    offset = math.degrees(math.acos(np.clip(np.dot(direction / norm, antenna.boresight), -1.0, 1.0)))
    if offset <= antenna.beamwidth_10db / 2 + 1e-9:
        return 0.0
    return -antenna.out_of_beam_loss / 2


def sample_trajectory(traj: Trajectory, t: float) -> Position3:
    """Position of the mobile node at time t."""
    return Position3.from_array(traj.positions_at([t])[0])


def circle_trajectory(center: npt.ArrayLike, radius: float, altitude: float, speed: float, laps: float = 1.0,
                      start_time: float = 0.0, start_angle: float = 0.0, clockwise: bool = False,
                      sample_interval: float = 0.5) -> Trajectory:
    """Circle flown at constant speed; start_angle in degrees counterclockwise from east."""
    if not radius > 0:
        raise InvalidParameterException('radius', radius)
    if not speed > 0:
        raise InvalidParameterException('speed', speed)
    duration = laps * 2 * math.pi * radius / speed
    n = max(int(math.ceil(duration / sample_interval)), 1)
    elapsed = np.linspace(0.0, duration, n + 1)
    direction = -1.0 if clockwise else 1.0
    angle = math.radians(start_angle) + direction * speed * elapsed / radius
    center = np.asarray(center, dtype=float)
    positions = tuple(
        Position3(float(center[0] + radius * math.cos(a)), float(center[1] + radius * math.sin(a)), float(altitude))
        for a in angle)
    return Trajectory(times=tuple(float(start_time + t) for t in elapsed), positions=positions)


def waypoint_trajectory(points: npt.ArrayLike, speed: float, start_time: float = 0.0) -> Trajectory:
    """Straight legs between waypoints at constant speed."""
    if not speed > 0:
        raise InvalidParameterException('speed', speed)
    points = np.asarray(points, dtype=float)
    legs = np.linalg.norm(np.diff(points, axis=0), axis=-1)
    times = start_time + np.concatenate([[0.0], np.cumsum(legs / speed)])
    return Trajectory(times=tuple(float(t) for t in times), positions=tuple(Position3.from_array(p) for p in points))


class _Reader:
    """Walks the raw YAML mapping and reports the dotted path of any bad value."""
    def __init__(self, data: Any, path: str):
        self.data = data
        self.path = path

    def section(self, key: str, required: bool = False) -> '_Reader':
        if not isinstance(self.data, dict):
            raise ScenarioValidationException(self.path or 'scenario', 'expected a mapping')
        if key not in self.data or self.data[key] is None:
            if required:
                raise ScenarioValidationException(self._child(key), 'missing')
            return _Reader({}, self._child(key))
        return _Reader(self.data[key], self._child(key))

    def items(self) -> List['_Reader']:
        if not isinstance(self.data, list):
            raise ScenarioValidationException(self.path, 'expected a list')
        return [_Reader(item, f'{self.path}[{i}]') for i, item in enumerate(self.data)]

    def get(self, key: str, kind, default=None, required: bool = False):
        if not isinstance(self.data, dict):
            raise ScenarioValidationException(self.path or 'scenario', 'expected a mapping')
        value = self.data.get(key)
        if value is None:
            if required:
                raise ScenarioValidationException(self._child(key), 'missing')
            return default
        try:
            if kind is bool and not isinstance(value, bool):
                raise TypeError(value)
            return kind(value)
        except (TypeError, ValueError) as e:
            raise ScenarioValidationException(self._child(key), f'invalid value {value!r}') from e

    def vector(self, key: str, size: int, default=None, required: bool = False) -> Optional[Tuple[float, ...]]:
        value = self.get(key, list, default=None, required=required)
        if value is None:
            return default
        try:
            values = tuple(float(v) for v in value)
        except (TypeError, ValueError) as e:
            raise ScenarioValidationException(self._child(key), f'invalid value {value!r}') from e
        if len(values) != size or not all(math.isfinite(v) for v in values):
            raise ScenarioValidationException(self._child(key), f'expected {size} finite numbers')
        return values

    def build(self, cls, **values):
        try:
            return cls(**values)
        except InvalidParameterException as e:
            raise ScenarioValidationException(self._child(e.name), f'invalid value {e.value!r}') from e

    def _child(self, key: str) -> str:
        return f'{self.path}.{key}' if self.path else key


def _read_antenna(reader: _Reader) -> Antenna:
    defaults = Antenna()
    return reader.build(
        Antenna,
        kind=reader.get('kind', str, defaults.kind),
        boresight_azimuth=reader.get('boresight_azimuth', float, defaults.boresight_azimuth),
        boresight_elevation=reader.get('boresight_elevation', float, defaults.boresight_elevation),
        beamwidth_10db=reader.get('beamwidth_10db', float, defaults.beamwidth_10db),
        out_of_beam_loss=reader.get('out_of_beam_loss', float, defaults.out_of_beam_loss),
    )


def _read_node(reader: _Reader) -> Node:
    role = reader.get('role', str, required=True)
    if role not in ROLES:
        raise ScenarioValidationException(f'{reader.path}.role', f'unknown role {role!r}')
    position = reader.vector('position', 3, required=role != 'mobile')
    return Node(
        id=reader.get('id', str, required=True),
        role=role,
        position=Position3(*position) if position is not None and role != 'mobile' else None,
        antenna=_read_antenna(reader.section('antenna')),
        eirp=reader.get('eirp', float),
    )


def _read_trajectory(reader: _Reader) -> Trajectory:
    kind = reader.get('kind', str, 'samples')
    if kind == 'samples':
        rows = []
        for item in reader.section('samples', required=True).items():
            if not isinstance(item.data, list) or len(item.data) != 4:
                raise ScenarioValidationException(item.path, 'expected [t, east, north, up]')
            try:
                row = tuple(float(v) for v in item.data)
            except (TypeError, ValueError) as e:
                raise ScenarioValidationException(item.path, f'invalid value {item.data!r}') from e
            if not all(math.isfinite(v) for v in row):
                raise ScenarioValidationException(item.path, 'not finite')
            rows.append(row)
        if not rows:
            raise ScenarioValidationException(f'{reader.path}.samples', 'empty')
        trajectory = Trajectory(times=tuple(r[0] for r in rows), positions=tuple(Position3(*r[1:]) for r in rows))
    elif kind == 'circle':
        trajectory = reader.build(circle_trajectory,
                                  center=reader.vector('center', 2, required=True),
                                  radius=reader.get('radius', float, required=True),
                                  altitude=reader.get('altitude', float, required=True),
                                  speed=reader.get('speed', float, required=True),
                                  laps=reader.get('laps', float, 1.0),
                                  start_time=reader.get('start_time', float, 0.0),
                                  start_angle=reader.get('start_angle', float, 0.0),
                                  clockwise=reader.get('clockwise', bool, False),
                                  sample_interval=reader.get('sample_interval', float, 0.5))
    elif kind == 'waypoints':
        points = [item.data for item in reader.section('points', required=True).items()]
        try:
            points = np.asarray(points, dtype=float).reshape(-1, 3)
        except ValueError as e:
            raise ScenarioValidationException(f'{reader.path}.points', 'expected [east, north, up] rows') from e
        if len(points) < 2:
            raise ScenarioValidationException(f'{reader.path}.points', 'need at least two waypoints')
        trajectory = reader.build(waypoint_trajectory,
                                  points=points,
                                  speed=reader.get('speed', float, required=True),
                                  start_time=reader.get('start_time', float, 0.0))
    else:
        raise ScenarioValidationException(f'{reader.path}.kind', f'unknown trajectory kind {kind!r}')
    if any(b <= a for a, b in zip(trajectory.times, trajectory.times[1:])):
        raise ScenarioValidationException(f'{reader.path}.samples', 'timestamps must be strictly increasing')
    return trajectory


def _read_dataclass(reader: _Reader, cls, **overrides):
    """Read the scalar fields of a settings dataclass, falling back to its defaults."""
    defaults = cls()
    values = {}
    for f in fields(cls):
        if f.name in overrides:
            continue
        default = getattr(defaults, f.name)
        kind = type(default) if default is not None else float
        if isinstance(default, tuple):
            values[f.name] = reader.vector(f.name, len(default), default)
        else:
            values[f.name] = reader.get(f.name, str if f.name.endswith(('rx', 'beacon')) else kind, default)
    values.update(overrides)
    return reader.build(cls, **values)


def _read_impairments(reader: _Reader) -> Impairments:
    clutter = tuple(
        item.build(ClutterSpec,
                   delay=item.get('delay', float, required=True),
                   gain_db=item.get('gain_db', float, required=True),
                   phase=item.get('phase', float, 0.0)) for item in reader.section('clutter').items()
    ) if reader.get('clutter', list) else ()
    clock = _read_dataclass(reader.section('clock'), ClockSpec) if reader.get('clock', dict) is not None else None
    return _read_dataclass(reader, Impairments, clutter=clutter, clock=clock)


def config_from_dict(data: Dict[str, Any]) -> ScenarioConfig:
    """Build and validate a scenario from its mapping form."""
    reader = _Reader(data, '')
    version = reader.get('schema_version', int, required=True)
    if version != SCHEMA_VERSION:
        raise ScenarioValidationException('schema_version', f'unsupported version {version}')
    mode = reader.get('mode', str, required=True)
    if mode not in MODES:
        raise ScenarioValidationException('mode', f'unknown mode {mode!r}')
    radar = reader.section('radar')
    waveform = reader.section('waveform')
    waveform_defaults = WaveformSpec()
    config = ScenarioConfig(
        name=reader.get('name', str, 'scenario'),
        mode=mode,
        nodes=tuple(_read_node(item) for item in reader.section('nodes', required=True).items()),
        trajectory=_read_trajectory(reader.section('trajectory', required=True)),
        waveform=waveform.build(
            WaveformSpec,
            center_frequency=waveform.get('center_frequency', float, waveform_defaults.center_frequency),
            n_subcarriers=waveform.get('n_subcarriers', int, waveform_defaults.n_subcarriers),
            symbol_length=waveform.get('symbol_length', float, waveform_defaults.symbol_length)),
        impairments=_read_impairments(reader.section('impairments')),
        radar=_read_dataclass(radar, RadarSettings, tracker=_read_dataclass(radar.section('tracker'), TrackerParams)),
        emitter=_read_dataclass(reader.section('emitter'), EmitterSettings),
        sync=_read_dataclass(reader.section('sync'), SyncSettings) if reader.get('sync', dict) is not None else None,
        surveillance=_read_dataclass(reader.section('surveillance'), Surveillance),
        origin=reader.vector('origin', 3, (0.0, 0.0, 0.0)),
        schema_version=version,
    )
    validate(config)
    return config


def validate(config: ScenarioConfig) -> None:
    """Check the cross-field invariants of a scenario."""
    ids = [node.id for node in config.nodes]
    for i, node_id in enumerate(ids):
        if node_id in ids[:i]:
            raise ScenarioValidationException(f'nodes[{i}].id', f'duplicate node id {node_id!r}')
    mobiles = config.with_role('mobile')
    if len(mobiles) != 1:
        raise ScenarioValidationException('nodes.mobile', f'exactly one mobile node required, got {len(mobiles)}')
    for i, node in enumerate(config.nodes):
        if node.role in ('tx', 'beacon') and node.eirp is None:
            raise ScenarioValidationException(f'nodes[{i}].eirp', f'{node.role} node needs an eirp')
    receivers = config.receivers
    if config.mode == 'radar':
        if not config.with_role('tx'):
            raise ScenarioValidationException('nodes.tx', 'radar mode needs a transmitter')
        if len(receivers) < 2:
            raise ScenarioValidationException('nodes.rx',
                                              f'radar mode needs at least 2 receivers, got {len(receivers)}')
    else:
        if config.mobile.eirp is None:
            raise ScenarioValidationException('nodes.mobile.eirp', 'emitter mode needs the mobile eirp')
        required = 3 if config.emitter.altitude_constraint is not None else 4
        if len(receivers) < required:
            raise ScenarioValidationException('nodes.rx',
                                              f'emitter mode needs at least {required} receivers, got {len(receivers)}')
        if config.emitter.reference_rx is not None and config.emitter.reference_rx not in [r.id for r in receivers]:
            raise ScenarioValidationException('emitter.reference_rx', 'not a receiver')
        _check_tdoa_ambiguity(config)
    if config.sync is not None:
        beacons = [b.id for b in config.beacons]
        for key in ('beacon', 'verify_beacon'):
            value = getattr(config.sync, key)
            if value is not None and value not in beacons:
                raise ScenarioValidationException(f'sync.{key}', f'{value!r} is not a beacon node')
        if not beacons:
            raise ScenarioValidationException('sync.beacon', 'sync needs a beacon node')
        if not config.sync.window >= config.clock.sample_interval:
            raise ScenarioValidationException('sync.window', 'window shorter than one GNSS sample')
    for settings, name in ((config.radar, 'radar'), (config.emitter, 'emitter')):
        if not settings.epoch_interval > 0:
            raise ScenarioValidationException(f'{name}.epoch_interval', 'must be positive')
    if config.radar.snapshot_interval < config.waveform.symbol_length:
        raise ScenarioValidationException('radar.snapshot_interval', 'shorter than one symbol')
    if config.radar.averaging < 1:
        raise ScenarioValidationException('radar.averaging', 'must be at least 1')
    for spec in config.impairments.clutter:
        if spec.delay < 0:
            raise ScenarioValidationException('impairments.clutter.delay', 'must not be negative')


def _check_tdoa_ambiguity(config: ScenarioConfig) -> None:
    positions = np.array([np.asarray(r.position) for r in config.receivers])
    baseline = max(np.linalg.norm(a - b) for a in positions for b in positions)
    limit = C * config.waveform.symbol_length / 2
    if baseline > limit:
        LOG.warning('Receiver baseline %.0f m exceeds %.0f m, TDoAs may alias', baseline, limit)


def _clean(value):
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def config_to_dict(config: ScenarioConfig) -> Dict[str, Any]:
    """Mapping form of a scenario, the inverse of config_from_dict."""
    nodes = []
    for node in config.nodes:
        entry = {'id': node.id, 'role': node.role}
        if node.position is not None:
            entry['position'] = node.position.to_list()
        entry['antenna'] = asdict(node.antenna)
        if node.eirp is not None:
            entry['eirp'] = node.eirp
        nodes.append(entry)
    trajectory = {
        'kind': 'samples',
        'samples': [[t] + p.to_list() for t, p in zip(config.trajectory.times, config.trajectory.positions)],
    }
    return _clean({
        'schema_version': config.schema_version,
        'name': config.name,
        'mode': config.mode,
        'origin': config.origin,
        'nodes': nodes,
        'trajectory': trajectory,
        'waveform': asdict(config.waveform),
        'impairments': asdict(config.impairments),
        'radar': asdict(config.radar),
        'emitter': asdict(config.emitter),
        'sync': asdict(config.sync) if config.sync is not None else None,
        'surveillance': asdict(config.surveillance),
    })


def load_scenario(path) -> ScenarioConfig:
    """Read and validate a YAML scenario file."""
    try:
        with open(path, encoding='utf-8') as scenario_file:
            data = yaml.safe_load(scenario_file)
    except OSError as e:
        raise ScenarioParseException(path, str(e)) from e
    except yaml.YAMLError as e:
        raise ScenarioParseException(path, f'invalid YAML: {e}') from e
    if not isinstance(data, dict):
        raise ScenarioParseException(path, 'top level must be a mapping')
    config = config_from_dict(data)
    LOG.info('Loaded %s scenario %s with %d nodes', config.mode, config.name, len(config.nodes))
    return config


def write_scenario(config: ScenarioConfig, path) -> Path:
    """Write a scenario so that load_scenario returns an identical config."""
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as scenario_file:
        yaml.safe_dump(config_to_dict(config), scenario_file, sort_keys=False)
    LOG.debug('Wrote scenario %s to %s', config.name, path)
    return path

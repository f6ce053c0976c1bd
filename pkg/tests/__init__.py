import copy
from pathlib import Path
from typing import Any, Dict

import yaml

from uavtwin.airsim import ClockState
from uavtwin.scene import ScenarioConfig, config_from_dict

BEAM_NORTH = {
    'kind': 'directional',
    'boresight_azimuth': 0.0,
    'boresight_elevation': 8.0,
    'beamwidth_10db': 40.0,
    'out_of_beam_loss': 100.0,
}

EMITTER_RECEIVERS = [[-800.0, -700.0, 20.0], [900.0, -800.0, 25.0], [850.0, 750.0, 15.0], [-750.0, 850.0, 30.0]]


def radar_scenario(**sections) -> Dict[str, Any]:
    """Rooftop radar on a short symbol, the UAV circling through the receive beams."""
    data = {
        'schema_version': 1,
        'name': 'test_radar',
        'mode': 'radar',
        'nodes': [
            {'id': 'tx', 'role': 'tx', 'position': [0.0, 0.0, 15.0], 'eirp': 46.0},
            {'id': 'rx1', 'role': 'rx', 'position': [-10.0, 0.0, 15.0], 'antenna': dict(BEAM_NORTH)},
            {'id': 'rx2', 'role': 'rx', 'position': [10.0, 0.0, 15.0], 'antenna': dict(BEAM_NORTH)},
            {'id': 'rx3', 'role': 'rx', 'position': [0.0, 10.0, 15.0], 'antenna': dict(BEAM_NORTH)},
            {'id': 'uav', 'role': 'mobile'},
        ],
        'trajectory': {'kind': 'circle', 'center': [80.0, 80.0], 'radius': 60.0, 'altitude': 30.0, 'speed': 5.0},
        'waveform': {'n_subcarriers': 256, 'symbol_length': 3.2e-6},
        'impairments': {'snr_db': 10.0, 'reference_range': 100.0, 'clutter': [{'delay': 2.0e-7, 'gain_db': 40.0}]},
        'radar': {'threshold_db': 16.0, 'altitude_constraint': 30.0},
        'surveillance': {'east': [-50.0, 250.0], 'north': [-50.0, 250.0], 'up': [0.0, 100.0], 'grid_step': 10.0},
    }
    return with_sections(data, **sections)


def emitter_scenario(**sections) -> Dict[str, Any]:
    """Four receivers over a 2 km block, noiseless and with perfect clocks."""
    nodes = [{'id': f'rx{i + 1}', 'role': 'rx', 'position': p} for i, p in enumerate(EMITTER_RECEIVERS)]
    nodes.append({'id': 'uav', 'role': 'mobile', 'eirp': 23.0})
    data = {
        'schema_version': 1,
        'name': 'test_emitter',
        'mode': 'emitter',
        'nodes': nodes,
        'trajectory': {
            'kind': 'waypoints',
            'speed': 8.0,
            'points': [[-400.0, -300.0, 30.0], [400.0, -300.0, 30.0], [400.0, 300.0, 30.0]],
        },
        'impairments': {'noiseless': True},
        'emitter': {'epoch_interval': 0.5},
        'surveillance': {'east': [-1000.0, 1000.0], 'north': [-1000.0, 1000.0], 'up': [0.0, 100.0], 'grid_step': 50.0},
    }
    return with_sections(data, **sections)


def with_beacons(data: Dict[str, Any], duration: float = 600.0, window: float = 31.0, **sync) -> Dict[str, Any]:
    """Add a calibration beacon, a verification beacon and drifting receiver clocks."""
    data = copy.deepcopy(data)
    data['nodes'] += [
        {'id': 'mast', 'role': 'beacon', 'position': [0.0, 0.0, 40.0], 'eirp': 23.0},
        {'id': 'roof', 'role': 'beacon', 'position': [300.0, -200.0, 35.0], 'eirp': 23.0},
    ]
    data['impairments'] = dict(data.get('impairments', {}), clock={})
    data['sync'] = dict({'beacon': 'mast', 'verify_beacon': 'roof', 'duration': duration, 'window': window}, **sync)
    return data


def with_sections(data: Dict[str, Any], **sections) -> Dict[str, Any]:
    """Copy of `data` with the given top level sections updated key by key."""
    data = copy.deepcopy(data)
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = dict(data[key], **value)
        else:
            data[key] = value
    return data


def shifted_clock(offset: float, duration: float = 200.0) -> ClockState:
    """Drift free clock with a constant offset."""
    perfect = ClockState.perfect(duration)
    return ClockState(offset, perfect.drift_times, perfect.drift_errors, perfect.gnss_times, perfect.gnss_errors)


def build(data: Dict[str, Any]) -> ScenarioConfig:
    return config_from_dict(copy.deepcopy(data))


def write_scenario_file(directory, data: Dict[str, Any], name: str = 'scenario.yaml') -> str:
    path = Path(directory) / name
    with open(path, 'w', encoding='utf-8') as scenario_file:
        yaml.safe_dump(data, scenario_file)
    return str(path)

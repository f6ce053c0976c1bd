"""Command line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 invalid scenario.
"""
import argparse
import asyncio
import logging
from contextlib import nullcontext
from pathlib import Path

from uavtwin import harness
from uavtwin.commands import (CalibrateCommand, EmitterCommand, ListRunsCommand, RadarCommand, ReportCommand,
                              SimulateCommand, SweepFilterCommand, execute_command)
from uavtwin.exceptions import ScenarioParseException, ScenarioValidationException
from uavtwin.store import open_store

LOG = logging.getLogger('cli')

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_SCENARIO = 3


def _scenario_options(parser: argparse.ArgumentParser):
    parser.add_argument('--scenario', type=str, required=True, help='Scenario YAML file.')
    parser.add_argument('--seed', type=int, default=0, help='Seed of all random streams, default=0')


def _run_options(parser: argparse.ArgumentParser):
    parser.add_argument('--snapshots', type=int, default=None, help='Limit the number of snapshots or epochs.')
    parser.add_argument('--snr-db', type=float, default=None, help='Override the SNR of the reference path.')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='uavtwin',
                                     description='Digital twin of a distributed UAV localization testbed.')
    parser.add_argument(
        '-log',
        '--loglevel',
        default='warning',
        help='Provide logging level. Example --loglevel debug, default=warning',
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--out', type=str, default='.', help='Output directory, default is the current directory.')
    subparsers = parser.add_subparsers(dest='command', required=True)

    simulate = subparsers.add_parser('simulate', parents=[common], help='Write IQ recordings of a burst.')
    _scenario_options(simulate)
    _run_options(simulate)
    simulate.add_argument('--frame-loss', type=float, default=0.0, help='Fraction of frames lost, default=0')

    calibrate = subparsers.add_parser('calibrate',
                                      parents=[common],
                                      help='Calibrate the receiver clocks with the beacon.')
    _scenario_options(calibrate)

    for mode in ('radar', 'emitter'):
        run = subparsers.add_parser(mode, parents=[common], help=f'Run a {mode} campaign.')
        _scenario_options(run)
        _run_options(run)
        run.add_argument('--workers',
                         type=int,
                         default=None,
                         help='Worker threads, 0 for one per CPU. Taken from $UAVTWIN_WORKERS if not given.')

    sweep = subparsers.add_parser('sweep-filter', parents=[common], help='Sweep the GNSS filter window.')
    _scenario_options(sweep)
    sweep.add_argument('--windows',
                       type=float,
                       nargs='+',
                       default=list(harness.DEFAULT_WINDOWS),
                       help='Window lengths in seconds.')

    report = subparsers.add_parser('report', parents=[common], help='Show an archived campaign report.')
    report.add_argument('--run', type=str, default=None, help='Run name, <mode>-<seed>.')
    report.add_argument('--mode', choices=('radar', 'emitter'), default=None, help='Mode of the run.')
    report.add_argument('--seed', type=int, default=0, help='Seed of the run, default=0')
    report.add_argument('--list', action='store_true', help='List the archived runs.')
    return parser


def build_command(args: argparse.Namespace):
    """Command object for the parsed arguments, and whether it needs the archive."""
    if args.command == 'simulate':
        return SimulateCommand(scenario_path=args.scenario,
                               seed=args.seed,
                               output_dir=args.out,
                               snapshots=args.snapshots,
                               snr_db=args.snr_db,
                               frame_loss=args.frame_loss), False
    if args.command == 'calibrate':
        return CalibrateCommand(scenario_path=args.scenario, seed=args.seed, output_dir=args.out), False
    if args.command in ('radar', 'emitter'):
        command = RadarCommand if args.command == 'radar' else EmitterCommand
        return command(scenario_path=args.scenario,
                       seed=args.seed,
                       output_dir=args.out,
                       snapshots=args.snapshots,
                       snr_db=args.snr_db,
                       workers=args.workers), True
    if args.command == 'sweep-filter':
        return SweepFilterCommand(scenario_path=args.scenario, windows=args.windows, seed=args.seed,
                                  output_dir=args.out), False
    if args.list:
        return ListRunsCommand(), True
    return ReportCommand(run=args.run, mode=args.mode, seed=args.seed), True


def render(command_name: str, value) -> str:
    """Text printed for a successful command."""
    if command_name in ('radar', 'emitter') or (command_name == 'report' and hasattr(value, 'summary')):
        return value.summary()
    if command_name == 'simulate':
        return ''.join(f'{path}\n' for path in value)
    if command_name == 'calibrate':
        return value.offset_table().to_string(index=False) + '\n'
    if command_name == 'sweep-filter':
        return (value.to_frame().to_string(index=False) + f'\nraw_variance_s2: {value.raw_variance:.6g}\n' +
                f'best_window_seconds: {value.best_window:g}\n')
    return ''.join(f'{name}\n' for name in value)


async def run(args: argparse.Namespace) -> int:
    command, needs_store = build_command(args)
    if args.command == 'report' and not args.list and args.run is None and args.mode is None:
        LOG.error('report needs --run or --mode')
        return EXIT_USAGE
    store_path = Path(args.out) / harness.STORE_NAME
    with open_store(store_path) if needs_store else nullcontext() as store:
        result = await execute_command(command, store)
    if result.failed:
        if isinstance(result.data, (ScenarioParseException, ScenarioValidationException)):
            return EXIT_SCENARIO
        return EXIT_FAILURE
    print(render(args.command, result.data), end='')
    return EXIT_OK


def main(argv=None) -> int:
    """Main method of the command line."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.loglevel.upper())
    return asyncio.run(run(args), debug=args.loglevel.upper() == 'DEBUG')


if __name__ == '__main__':
    raise SystemExit(main())

"""This module provides the command objects the command line executes."""
import logging
from enum import Enum, auto

from uavtwin import harness
from uavtwin.exceptions import NotACommandException, TwinBaseException
from uavtwin.report import run_name

LOG = logging.getLogger('commands')


class CommandState(Enum):
    """States that a command can be in."""
    CREATED = auto()
    EXECUTED = auto()
    FAILED = auto()
    SUCCEEDED = auto()


class Result:
    """Wrapper around a result, so that the state travels with the value or the error."""
    def __init__(self, data, state):
        self.data = data
        self.state = state

    @property
    def failed(self) -> bool:
        return self.state == CommandState.FAILED

    def raise_error(self):
        """Raise an exception if the result is failed."""
        if self.failed:
            raise self.data

    def get_value(self) -> any:
        """Checks if the result is successfull or not and returns the value if so."""
        self.raise_error()
        return self.data


class Command:
    """Base class for campaign commands."""
    state = CommandState.CREATED
    result = None

    def __init__(self, **kwargs):
        self.command_args = kwargs

    async def execute(self, store) -> Result:
        """Executes the command and stores the result or error."""
        self.state = CommandState.EXECUTED
        try:
            self.result = await self.execute_command(store, **self.command_args)
            self.state = CommandState.SUCCEEDED
        except TwinBaseException as e:
            LOG.error('%s failed: %s', type(self).__name__, e)
            self.result = e
            self.state = CommandState.FAILED
        except Exception as e:  # pylint: disable=W0703
            logging.getLogger().exception('Unhandled exception %r', e)
            self.result = e
            self.state = CommandState.FAILED

        return Result(self.result, self.state)

    async def execute_command(self, store, **kwargs):
        """Commands need to implement this to return the command."""
        raise NotImplementedError('Commands need to provide this method')


async def execute_command(command: Command, store):
    """Checks if the command is an instance of command and if so execute it."""
    if isinstance(command, Command):
        return await command.execute(store)
    raise NotACommandException('Command is not instance of command!')


class SimulateCommand(Command):
    """Write IQ recordings of a scenario.

    For the parameters refer to `harness.simulate`.
    """
    async def execute_command(self, store, **kwargs):
        return await harness.simulate(**kwargs)


class CalibrateCommand(Command):
    """Calibrate the receiver clocks with the scenario's beacon."""
    async def execute_command(self, store, **kwargs):
        return await harness.calibrate_campaign(**kwargs)


class RadarCommand(Command):
    """Run a radar campaign and archive its report."""
    async def execute_command(self, store, **kwargs):
        return await harness.run_campaign(mode='radar', store=store, **kwargs)


class EmitterCommand(Command):
    """Run an emitter campaign and archive its report."""
    async def execute_command(self, store, **kwargs):
        return await harness.run_campaign(mode='emitter', store=store, **kwargs)


class SweepFilterCommand(Command):
    """Sweep the GNSS filter window."""
    async def execute_command(self, store, **kwargs):
        return await harness.sweep_filter_window(**kwargs)


class ReportCommand(Command):
    """Read an archived report, by run name or by mode and seed."""
    async def execute_command(self, store, run=None, mode=None, seed=0):
        name = run if run is not None else run_name(mode, seed)
        return store.get(name)


class ListRunsCommand(Command):
    """Names of all archived runs."""
    async def execute_command(self, store, **kwargs):
        return store.names()

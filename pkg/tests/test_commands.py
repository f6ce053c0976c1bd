import pytest

from tests import emitter_scenario, write_scenario_file
from uavtwin.commands import (Command, CommandState, EmitterCommand, ListRunsCommand, RadarCommand, ReportCommand,
                              execute_command)
from uavtwin.exceptions import (CampaignNotFoundException, NotACommandException, ScenarioValidationException,
                                TwinBaseException)
from uavtwin.report import build_report
from uavtwin.store import CampaignStore


@pytest.fixture
def store():
    return CampaignStore()


class TestCommands:
    @pytest.mark.asyncio
    async def test_base_command(self, store):
        class TestCommand(Command):
            async def execute_command(self, store: CampaignStore, **kwargs):
                return (store, kwargs)

        kwargs = {'scenario_path': 'test.yaml', 'a': 1, 'b': 3}
        test_command = TestCommand(**kwargs)

        assert test_command.state == CommandState.CREATED
        assert test_command.result is None
        assert test_command.command_args == kwargs

        result = await test_command.execute(store)
        assert test_command.state == CommandState.SUCCEEDED
        assert test_command.result[0] is store
        assert test_command.result[1] == kwargs
        assert result.get_value() == test_command.result

        with pytest.raises(NotImplementedError):
            await Command().execute_command(None)

    @pytest.mark.asyncio
    async def test_execute_non_command(self, store):
        with pytest.raises(NotACommandException):
            await execute_command(object(), store)

    @pytest.mark.asyncio
    async def test_base_failing(self, store):
        class TestFailingCommand(Command):
            async def execute_command(self, store: CampaignStore, **kwargs):
                raise TwinBaseException()

        command = TestFailingCommand(a=1)
        result = await command.execute(store)

        assert command.state == CommandState.FAILED
        assert isinstance(command.result, TwinBaseException)
        assert result.failed
        with pytest.raises(TwinBaseException):
            result.raise_error()

        class TestFailingUnknownCommand(Command):
            async def execute_command(self, store: CampaignStore, **kwargs):
                raise Exception()

        command = TestFailingUnknownCommand(a=1)
        await command.execute(store)
        assert command.state == CommandState.FAILED
        assert isinstance(command.result, Exception)

    @pytest.mark.asyncio
    async def test_report_command(self, store):
        store.save(build_report('test', 'radar', 4, 10, []))

        by_mode = await execute_command(ReportCommand(mode='radar', seed=4), store)
        by_name = await execute_command(ReportCommand(run='radar-4'), store)
        assert by_mode.get_value() is by_name.get_value()
        assert by_mode.get_value().epochs == 10

        missing = await execute_command(ReportCommand(run='emitter-0'), store)
        assert missing.state == CommandState.FAILED
        with pytest.raises(CampaignNotFoundException):
            missing.raise_error()

    @pytest.mark.asyncio
    async def test_emitter_command(self, store, tmpdir):
        path = write_scenario_file(tmpdir, emitter_scenario())
        command = EmitterCommand(scenario_path=path, output_dir=str(tmpdir), snapshots=3)
        report = (await execute_command(command, store)).get_value()

        assert report.mode == 'emitter'
        assert len(report.fixes) == 3
        assert store.exists('emitter-0')
        assert (await execute_command(ListRunsCommand(), store)).get_value() == ['emitter-0']

    @pytest.mark.asyncio
    async def test_mode_mismatch(self, store, tmpdir):
        path = write_scenario_file(tmpdir, emitter_scenario())
        result = await execute_command(RadarCommand(scenario_path=path, output_dir=str(tmpdir)), store)

        assert result.failed
        assert isinstance(result.data, ScenarioValidationException)
        assert store.names() == []

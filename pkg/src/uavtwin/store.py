"""Archive of campaign reports.

Reports are kept in a ZODB database, one record per run keyed by `<mode>-<seed>`, so the
`report` command can show them again without rerunning the campaign. A later run with the
same key replaces the earlier one.
"""
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import List, Optional

import persistent
import transaction
import ZODB
import ZODB.FileStorage
from BTrees.OOBTree import \
    OOBTree  # pylint: disable=import-error,no-name-in-module

from uavtwin.exceptions import CampaignNotFoundException
from uavtwin.report import CampaignReport

LOG = logging.getLogger('store')


class CampaignRecord(persistent.Persistent):
    """A stored report."""
    def __init__(self, report: CampaignReport):
        self.name = report.name
        self.scenario = report.scenario
        self.mode = report.mode
        self.seed = report.seed
        self.report = report


class CampaignStore:
    """
    Store campaign reports by run name.
    """
    def __init__(self, path: Optional[str] = None):
        """Open the database at the given file, or in memory if `path` is `None`."""
        self.transaction = transaction.TransactionManager()
        self.root = None

        if path is not None:
            self.path = Path(path)
            self.path.parent.mkdir(parents=True, exist_ok=True)
            LOG.debug('Connecting to storage at %s', self.path)
            self.storage = ZODB.FileStorage.FileStorage(str(self.path))
        else:
            LOG.debug('Creating database in memory.')
            self.path = None
            self.storage = None
        self.db = ZODB.DB(self.storage)

        if self.storage is None:
            self.load_database()

    def load_database(self):
        """Initialize the database from the filesystem"""
        LOG.debug('Loading database.')
        connection = self.db.open(self.transaction)
        self.root = connection.root()

        if 'campaigns' not in self.root:
            LOG.info('No campaign archive yet, creating an empty one.')
            self.root['campaigns'] = OOBTree()
            self.transaction.commit()

        LOG.debug('Loaded database.')

    def close(self):
        """Closes the connection to the database so the locks are released."""
        self.db.close()

    def exists(self, name: str) -> bool:
        return name in self.root['campaigns']

    def save(self, report: CampaignReport) -> str:
        """Store the report under its run name and return that name."""
        if self.exists(report.name):
            LOG.info('Replacing stored run %s', report.name)
        self.root['campaigns'][report.name] = CampaignRecord(report)
        self.transaction.commit()
        LOG.debug('Stored run %s', report.name)
        return report.name

    def get(self, name: str) -> CampaignReport:
        try:
            return self.root['campaigns'][name].report
        except KeyError as e:
            raise CampaignNotFoundException(name) from e

    def delete(self, name: str):
        if not self.exists(name):
            raise CampaignNotFoundException(name)
        del self.root['campaigns'][name]
        self.transaction.commit()

    def names(self) -> List[str]:
        return list(self.root['campaigns'].keys())


@contextmanager
def open_store(path):
    """Open a store, load it and close it as soon as the context is over."""
    store = CampaignStore(path)
    if path is not None:
        store.load_database()

    try:
        yield store
    finally:
        store.close()

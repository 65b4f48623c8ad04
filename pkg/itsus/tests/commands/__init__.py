import os
import tempfile
from io import StringIO

import yaml
from django.core.management import call_command

from itsus.tests.factories import RunConfigDataFactory


class CommandTestMixin:
    """
    A temporary working directory and helpers to write configurations and call commands.
    """

    def setUp(self):
        super().setUp()
        self.directory = tempfile.TemporaryDirectory()
        self.addCleanup(self.directory.cleanup)

    def path(self, *parts):
        return os.path.join(self.directory.name, *parts)

    def write_config(self, name="run.yml", **data):
        path = self.path(name)
        with open(path, "w", encoding="utf-8") as handle:
            yaml.safe_dump(RunConfigDataFactory(**data), handle)
        return path

    def call(self, *args, **options):
        out, err = StringIO(), StringIO()
        call_command(*args, stdout=out, stderr=err, verbosity=0, **options)
        self.stderr = err.getvalue()
        return out.getvalue()

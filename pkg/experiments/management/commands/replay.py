import logging

from django.core.management import call_command

import frflow
from experiments.management.base import ExperimentCommand
from experiments.runner import load_manifest

logger = logging.getLogger(__name__)


class Command(ExperimentCommand):
    help = "Re-run a recorded experiment from its manifest"
    name = "replay"

    def add_arguments(self, parser):
        parser.add_argument("manifest", help="manifest.json, its directory, or a recorded manifest id")
        super().add_arguments(parser)

    def run(self, **options):
        manifest = load_manifest(options["manifest"])
        if manifest["tool_version"] != frflow.__version__:
            logger.warning(
                "manifest was recorded with version %s, running %s", manifest["tool_version"], frflow.__version__
            )
        out = options["out"] or manifest["output_dir"]
        call_command(
            manifest["command"],
            manifest["instance_path"],
            out=out,
            stdout=self.stdout,
            stderr=self.stderr,
            **manifest["overrides"],
        )

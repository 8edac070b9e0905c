from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from experiments.runner import record_manifest
from frflow.conf import frflow_setting
from frflow.exceptions import FrflowError


def fmt(value):
    if value is None or (isinstance(value, float) and value != value):
        return "n/a"
    return f"{value:.10g}"


class ExperimentCommand(BaseCommand):
    """Shared ``--out`` handling, exit codes and manifest recording.

    Subclasses implement ``run(**options)`` and list in ``recorded_options``
    the option names ``replay`` passes back verbatim.
    """

    name = ""
    recorded_options = ()

    def add_arguments(self, parser):
        parser.add_argument("--out", default=None, help="output directory")

    def handle(self, *args, **options):
        try:
            self.run(**options)
        except FrflowError as exc:
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=exc.exit_code) from exc

    def run(self, **options):
        raise NotImplementedError

    def output_dir(self, options, stem):
        if options.get("out"):
            return Path(options["out"])
        return Path(frflow_setting("OUTPUT_DIR")) / f"{self.name}-{stem}"

    def record(self, positional, options, output_dir, seeds=()):
        overrides = {key: options.get(key) for key in self.recorded_options}
        return record_manifest(self.name, positional, overrides, output_dir, seeds)


def add_instance_arguments(parser):
    parser.add_argument("instance", help="instance file, or the name of a bundled instance")
    parser.add_argument("--alpha", type=float, default=None, help="alpha of the ex35 recipe")


def recipe_overrides(options):
    return None if options.get("alpha") is None else {"alpha": options["alpha"]}

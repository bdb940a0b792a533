from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from meshless_ddm.experiments.runconfig import PRESETS, load_run_config
from meshless_ddm.experiments.runner import run_experiment
from meshless_ddm.solver.exceptions import DivergenceError, InvalidConfigError, InvalidGeometryError


class Command(BaseCommand):
    help = "Train a decomposed solver from a run configuration file or a problem preset name."

    def add_arguments(self, parser):
        parser.add_argument("config", help="run configuration file, or one of: " + ", ".join(PRESETS))
        parser.add_argument("--seed", type=int, help="override [training] seed")
        parser.add_argument("--out", help="output directory for the run artifacts")
        parser.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="set one configuration value, as section.key=value or key=value; repeatable",
        )
        parser.add_argument("--no-record", action="store_true", help="do not store the run in the database")

    def handle(self, *args, **options):
        source = options["config"]
        preset = source if source in PRESETS and not Path(source).exists() else None
        try:
            config = load_run_config(
                None if preset else source,
                preset=preset,
                overrides=options["override"],
                seed=options["seed"],
                out=options["out"],
            )
            outcome = run_experiment(config, record=False if options["no_record"] else None)
        except (InvalidConfigError, InvalidGeometryError) as exc:
            raise CommandError(f"configuration error: {exc}", returncode=2) from exc
        except DivergenceError as exc:
            directory = config.output_directory(settings.DDM_OUTPUT_ROOT)
            raise CommandError(
                f"training diverged: {exc}; {len(exc.history)} completed outer iterations flushed to {directory}",
                returncode=3,
            ) from exc

        self.stdout.write(outcome.directory.summary.read_text(encoding="utf-8").rstrip("\n"))
        self.stdout.write(self.style.SUCCESS(f"artifacts written to {outcome.directory.path}"))

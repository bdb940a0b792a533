from django.core.management.base import BaseCommand, CommandError

from meshless_ddm.experiments.comparison import ReportFormatError, compare_table1


class Command(BaseCommand):
    help = "Compare the final errors of two runs, given as report.csv files or run directories."

    def add_arguments(self, parser):
        parser.add_argument("first")
        parser.add_argument("second")
        parser.add_argument("--labels", nargs=2, default=["A", "B"], metavar=("FIRST", "SECOND"))
        parser.add_argument("--tolerance", type=float, help="largest acceptable max relative L2 error")

    def handle(self, *args, **options):
        try:
            comparison = compare_table1(
                options["first"],
                options["second"],
                labels=tuple(options["labels"]),
                tolerance=options["tolerance"],
            )
        except ReportFormatError as exc:
            raise CommandError(str(exc), returncode=2) from exc

        self.stdout.write(comparison.format())
        if comparison.passed is False:
            raise CommandError("a run exceeds the tolerance", returncode=1)

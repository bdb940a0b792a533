# Generated by Django 4.1.8 on 2026-10-19 09:12

from django.db import migrations, models
import django.db.models.deletion
import django.utils.timezone
import model_utils.fields


class Migration(migrations.Migration):
    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="ExperimentRun",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                (
                    "created",
                    model_utils.fields.AutoCreatedField(
                        default=django.utils.timezone.now, editable=False, verbose_name="created"
                    ),
                ),
                (
                    "modified",
                    model_utils.fields.AutoLastModifiedField(
                        default=django.utils.timezone.now, editable=False, verbose_name="modified"
                    ),
                ),
                (
                    "status",
                    model_utils.fields.StatusField(
                        choices=[("running", "running"), ("completed", "completed"), ("diverged", "diverged")],
                        default="running",
                        max_length=100,
                        no_check_for_status=True,
                        verbose_name="status",
                    ),
                ),
                (
                    "status_changed",
                    model_utils.fields.MonitorField(
                        default=django.utils.timezone.now, monitor="status", verbose_name="status changed"
                    ),
                ),
                ("problem", models.CharField(max_length=32, verbose_name="problem")),
                ("seed", models.IntegerField(verbose_name="seed")),
                ("alpha_mode", models.CharField(max_length=32, verbose_name="alpha mode")),
                ("subdomains", models.PositiveIntegerField(verbose_name="subdomains")),
                ("epochs", models.PositiveIntegerField(verbose_name="epochs per outer iteration")),
                ("outer_iterations", models.PositiveIntegerField(verbose_name="outer iterations")),
                ("config", models.TextField(verbose_name="resolved configuration")),
                ("output_dir", models.CharField(max_length=500, verbose_name="output directory")),
                ("max_rel_l2", models.FloatField(blank=True, null=True, verbose_name="max relative L2 error")),
                ("max_error", models.FloatField(blank=True, null=True, verbose_name="max absolute error")),
                ("alphas", models.JSONField(blank=True, default=dict, verbose_name="learned alphas")),
                ("wall_time", models.FloatField(blank=True, null=True, verbose_name="wall time (s)")),
                ("failure", models.TextField(blank=True, verbose_name="failure")),
            ],
            options={
                "verbose_name": "experiment run",
                "verbose_name_plural": "experiment runs",
                "ordering": ["-created"],
            },
        ),
        migrations.CreateModel(
            name="IterationRecord",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("iteration", models.PositiveIntegerField(verbose_name="outer iteration")),
                ("subdomain", models.PositiveIntegerField(verbose_name="subdomain")),
                ("objective", models.FloatField(blank=True, null=True, verbose_name="J")),
                ("boundary", models.FloatField(blank=True, null=True, verbose_name="boundary C")),
                ("interface", models.FloatField(blank=True, null=True, verbose_name="interface C")),
                ("measurement", models.FloatField(blank=True, null=True, verbose_name="measurement C")),
                ("alpha", models.FloatField(verbose_name="alpha")),
                ("rel_l2", models.FloatField(verbose_name="relative L2 error")),
                ("max_error", models.FloatField(verbose_name="max absolute error")),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="iterations",
                        to="experiments.experimentrun",
                        verbose_name="run",
                    ),
                ),
            ],
            options={
                "verbose_name": "iteration record",
                "verbose_name_plural": "iteration records",
                "ordering": ["iteration", "subdomain"],
            },
        ),
        migrations.AddConstraint(
            model_name="iterationrecord",
            constraint=models.UniqueConstraint(
                fields=("run", "iteration", "subdomain"), name="unique_run_iteration_subdomain"
            ),
        ),
    ]

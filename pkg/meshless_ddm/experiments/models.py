import math

from django.db import models
from django.utils.translation import gettext_lazy as _
from model_utils import Choices
from model_utils.models import StatusModel, TimeStampedModel

from meshless_ddm.experiments.runconfig import RunConfig
from meshless_ddm.solver.ddm import DdmResult, OuterIteration
from meshless_ddm.solver.exceptions import DivergenceError


def _finite_or_none(value: float) -> float | None:
    return float(value) if math.isfinite(value) else None


class ExperimentRun(TimeStampedModel, StatusModel):
    STATUS = Choices(("running", _("running")), ("completed", _("completed")), ("diverged", _("diverged")))

    class Meta:
        verbose_name = _("experiment run")
        verbose_name_plural = _("experiment runs")
        ordering = ["-created"]

    problem = models.CharField(_("problem"), max_length=32)
    seed = models.IntegerField(_("seed"))
    alpha_mode = models.CharField(_("alpha mode"), max_length=32)
    subdomains = models.PositiveIntegerField(_("subdomains"))
    epochs = models.PositiveIntegerField(_("epochs per outer iteration"))
    outer_iterations = models.PositiveIntegerField(_("outer iterations"))
    config = models.TextField(_("resolved configuration"))
    output_dir = models.CharField(_("output directory"), max_length=500)
    max_rel_l2 = models.FloatField(_("max relative L2 error"), blank=True, null=True)
    max_error = models.FloatField(_("max absolute error"), blank=True, null=True)
    alphas = models.JSONField(_("learned alphas"), default=dict, blank=True)
    wall_time = models.FloatField(_("wall time (s)"), blank=True, null=True)
    failure = models.TextField(_("failure"), blank=True)

    def __str__(self):
        return f"{self.problem} seed={self.seed} ({self.alpha_mode})"

    @classmethod
    def start(cls, config: RunConfig, subdomains: int, output_dir: str) -> "ExperimentRun":
        return cls.objects.create(
            problem=config.problem,
            seed=config.seed,
            alpha_mode=config.alpha_label,
            subdomains=subdomains,
            epochs=config.epochs,
            outer_iterations=config.outer_iterations,
            config=config.to_ini(),
            output_dir=output_dir,
        )

    def record_iteration(self, entry: OuterIteration) -> None:
        IterationRecord.objects.bulk_create(
            [
                IterationRecord(
                    run=self,
                    iteration=entry.iteration,
                    subdomain=k,
                    objective=_finite_or_none(record.objective),
                    boundary=_finite_or_none(record.boundary),
                    interface=_finite_or_none(record.interface),
                    measurement=_finite_or_none(record.measurement),
                    alpha=record.alpha,
                    rel_l2=entry.errors.subdomains[k].rel_l2,
                    max_error=entry.errors.subdomains[k].max_error,
                )
                for k, record in sorted(entry.locals.items())
            ]
        )

    def mark_completed(self, result: DdmResult) -> None:
        errors = result.final.errors
        self.status = self.STATUS.completed
        self.max_rel_l2 = errors.max_rel_l2
        self.max_error = errors.max_error
        self.alphas = {str(k): a for k, a in result.final.alphas.items()}
        self.wall_time = result.wall_time
        self.save()

    def mark_diverged(self, error: DivergenceError) -> None:
        self.status = self.STATUS.diverged
        self.failure = str(error)
        if error.history:
            self.alphas = {str(k): a for k, a in error.history[-1].alphas.items()}
        self.save()

    def completed_iterations(self):
        return self.iterations.values("iteration").distinct().count()


class IterationRecord(models.Model):
    class Meta:
        verbose_name = _("iteration record")
        verbose_name_plural = _("iteration records")
        ordering = ["iteration", "subdomain"]
        constraints = [
            models.UniqueConstraint(fields=["run", "iteration", "subdomain"], name="unique_run_iteration_subdomain")
        ]

    run = models.ForeignKey(
        ExperimentRun, on_delete=models.CASCADE, related_name="iterations", verbose_name=_("run")
    )
    iteration = models.PositiveIntegerField(_("outer iteration"))
    subdomain = models.PositiveIntegerField(_("subdomain"))
    objective = models.FloatField(_("J"), blank=True, null=True)
    boundary = models.FloatField(_("boundary C"), blank=True, null=True)
    interface = models.FloatField(_("interface C"), blank=True, null=True)
    measurement = models.FloatField(_("measurement C"), blank=True, null=True)
    alpha = models.FloatField(_("alpha"))
    rel_l2 = models.FloatField(_("relative L2 error"))
    max_error = models.FloatField(_("max absolute error"))

    def __str__(self):
        return f"{self.run} t={self.iteration} k={self.subdomain}"

from django.contrib import admin
from django.utils.translation import gettext_lazy as _

from .models import ExperimentRun, IterationRecord


class IterationRecordInline(admin.TabularInline):
    model = IterationRecord
    extra = 0
    can_delete = False
    readonly_fields = (
        "iteration",
        "subdomain",
        "objective",
        "boundary",
        "interface",
        "measurement",
        "alpha",
        "rel_l2",
        "max_error",
    )


class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = (
        "problem",
        "alpha_mode",
        "seed",
        "status",
        "iterations_done",
        "formatted_max_rel_l2",
        "formatted_max_error",
        "learned_alphas",
        "created",
    )
    list_filter = ("status", "problem", "alpha_mode")
    search_fields = ("problem", "output_dir")
    readonly_fields = ("config", "output_dir", "alphas", "failure", "wall_time", "status_changed")
    inlines = [IterationRecordInline]

    def formatted_max_rel_l2(self, obj):
        return "-" if obj.max_rel_l2 is None else f"{obj.max_rel_l2:.3e}"

    formatted_max_rel_l2.admin_order_field = "max_rel_l2"
    formatted_max_rel_l2.short_description = _("Max Rel L2")

    def formatted_max_error(self, obj):
        return "-" if obj.max_error is None else f"{obj.max_error:.3e}"

    formatted_max_error.admin_order_field = "max_error"
    formatted_max_error.short_description = _("Max Abs Error")

    def learned_alphas(self, obj):
        return ", ".join(f"{k}: {a:.4f}" for k, a in sorted(obj.alphas.items(), key=lambda item: int(item[0])))

    learned_alphas.short_description = _("Learned Alphas")

    def iterations_done(self, obj):
        return f"{obj.completed_iterations()} / {obj.outer_iterations}"

    iterations_done.short_description = _("Outer Iterations")


admin.site.register(ExperimentRun, ExperimentRunAdmin)

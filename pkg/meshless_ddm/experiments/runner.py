import logging
from dataclasses import dataclass
from pathlib import Path

from django.conf import settings

from meshless_ddm.experiments.artifacts import (
    RunDirectory,
    write_config,
    write_partial_artifacts,
    write_run_artifacts,
)
from meshless_ddm.experiments.models import ExperimentRun
from meshless_ddm.experiments.runconfig import RunConfig
from meshless_ddm.solver import ddm
from meshless_ddm.solver.exceptions import DivergenceError

logger = logging.getLogger(__name__)


@dataclass
class RunOutcome:
    config: RunConfig
    directory: RunDirectory
    result: ddm.DdmResult
    record: ExperimentRun | None = None


def run_experiment(
    config: RunConfig, *, record: bool | None = None, output_root: str | Path | None = None
) -> RunOutcome:
    """
    Run the decomposition described by ``config`` and write its artifacts.

    Worker count, evaluation grid and invariant checks come from the ``DDM_*``
    settings. On divergence the completed outer iterations are flushed to the run
    directory before the error propagates.
    """
    record = settings.DDM_RECORD_RUNS if record is None else record
    directory = RunDirectory(config.output_directory(output_root or settings.DDM_OUTPUT_ROOT)).prepare()
    write_config(directory, config)
    ddm_config = config.to_ddm_config(
        max_workers=settings.DDM_MAX_WORKERS,
        resolution=settings.DDM_EVAL_GRID,
        check_invariants=settings.DDM_CHECK_INVARIANTS,
    )

    run_record = ExperimentRun.start(config, len(ddm_config.partition), str(directory.path)) if record else None
    try:
        result = ddm.run(ddm_config, on_iteration=run_record.record_iteration if run_record else None)
    except DivergenceError as exc:
        write_partial_artifacts(directory, exc)
        if run_record is not None:
            run_record.mark_diverged(exc)
        raise

    write_run_artifacts(directory, config, ddm_config, result)
    if run_record is not None:
        run_record.mark_completed(result)
    logger.info(
        "%s (%s, seed %d) completed in %.1f s: max rel L2 %.3e",
        config.problem,
        config.alpha_label,
        config.seed,
        result.wall_time,
        result.final.errors.max_rel_l2,
    )
    return RunOutcome(config, directory, result, run_record)

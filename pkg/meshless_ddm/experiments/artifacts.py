"""
Files written into a run directory.

CSV files have a fixed header and column order; floats are written in scientific
notation with 17 significant digits, which reads back to the same float64.
"""
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from meshless_ddm.experiments.runconfig import RunConfig
from meshless_ddm.solver.ddm import DdmConfig, DdmResult, OuterIteration
from meshless_ddm.solver.exceptions import DivergenceError
from meshless_ddm.solver.metrics import FieldSample, sample_fields

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.16e"

REPORT_COLUMNS = [
    "iteration",
    "subdomain",
    "J",
    "boundary_C",
    "interface_C",
    "measurement_C",
    "alpha",
    "rel_l2",
    "max_err",
]
FIELD_COLUMNS = ["x", "y", "subdomain", "u_exact", "u_pred", "abs_err"]
INTERFACE_COLUMNS = ["iteration", "interface", "first", "second", "value_gap", "flux_gap"]


@dataclass(frozen=True)
class RunDirectory:
    path: Path

    @property
    def report(self) -> Path:
        return self.path / "report.csv"

    @property
    def fields(self) -> Path:
        return self.path / "fields.csv"

    @property
    def interfaces(self) -> Path:
        return self.path / "interfaces.csv"

    @property
    def summary(self) -> Path:
        return self.path / "summary.txt"

    @property
    def config(self) -> Path:
        return self.path / "config.resolved.ini"

    @property
    def divergence(self) -> Path:
        return self.path / "divergence.txt"

    def prepare(self) -> "RunDirectory":
        self.path.mkdir(parents=True, exist_ok=True)
        return self


def report_frame(history: Sequence[OuterIteration]) -> pd.DataFrame:
    rows = []
    for entry in history:
        for k in sorted(entry.locals):
            record, error = entry.locals[k], entry.errors.subdomains[k]
            rows.append(
                {
                    "iteration": entry.iteration,
                    "subdomain": k,
                    "J": record.objective,
                    "boundary_C": record.boundary,
                    "interface_C": record.interface,
                    "measurement_C": record.measurement,
                    "alpha": record.alpha,
                    "rel_l2": error.rel_l2,
                    "max_err": error.max_error,
                }
            )
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def interfaces_frame(history: Sequence[OuterIteration]) -> pd.DataFrame:
    rows = [
        {
            "iteration": entry.iteration,
            "interface": m.interface,
            "first": m.first,
            "second": m.second,
            "value_gap": m.value_gap,
            "flux_gap": m.flux_gap,
        }
        for entry in history
        for m in entry.mismatch
    ]
    return pd.DataFrame(rows, columns=INTERFACE_COLUMNS)


def fields_frame(samples: Sequence[FieldSample]) -> pd.DataFrame:
    frames = [
        pd.DataFrame(
            {
                "x": s.points[:, 0],
                "y": s.points[:, 1],
                "subdomain": np.full(len(s.points), s.subdomain, dtype=np.int64),
                "u_exact": s.exact,
                "u_pred": s.predicted,
                "abs_err": s.abs_error,
            },
            columns=FIELD_COLUMNS,
        )
        for s in samples
    ]
    if not frames:
        return pd.DataFrame(columns=FIELD_COLUMNS)
    return pd.concat(frames, ignore_index=True)


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n")
    return path


def summary_text(config: RunConfig, ddm_config: DdmConfig, result: DdmResult) -> str:
    partition = ddm_config.partition
    lines = [
        f"problem: {config.problem} {ddm_config.problem}",
        f"partition: {partition.kind}, {len(partition)} subdomains, {len(partition.interfaces)} interfaces",
        f"epochs: {config.epochs}  outer iterations: {config.outer_iterations}  seed: {config.seed}",
        f"alpha mode: {config.alpha_label}",
        *result.final.errors.summary_lines(digits=16),
    ]
    return "\n".join(lines) + "\n"


def write_config(directory: RunDirectory, config: RunConfig) -> Path:
    directory.config.write_text(config.to_ini(), encoding="utf-8")
    return directory.config


def write_run_artifacts(
    directory: RunDirectory, config: RunConfig, ddm_config: DdmConfig, result: DdmResult
) -> RunDirectory:
    """Report, fields, interface mismatch and summary of a finished run."""
    write_csv(report_frame(result.history), directory.report)
    write_csv(interfaces_frame(result.history), directory.interfaces)
    samples = sample_fields(
        {k: model.predict for k, model in result.models.items()},
        ddm_config.problem,
        ddm_config.partition,
        ddm_config.resolution,
    )
    write_csv(fields_frame(samples), directory.fields)
    directory.summary.write_text(summary_text(config, ddm_config, result), encoding="utf-8")
    logger.info("artifacts written to %s", directory.path)
    return directory


def write_partial_artifacts(directory: RunDirectory, error: DivergenceError) -> RunDirectory:
    """Flush the outer iterations completed before a divergence, plus its diagnostics."""
    write_csv(report_frame(error.history), directory.report)
    write_csv(interfaces_frame(error.history), directory.interfaces)
    lines = [str(error), *(f"{key}: {value}" for key, value in sorted(error.diagnostics.items()))]
    directory.divergence.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("partial history of %d outer iterations written to %s", len(error.history), directory.path)
    return directory

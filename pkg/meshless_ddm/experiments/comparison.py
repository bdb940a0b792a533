"""Side-by-side comparison of the final errors of two runs."""
import logging
from dataclasses import dataclass
from pathlib import Path

import pandas as pd

from meshless_ddm.experiments.artifacts import REPORT_COLUMNS
from meshless_ddm.solver.exceptions import MeshlessDDMError

logger = logging.getLogger(__name__)


class ReportFormatError(MeshlessDDMError, ValueError):
    def __init__(self, message: str, column: str | None = None):
        super().__init__(message)
        self.column = column


def read_report(path: str | Path) -> pd.DataFrame:
    """Load ``report.csv`` from a file path or a run directory and check its columns."""
    path = Path(path)
    if path.is_dir():
        path = path / "report.csv"
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as exc:
        raise ReportFormatError(f"{path}: no such report") from exc
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise ReportFormatError(f"{path}: not a report ({exc})") from exc
    for column in REPORT_COLUMNS:
        if column not in frame.columns:
            raise ReportFormatError(f"{path}: missing column {column!r}", column=column)
    if frame.empty:
        raise ReportFormatError(f"{path}: report has no rows")
    for column in REPORT_COLUMNS:
        if not pd.api.types.is_numeric_dtype(frame[column]):
            raise ReportFormatError(f"{path}: column {column!r} is not numeric", column=column)
    return frame


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    source: Path
    iteration: int
    max_rel_l2: float
    max_err: float
    alphas: dict[int, float]
    passed: bool | None = None

    def beats(self, other: "ComparisonRow") -> bool:
        return (self.max_rel_l2, self.max_err) < (other.max_rel_l2, other.max_err)


def comparison_row(label: str, path: str | Path, tolerance: float | None = None) -> ComparisonRow:
    frame = read_report(path)
    last = int(frame["iteration"].max())
    final = frame[frame["iteration"] == last]
    max_rel_l2 = float(final["rel_l2"].max())
    return ComparisonRow(
        label=label,
        source=Path(path),
        iteration=last,
        max_rel_l2=max_rel_l2,
        max_err=float(final["max_err"].max()),
        alphas={int(k): float(a) for k, a in zip(final["subdomain"], final["alpha"])},
        passed=None if tolerance is None else max_rel_l2 <= tolerance,
    )


@dataclass(frozen=True)
class Comparison:
    rows: tuple[ComparisonRow, ComparisonRow]
    winner: str | None
    tolerance: float | None = None

    @property
    def tie(self) -> bool:
        return self.winner is None

    @property
    def passed(self) -> bool | None:
        if self.tolerance is None:
            return None
        return all(row.passed for row in self.rows)

    def format(self) -> str:
        width = max(12, *(len(row.label) for row in self.rows))
        lines = [f"{'':<{width}}  {'max rel L2':>16}  {'max abs error':>16}  alpha"]
        for row in self.rows:
            status = "" if row.passed is None else ("  PASS" if row.passed else "  FAIL")
            alphas = ", ".join(f"{a:.4f}" for _, a in sorted(row.alphas.items()))
            lines.append(
                f"{row.label:<{width}}  {row.max_rel_l2:>16.6e}  {row.max_err:>16.6e}  [{alphas}]{status}"
            )
        if self.tolerance is not None:
            lines.append(f"tolerance on max rel L2: {self.tolerance:.3e}")
        lines.append("tie" if self.tie else f"winner: {self.winner}")
        return "\n".join(lines)


def compare_table1(
    first: str | Path,
    second: str | Path,
    *,
    labels: tuple[str, str] = ("A", "B"),
    tolerance: float | None = None,
) -> Comparison:
    """
    Compare the last outer iteration of two reports.

    The row with the smaller maximum relative L2 error wins, the maximum absolute
    error breaking ties; equal rows are a tie.

    Raises:
        ReportFormatError: a report is missing, unreadable or lacks a column.
    """
    a = comparison_row(labels[0], first, tolerance)
    b = comparison_row(labels[1], second, tolerance)
    winner = a.label if a.beats(b) else b.label if b.beats(a) else None
    logger.debug("compared %s and %s: winner %s", first, second, winner)
    return Comparison(rows=(a, b), winner=winner, tolerance=tolerance)

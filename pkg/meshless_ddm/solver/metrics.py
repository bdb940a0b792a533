import logging
from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from meshless_ddm.solver.exceptions import InvalidGeometryError
from meshless_ddm.solver.geometry import Partition, evaluation_grid
from meshless_ddm.solver.problems import ProblemSpec

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
Predictor = Callable[[FloatArray], FloatArray]

DEFAULT_RESOLUTION = 101


@dataclass(frozen=True)
class FieldSample:
    """Exact and predicted solution on the evaluation grid of one subdomain."""

    subdomain: int
    points: FloatArray
    exact: FloatArray
    predicted: FloatArray

    @property
    def abs_error(self) -> FloatArray:
        return np.abs(self.exact - self.predicted)


@dataclass(frozen=True)
class SubdomainError:
    rel_l2: float
    max_error: float
    n_points: int


@dataclass
class ErrorReport:
    subdomains: dict[int, SubdomainError]
    alphas: dict[int, float] = field(default_factory=dict)
    wall_time: float = float("nan")

    @property
    def max_rel_l2(self) -> float:
        return max(e.rel_l2 for e in self.subdomains.values())

    @property
    def max_error(self) -> float:
        return max(e.max_error for e in self.subdomains.values())

    def summary_lines(self, digits: int = 6) -> list[str]:
        lines = [
            f"maximum relative L2 error across subdomains: {self.max_rel_l2:.{digits}e}",
            f"maximum absolute error across subdomains: {self.max_error:.{digits}e}",
        ]
        for k in sorted(self.subdomains):
            e = self.subdomains[k]
            alpha = f"  alpha={self.alphas[k]:.6f}" if k in self.alphas else ""
            lines.append(f"subdomain {k}: rel_l2={e.rel_l2:.{digits}e}  max_err={e.max_error:.{digits}e}{alpha}")
        if np.isfinite(self.wall_time):
            lines.append(f"wall time: {self.wall_time:.2f} s")
        return lines


def sample_fields(
    predictors: Mapping[int, Predictor],
    problem: ProblemSpec,
    partition: Partition,
    resolution: int = DEFAULT_RESOLUTION,
) -> list[FieldSample]:
    samples = []
    for sub in partition.subdomains:
        points = evaluation_grid(sub, resolution)
        if points.shape[0] == 0:
            raise InvalidGeometryError(f"evaluation grid of subdomain {sub.id} is empty at resolution {resolution}")
        samples.append(
            FieldSample(
                subdomain=sub.id,
                points=points,
                exact=np.asarray(problem.exact(points), dtype=np.float64),
                predicted=np.asarray(predictors[sub.id](points), dtype=np.float64),
            )
        )
    return samples


def errors_from_fields(samples: list[FieldSample]) -> dict[int, SubdomainError]:
    errors = {}
    for sample in samples:
        diff = sample.exact - sample.predicted
        norm = float(np.linalg.norm(sample.exact))
        if norm == 0.0:
            logger.warning("exact solution vanishes on subdomain %d; reporting absolute L2 error", sample.subdomain)
            rel = float(np.linalg.norm(diff))
        else:
            rel = float(np.linalg.norm(diff)) / norm
        errors[sample.subdomain] = SubdomainError(rel, float(np.max(np.abs(diff))), sample.points.shape[0])
    return errors


def compute_errors(
    predictors: Mapping[int, Predictor],
    problem: ProblemSpec,
    partition: Partition,
    resolution: int = DEFAULT_RESOLUTION,
    alphas: Mapping[int, float] | None = None,
    wall_time: float = float("nan"),
) -> ErrorReport:
    """
    Relative L2 and maximum errors of every subdomain model on its masked uniform grid.

    Args:
        predictors: subdomain id to a callable returning the prediction at ``(N, 2)`` points.
        resolution: grid points per axis over each subdomain's bounding box.
    """
    samples = sample_fields(predictors, problem, partition, resolution)
    return ErrorReport(errors_from_fields(samples), dict(alphas or {}), wall_time)

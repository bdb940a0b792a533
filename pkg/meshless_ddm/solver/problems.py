"""
PDE problem definitions built from manufactured solutions.

Sources, boundary data and exact derivatives are derived symbolically from the closed-form
solution, so any expression in ``x`` and ``y`` yields a consistent problem.
"""
import dataclasses
import enum
import logging
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import sympy as sp
from numpy.typing import ArrayLike, NDArray

from meshless_ddm.solver.exceptions import InvalidConfigError
from meshless_ddm.solver.geometry import Box, Partition, sample_region
from meshless_ddm.solver.nets import JetBatch, JetEval

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
Field = Callable[[ArrayLike], FloatArray | float]

POISSON_SOLUTION = "sin(pi*x/2 - pi/2)*sin(pi*y/2 - pi/2)"
HELMHOLTZ_SOLUTION = "sin(pi*x)*cos(pi*y/2)"
UNIT_SQUARE = Box(-1.0, 1.0, -1.0, 1.0)

DEFAULT_MEASUREMENTS = {1: 128, 2: 32}
# mixed into the seed; measurement locations never share the collocation stream
MEASUREMENT_STREAM = 1
# Case 1 drops the bottom-right boundary, case 2 the bottom-left one (ids of the 2x2 split).
DESIGNATED_SUBDOMAIN = {1: 1, 2: 0}


class PdeKind(str, enum.Enum):
    POISSON = "poisson"
    HELMHOLTZ = "helmholtz"


@dataclass(frozen=True)
class MeasurementSet:
    subdomain: int
    points: FloatArray
    values: FloatArray
    noise: float = 0.0

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class ProblemSpec:
    kind: PdeKind
    expression: str
    exact: Field
    source: Field
    boundary: Field
    domain: Box = UNIT_SQUARE
    wavenumber: float = 0.0
    boundary_free: frozenset[int] = frozenset()
    measurements: tuple[MeasurementSet, ...] = ()

    @property
    def shift(self) -> float:
        """Coefficient of ``u`` in the residual: ``k^2`` for Helmholtz, 0 for Poisson."""
        return self.wavenumber**2 if self.kind is PdeKind.HELMHOLTZ else 0.0

    def has_boundary_data(self, subdomain: int) -> bool:
        return subdomain not in self.boundary_free

    def measurement_for(self, subdomain: int) -> MeasurementSet | None:
        return next((m for m in self.measurements if m.subdomain == subdomain), None)

    def __str__(self) -> str:
        k = f", k={self.wavenumber:g}" if self.kind is PdeKind.HELMHOLTZ else ""
        return f"{self.kind.value}(u={self.expression}{k})"


def _field(function: Callable[..., ArrayLike]) -> Field:
    def evaluate(points: ArrayLike) -> FloatArray | float:
        p = np.asarray(points, dtype=np.float64)
        flat = np.atleast_2d(p)
        out = np.broadcast_to(np.asarray(function(flat[:, 0], flat[:, 1]), dtype=np.float64), (flat.shape[0],))
        return out.copy() if p.ndim == 2 else float(out[0])

    return evaluate


def manufactured_problem(
    kind: PdeKind | str, expression: str, wavenumber: float = 0.0, domain: Box = UNIT_SQUARE
) -> ProblemSpec:
    kind = PdeKind(kind)
    if not np.isfinite(wavenumber):
        raise InvalidConfigError(f"wavenumber must be finite, got {wavenumber}")
    x, y = sp.symbols("x y", real=True)
    try:
        u = sp.sympify(expression, locals={"x": x, "y": y})
    except (sp.SympifyError, SyntaxError, TypeError) as exc:
        raise InvalidConfigError(f"cannot parse exact solution {expression!r}: {exc}") from exc
    unknown = u.free_symbols - {x, y}
    if unknown:
        raise InvalidConfigError(f"exact solution uses unknown symbols {sorted(map(str, unknown))}")

    source = sp.diff(u, x, 2) + sp.diff(u, y, 2)
    if kind is PdeKind.HELMHOLTZ:
        source = source + sp.Float(wavenumber) ** 2 * u
    derived = {"u": u, "s": sp.simplify(source)}
    lam = {name: _field(sp.lambdify((x, y), expr, "numpy")) for name, expr in derived.items()}

    return ProblemSpec(
        kind=kind,
        expression=expression,
        exact=lam["u"],
        source=lam["s"],
        boundary=lam["u"],
        domain=domain,
        wavenumber=float(wavenumber) if kind is PdeKind.HELMHOLTZ else 0.0,
    )


def poisson_manufactured() -> ProblemSpec:
    return manufactured_problem(PdeKind.POISSON, POISSON_SOLUTION)


def helmholtz_manufactured(k: float = 1.0) -> ProblemSpec:
    return manufactured_problem(PdeKind.HELMHOLTZ, HELMHOLTZ_SOLUTION, wavenumber=k)


def residual(spec: ProblemSpec, jet: JetEval | JetBatch, point: ArrayLike) -> FloatArray | float:
    """``lap(u) - s`` for Poisson, ``lap(u) + k^2 u - s`` for Helmholtz; scalar or batched."""
    return jet.laplacian() + spec.shift * jet.value - spec.source(point)


def residuals(spec: ProblemSpec, jets: JetBatch, points: ArrayLike) -> FloatArray:
    return np.asarray(residual(spec, jets, points), dtype=np.float64)


def residual_cotangent(spec: ProblemSpec) -> tuple[float, float]:
    """Partial derivatives of :func:`residual` with respect to ``u`` and ``lap(u)``."""
    return spec.shift, 1.0


def make_inverse_case(
    spec: ProblemSpec,
    case: int,
    partition: Partition,
    n_meas: int | None = None,
    seed: int = 0,
    noise: float = 0.0,
    designated: int | None = None,
) -> ProblemSpec:
    """
    Drop the physical boundary data of one subdomain of the 2x2 split and place
    ``n_meas`` measurements of the exact solution inside it instead.
    """
    if case not in DESIGNATED_SUBDOMAIN:
        raise InvalidConfigError(f"inverse case must be 1 or 2, got {case}")
    if partition.kind != "cartesian" or len(partition) != 4 or len(partition.interfaces) != 4:
        raise InvalidConfigError("inverse cases are defined on the 2x2 Cartesian split")
    designated = DESIGNATED_SUBDOMAIN[case] if designated is None else designated
    if not 0 <= designated < len(partition):
        raise InvalidConfigError(f"designated subdomain {designated} out of range 0..{len(partition) - 1}")
    n_meas = DEFAULT_MEASUREMENTS[case] if n_meas is None else n_meas
    if n_meas < 1:
        raise InvalidConfigError(f"n_meas must be >= 1, got {n_meas}")
    if noise < 0:
        raise InvalidConfigError(f"measurement noise must be >= 0, got {noise}")

    rng = np.random.default_rng([seed, MEASUREMENT_STREAM])
    points = sample_region(partition.subdomains[designated].region, n_meas, rng)
    values = np.asarray(spec.exact(points))
    if noise > 0:
        values = values + noise * rng.standard_normal(n_meas)
    logger.info(
        "inverse case %d: subdomain %d (%s) loses its boundary data, %d measurements (noise %g)",
        case,
        designated,
        partition.subdomains[designated].label,
        n_meas,
        noise,
    )
    return dataclasses.replace(
        spec,
        boundary_free=spec.boundary_free | {designated},
        measurements=tuple(m for m in spec.measurements if m.subdomain != designated)
        + (MeasurementSet(designated, points, values, noise),),
    )

"""
Domains, non-overlapping partitions and fixed collocation-point sampling.

Curves carry an orientation: an interface's unit normal is the curve tangent rotated by
-90 degrees, and it points from the interface's ``first`` subdomain into its ``second``.
"""
import enum
import logging
from abc import ABC, abstractmethod
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from meshless_ddm.solver.exceptions import DegenerateRegionError, InvalidConfigError, InvalidGeometryError

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

TWO_PI = 2.0 * np.pi
MIN_ACCEPTANCE = 1e-3
MIN_DRAWS_BEFORE_GIVING_UP = 10_000


class PointRole(str, enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    INTERFACE = "interface"
    MEASUREMENT = "measurement"


def _points(points: ArrayLike) -> FloatArray:
    return np.atleast_2d(np.asarray(points, dtype=np.float64))


@dataclass(frozen=True)
class Box:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvalidConfigError(f"degenerate box {self}")

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        p = _points(points)
        return (self.x_min < p[:, 0]) & (p[:, 0] < self.x_max) & (self.y_min < p[:, 1]) & (p[:, 1] < self.y_max)

    def covers(self, points: ArrayLike, tol: float = 1e-12) -> NDArray[np.bool_]:
        p = _points(points)
        return (
            (self.x_min - tol <= p[:, 0])
            & (p[:, 0] <= self.x_max + tol)
            & (self.y_min - tol <= p[:, 1])
            & (p[:, 1] <= self.y_max + tol)
        )

    def sample(self, n: int, rng: np.random.Generator) -> FloatArray:
        return np.column_stack(
            [rng.uniform(self.x_min, self.x_max, size=n), rng.uniform(self.y_min, self.y_max, size=n)]
        )

    def grid(self, resolution: int) -> FloatArray:
        xs = np.linspace(self.x_min, self.x_max, resolution)
        ys = np.linspace(self.y_min, self.y_max, resolution)
        gx, gy = np.meshgrid(xs, ys, indexing="xy")
        return np.column_stack([gx.ravel(), gy.ravel()])


class Curve(ABC):
    @abstractmethod
    def evaluate(self, params: ArrayLike) -> FloatArray:
        ...

    @abstractmethod
    def tangent(self, params: ArrayLike) -> FloatArray:
        """Derivative of :meth:`evaluate` with respect to the parameter."""

    @abstractmethod
    def sample_params(self, n: int, rng: np.random.Generator) -> FloatArray:
        ...

    @abstractmethod
    def residual(self, points: ArrayLike) -> FloatArray:
        """Distance-like measure of how far each point is from the curve."""

    def normal(self, params: ArrayLike) -> FloatArray:
        t = self.tangent(params)
        n = np.column_stack([t[:, 1], -t[:, 0]])
        return n / np.linalg.norm(n, axis=1, keepdims=True)


@dataclass(frozen=True)
class Segment(Curve):
    start: tuple[float, float]
    end: tuple[float, float]

    def evaluate(self, params: ArrayLike) -> FloatArray:
        t = np.atleast_1d(np.asarray(params, dtype=np.float64))[:, None]
        return np.asarray(self.start) + t * (np.asarray(self.end) - np.asarray(self.start))

    def tangent(self, params: ArrayLike) -> FloatArray:
        t = np.atleast_1d(np.asarray(params, dtype=np.float64))
        return np.tile(np.asarray(self.end, dtype=np.float64) - np.asarray(self.start), (t.size, 1))

    def sample_params(self, n: int, rng: np.random.Generator) -> FloatArray:
        # Endpoints are always part of the set; corners and cross points land in every incident edge.
        if n == 1:
            return rng.uniform(0.0, 1.0, size=1)
        return np.concatenate([[0.0, 1.0], rng.uniform(0.0, 1.0, size=n - 2)])

    def residual(self, points: ArrayLike) -> FloatArray:
        p = _points(points)
        a, b = np.asarray(self.start, dtype=np.float64), np.asarray(self.end, dtype=np.float64)
        ab = b - a
        t = np.clip((p - a) @ ab / (ab @ ab), 0.0, 1.0)
        return np.linalg.norm(p - (a + t[:, None] * ab), axis=1)


@dataclass(frozen=True)
class PolarCurve(Curve):
    """Closed star-shaped curve ``r = rho(theta)``, traversed counter-clockwise."""

    rho: Callable[[FloatArray], FloatArray]
    drho: Callable[[FloatArray], FloatArray]
    name: str = "polar"

    def radius(self, theta: ArrayLike) -> FloatArray:
        return self.rho(np.atleast_1d(np.asarray(theta, dtype=np.float64)))

    def evaluate(self, params: ArrayLike) -> FloatArray:
        theta = np.atleast_1d(np.asarray(params, dtype=np.float64))
        r = self.rho(theta)
        return np.column_stack([r * np.cos(theta), r * np.sin(theta)])

    def tangent(self, params: ArrayLike) -> FloatArray:
        theta = np.atleast_1d(np.asarray(params, dtype=np.float64))
        r, dr = self.rho(theta), self.drho(theta)
        return np.column_stack(
            [dr * np.cos(theta) - r * np.sin(theta), dr * np.sin(theta) + r * np.cos(theta)]
        )

    def sample_params(self, n: int, rng: np.random.Generator) -> FloatArray:
        return rng.uniform(0.0, TWO_PI, size=n)

    def residual(self, points: ArrayLike) -> FloatArray:
        p = _points(points)
        theta = np.mod(np.arctan2(p[:, 1], p[:, 0]), TWO_PI)
        return np.abs(np.hypot(p[:, 0], p[:, 1]) - self.rho(theta))

    def max_radius(self, samples: int = 4096) -> float:
        return float(np.max(self.radius(np.linspace(0.0, TWO_PI, samples, endpoint=False))))


def circle_curve(radius: float) -> PolarCurve:
    if radius <= 0:
        raise InvalidGeometryError(f"circle radius must be positive, got {radius}")
    return PolarCurve(
        rho=lambda theta: np.full_like(theta, radius),
        drho=np.zeros_like,
        name=f"circle({radius:g})",
    )


def outer_boundary_curve() -> PolarCurve:
    """``rho = 2 + sin(2t) cos(2t)``."""
    return PolarCurve(
        rho=lambda t: 2.0 + np.sin(2.0 * t) * np.cos(2.0 * t),
        drho=lambda t: 2.0 * np.cos(4.0 * t),
        name="outer",
    )


def interface_curve() -> PolarCurve:
    """``rho = 1 + 0.5 cos(4t) sin(6t)``."""
    return PolarCurve(
        rho=lambda t: 1.0 + 0.5 * np.cos(4.0 * t) * np.sin(6.0 * t),
        drho=lambda t: 0.5 * (6.0 * np.cos(4.0 * t) * np.cos(6.0 * t) - 4.0 * np.sin(4.0 * t) * np.sin(6.0 * t)),
        name="interface",
    )


class Region(ABC):
    bbox: Box

    @abstractmethod
    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        """Open-interior predicate."""

    @abstractmethod
    def covers(self, points: ArrayLike, tol: float = 1e-12) -> NDArray[np.bool_]:
        """Closed-region predicate with tolerance."""


@dataclass(frozen=True)
class BoxRegion(Region):
    bbox: Box

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        return self.bbox.contains(points)

    def covers(self, points: ArrayLike, tol: float = 1e-12) -> NDArray[np.bool_]:
        return self.bbox.covers(points, tol)


def _polar_coordinates(points: ArrayLike) -> tuple[FloatArray, FloatArray]:
    p = _points(points)
    return np.hypot(p[:, 0], p[:, 1]), np.mod(np.arctan2(p[:, 1], p[:, 0]), TWO_PI)


def _polar_bbox(curve: PolarCurve) -> Box:
    limit = 1.01 * curve.max_radius()
    return Box(-limit, limit, -limit, limit)


@dataclass(frozen=True)
class PolarDisk(Region):
    curve: PolarCurve
    bbox: Box = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "bbox", _polar_bbox(self.curve))

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        r, theta = _polar_coordinates(points)
        return r < self.curve.rho(theta)

    def covers(self, points: ArrayLike, tol: float = 1e-12) -> NDArray[np.bool_]:
        r, theta = _polar_coordinates(points)
        return r <= self.curve.rho(theta) + tol


@dataclass(frozen=True)
class PolarAnnulus(Region):
    inner: PolarCurve
    outer: PolarCurve
    bbox: Box = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "bbox", _polar_bbox(self.outer))

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        r, theta = _polar_coordinates(points)
        return (self.inner.rho(theta) < r) & (r < self.outer.rho(theta))

    def covers(self, points: ArrayLike, tol: float = 1e-12) -> NDArray[np.bool_]:
        r, theta = _polar_coordinates(points)
        return (self.inner.rho(theta) - tol <= r) & (r <= self.outer.rho(theta) + tol)


@dataclass(frozen=True)
class Subdomain:
    id: int
    region: Region
    boundary: tuple[Curve, ...] = ()
    label: str = ""

    @property
    def bbox(self) -> Box:
        return self.region.bbox

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        return self.region.contains(points)

    def covers(self, points: ArrayLike, tol: float = 1e-12) -> NDArray[np.bool_]:
        return self.region.covers(points, tol)


@dataclass(frozen=True)
class Interface:
    id: int
    first: int
    second: int
    curve: Curve

    def normal(self, params: ArrayLike) -> FloatArray:
        return self.curve.normal(params)

    def outward_normal(self, subdomain: int, params: ArrayLike) -> FloatArray:
        if subdomain == self.first:
            return self.normal(params)
        if subdomain == self.second:
            return -self.normal(params)
        raise InvalidGeometryError(f"subdomain {subdomain} is not on interface {self.id}")

    def neighbor_of(self, subdomain: int) -> int:
        if subdomain == self.first:
            return self.second
        if subdomain == self.second:
            return self.first
        raise InvalidGeometryError(f"subdomain {subdomain} is not on interface {self.id}")


@dataclass(frozen=True)
class Partition:
    kind: str
    domain: Box
    subdomains: tuple[Subdomain, ...]
    interfaces: tuple[Interface, ...]

    def __len__(self) -> int:
        return len(self.subdomains)

    def locate(self, points: ArrayLike) -> NDArray[np.int64]:
        p = _points(points)
        owner = np.full(p.shape[0], -1, dtype=np.int64)
        for sub in self.subdomains:
            owner[sub.contains(p) & (owner < 0)] = sub.id
        return owner


def _cartesian_label(i: int, j: int, nx: int, ny: int) -> str:
    if (nx, ny) == (2, 2):
        return f"{('bottom', 'top')[j]}-{('left', 'right')[i]}"
    return f"({i},{j})"


def make_cartesian_partition(domain: Box, nx: int, ny: int) -> Partition:
    """``nx * ny`` boxes tiling ``domain``; subdomain ``k = j * nx + i`` sits in column ``i``, row ``j``."""
    if nx < 1 or ny < 1:
        raise InvalidConfigError(f"partition needs nx >= 1 and ny >= 1, got nx={nx}, ny={ny}")
    xs = np.linspace(domain.x_min, domain.x_max, nx + 1)
    ys = np.linspace(domain.y_min, domain.y_max, ny + 1)
    subdomains = []
    for j in range(ny):
        for i in range(nx):
            x0, x1, y0, y1 = float(xs[i]), float(xs[i + 1]), float(ys[j]), float(ys[j + 1])
            edges: list[Curve] = []
            if j == 0:
                edges.append(Segment((x0, y0), (x1, y0)))
            if i == nx - 1:
                edges.append(Segment((x1, y0), (x1, y1)))
            if j == ny - 1:
                edges.append(Segment((x1, y1), (x0, y1)))
            if i == 0:
                edges.append(Segment((x0, y1), (x0, y0)))
            subdomains.append(
                Subdomain(
                    id=j * nx + i,
                    region=BoxRegion(Box(x0, x1, y0, y1)),
                    boundary=tuple(edges),
                    label=_cartesian_label(i, j, nx, ny),
                )
            )
    interfaces: list[Interface] = []
    for j in range(ny):
        for i in range(nx - 1):
            x = float(xs[i + 1])
            # upward segment: normal (1, 0) points from the left box into the right one
            segment = Segment((x, float(ys[j])), (x, float(ys[j + 1])))
            interfaces.append(Interface(len(interfaces), j * nx + i, j * nx + i + 1, segment))
    for j in range(ny - 1):
        for i in range(nx):
            y = float(ys[j + 1])
            # leftward segment: normal (0, 1) points from the lower box into the upper one
            segment = Segment((float(xs[i + 1]), y), (float(xs[i]), y))
            interfaces.append(Interface(len(interfaces), j * nx + i, (j + 1) * nx + i, segment))
    return Partition("cartesian", domain, tuple(subdomains), tuple(interfaces))


def make_polar_partition(outer: PolarCurve, inner: PolarCurve, checks: int = 4096) -> Partition:
    """Annulus between ``inner`` and ``outer`` (subdomain 0) and the region enclosed by ``inner`` (1)."""
    theta = np.linspace(0.0, TWO_PI, checks, endpoint=False)
    r_in, r_out = inner.radius(theta), outer.radius(theta)
    if np.any(r_in <= 0.0) or np.any(r_out <= 0.0):
        raise InvalidGeometryError("polar radii must be positive")
    if np.any(r_in >= r_out):
        crossing = float(theta[np.argmax(r_in >= r_out)])
        raise InvalidGeometryError(f"interface curve {inner.name} meets {outer.name} near theta={crossing:.4f}")
    annulus = Subdomain(0, PolarAnnulus(inner, outer), boundary=(outer,), label="annulus")
    disk = Subdomain(1, PolarDisk(inner), boundary=(), label="inner")
    # counter-clockwise curve: the normal points out of the enclosed subdomain
    gamma = Interface(0, first=1, second=0, curve=inner)
    return Partition("polar", annulus.bbox, (annulus, disk), (gamma,))


@dataclass(frozen=True)
class SampleCounts:
    interior: int
    boundary: int
    interface: int

    def __post_init__(self):
        if min(self.interior, self.boundary, self.interface) < 1:
            raise InvalidConfigError(f"point counts must be >= 1, got {self}")


@dataclass(frozen=True)
class PointSet:
    role: PointRole
    coordinates: FloatArray
    normals: FloatArray | None = None
    interface: int | None = None
    neighbor: int | None = None

    def __len__(self) -> int:
        return self.coordinates.shape[0]


@dataclass
class SubdomainPoints:
    subdomain: int
    interior: PointSet
    boundary: PointSet | None = None
    interfaces: dict[int, PointSet] = field(default_factory=dict)
    measurement: PointSet | None = None

    def sets(self) -> list[PointSet]:
        sets = [self.interior]
        if self.boundary is not None:
            sets.append(self.boundary)
        sets.extend(self.interfaces[key] for key in sorted(self.interfaces))
        if self.measurement is not None:
            sets.append(self.measurement)
        return sets


def sample_region(region: Region, n: int, rng: np.random.Generator) -> FloatArray:
    """Rejection sampling in the region's bounding box."""
    accepted: list[FloatArray] = []
    count = drawn = 0
    batch = max(n, 1024)
    while count < n:
        candidates = region.bbox.sample(batch, rng)
        inside = candidates[region.contains(candidates)]
        drawn += batch
        accepted.append(inside)
        count += inside.shape[0]
        if drawn >= MIN_DRAWS_BEFORE_GIVING_UP and count / drawn < MIN_ACCEPTANCE:
            raise DegenerateRegionError(
                f"rejection sampling accepted {count} of {drawn} draws (ratio below {MIN_ACCEPTANCE:g})"
            )
    return np.concatenate(accepted)[:n]


def sample_points(partition: Partition, counts: SampleCounts, seed: int) -> dict[int, SubdomainPoints]:
    """Draw the fixed collocation sets once; both sides of an interface share one draw."""
    rng = np.random.default_rng(seed)
    result: dict[int, SubdomainPoints] = {}
    for sub in partition.subdomains:
        interior = PointSet(PointRole.INTERIOR, sample_region(sub.region, counts.interior, rng))
        boundary = None
        if sub.boundary:
            coordinates = np.concatenate(
                [curve.evaluate(curve.sample_params(counts.boundary, rng)) for curve in sub.boundary]
            )
            boundary = PointSet(PointRole.BOUNDARY, coordinates)
        result[sub.id] = SubdomainPoints(sub.id, interior, boundary)
    for interface in partition.interfaces:
        params = interface.curve.sample_params(counts.interface, rng)
        coordinates = interface.curve.evaluate(params)
        coordinates.flags.writeable = False
        normal = interface.normal(params)
        for side, sign in ((interface.first, 1.0), (interface.second, -1.0)):
            result[side].interfaces[interface.id] = PointSet(
                PointRole.INTERFACE,
                coordinates,
                normals=sign * normal,
                interface=interface.id,
                neighbor=interface.neighbor_of(side),
            )
    logger.debug(
        "sampled %d subdomains: %s",
        len(result),
        {k: [len(s) for s in pts.sets()] for k, pts in result.items()},
    )
    return result


def evaluation_grid(subdomain: Subdomain, resolution: int) -> FloatArray:
    """Uniform grid over the subdomain's bounding box, masked by its closed region."""
    grid = subdomain.bbox.grid(resolution)
    return grid[subdomain.covers(grid)]

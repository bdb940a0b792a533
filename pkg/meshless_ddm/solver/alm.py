"""
Adaptive augmented Lagrangian training of one subdomain network.

Every epoch takes one optimizer step on

    L = J + sum over groups of mean_j(lambda_j C_j + mu_j C_j^2 / 2)

where ``J`` is the mean squared PDE residual on the interior points and ``C_j >= 0`` are
squared constraint residuals (boundary data, Robin transmission, measurements), followed by
one dual update per group at the new parameters.
"""
import enum
import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike, NDArray

from meshless_ddm.solver.exceptions import DivergenceError, InvalidConfigError, ProtocolError
from meshless_ddm.solver.geometry import PointRole
from meshless_ddm.solver.nets import XX, YY, JetBatch, ParamGrad, forward_jet_batch, jet_backward
from meshless_ddm.solver.optimizers import GradientDescent, Optimizer, make_optimizer
from meshless_ddm.solver.problems import ProblemSpec, residual_cotangent, residuals
from meshless_ddm.solver.transmission import (
    InterfaceTrace,
    closed_form_alpha,
    normalized_alpha_gradient,
    robin_mismatch_partials,
)

if TYPE_CHECKING:
    from meshless_ddm.solver.ddm import SubdomainModel

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

DEFAULT_GAMMA = 1e-2
DEFAULT_SMOOTHING = 0.99
DEFAULT_EPS = 1e-8
# step of the normalized alpha gradient; alpha moves at most 2 * DEFAULT_ALPHA_LR per epoch
DEFAULT_ALPHA_LR = 2e-5
ALPHA_BOUNDS = (1e-3, 1.0 - 1e-3)


class Granularity(str, enum.Enum):
    PER_POINT = "per_point"
    PER_TYPE = "per_type"


class AlphaMode(str, enum.Enum):
    ADAPTIVE = "adaptive"
    CONSTANT = "constant"


class AlphaUpdate(str, enum.Enum):
    GRADIENT = "gradient"
    CLOSED_FORM = "closed_form"


@dataclass(frozen=True)
class DualState:
    lam: FloatArray
    mu: FloatArray
    vbar: FloatArray
    gamma: float = DEFAULT_GAMMA
    smoothing: float = DEFAULT_SMOOTHING
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if not (self.lam.shape == self.mu.shape == self.vbar.shape) or self.lam.ndim != 1:
            raise ProtocolError(
                f"dual arrays must share one length, got {self.lam.shape}, {self.mu.shape}, {self.vbar.shape}"
            )

    @classmethod
    def initial(
        cls,
        size: int,
        gamma: float = DEFAULT_GAMMA,
        smoothing: float = DEFAULT_SMOOTHING,
        eps: float = DEFAULT_EPS,
    ) -> "DualState":
        if size < 1:
            raise InvalidConfigError(f"a constraint group needs at least one point, got {size}")
        if not gamma > 0 or not 0.0 <= smoothing < 1.0 or not eps > 0:
            raise InvalidConfigError(f"bad dual hyperparameters gamma={gamma}, smoothing={smoothing}, eps={eps}")
        return cls(np.ones(size), np.ones(size), np.zeros(size), gamma, smoothing, eps)

    def __len__(self) -> int:
        return self.lam.shape[0]

    def reset(self, penalties: bool = True) -> "DualState":
        """Back to initialization; with ``penalties=False`` only the multipliers are restored."""
        if penalties:
            return DualState.initial(len(self), self.gamma, self.smoothing, self.eps)
        return replace(self, lam=np.ones(len(self)))

    def is_initial(self) -> bool:
        return bool(np.all(self.lam == 1.0) and np.all(self.mu == 1.0) and np.all(self.vbar == 0.0))


def dual_update(state: DualState, constraints: ArrayLike) -> DualState:
    c = np.asarray(constraints, dtype=np.float64)
    if c.shape != state.lam.shape:
        raise ProtocolError(f"{c.shape[0] if c.ndim else 1} constraint values for a dual state of size {len(state)}")
    vbar = state.smoothing * state.vbar + (1.0 - state.smoothing) * c * c
    mu = state.gamma / (np.sqrt(vbar) + state.eps)
    lam = state.lam + mu * c
    return replace(state, lam=lam, mu=mu, vbar=vbar)


@dataclass
class ConstraintGroup:
    """One constraint type on one point set of a subdomain, with its own duals."""

    name: str
    role: PointRole
    selection: slice
    state: DualState
    granularity: Granularity = Granularity.PER_POINT
    interface: int | None = None

    @property
    def size(self) -> int:
        return self.selection.stop - self.selection.start

    def reduce(self, constraints: FloatArray) -> FloatArray:
        """Constraint values in the shape of the dual state."""
        if self.granularity is Granularity.PER_TYPE:
            return np.array([np.mean(constraints)])
        return constraints

    def penalty(self, constraints: FloatArray) -> float:
        c = self.reduce(constraints)
        return float(np.mean(self.state.lam * c + 0.5 * self.state.mu * c * c))

    def weights(self, constraints: FloatArray) -> FloatArray:
        """Derivative of :meth:`penalty` with respect to each point's constraint value."""
        c = self.reduce(constraints)
        slope = self.state.lam + self.state.mu * c
        return np.broadcast_to(slope / constraints.shape[0], constraints.shape)


@dataclass
class ConstraintSet:
    groups: list[ConstraintGroup] = field(default_factory=list)

    def __iter__(self):
        return iter(self.groups)

    def __len__(self) -> int:
        return len(self.groups)

    def of_role(self, role: PointRole) -> list[ConstraintGroup]:
        return [g for g in self.groups if g.role is role]

    def reset_interfaces(self, penalties: bool = True) -> None:
        for group in self.of_role(PointRole.INTERFACE):
            group.state = group.state.reset(penalties)


def augmented_lagrangian(objective: float, evaluated: Iterable[tuple[ConstraintGroup, FloatArray]]) -> float:
    value = objective + sum(group.penalty(c) for group, c in evaluated)
    if not np.isfinite(value):
        raise DivergenceError("augmented Lagrangian is not finite", group="lagrangian")
    return float(value)


def primal_step(
    model: "SubdomainModel",
    grad: ParamGrad,
    optimizer: Optimizer,
    alpha_optimizer: Optimizer | None = None,
    bounds: tuple[float, float] = ALPHA_BOUNDS,
) -> None:
    """
    One optimizer step on the network weights and, when the gradient carries one, on ``alpha``.

    ``alpha`` is stepped by ``alpha_optimizer`` when given, otherwise together with the weights.
    """
    if not grad.is_finite():
        bad = "alpha" if grad.alpha is not None and not np.isfinite(grad.alpha) else "parameters"
        raise DivergenceError("gradient is not finite", group=bad)
    params = model.net.parameters()
    grads = grad.arrays()
    if grad.alpha is not None:
        if alpha_optimizer is None:
            params.append(model.alpha_param)
            grads.append(np.array([grad.alpha]))
        else:
            alpha_optimizer.step([model.alpha_param], [np.array([grad.alpha])])
    optimizer.step(params, grads)
    np.clip(model.alpha_param, bounds[0], bounds[1], out=model.alpha_param)


@dataclass(frozen=True)
class TrainingOptions:
    optimizer: str = "adam"
    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    gamma: float = DEFAULT_GAMMA
    smoothing: float = DEFAULT_SMOOTHING
    eps: float = DEFAULT_EPS
    granularity: Granularity = Granularity.PER_POINT
    alpha_mode: AlphaMode = AlphaMode.ADAPTIVE
    alpha_update: AlphaUpdate = AlphaUpdate.GRADIENT
    alpha_lr: float = DEFAULT_ALPHA_LR
    log_every: int = 100
    check_invariants: bool = False


@dataclass(frozen=True)
class EpochRecord:
    """Loss breakdown of one epoch; constraint means are NaN for groups the subdomain lacks."""

    epoch: int
    objective: float
    boundary: float
    interface: float
    measurement: float
    lagrangian: float
    alpha: float


@dataclass
class LocalResult:
    records: list[EpochRecord]
    final: EpochRecord


def _mean_or_nan(parts: Sequence[FloatArray]) -> float:
    return float(np.mean(np.concatenate(parts))) if parts else float("nan")


class LocalTrainer:
    """
    Trains one :class:`SubdomainModel` on its fixed collocation points.

    The points of every role are stacked into one batch (interior first) so a single jet
    evaluation and a single backward pass serve the objective and all constraint groups.
    """

    def __init__(self, model: "SubdomainModel", problem: ProblemSpec, options: TrainingOptions = TrainingOptions()):
        self.model = model
        self.problem = problem
        self.options = options
        self.optimizer = make_optimizer(options.optimizer, options.lr, options.betas)
        self.alpha_optimizer = GradientDescent(options.alpha_lr)
        self.epochs_run = 0

        points = model.points
        blocks = [points.interior.coordinates]
        self.interior = slice(0, len(points.interior))
        offset = len(points.interior)
        groups: list[ConstraintGroup] = []
        self._targets: dict[str, FloatArray] = {}
        self._normals: dict[str, FloatArray] = {}

        def add(name: str, role: PointRole, coordinates: FloatArray, interface: int | None = None) -> str:
            nonlocal offset
            size = coordinates.shape[0] if options.granularity is Granularity.PER_POINT else 1
            state = DualState.initial(size, options.gamma, options.smoothing, options.eps)
            selection = slice(offset, offset + coordinates.shape[0])
            groups.append(ConstraintGroup(name, role, selection, state, options.granularity, interface))
            blocks.append(coordinates)
            offset += coordinates.shape[0]
            return name

        if points.boundary is not None and problem.has_boundary_data(model.id):
            name = add("boundary", PointRole.BOUNDARY, points.boundary.coordinates)
            self._targets[name] = np.asarray(problem.boundary(points.boundary.coordinates))
        for key in sorted(points.interfaces):
            pset = points.interfaces[key]
            assert pset.normals is not None
            name = add(f"interface:{key}", PointRole.INTERFACE, pset.coordinates, interface=key)
            self._normals[name] = pset.normals
        measurement = problem.measurement_for(model.id)
        if measurement is not None:
            name = add("measurement", PointRole.MEASUREMENT, measurement.points)
            self._targets[name] = measurement.values

        model.constraints = ConstraintSet(groups)
        self.batch = np.concatenate(blocks)
        self.constraint_batch = self.batch[self.interior.stop :]
        self.source = np.asarray(problem.source(points.interior.coordinates))
        self.shift, _ = residual_cotangent(problem)

    @property
    def constraints(self) -> ConstraintSet:
        return self.model.constraints

    @property
    def learns_alpha(self) -> bool:
        return self.options.alpha_mode is AlphaMode.ADAPTIVE and bool(self.constraints.of_role(PointRole.INTERFACE))

    def _trace_for(self, group: ConstraintGroup, traces: Mapping[int, InterfaceTrace]) -> InterfaceTrace:
        assert group.interface is not None
        try:
            trace = traces[group.interface]
        except KeyError:
            raise ProtocolError(f"subdomain {self.model.id} has no trace for interface {group.interface}") from None
        if trace.receiver != self.model.id:
            raise ProtocolError(
                f"trace on interface {group.interface} is addressed to {trace.receiver}, not {self.model.id}"
            )
        return trace

    def _constraints(
        self, jets: JetBatch, offset: int, traces: Mapping[int, InterfaceTrace], cotangent: JetBatch | None = None
    ) -> tuple[dict[str, FloatArray], float, list[FloatArray], list[FloatArray]]:
        """
        Per-point constraint values of every group, with ``jets`` covering the batch from ``offset`` on.

        When ``cotangent`` is given the penalty derivatives are accumulated into it and the normalized
        mismatch gradient in alpha is returned. The value and flux gaps feed the closed-form alpha update.
        """
        alpha = self.model.alpha
        values: dict[str, FloatArray] = {}
        alpha_grad = 0.0
        value_gaps: list[FloatArray] = []
        flux_gaps: list[FloatArray] = []
        for group in self.constraints:
            selection = slice(group.selection.start - offset, group.selection.stop - offset)
            own = jets.slice(selection)
            if group.role is PointRole.INTERFACE:
                normals = self._normals[group.name]
                robin = robin_mismatch_partials(own, self._trace_for(group, traces), alpha, normals)
                c = robin.residuals
                value_gaps.append(robin.value_gap)
                flux_gaps.append(robin.flux_gap)
            else:
                gap = own.value - self._targets[group.name]
                c = gap * gap
            if not np.all(np.isfinite(c)):
                raise DivergenceError("constraint is not finite", group=group.name)
            values[group.name] = c
            if cotangent is None:
                continue
            w = group.weights(c)
            target = cotangent.slice(selection)
            if group.role is PointRole.INTERFACE:
                target.value += w * robin.d_value
                target.grad += (w * robin.d_flux)[:, None] * normals
            else:
                target.value += w * 2.0 * gap
        if cotangent is not None and value_gaps:
            alpha_grad = normalized_alpha_gradient(alpha, np.concatenate(value_gaps), np.concatenate(flux_gaps))
        return values, alpha_grad, value_gaps, flux_gaps

    def _record(
        self, epoch: int, objective: float, values: Mapping[str, FloatArray], lagrangian: float
    ) -> EpochRecord:
        by_role = {
            role: [values[g.name] for g in self.constraints.of_role(role)]
            for role in (PointRole.BOUNDARY, PointRole.INTERFACE, PointRole.MEASUREMENT)
        }
        return EpochRecord(
            epoch=epoch,
            objective=objective,
            boundary=_mean_or_nan(by_role[PointRole.BOUNDARY]),
            interface=_mean_or_nan(by_role[PointRole.INTERFACE]),
            measurement=_mean_or_nan(by_role[PointRole.MEASUREMENT]),
            lagrangian=lagrangian,
            alpha=self.model.alpha,
        )

    def evaluate(self, traces: Mapping[int, InterfaceTrace]) -> EpochRecord:
        """Loss breakdown at the current parameters, without training."""
        jets, _ = forward_jet_batch(self.model.net, self.batch)
        interior = jets.slice(self.interior)
        r = residuals(self.problem, interior, self.model.points.interior.coordinates)
        objective = float(np.mean(r * r))
        values, *_ = self._constraints(jets, 0, traces)
        lagrangian = augmented_lagrangian(objective, [(g, values[g.name]) for g in self.constraints])
        return self._record(self.epochs_run, objective, values, lagrangian)

    def step(self, traces: Mapping[int, InterfaceTrace]) -> EpochRecord:
        net = self.model.net
        jets, tape = forward_jet_batch(net, self.batch)
        cotangent = JetBatch.zeros(len(jets))

        interior = jets.slice(self.interior)
        r = interior.laplacian() + self.shift * interior.value - self.source
        if not np.all(np.isfinite(r)):
            raise DivergenceError("PDE residual is not finite", group="objective")
        objective = float(np.mean(r * r))
        d_r = 2.0 * r / r.shape[0]
        cotangent.value[self.interior] += self.shift * d_r
        cotangent.hess[self.interior, XX] += d_r
        cotangent.hess[self.interior, YY] += d_r

        values, alpha_grad, _, _ = self._constraints(jets, 0, traces, cotangent)
        lagrangian = augmented_lagrangian(objective, [(g, values[g.name]) for g in self.constraints])
        record = self._record(self.epochs_run + 1, objective, values, lagrangian)

        grad = jet_backward(net, tape, cotangent)
        if self.learns_alpha and self.options.alpha_update is AlphaUpdate.GRADIENT:
            grad.alpha = alpha_grad
        primal_step(self.model, grad, self.optimizer, self.alpha_optimizer)

        if len(self.constraints):
            after, _ = forward_jet_batch(net, self.constraint_batch)
            values, _, value_gaps, flux_gaps = self._constraints(after, self.interior.stop, traces)
            for group in self.constraints:
                updated = dual_update(group.state, group.reduce(values[group.name]))
                if self.options.check_invariants and np.any(updated.lam < group.state.lam):
                    raise ProtocolError(f"multiplier of {group.name} decreased in subdomain {self.model.id}")
                group.state = updated
            if self.learns_alpha and self.options.alpha_update is AlphaUpdate.CLOSED_FORM:
                alpha = closed_form_alpha(np.concatenate(value_gaps), np.concatenate(flux_gaps))
                if alpha is not None:
                    self.model.alpha_param[0] = np.clip(alpha, *ALPHA_BOUNDS)

        self.epochs_run += 1
        return record

    def train(self, traces: Mapping[int, InterfaceTrace], epochs: int) -> LocalResult:
        if epochs < 0:
            raise InvalidConfigError(f"epochs must be >= 0, got {epochs}")
        records: list[EpochRecord] = []
        for _ in range(epochs):
            try:
                record = self.step(traces)
            except DivergenceError as exc:
                raise exc.located(epoch=self.epochs_run + 1, subdomain=self.model.id)
            records.append(record)
            if self.options.log_every and record.epoch % self.options.log_every == 0:
                logger.debug(
                    "subdomain %d epoch %d: J=%.3e boundary=%.3e interface=%.3e measurement=%.3e L=%.3e alpha=%.4f",
                    self.model.id,
                    record.epoch,
                    record.objective,
                    record.boundary,
                    record.interface,
                    record.measurement,
                    record.lagrangian,
                    record.alpha,
                )
        final = records[-1] if records else self.evaluate(traces)
        return LocalResult(records, final)


def train_local(trainer: LocalTrainer, traces: Mapping[int, InterfaceTrace], epochs: int) -> LocalResult:
    """Run ``epochs`` full-batch epochs of ``trainer`` against frozen neighbour traces."""
    return trainer.train(traces, epochs)

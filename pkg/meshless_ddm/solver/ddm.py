"""
Non-overlapping Schwarz iteration over per-subdomain networks.

Each outer iteration trains every subdomain for ``epochs`` epochs against the interface
traces its neighbours produced at the end of the previous iteration, then exchanges new
traces in both directions across every interface and resets the interface duals.
"""
import logging
import time
from collections.abc import Callable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from meshless_ddm.solver.alm import (
    AlphaMode,
    ConstraintSet,
    EpochRecord,
    LocalResult,
    LocalTrainer,
    TrainingOptions,
    train_local,
)
from meshless_ddm.solver.exceptions import DivergenceError, InvalidConfigError, ProtocolError
from meshless_ddm.solver.geometry import Partition, PointRole, SampleCounts, SubdomainPoints, sample_points
from meshless_ddm.solver.metrics import DEFAULT_RESOLUTION, ErrorReport, compute_errors
from meshless_ddm.solver.nets import Mlp, forward_jet_batch
from meshless_ddm.solver.problems import ProblemSpec
from meshless_ddm.solver.transmission import InterfaceTrace, zero_trace

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

INITIAL_ALPHA = 0.5


@dataclass
class SubdomainModel:
    id: int
    net: Mlp
    points: SubdomainPoints
    alpha_param: FloatArray = field(default_factory=lambda: np.array([INITIAL_ALPHA]))
    constraints: ConstraintSet = field(default_factory=ConstraintSet)

    @property
    def alpha(self) -> float:
        return float(self.alpha_param[0])

    @property
    def neighbors(self) -> dict[int, int]:
        """Interface id to the subdomain on its other side."""
        return {key: pset.neighbor for key, pset in self.points.interfaces.items() if pset.neighbor is not None}

    def predict(self, points: FloatArray) -> FloatArray:
        return self.net.predict(points)


def produce_trace(model: SubdomainModel, interface: int, iteration: int = 0) -> InterfaceTrace:
    """Value and normal derivative on the shared points, along the receiver's outward normal."""
    pset = model.points.interfaces[interface]
    assert pset.normals is not None and pset.neighbor is not None
    jets, _ = forward_jet_batch(model.net, pset.coordinates)
    return InterfaceTrace(
        interface=interface,
        producer=model.id,
        receiver=pset.neighbor,
        values=jets.value,
        normal_derivatives=jets.normal_derivative(-pset.normals),
        iteration=iteration,
    )


@dataclass(frozen=True)
class InterfaceMismatch:
    interface: int
    first: int
    second: int
    value_gap: float
    flux_gap: float


def interface_mismatch(models: Mapping[int, SubdomainModel], partition: Partition) -> list[InterfaceMismatch]:
    """Mean ``|u_i - u_j|`` and mean ``|du_i/dn_i + du_j/dn_j|`` over each interface's points."""
    result = []
    for interface in partition.interfaces:
        first = models[interface.first].points.interfaces[interface.id]
        second = models[interface.second].points.interfaces[interface.id]
        jets_first, _ = forward_jet_batch(models[interface.first].net, first.coordinates)
        jets_second, _ = forward_jet_batch(models[interface.second].net, second.coordinates)
        flux = jets_first.normal_derivative(first.normals) + jets_second.normal_derivative(second.normals)
        result.append(
            InterfaceMismatch(
                interface=interface.id,
                first=interface.first,
                second=interface.second,
                value_gap=float(np.mean(np.abs(jets_first.value - jets_second.value))),
                flux_gap=float(np.mean(np.abs(flux))),
            )
        )
    return result


@dataclass(frozen=True)
class DdmConfig:
    partition: Partition
    problem: ProblemSpec
    counts: SampleCounts
    hidden: tuple[int, ...] = (20, 20, 20)
    epochs: int = 500
    outer_iterations: int = 30
    seed: int = 0
    options: TrainingOptions = TrainingOptions()
    alpha_value: float = INITIAL_ALPHA
    reset_interface_penalties: bool = True
    max_workers: int = 0
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        if self.epochs < 1 or self.outer_iterations < 1:
            raise InvalidConfigError(
                f"epochs and outer iterations must be >= 1, got {self.epochs}, {self.outer_iterations}"
            )
        if not self.hidden or min(self.hidden) < 1:
            raise InvalidConfigError(f"hidden widths must be positive, got {self.hidden}")
        if not 0.0 < self.alpha_value < 1.0:
            raise InvalidConfigError(f"alpha must lie in (0, 1), got {self.alpha_value}")
        if self.max_workers < 0:
            raise InvalidConfigError(f"max_workers must be >= 0, got {self.max_workers}")

    @property
    def widths(self) -> list[int]:
        return [2, *self.hidden, 1]


@dataclass
class OuterIteration:
    iteration: int
    locals: dict[int, EpochRecord]
    errors: ErrorReport
    mismatch: list[InterfaceMismatch]

    @property
    def alphas(self) -> dict[int, float]:
        return {k: record.alpha for k, record in self.locals.items()}


@dataclass
class DdmResult:
    models: dict[int, SubdomainModel]
    history: list[OuterIteration]
    wall_time: float

    @property
    def final(self) -> OuterIteration:
        return self.history[-1]


def _check_freshness(traces: Mapping[int, Mapping[int, InterfaceTrace]], iteration: int) -> None:
    for receiver, incoming in traces.items():
        for trace in incoming.values():
            if trace.iteration != iteration - 1 or trace.receiver != receiver:
                raise ProtocolError(
                    f"outer iteration {iteration}: subdomain {receiver} holds a trace from iteration "
                    f"{trace.iteration} addressed to {trace.receiver} on interface {trace.interface}"
                )


def _check_reset(models: Mapping[int, SubdomainModel], before: Mapping[tuple[int, str], FloatArray], full: bool):
    for model in models.values():
        for group in model.constraints:
            if group.role is PointRole.INTERFACE:
                fresh = group.state.is_initial() if full else bool(np.all(group.state.lam == 1.0))
                if not fresh:
                    raise ProtocolError(f"interface duals of {group.name} in subdomain {model.id} were not reset")
            elif not np.array_equal(group.state.lam, before[model.id, group.name]):
                raise ProtocolError(f"reset touched {group.name} multipliers of subdomain {model.id}")


def run(config: DdmConfig, on_iteration: Callable[[OuterIteration], None] | None = None) -> DdmResult:
    """
    Train one network per subdomain with ``outer_iterations`` rounds of local training and exchange.

    Raises:
        DivergenceError: located at the subdomain, outer iteration, epoch and group that failed;
            its ``history`` holds the outer iterations completed before the failure.
    """
    started = time.perf_counter()
    partition, options = config.partition, config.options
    points = sample_points(partition, config.counts, config.seed)
    seeds = np.random.SeedSequence(config.seed).spawn(len(partition))
    initial_alpha = config.alpha_value if options.alpha_mode is AlphaMode.CONSTANT else INITIAL_ALPHA
    models = {
        sub.id: SubdomainModel(
            sub.id,
            Mlp.glorot(config.widths, np.random.default_rng(seeds[sub.id])),
            points[sub.id],
            alpha_param=np.array([initial_alpha]),
        )
        for sub in partition.subdomains
    }
    trainers = [LocalTrainer(models[sub.id], config.problem, options) for sub in partition.subdomains]
    traces: dict[int, dict[int, InterfaceTrace]] = {
        k: {key: zero_trace(key, producer, k, len(m.points.interfaces[key])) for key, producer in m.neighbors.items()}
        for k, m in models.items()
    }

    logger.info(
        "starting %s on %d subdomains (%s): E=%d T=%d seed=%d alpha=%s",
        config.problem,
        len(partition),
        partition.kind,
        config.epochs,
        config.outer_iterations,
        config.seed,
        options.alpha_mode.value,
    )
    history: list[OuterIteration] = []
    workers = config.max_workers or len(partition)

    def train(trainer: LocalTrainer) -> LocalResult:
        return train_local(trainer, traces[trainer.model.id], config.epochs)

    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="subdomain") as pool:
        for t in range(1, config.outer_iterations + 1):
            if options.check_invariants:
                _check_freshness(traces, t)
            try:
                results = list(pool.map(train, trainers))
            except DivergenceError as exc:
                exc.located(outer_iteration=t)
                exc.history = history
                logger.error("divergence: %s %s", exc, exc.diagnostics)
                raise

            fresh: dict[int, dict[int, InterfaceTrace]] = {k: {} for k in models}
            for model in models.values():
                for key, receiver in model.neighbors.items():
                    fresh[receiver][key] = produce_trace(model, key, iteration=t)
            traces = fresh

            before = {
                (model.id, group.name): group.state.lam.copy()
                for model in models.values()
                for group in model.constraints
                if group.role is not PointRole.INTERFACE
            }
            for model in models.values():
                model.constraints.reset_interfaces(config.reset_interface_penalties)
            if options.check_invariants:
                _check_reset(models, before, config.reset_interface_penalties)

            alphas = {k: m.alpha for k, m in models.items()}
            errors = compute_errors(
                {k: m.predict for k, m in models.items()},
                config.problem,
                partition,
                config.resolution,
                alphas=alphas,
                wall_time=time.perf_counter() - started,
            )
            entry = OuterIteration(
                iteration=t,
                locals={trainer.model.id: result.final for trainer, result in zip(trainers, results)},
                errors=errors,
                mismatch=interface_mismatch(models, partition),
            )
            history.append(entry)
            logger.info(
                "outer iteration %d/%d: max rel L2 %.3e, max error %.3e, alpha %s",
                t,
                config.outer_iterations,
                errors.max_rel_l2,
                errors.max_error,
                {k: round(a, 4) for k, a in alphas.items()},
            )
            if on_iteration is not None:
                on_iteration(entry)

    wall_time = time.perf_counter() - started
    history[-1].errors.wall_time = wall_time
    logger.info("finished in %.1f s", wall_time)
    return DdmResult(models, history, wall_time)

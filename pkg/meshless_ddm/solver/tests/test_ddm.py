import dataclasses

import numpy as np
import pytest

from meshless_ddm.solver.alm import AlphaMode, LocalTrainer, TrainingOptions, train_local
from meshless_ddm.solver.ddm import DdmConfig, SubdomainModel, interface_mismatch, produce_trace, run
from meshless_ddm.solver.exceptions import DivergenceError, InvalidConfigError
from meshless_ddm.solver.geometry import (
    PointRole,
    SampleCounts,
    interface_curve,
    make_cartesian_partition,
    make_polar_partition,
    outer_boundary_curve,
    sample_points,
)
from meshless_ddm.solver.nets import Mlp, forward_jet_batch
from meshless_ddm.solver.problems import UNIT_SQUARE, helmholtz_manufactured, make_inverse_case, poisson_manufactured

SMALL = SampleCounts(48, 12, 12)


def small_config(nx=2, ny=1, **overrides) -> DdmConfig:
    values = dict(
        partition=make_cartesian_partition(UNIT_SQUARE, nx, ny),
        problem=poisson_manufactured(),
        counts=SMALL,
        hidden=(6, 6),
        epochs=5,
        outer_iterations=3,
        seed=11,
        options=TrainingOptions(check_invariants=True),
        resolution=11,
    )
    values.update(overrides)
    return DdmConfig(**values)


@pytest.fixture
def one_way_models():
    partition = make_cartesian_partition(UNIT_SQUARE, 4, 1)
    points = sample_points(partition, SMALL, seed=0)
    rng = np.random.default_rng(0)
    return partition, {k: SubdomainModel(k, Mlp.glorot([2, 5, 1], rng), points[k]) for k in range(4)}


class TestProduceTrace:
    def test_constant_network(self):
        partition = make_cartesian_partition(UNIT_SQUARE, 2, 1)
        points = sample_points(partition, SMALL, seed=0)
        net = Mlp.from_arrays([np.zeros((3, 2)), np.zeros((1, 3))], [np.zeros(3), [0.25]])
        trace = produce_trace(SubdomainModel(0, net, points[0]), 0, iteration=4)
        assert trace.producer == 0 and trace.receiver == 1 and trace.iteration == 4
        assert np.all(trace.values == 0.25)
        assert np.all(trace.normal_derivatives == 0.0)

    def test_reported_along_receiver_normal(self, one_way_models):
        _, models = one_way_models
        model = models[1]
        trace = produce_trace(model, 1)
        own = model.points.interfaces[1]
        jets, _ = forward_jet_batch(model.net, own.coordinates)
        np.testing.assert_array_equal(trace.normal_derivatives, -jets.normal_derivative(own.normals))

    def test_deterministic(self, one_way_models):
        _, models = one_way_models
        a, b = produce_trace(models[2], 2), produce_trace(models[2], 2)
        np.testing.assert_array_equal(a.values, b.values)
        np.testing.assert_array_equal(a.normal_derivatives, b.normal_derivatives)


def test_models_start_at_even_alpha(one_way_models):
    _, models = one_way_models
    assert all(m.alpha == 0.5 for m in models.values())
    assert models[1].neighbors == {0: 0, 1: 2}


def test_interface_mismatch_of_identical_networks(one_way_models):
    partition, models = one_way_models
    for model in models.values():
        model.net = models[0].net.copy()
    for mismatch in interface_mismatch(models, partition):
        assert mismatch.value_gap == 0.0
        assert mismatch.flux_gap == pytest.approx(0.0, abs=1e-15)


class TestRun:
    def test_exchange_rounds_and_history(self):
        seen = []
        result = run(small_config(nx=4), on_iteration=seen.append)
        assert [entry.iteration for entry in result.history] == [1, 2, 3]
        assert seen == result.history
        final = result.final
        assert set(final.locals) == {0, 1, 2, 3}
        assert len(final.mismatch) == 3
        assert all(0.0 < a < 1.0 for a in final.alphas.values())
        assert final.errors.wall_time == result.wall_time

    def test_interface_duals_are_reset(self):
        result = run(small_config(nx=2, ny=2))
        for model in result.models.values():
            for group in model.constraints:
                if group.role is PointRole.INTERFACE:
                    assert group.state.is_initial()
                else:
                    assert np.all(group.state.lam > 1.0)

    def test_reset_multipliers_only(self):
        result = run(small_config(reset_interface_penalties=False))
        for model in result.models.values():
            for group in model.constraints.of_role(PointRole.INTERFACE):
                assert np.all(group.state.lam == 1.0)
                assert not np.all(group.state.mu == 1.0)

    def test_deterministic(self):
        first, second = run(small_config()), run(small_config())
        for k in first.models:
            np.testing.assert_array_equal(first.models[k].net.flatten(), second.models[k].net.flatten())
        assert first.final.errors.max_rel_l2 == second.final.errors.max_rel_l2

    def test_parallel_matches_serial(self):
        parallel, serial = run(small_config(nx=4)), run(small_config(nx=4, max_workers=1))
        for k in parallel.models:
            np.testing.assert_array_equal(parallel.models[k].net.flatten(), serial.models[k].net.flatten())

    def test_single_domain_reduces_to_local_training(self):
        config = small_config(nx=1, epochs=4, outer_iterations=3)
        result = run(config)

        points = sample_points(config.partition, config.counts, config.seed)
        seed = np.random.SeedSequence(config.seed).spawn(1)[0]
        model = SubdomainModel(0, Mlp.glorot(config.widths, np.random.default_rng(seed)), points[0])
        train_local(LocalTrainer(model, config.problem, config.options), {}, 12)
        np.testing.assert_array_equal(result.models[0].net.flatten(), model.net.flatten())
        assert result.final.mismatch == []

    def test_constant_alpha(self):
        options = TrainingOptions(alpha_mode=AlphaMode.CONSTANT)
        result = run(small_config(options=options, alpha_value=0.3))
        assert all(m.alpha == 0.3 for m in result.models.values())

    def test_helmholtz_polar_and_inverse_configurations_run(self):
        polar = make_polar_partition(outer_boundary_curve(), interface_curve())
        run(small_config(partition=polar, outer_iterations=1))
        run(small_config(nx=4, problem=helmholtz_manufactured(1.0), outer_iterations=1))
        square = make_cartesian_partition(UNIT_SQUARE, 2, 2)
        inverse = make_inverse_case(poisson_manufactured(), 1, square, n_meas=16)
        result = run(small_config(partition=square, problem=inverse, outer_iterations=1))
        assert [g.name for g in result.models[1].constraints][-1] == "measurement"
        assert "boundary" not in [g.name for g in result.models[1].constraints]

    def test_divergence_carries_history(self):
        options = TrainingOptions(optimizer="sgd", lr=1e6)
        with pytest.raises(DivergenceError) as excinfo:
            run(small_config(options=options, epochs=200, outer_iterations=2))
        error = excinfo.value
        assert error.outer_iteration == 1
        assert error.subdomain in (0, 1)
        assert error.history == []

    @pytest.mark.parametrize(
        "overrides",
        [dict(epochs=0), dict(outer_iterations=0), dict(hidden=()), dict(alpha_value=1.0), dict(max_workers=-1)],
    )
    def test_rejects_bad_config(self, overrides):
        with pytest.raises(InvalidConfigError):
            small_config(**overrides)

    def test_config_widths(self):
        assert dataclasses.replace(small_config(), hidden=(20, 20, 20)).widths == [2, 20, 20, 20, 1]

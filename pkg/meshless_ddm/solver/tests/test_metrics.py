import numpy as np
import pytest

from meshless_ddm.solver.exceptions import InvalidGeometryError
from meshless_ddm.solver.geometry import Box, BoxRegion, Partition, Subdomain, make_cartesian_partition
from meshless_ddm.solver.metrics import compute_errors, sample_fields
from meshless_ddm.solver.problems import UNIT_SQUARE, manufactured_problem, poisson_manufactured


@pytest.fixture(scope="module")
def problem():
    return poisson_manufactured()


@pytest.fixture(scope="module")
def partition():
    return make_cartesian_partition(UNIT_SQUARE, 2, 2)


def test_exact_predictor_has_no_error(problem, partition):
    report = compute_errors({k: problem.exact for k in range(4)}, problem, partition, resolution=21)
    assert report.max_rel_l2 == 0.0
    assert report.max_error == 0.0
    assert set(report.subdomains) == {0, 1, 2, 3}
    assert report.subdomains[0].n_points == 21 * 21


def test_constant_offset(problem, partition):
    predictors = {k: (lambda p: problem.exact(p) + 0.01) for k in range(4)}
    report = compute_errors(predictors, problem, partition, resolution=31)
    assert report.max_error == pytest.approx(0.01, abs=1e-15)
    assert report.max_rel_l2 > 0


def test_relative_l2_definition(problem):
    partition = make_cartesian_partition(UNIT_SQUARE, 1, 1)
    report = compute_errors({0: lambda p: 2.0 * problem.exact(p)}, problem, partition, resolution=11)
    assert report.subdomains[0].rel_l2 == pytest.approx(1.0)


def test_zero_exact_solution_falls_back_to_absolute(caplog):
    problem = manufactured_problem("poisson", "0")
    partition = make_cartesian_partition(UNIT_SQUARE, 1, 1)
    report = compute_errors({0: lambda p: np.full(len(p), 0.5)}, problem, partition, resolution=3)
    assert report.subdomains[0].rel_l2 == pytest.approx(0.5 * 3)
    assert "vanishes" in caplog.text


def test_empty_grid_is_a_geometry_error(problem):
    class NowhereRegion(BoxRegion):
        def covers(self, points, tol=1e-12):
            return np.zeros(len(points), dtype=bool)

    sub = Subdomain(0, NowhereRegion(Box(0.0, 1.0, 0.0, 1.0)))
    partition = Partition("cartesian", UNIT_SQUARE, (sub,), ())
    with pytest.raises(InvalidGeometryError):
        compute_errors({0: problem.exact}, problem, partition)


def test_summary_lines(problem, partition):
    report = compute_errors(
        {k: problem.exact for k in range(4)}, problem, partition, resolution=5, alphas={0: 0.5}, wall_time=1.5
    )
    lines = report.summary_lines()
    assert lines[0].startswith("maximum relative L2 error across subdomains")
    assert "alpha=0.500000" in lines[2]
    assert lines[-1] == "wall time: 1.50 s"


def test_fields_are_recorded_per_subdomain(problem, partition):
    samples = sample_fields({k: problem.exact for k in range(4)}, problem, partition, resolution=11)
    assert [s.subdomain for s in samples] == [0, 1, 2, 3]
    assert all(np.all(s.abs_error == 0.0) for s in samples)

import re

import numpy as np
import pandas as pd
import pytest

from meshless_ddm.experiments.artifacts import (
    FIELD_COLUMNS,
    INTERFACE_COLUMNS,
    REPORT_COLUMNS,
    RunDirectory,
    report_frame,
    write_csv,
    write_partial_artifacts,
    write_run_artifacts,
)
from meshless_ddm.experiments.tests.factories import tiny_run_config
from meshless_ddm.solver import ddm
from meshless_ddm.solver.exceptions import DivergenceError

SCIENTIFIC = re.compile(r"-?\d\.\d{16}e[+-]\d{2,3}|nan")


@pytest.fixture(scope="module")
def finished():
    config = tiny_run_config()
    ddm_config = config.to_ddm_config()
    return config, ddm_config, ddm.run(ddm_config)


@pytest.fixture
def written(finished, tmp_path) -> RunDirectory:
    config, ddm_config, result = finished
    return write_run_artifacts(RunDirectory(tmp_path / "run").prepare(), config, ddm_config, result)


def test_report_rows(finished):
    _, _, result = finished
    frame = report_frame(result.history)
    assert list(frame.columns) == REPORT_COLUMNS
    assert list(frame["iteration"]) == [1, 1, 2, 2]
    assert list(frame["subdomain"]) == [0, 1, 0, 1]
    assert frame["interface_C"].notna().all()
    assert frame["measurement_C"].isna().all()
    assert frame["alpha"].between(0.0, 1.0).all()


def test_headers_are_fixed(written):
    assert written.report.read_text().splitlines()[0] == ",".join(REPORT_COLUMNS)
    assert written.fields.read_text().splitlines()[0] == ",".join(FIELD_COLUMNS)
    assert written.interfaces.read_text().splitlines()[0] == ",".join(INTERFACE_COLUMNS)
    assert "maximum relative L2 error across subdomains" in written.summary.read_text()


def test_floats_use_scientific_notation(written):
    for line in written.report.read_text().splitlines()[1:]:
        iteration, subdomain, *values = line.split(",")
        assert iteration.isdigit() and subdomain.isdigit()
        assert all(SCIENTIFIC.fullmatch(value) for value in values), line


def test_summary_recomputable_from_fields(finished, written):
    _, _, result = finished
    errors = result.final.errors
    fields = pd.read_csv(written.fields)
    for k, group in fields.groupby("subdomain"):
        diff = group["u_exact"].to_numpy() - group["u_pred"].to_numpy()
        rel_l2 = np.linalg.norm(diff) / np.linalg.norm(group["u_exact"].to_numpy())
        assert rel_l2 == pytest.approx(errors.subdomains[int(k)].rel_l2, abs=1e-12)
        assert group["abs_err"].max() == pytest.approx(errors.subdomains[int(k)].max_error, abs=1e-12)

    summary = written.summary.read_text()
    reported = re.search(r"maximum relative L2 error across subdomains: (\S+)", summary)
    assert float(reported[1]) == pytest.approx(errors.max_rel_l2, abs=1e-12)


def test_interfaces_csv(finished, written):
    frame = pd.read_csv(written.interfaces)
    assert list(frame["iteration"]) == [1, 2]
    assert list(frame["first"]) == [0, 0] and list(frame["second"]) == [1, 1]
    assert (frame["value_gap"] >= 0).all() and (frame["flux_gap"] >= 0).all()


def test_partial_history_on_divergence(finished, tmp_path):
    _, _, result = finished
    error = DivergenceError(
        "loss is not finite",
        group="interface:0",
        epoch=3,
        subdomain=1,
        outer_iteration=2,
        diagnostics={"loss": float("inf")},
    )
    error.history = result.history[:1]
    directory = write_partial_artifacts(RunDirectory(tmp_path).prepare(), error)
    assert list(pd.read_csv(directory.report)["iteration"]) == [1, 1]
    text = directory.divergence.read_text()
    assert "subdomain=1" in text
    assert "loss: inf" in text
    assert not directory.fields.exists()


def test_empty_history_writes_only_the_header(tmp_path):
    path = write_csv(report_frame([]), tmp_path / "report.csv")
    assert path.read_text() == ",".join(REPORT_COLUMNS) + "\n"

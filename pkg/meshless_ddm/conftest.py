import pytest

from meshless_ddm.experiments.runconfig import RunConfig
from meshless_ddm.experiments.tests.factories import tiny_run_config


@pytest.fixture(autouse=True)
def output_root(settings, tmp_path):
    settings.DDM_OUTPUT_ROOT = tmp_path / "runs"
    return settings.DDM_OUTPUT_ROOT


@pytest.fixture
def tiny_config() -> RunConfig:
    return tiny_run_config()

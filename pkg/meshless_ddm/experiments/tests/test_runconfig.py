import dataclasses
from pathlib import Path

import pytest

from meshless_ddm.experiments.runconfig import PRESETS, ConfigError, RunConfig, load_run_config
from meshless_ddm.solver.alm import DEFAULT_ALPHA_LR, AlphaMode, Granularity
from meshless_ddm.solver.problems import PdeKind

CONFIGS_DIR = Path(__file__).resolve().parents[3] / "configs"


def write_ini(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "run.ini"
    path.write_text(text, encoding="utf-8")
    return path


class TestPresets:
    def test_one_way_poisson_defaults(self):
        config = load_run_config(preset="poisson_1way")
        assert (config.nx, config.ny) == (4, 1)
        assert config.hidden == (20, 20, 20)
        assert (config.interior_points, config.boundary_points, config.interface_points) == (1024, 128, 128)
        assert (config.epochs, config.outer_iterations) == (500, 30)
        assert config.alpha_mode == "adaptive"

    def test_complex_boundary_defaults(self):
        config = load_run_config(preset="poisson_complex")
        assert config.layout == "polar"
        assert config.hidden == (30, 30)
        assert config.interior_points == config.boundary_points == config.interface_points == 4096
        assert (config.epochs, config.outer_iterations) == (50, 30)

    def test_single_domain_is_plain_training(self):
        config = load_run_config(preset="single_domain")
        assert (config.nx, config.ny, config.outer_iterations) == (1, 1, 1)

    def test_no_source_falls_back_to_single_domain(self):
        assert load_run_config().problem == "single_domain"

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="poisson_3way"):
            load_run_config(preset="poisson_3way")

    @pytest.mark.parametrize("path", sorted(CONFIGS_DIR.glob("*.ini")), ids=lambda p: p.stem)
    def test_shipped_configs_load(self, path):
        config = load_run_config(path)
        assert config.problem in PRESETS
        assert path.stem.startswith(config.problem)

    def test_shipped_config_matches_its_preset(self):
        assert load_run_config(CONFIGS_DIR / "poisson_1way.ini") == load_run_config(preset="poisson_1way")


class TestResolution:
    def test_file_then_override_then_flags(self, tmp_path):
        path = write_ini(tmp_path, "[problem]\nproblem = poisson_2way\n\n[training]\nepochs = 7\nseed = 1\n")
        from_file = load_run_config(path, preset="single_domain")
        assert from_file.problem == "poisson_2way"
        assert (from_file.nx, from_file.ny, from_file.epochs, from_file.seed) == (2, 2, 7, 1)

        layered = load_run_config(path, overrides=["training.epochs=9", "seed=2"], seed=5, out=tmp_path / "out")
        assert layered.epochs == 9
        assert layered.seed == 5
        assert layered.directory == str(tmp_path / "out")

    def test_override_selects_preset(self, tmp_path):
        path = write_ini(tmp_path, "[problem]\nproblem = poisson_2way\n")
        config = load_run_config(path, overrides=["problem=poisson_1way"])
        assert (config.problem, config.nx) == ("poisson_1way", 4)

    def test_value_types(self, tmp_path):
        path = write_ini(
            tmp_path,
            "[network]\nhidden = 30 30\n\n[alm]\nreset_interface_penalties = no\nmultipliers = per_type\n"
            "gamma = 2.5e-2  # inline comment\n",
        )
        config = load_run_config(path)
        assert config.hidden == (30, 30)
        assert config.reset_interface_penalties is False
        assert config.multipliers == "per_type"
        assert config.gamma == 0.025

    def test_resolved_echo_reloads_to_the_same_run(self, tmp_path):
        config = load_run_config(
            preset="helmholtz_2way", overrides=["alpha_mode=constant", "alpha_value=0.3", "lr=3e-4"], seed=4
        )
        echoed = write_ini(tmp_path, config.to_ini())
        assert load_run_config(echoed) == dataclasses.replace(config, exact_solution=config.solution)


class TestFileErrors:
    @pytest.mark.parametrize(
        "text, line, fragment",
        [
            ("epochs = 5\n", 1, "outside"),
            ("[training]\nepochs 5\n", 2, "malformed"),
            ("[training]\nepochs = 5\nepochs = 6\n", 3, "duplicate"),
            ("[problem]\nproblem = poisson_1way\n[optimizer]\nlr = 1\n", 3, "unknown section"),
            ("[training]\nepoch = 5\n", 2, "unknown key"),
            ("[alm]\nepochs = 5\n", 2, "belongs in [training]"),
            ("[training]\nepochs = five\n", 2, "bad value"),
            ("[problem]\nproblem = poisson_1way\n\n[sampling]\ninterior_points = 0\n", 5, "must be >= 1"),
            ("[problem]\nproblem = poisson_9way\n", 2, "poisson_9way"),
        ],
    )
    def test_line_numbers(self, tmp_path, text, line, fragment):
        path = write_ini(tmp_path, text)
        with pytest.raises(ConfigError) as excinfo:
            load_run_config(path)
        assert excinfo.value.line == line
        assert fragment in str(excinfo.value)
        assert str(excinfo.value).startswith(f"{path}:{line}: ")

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            load_run_config(tmp_path / "missing.ini")
        assert excinfo.value.line is None
        assert excinfo.value.path == str(tmp_path / "missing.ini")

    def test_override_errors_carry_no_position(self, tmp_path):
        path = write_ini(tmp_path, "[training]\nepochs = 5\n")
        with pytest.raises(ConfigError) as excinfo:
            load_run_config(path, overrides=["epochs=0"])
        assert excinfo.value.path is None
        assert excinfo.value.key == "epochs"

    @pytest.mark.parametrize("pair", ["epochs", "alm.epochs=3", "nonsense=1", "epochs=abc", "hidden=2,x"])
    def test_bad_overrides(self, pair):
        with pytest.raises(ConfigError):
            load_run_config(preset="poisson_1way", overrides=[pair])


class TestValidation:
    @pytest.mark.parametrize(
        "key, value",
        [
            ("nx", 0),
            ("interface_points", 0),
            ("hidden", ()),
            ("hidden", (20, 0)),
            ("lr", 0.0),
            ("alpha_value", 1.0),
            ("alpha_lr", 0.0),
            ("smoothing", 1.0),
            ("multipliers", "per_group"),
            ("optimizer", "rmsprop"),
            ("pde", "wave"),
            ("resolution", 1),
            ("inverse_case", 3),
        ],
    )
    def test_rejects(self, key, value):
        with pytest.raises(ConfigError) as excinfo:
            RunConfig(**{key: value})
        assert excinfo.value.key == key

    def test_inverse_cases_need_the_two_by_two_split(self):
        with pytest.raises(ConfigError) as excinfo:
            load_run_config(preset="poisson_1way", overrides=["inverse_case=1"])
        assert excinfo.value.key == "layout"

    def test_labels_and_output_directory(self, tmp_path):
        constant = RunConfig(problem="poisson_1way", alpha_mode="constant", alpha_value=0.5, seed=2)
        assert constant.alpha_label == "constant(0.5)"
        assert constant.output_directory(tmp_path) == tmp_path / "poisson_1way-constant-seed2"
        assert RunConfig(directory="elsewhere").output_directory(tmp_path) == Path("elsewhere")


class TestDdmConfig:
    def test_one_way_poisson(self):
        ddm_config = load_run_config(preset="poisson_1way").to_ddm_config(max_workers=2)
        assert len(ddm_config.partition) == 4
        assert ddm_config.widths == [2, 20, 20, 20, 1]
        assert ddm_config.counts.interior == 1024
        assert ddm_config.problem.kind is PdeKind.POISSON
        assert ddm_config.options.alpha_mode is AlphaMode.ADAPTIVE
        assert ddm_config.options.granularity is Granularity.PER_POINT
        assert ddm_config.resolution == 101
        assert ddm_config.max_workers == 2

    def test_explicit_resolution_wins(self):
        config = load_run_config(preset="poisson_2way", overrides=["resolution=31"])
        assert config.to_ddm_config(resolution=101).resolution == 31

    def test_helmholtz_and_custom_solution(self):
        config = load_run_config(preset="helmholtz_1way", overrides=["exact_solution=x**2 + y**2", "wavenumber=2"])
        problem = config.to_ddm_config().problem
        assert problem.kind is PdeKind.HELMHOLTZ
        assert problem.wavenumber == 2.0
        assert problem.expression == "x**2 + y**2"

    @pytest.mark.parametrize("name, designated, n_meas", [("inverse_case1", 1, 128), ("inverse_case2", 0, 32)])
    def test_inverse_cases(self, name, designated, n_meas):
        problem = load_run_config(preset=name).to_ddm_config().problem
        assert problem.boundary_free == {designated}
        assert len(problem.measurement_for(designated)) == n_meas

    def test_polar_layout(self):
        partition = load_run_config(preset="poisson_complex").to_ddm_config().partition
        assert partition.kind == "polar"
        assert len(partition) == 2

    def test_constant_alpha(self):
        config = load_run_config(preset="poisson_1way", overrides=["alpha_mode=constant", "alpha_value=0.25"])
        ddm_config = config.to_ddm_config()
        assert ddm_config.options.alpha_mode is AlphaMode.CONSTANT
        assert ddm_config.alpha_value == 0.25

    def test_alpha_learning_rate(self):
        assert load_run_config(preset="poisson_1way").to_ddm_config().options.alpha_lr == DEFAULT_ALPHA_LR
        config = load_run_config(preset="poisson_1way", overrides=["alpha_lr=1e-4"])
        assert config.to_ddm_config().options.alpha_lr == 1e-4

"""
Run configuration files.

A run is described by an INI file with one section per concern. Values resolve in
this order: the named problem preset, the file, ``--override`` pairs, then the
``--seed`` and ``--out`` flags. The resolved configuration is echoed next to the
artifacts so a run directory is enough to repeat the run.
"""
import configparser
import dataclasses
import io
import logging
import math
import re
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, get_origin

from meshless_ddm.solver.alm import DEFAULT_ALPHA_LR, AlphaMode, AlphaUpdate, Granularity, TrainingOptions
from meshless_ddm.solver.ddm import DdmConfig
from meshless_ddm.solver.exceptions import InvalidConfigError
from meshless_ddm.solver.geometry import (
    Partition,
    SampleCounts,
    interface_curve,
    make_cartesian_partition,
    make_polar_partition,
    outer_boundary_curve,
)
from meshless_ddm.solver.metrics import DEFAULT_RESOLUTION
from meshless_ddm.solver.problems import (
    HELMHOLTZ_SOLUTION,
    POISSON_SOLUTION,
    UNIT_SQUARE,
    PdeKind,
    ProblemSpec,
    make_inverse_case,
    manufactured_problem,
)

logger = logging.getLogger(__name__)

SECTIONS = ("problem", "partition", "network", "sampling", "training", "alm", "evaluation", "output")

LAYOUTS = ("cartesian", "polar")
OPTIMIZERS = ("adam", "sgd")

PRESETS: dict[str, dict[str, Any]] = {
    "single_domain": {"nx": 1, "ny": 1, "epochs": 5000, "outer_iterations": 1},
    "poisson_1way": {"nx": 4, "ny": 1},
    "poisson_2way": {"nx": 2, "ny": 2},
    "poisson_complex": {
        "layout": "polar",
        "hidden": (30, 30),
        "interior_points": 4096,
        "boundary_points": 4096,
        "interface_points": 4096,
        "epochs": 50,
    },
    "helmholtz_1way": {"pde": "helmholtz", "nx": 4, "ny": 1},
    "helmholtz_2way": {"pde": "helmholtz", "nx": 2, "ny": 2},
    "inverse_case1": {"nx": 2, "ny": 2, "inverse_case": 1},
    "inverse_case2": {"nx": 2, "ny": 2, "inverse_case": 2},
}


class ConfigError(InvalidConfigError):
    """A run configuration that cannot be read, with the file position when there is one."""

    def __init__(
        self,
        message: str,
        *,
        key: str | None = None,
        path: str | Path | None = None,
        line: int | None = None,
    ):
        super().__init__(message)
        self.message = message
        self.key = key
        self.path = None if path is None else str(path)
        self.line = line

    def at(self, path: str | Path, line: int | None) -> "ConfigError":
        self.path, self.line = str(path), line
        return self

    def __str__(self) -> str:
        if self.path is None:
            return self.message
        if self.line is None:
            return f"{self.path}: {self.message}"
        return f"{self.path}:{self.line}: {self.message}"


def setting(section: str, default: Any) -> Any:
    return field(default=default, metadata={"section": section})


@dataclass(frozen=True)
class RunConfig:
    # [problem]
    problem: str = setting("problem", "single_domain")
    pde: str = setting("problem", "poisson")
    exact_solution: str = setting("problem", "")
    wavenumber: float = setting("problem", 1.0)
    inverse_case: int = setting("problem", 0)
    n_meas: int = setting("problem", 0)
    noise: float = setting("problem", 0.0)
    # [partition]
    layout: str = setting("partition", "cartesian")
    nx: int = setting("partition", 1)
    ny: int = setting("partition", 1)
    # [network]
    hidden: tuple[int, ...] = setting("network", (20, 20, 20))
    # [sampling]
    interior_points: int = setting("sampling", 1024)
    boundary_points: int = setting("sampling", 128)
    interface_points: int = setting("sampling", 128)
    # [training]
    epochs: int = setting("training", 500)
    outer_iterations: int = setting("training", 30)
    optimizer: str = setting("training", "adam")
    lr: float = setting("training", 1e-3)
    beta1: float = setting("training", 0.9)
    beta2: float = setting("training", 0.999)
    seed: int = setting("training", 0)
    log_every: int = setting("training", 100)
    # [alm]
    gamma: float = setting("alm", 1e-2)
    smoothing: float = setting("alm", 0.99)
    eps: float = setting("alm", 1e-8)
    multipliers: str = setting("alm", "per_point")
    alpha_mode: str = setting("alm", "adaptive")
    alpha_value: float = setting("alm", 0.5)
    alpha_update: str = setting("alm", "gradient")
    alpha_lr: float = setting("alm", DEFAULT_ALPHA_LR)
    reset_interface_penalties: bool = setting("alm", True)
    # [evaluation]
    resolution: int = setting("evaluation", 0)
    # [output]
    directory: str = setting("output", "")

    def __post_init__(self):
        self._choice("problem", PRESETS)
        self._choice("pde", [kind.value for kind in PdeKind])
        self._choice("layout", LAYOUTS)
        self._choice("optimizer", OPTIMIZERS)
        self._choice("multipliers", [g.value for g in Granularity])
        self._choice("alpha_mode", [m.value for m in AlphaMode])
        self._choice("alpha_update", [u.value for u in AlphaUpdate])
        self._choice("inverse_case", (0, 1, 2))
        for key in ("nx", "ny", "interior_points", "boundary_points", "interface_points", "epochs"):
            self._check(key, getattr(self, key) >= 1, "must be >= 1")
        self._check("outer_iterations", self.outer_iterations >= 1, "must be >= 1")
        self._check("log_every", self.log_every >= 1, "must be >= 1")
        self._check("hidden", bool(self.hidden) and min(self.hidden) >= 1, "needs at least one positive width")
        self._check("n_meas", self.n_meas >= 0, "must be >= 0 (0 picks the case default)")
        self._check("noise", self.noise >= 0.0, "must be >= 0")
        self._check("wavenumber", math.isfinite(self.wavenumber), "must be finite")
        self._check("lr", self.lr > 0.0, "must be > 0")
        self._check("beta1", 0.0 <= self.beta1 < 1.0, "must lie in [0, 1)")
        self._check("beta2", 0.0 <= self.beta2 < 1.0, "must lie in [0, 1)")
        self._check("gamma", self.gamma > 0.0, "must be > 0")
        self._check("smoothing", 0.0 < self.smoothing < 1.0, "must lie in (0, 1)")
        self._check("eps", self.eps > 0.0, "must be > 0")
        self._check("alpha_value", 0.0 < self.alpha_value < 1.0, "must lie in (0, 1)")
        self._check("alpha_lr", self.alpha_lr > 0.0, "must be > 0")
        self._check("resolution", self.resolution == 0 or self.resolution >= 2, "must be 0 or >= 2")
        if self.inverse_case:
            two_by_two = self.layout == "cartesian" and (self.nx, self.ny) == (2, 2)
            self._check("layout", two_by_two, "inverse cases run on the 2x2 Cartesian split")

    def _check(self, key: str, ok: bool, message: str) -> None:
        if not ok:
            raise ConfigError(f"{section_of(key)}.{key} = {getattr(self, key)!r}: {message}", key=key)

    def _choice(self, key: str, allowed: Iterable[Any]) -> None:
        allowed = list(allowed)
        self._check(key, getattr(self, key) in allowed, f"expected one of {', '.join(map(str, allowed))}")

    @property
    def solution(self) -> str:
        if self.exact_solution:
            return self.exact_solution
        return HELMHOLTZ_SOLUTION if self.pde == PdeKind.HELMHOLTZ.value else POISSON_SOLUTION

    @property
    def alpha_label(self) -> str:
        if self.alpha_mode == AlphaMode.CONSTANT.value:
            return f"constant({self.alpha_value:g})"
        return self.alpha_mode

    def build_partition(self) -> Partition:
        if self.layout == "polar":
            return make_polar_partition(outer_boundary_curve(), interface_curve())
        return make_cartesian_partition(UNIT_SQUARE, self.nx, self.ny)

    def build_problem(self, partition: Partition) -> ProblemSpec:
        problem = manufactured_problem(self.pde, self.solution, self.wavenumber, domain=partition.domain)
        if self.inverse_case:
            problem = make_inverse_case(
                problem,
                self.inverse_case,
                partition,
                n_meas=self.n_meas or None,
                seed=self.seed,
                noise=self.noise,
            )
        return problem

    def training_options(self, check_invariants: bool = False) -> TrainingOptions:
        return TrainingOptions(
            optimizer=self.optimizer,
            lr=self.lr,
            betas=(self.beta1, self.beta2),
            gamma=self.gamma,
            smoothing=self.smoothing,
            eps=self.eps,
            granularity=Granularity(self.multipliers),
            alpha_mode=AlphaMode(self.alpha_mode),
            alpha_update=AlphaUpdate(self.alpha_update),
            alpha_lr=self.alpha_lr,
            log_every=self.log_every,
            check_invariants=check_invariants,
        )

    def to_ddm_config(
        self, *, max_workers: int = 0, resolution: int = DEFAULT_RESOLUTION, check_invariants: bool = False
    ) -> DdmConfig:
        partition = self.build_partition()
        return DdmConfig(
            partition=partition,
            problem=self.build_problem(partition),
            counts=SampleCounts(self.interior_points, self.boundary_points, self.interface_points),
            hidden=self.hidden,
            epochs=self.epochs,
            outer_iterations=self.outer_iterations,
            seed=self.seed,
            options=self.training_options(check_invariants),
            alpha_value=self.alpha_value,
            reset_interface_penalties=self.reset_interface_penalties,
            max_workers=max_workers,
            resolution=self.resolution or resolution,
        )

    def output_directory(self, root: str | Path) -> Path:
        if self.directory:
            return Path(self.directory)
        return Path(root) / f"{self.problem}-{self.alpha_mode}-seed{self.seed}"

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        for section in SECTIONS:
            parser.add_section(section)
        for spec in dataclasses.fields(self):
            value = self.solution if spec.name == "exact_solution" else getattr(self, spec.name)
            parser.set(spec.metadata["section"], spec.name, format_value(value))
        buffer = io.StringIO()
        parser.write(buffer)
        return buffer.getvalue()


FIELDS = {spec.name: spec for spec in dataclasses.fields(RunConfig)}


def section_of(key: str) -> str:
    return FIELDS[key].metadata["section"]


def format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(key: str, raw: str) -> Any:
    kind = FIELDS[key].type
    text = raw.strip()
    if kind is bool:
        states = configparser.ConfigParser.BOOLEAN_STATES
        if text.lower() not in states:
            raise ValueError(f"not a boolean: {text!r}")
        return states[text.lower()]
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if get_origin(kind) is tuple:
        return tuple(int(part) for part in text.replace(",", " ").split())
    return text


_SECTION_LINE = re.compile(r"^\[(?P<name>[^\]]+)\]")
_OPTION_LINE = re.compile(r"^(?P<key>[^\s=:][^=:]*?)\s*[=:]")


def _line_numbers(text: str) -> dict[tuple[str, str], int]:
    """First line of every ``(section, key)`` and of every section header (key ``""``)."""
    numbers: dict[tuple[str, str], int] = {}
    section = None
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith(("#", ";")):
            continue
        if match := _SECTION_LINE.match(line.strip()):
            section = match["name"].strip()
            numbers.setdefault((section, ""), number)
        elif section is not None and (match := _OPTION_LINE.match(line)):
            numbers.setdefault((section, match["key"].strip().lower()), number)
    return numbers


def read_config_file(path: str | Path) -> tuple[dict[str, Any], dict[str, int]]:
    """
    Parse a run configuration file.

    Returns:
        The typed values found in the file and the line each key was read from.

    Raises:
        ConfigError: unreadable file, malformed line, unknown section or key, or a
            value of the wrong type.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read run configuration: {exc.strerror or exc}", path=path) from exc

    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=str(path))
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("setting outside of any [section]", path=path, line=exc.lineno) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line, expected 'key = value'", path=path, line=line) from exc
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", path=path, line=exc.lineno) from exc
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", path=path, line=exc.lineno) from exc

    numbers = _line_numbers(text)
    if parser.defaults():
        raise ConfigError("[DEFAULT] is not supported", path=path, line=numbers.get(("DEFAULT", "")))

    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(
                f"unknown section [{section}], expected one of {', '.join(SECTIONS)}",
                path=path,
                line=numbers.get((section, "")),
            )
        for key, raw in parser.items(section, raw=True):
            line = numbers.get((section, key))
            if key not in FIELDS:
                raise ConfigError(f"unknown key {key!r} in [{section}]", key=key, path=path, line=line)
            if section_of(key) != section:
                raise ConfigError(f"{key!r} belongs in [{section_of(key)}], not [{section}]", path=path, line=line)
            try:
                values[key] = parse_value(key, raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {exc}", key=key, path=path, line=line) from exc
            if line is not None:
                lines[key] = line
    return values, lines


def parse_overrides(pairs: Iterable[str]) -> dict[str, Any]:
    """``section.key=value`` or bare ``key=value``; keys are unique across sections."""
    values: dict[str, Any] = {}
    for pair in pairs:
        name, sep, raw = pair.partition("=")
        if not sep:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        section, _, key = name.strip().lower().rpartition(".")
        if key not in FIELDS:
            raise ConfigError(f"unknown setting {name.strip()!r} in override {pair!r}", key=key)
        if section and section != section_of(key):
            raise ConfigError(f"{key!r} belongs in [{section_of(key)}], not [{section}]", key=key)
        try:
            values[key] = parse_value(key, raw)
        except ValueError as exc:
            raise ConfigError(f"bad value in override {pair!r}: {exc}", key=key) from exc
    return values


def load_run_config(
    path: str | Path | None = None,
    *,
    preset: str | None = None,
    overrides: Iterable[str] = (),
    seed: int | None = None,
    out: str | Path | None = None,
) -> RunConfig:
    """
    Resolve a run configuration from a preset, a file and command-line overrides.

    The preset is the ``problem`` key of the overrides or the file, falling back to
    ``preset`` and finally to ``single_domain``.
    """
    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    if path is not None:
        values, lines = read_config_file(path)
    overridden = parse_overrides(overrides)
    name = overridden.get("problem", values.get("problem", preset or "single_domain"))
    if name not in PRESETS:
        error = ConfigError(f"problem.problem = {name!r}: expected one of {', '.join(PRESETS)}", key="problem")
        if path is not None and "problem" not in overridden:
            error.at(path, lines.get("problem"))
        raise error

    resolved = {**PRESETS[name], **values, **overridden, "problem": name}
    if seed is not None:
        resolved["seed"] = seed
    if out is not None:
        resolved["directory"] = str(out)
    try:
        config = RunConfig(**resolved)
    except ConfigError as exc:
        if path is not None and exc.key in values and exc.key not in overridden:
            exc.at(path, lines.get(exc.key))
        raise
    logger.debug("resolved run configuration %s from %s", name, path or "preset")
    return config


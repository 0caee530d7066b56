"""
Experiment configuration files.

A config is a YAML document with the sections ``scenario``, ``kernel``, ``grid``,
``simulation``, ``estimation``, ``observables``, ``output`` and ``acceptance``.
Every key has a default, so an empty file is a valid config (the
constant-supercritical scenario with a single window at the origin).
"""

import dataclasses
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import yaml
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    ValidationInfo,
    field_validator,
    model_validator,
)

from lineage_lab.functional.paths import GridPath
from lineage_lab.kernels.base import BaseMutationKernel
from lineage_lab.kernels.factory import create_mutation_kernel
from lineage_lab.scenario.builtins import BUILTIN_SCENARIOS, get_builtin
from lineage_lab.scenario.rates import build_rate_function
from lineage_lab.scenario.scenario import Scenario, ScenarioBounds, ScenarioError
from lineage_lab.utils.constants import (
    DEFAULT_A_LEVELS,
    DEFAULT_SMOOTHNESS_THRESHOLD,
    DEFAULT_TAIL_TOL,
    NEWTON_MAX_ITER,
    NEWTON_TOL,
    POPULATION_CAP,
)

logger = logging.getLogger(__name__)

RateSpec = Union[float, Dict[str, Any]]


class ConfigError(ValueError):
    """Raised when a config file cannot be read or does not validate."""


def _check_interval(value: Optional[Tuple[float, float]], what: str) -> Optional[Tuple[float, float]]:
    if value is not None and not value[0] < value[1]:
        raise ValueError(f"{what} must satisfy lower < upper, got {list(value)}")
    return value


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class KernelSection(_Section):
    kind: str = "gaussian"
    sigma: Optional[float] = Field(default=None, gt=0)
    lam: Optional[float] = Field(default=None, gt=0, alias="lambda")
    nodes: Optional[List[Tuple[float, float]]] = None
    alpha_max: Optional[float] = Field(default=None, gt=0)
    newton_tol: float = Field(default=NEWTON_TOL, gt=0)
    newton_max_iter: int = Field(default=NEWTON_MAX_ITER, ge=1)
    quadrature_order: int = Field(default=64, ge=1)


class BoundsSection(_Section):
    b_bar: float
    p_bar: float
    p_low: float = Field(gt=0)
    r_bar: float
    beta_bar: float
    decay_alpha: float = Field(gt=0)


class ScenarioSection(_Section):
    """Either a built-in name or a full custom declaration."""

    builtin: Optional[str] = "constant-supercritical"
    name: Optional[str] = None
    birth: Optional[RateSpec] = None
    death: Optional[RateSpec] = None
    mutation_rate: Optional[RateSpec] = None
    beta0: Optional[RateSpec] = None
    bounds: Optional[BoundsSection] = None
    domain: Optional[Tuple[float, float]] = None
    beta0_k_offset: float = 0.0
    clamp_radius: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="before")
    @classmethod
    def _custom_implies_no_builtin(cls, data: Any) -> Any:
        if isinstance(data, dict) and "builtin" not in data:
            if any(key in data for key in ("birth", "death", "mutation_rate", "beta0")):
                data = {**data, "builtin": None}
        return data

    @field_validator("domain")
    @classmethod
    def _domain_nonempty(cls, value):
        return _check_interval(value, "scenario.domain")

    @model_validator(mode="after")
    def _complete(self) -> "ScenarioSection":
        rates = {
            "birth": self.birth,
            "death": self.death,
            "mutation_rate": self.mutation_rate,
            "beta0": self.beta0,
        }
        if self.builtin is not None:
            if self.builtin not in BUILTIN_SCENARIOS:
                raise ValueError(f"Unknown built-in scenario {self.builtin!r} (known: {sorted(BUILTIN_SCENARIOS)})")
            given = sorted(key for key, value in rates.items() if value is not None)
            if given or self.bounds is not None:
                raise ValueError(f"A built-in scenario cannot redefine {given or ['bounds']}")
            return self
        missing = sorted(key for key, value in rates.items() if value is None)
        if self.bounds is None:
            missing.append("bounds")
        if self.domain is None:
            missing.append("domain")
        if missing:
            raise ValueError(f"Custom scenario is missing {missing}")
        return self


class GridSection(_Section):
    T: float = Field(default=1.0, gt=0)
    dt: float = Field(default=0.01, gt=0)
    dx: float = Field(default=0.01, gt=0)
    v_max: Optional[float] = Field(default=None, gt=0)
    a_levels: List[float] = Field(default_factory=lambda: list(DEFAULT_A_LEVELS), min_length=1)
    domain: Optional[Tuple[float, float]] = None
    smoothness_threshold: float = Field(default=DEFAULT_SMOOTHNESS_THRESHOLD, gt=0)

    @field_validator("domain")
    @classmethod
    def _domain_nonempty(cls, value):
        return _check_interval(value, "grid.domain")


class SimulationSection(_Section):
    K: List[float] = Field(default_factory=lambda: [100.0], min_length=1)
    t: float = Field(default=1.0, ge=0)
    replicas: int = Field(default=10, ge=1)
    cap: int = Field(default=POPULATION_CAP, ge=1)
    seed: int = Field(default=0, ge=0)
    tail_tol: float = Field(default=DEFAULT_TAIL_TOL, gt=0, lt=1)

    @field_validator("K")
    @classmethod
    def _k_at_least_two(cls, values: List[float]) -> List[float]:
        small = [k for k in values if not k >= 2]
        if small:
            raise ValueError(f"K values must be at least 2, got {small}")
        return sorted(set(values))


class EstimationSection(_Section):
    n_spines: int = Field(default=1000, ge=2)


class WindowObservable(_Section):
    x: float
    delta: float = Field(gt=0)

    @property
    def label(self) -> str:
        return f"window(x={self.x:g},delta={self.delta:g})"


class TubeObservable(_Section):
    """Sup-norm tube around a path read from CSV or a constant path."""

    eps: float = Field(gt=0)
    path: Optional[str] = None
    constant: Optional[float] = None
    name: Optional[str] = None

    @field_validator("path")
    @classmethod
    def _resolve_path(cls, value: Optional[str], info: ValidationInfo) -> Optional[str]:
        if value is None:
            return None
        path = Path(value)
        base_dir = (info.context or {}).get("base_dir")
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        if not path.exists():
            raise ValueError(f"Tube path file not found: {path}")
        GridPath.from_csv(path)
        return str(path)

    @model_validator(mode="after")
    def _one_reference(self) -> "TubeObservable":
        if (self.path is None) == (self.constant is None):
            raise ValueError("A tube needs exactly one of 'path' or 'constant'")
        return self

    @property
    def label(self) -> str:
        name = self.name or (Path(self.path).stem if self.path else f"const{self.constant:g}")
        return f"tube({name},eps={self.eps:g})"

    def reference(self, t: float) -> GridPath:
        """The tube's centre path on [0, t]."""
        if self.path is not None:
            return GridPath.from_csv(self.path)
        return GridPath.constant(self.constant, 0.0, t)


class ObservablesSection(_Section):
    windows: List[WindowObservable] = Field(default_factory=lambda: [WindowObservable(x=0.0, delta=0.5)])
    tubes: List[TubeObservable] = Field(default_factory=list)


class OutputSection(_Section):
    directory: str = "results"
    dump_ancestry: bool = False


class AcceptanceSection(_Section):
    """Tolerances of the statistical assertions checked by compare and lineage-check."""

    noise_margin: float = Field(default=0.35, gt=0)
    exponent_tolerance: float = Field(default=0.35, gt=0)
    masked_zero_fraction: float = Field(default=0.95, gt=0, le=1)
    masked_u_min: Optional[float] = None
    masked_fk_min: Optional[float] = None
    lineage_tolerance: float = Field(default=0.2, gt=0)
    gap_decreasing: bool = False


class ExperimentConfig(_Section):
    scenario: ScenarioSection = Field(default_factory=ScenarioSection)
    kernel: KernelSection = Field(default_factory=KernelSection)
    grid: GridSection = Field(default_factory=GridSection)
    simulation: SimulationSection = Field(default_factory=SimulationSection)
    estimation: EstimationSection = Field(default_factory=EstimationSection)
    observables: ObservablesSection = Field(default_factory=ObservablesSection)
    output: OutputSection = Field(default_factory=OutputSection)
    acceptance: AcceptanceSection = Field(default_factory=AcceptanceSection)

    @model_validator(mode="after")
    def _tubes_cover_horizon(self) -> "ExperimentConfig":
        t = self.simulation.t
        for tube in self.observables.tubes:
            if tube.path is None:
                continue
            reference = tube.reference(t)
            if reference.t0 > 0 or reference.t_end < t:
                raise ValueError(
                    f"Tube path {tube.path} covers [{reference.t0:g}, {reference.t_end:g}], "
                    f"which does not contain [0, {t:g}]"
                )
        return self

    def with_overrides(self, seed: Optional[int] = None, out: Optional[str] = None) -> "ExperimentConfig":
        """Copy with command-line overrides applied."""
        update = {}
        if seed is not None:
            if seed < 0:
                raise ConfigError(f"Seed must be nonnegative, got {seed}")
            update["simulation"] = self.simulation.model_copy(update={"seed": int(seed)})
        if out is not None:
            update["output"] = self.output.model_copy(update={"directory": str(out)})
        return self.model_copy(update=update) if update else self


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Read and validate a YAML config file.

    Args:
        path: Config file. Relative tube paths are resolved against its directory.

    Returns:
        The validated ExperimentConfig.

    Raises:
        ConfigError: If the file is missing, is not YAML or does not validate.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with path.open("r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"Config file {path} is not valid YAML: {str(e)}")
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a mapping, got {type(data).__name__}")
    try:
        config = ExperimentConfig.model_validate(data, context={"base_dir": str(path.parent)})
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}:\n{str(e)}")
    logger.info(f"Loaded config {path}")
    return config


def build_kernel(config: ExperimentConfig) -> BaseMutationKernel:
    """Mutation kernel of the ``kernel`` section."""
    section = config.kernel
    parameters = section.model_dump(exclude={"kind"}, exclude_none=True)
    if "nodes" in parameters:
        parameters["nodes"] = [tuple(node) for node in parameters["nodes"]]
    try:
        return create_mutation_kernel(section.kind, parameters)
    except ValueError as e:
        raise ConfigError(f"Invalid kernel section: {str(e)}")


def build_scenario(config: ExperimentConfig) -> Scenario:
    """
    Scenario of the ``scenario`` and ``kernel`` sections.

    Raises:
        ConfigError: If a rate function or bound is rejected.
    """
    section = config.scenario
    kernel = build_kernel(config)
    try:
        if section.builtin is not None:
            scenario = get_builtin(section.builtin, kernel)
            changes: Dict[str, Any] = {}
            if section.domain is not None:
                changes["domain"] = tuple(section.domain)
            if section.beta0_k_offset:
                changes["beta0_k_offset"] = section.beta0_k_offset
            if section.name is not None:
                changes["name"] = section.name
            return dataclasses.replace(scenario, **changes) if changes else scenario
        return Scenario(
            name=section.name or "custom",
            birth=build_rate_function(section.birth),
            death=build_rate_function(section.death),
            mutation_rate=build_rate_function(section.mutation_rate),
            beta0=build_rate_function(section.beta0),
            kernel=kernel,
            bounds=ScenarioBounds(**section.bounds.model_dump()),
            domain=tuple(section.domain),
            beta0_k_offset=section.beta0_k_offset,
            clamp_radius=section.clamp_radius,
        )
    except (ScenarioError, ValueError, KeyError) as e:
        raise ConfigError(f"Invalid scenario section: {str(e)}")

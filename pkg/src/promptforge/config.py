"""Declarative run configuration.

A run is described by one JSON file; comments and trailing commas are
accepted. Relative paths are resolved against the directory of the file.

```jsonc
{
  "mode": "sim",                       // "sim" or "live"
  "run": {"name": "brain-fog", "output_dir": "runs", "seed": 7},
  "task": {"symptom": "brain fog", "prevalence": 0.03, "n_notes": 400},
  "backend": {"endpoint_url": "http://localhost:8080", "model_name": "llama-3.3-70b"},
  "optimizer": {"t_max": 7, "selection_strategy": "best_dev_f1"},
  "simulation": {"prevalences": [0.03, 0.12, 0.23], "seeds": 50}
}
```

Command-line overrides are applied as dotted keys (`optimizer.t_max=3`)
before validation. Every validation failure raises `ConfigError` naming the
offending key.
"""

import dataclasses
import logging
import os
from collections.abc import Iterable
from dataclasses import dataclass
from typing import Any

from promptforge.errors import ConfigError, JSONDecodeError
from promptforge.typing import (
    DegradationBaseline,
    FilePath,
    Mode,
    SelectionStrategy,
)

from promptforge.constants import (
    DEFAULT_PARALLELISM,
    DEFAULT_RETRY_BUDGET,
    DEFAULT_T_MAX,
    DEFAULT_THETA,
    DEFAULT_TIMEOUT,
    DEGRADATION_BASELINES,
    SELECTION_STRATEGIES,
)
from promptforge.args import safechars_string
from promptforge.dataset import TERM_MODELS
from promptforge.gateway import BackendConfig
from promptforge.general import deep_merge, set_nested_key
from promptforge.path import (
    default_cache_dir,
    resolve_against,
    resolve_path,
)
from promptforge.pipeline import DevelopmentOptions, Thresholds
from promptforge.restruct import json_load
from promptforge.simlab import SimParams

__all__ = [
    "DEFAULTS",
    "BackendSettings",
    "OptimizerConfig",
    "RunConfig",
    "RunSection",
    "SimulationConfig",
    "TaskConfig",
    "config_from_dict",
    "config_to_dict",
    "load_config",
]

logger = logging.getLogger(__name__)

DEFAULTS: dict[str, Any] = {
    "mode": "sim",
    "run": {
        "name": "run",
        "output_dir": "runs",
        "seed": 0,
    },
    "task": {
        "symptom": None,
        "condition": None,
        "sop_path": None,
        "dev_path": None,
        "val_path": None,
        "lexicon_path": None,
        "prevalence": 0.03,
        "n_notes": 400,
    },
    "backend": {
        "endpoint_url": None,
        "model_name": None,
        "timeout": DEFAULT_TIMEOUT,
        "retry_budget": DEFAULT_RETRY_BUDGET,
        "parallelism": DEFAULT_PARALLELISM,
        "cache_dir": None,
        "resume": False,
    },
    "optimizer": {
        "theta_sensitivity": DEFAULT_THETA,
        "theta_specificity": DEFAULT_THETA,
        "t_max": DEFAULT_T_MAX,
        "guiding_enabled": False,
        "selection_strategy": "final_iteration",
        "degradation_prevention": True,
        "degradation_baseline": "previous",
        "validate_all": True,
    },
    "simulation": {
        "separation": 2.0,
        "step_gain": 1.5,
        "noise_scale": 0.8,
        "clamp": 3.0,
        "prevalences": [0.03, 0.12, 0.23],
        "seeds": 50,
        "base_seed": 0,
        "n_notes": 400,
        "t_max": DEFAULT_T_MAX,
        "workers": 1,
    },
}


@dataclass(frozen=True)
class RunSection:
    name: str
    output_dir: str
    seed: int


@dataclass(frozen=True)
class TaskConfig:
    symptom: str
    condition: str
    sop_path: str | None
    dev_path: str | None
    val_path: str | None
    lexicon_path: str | None
    prevalence: float
    n_notes: int


@dataclass(frozen=True)
class BackendSettings:
    endpoint_url: str | None
    model_name: str | None
    timeout: float
    retry_budget: int
    parallelism: int
    cache_dir: str | None
    resume: bool

    def to_backend_config(self) -> BackendConfig:
        """Gateway configuration; `resume` without a cache directory uses the default cache."""
        cache_dir = self.cache_dir
        if cache_dir is None and self.resume:
            cache_dir = default_cache_dir()
        return BackendConfig(
            endpoint_url=self.endpoint_url or "",
            model_name=self.model_name or "",
            timeout=self.timeout,
            retry_budget=self.retry_budget,
            cache_dir=cache_dir,
            parallelism=self.parallelism,
        )


@dataclass(frozen=True)
class OptimizerConfig:
    theta_sensitivity: float
    theta_specificity: float
    t_max: int
    guiding_enabled: bool
    selection_strategy: SelectionStrategy
    degradation_prevention: bool
    degradation_baseline: DegradationBaseline
    validate_all: bool

    def thresholds(self) -> Thresholds:
        return Thresholds(self.theta_sensitivity, self.theta_specificity)

    def development_options(self) -> DevelopmentOptions:
        return DevelopmentOptions(
            t_max=self.t_max,
            guiding_enabled=self.guiding_enabled,
            selection_strategy=self.selection_strategy,
            degradation_prevention=self.degradation_prevention,
            degradation_baseline=self.degradation_baseline,
        )


@dataclass(frozen=True)
class SimulationConfig:
    separation: float
    step_gain: float
    noise_scale: float
    clamp: float
    prevalences: tuple[float, ...]
    seeds: int
    base_seed: int
    n_notes: int
    t_max: int
    workers: int

    def params(self) -> SimParams:
        return SimParams(
            separation=self.separation,
            step_gain=self.step_gain,
            noise_scale=self.noise_scale,
            clamp=self.clamp,
        )


@dataclass(frozen=True)
class RunConfig:
    mode: Mode
    run: RunSection
    task: TaskConfig
    backend: BackendSettings
    optimizer: OptimizerConfig
    simulation: SimulationConfig


class _Section:
    """Typed accessor over one raw section, reporting errors by dotted key."""

    def __init__(self, name: str, raw: Any) -> None:
        if not isinstance(raw, dict):
            raise ConfigError(name, "must be an object")
        unknown = sorted(set(raw) - set(DEFAULTS[name]))
        if unknown:
            raise ConfigError(f"{name}.{unknown[0]}", "unknown key")
        self.name = name
        self.raw = raw

    def key(self, key: str) -> str:
        return f"{self.name}.{key}"

    def string(self, key: str, *, required: bool = False) -> str | None:
        value = self.raw[key]
        if value is None:
            if required:
                raise ConfigError(self.key(key), "is required")
            return None
        if not isinstance(value, str) or not value.strip():
            raise ConfigError(self.key(key), f"must be a non-empty string, got {value!r}")
        return value.strip()

    def integer(self, key: str, *, minimum: int | None = None) -> int:
        value = self.raw[key]
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(self.key(key), f"must be an integer, got {value!r}")
        if minimum is not None and value < minimum:
            raise ConfigError(self.key(key), f"must be >= {minimum}, got {value}")
        return value

    def number(self, key: str) -> float:
        value = self.raw[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(self.key(key), f"must be a number, got {value!r}")
        return float(value)

    def boolean(self, key: str) -> bool:
        value = self.raw[key]
        if not isinstance(value, bool):
            raise ConfigError(self.key(key), f"must be true or false, got {value!r}")
        return value

    def choice(self, key: str, choices: Iterable[str]) -> Any:
        value = self.raw[key]
        choices = tuple(choices)
        if value not in choices:
            raise ConfigError(self.key(key), f"must be one of {list(choices)}, got {value!r}")
        return value

    def path(
        self, key: str, base_dir: str, *, required: bool = False, must_exist: bool = False
    ) -> str | None:
        value = self.string(key, required=required)
        if value is None:
            return None
        resolved = resolve_against(base_dir, value)
        if must_exist and not os.path.isfile(resolved):
            raise ConfigError(self.key(key), f"file not found: {resolved}")
        return resolved


def _fraction(section: _Section, key: str, value: float) -> float:
    if not 0.0 < value < 1.0:
        raise ConfigError(section.key(key), f"must be strictly between 0 and 1, got {value}")
    return value


def _run_name(name: str) -> str:
    # becomes a directory under output_dir, so no separators and no hidden names
    try:
        name = safechars_string("run_name")(name)
    except ValueError as err:
        raise ConfigError("run.name", f"{err}, got {name!r}") from err
    if name.startswith("."):
        raise ConfigError("run.name", f"must not start with '.', got {name!r}")
    return name


def config_from_dict(raw: Any, base_dir: FilePath = ".") -> RunConfig:
    """Validate a raw configuration merged over the defaults.

    Args:
        raw (Any): Decoded configuration object.
        base_dir (FilePath, optional): Directory relative paths are anchored to. Defaults to '.'.

    Returns:
        RunConfig: The validated configuration.

    Raises:
        ConfigError: If a key is unknown, missing or invalid.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config", "must be an object")
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise ConfigError(unknown[0], "unknown section")
    merged = deep_merge(DEFAULTS, raw)
    base_dir = resolve_path(base_dir)

    mode = merged["mode"]
    if mode not in ("sim", "live"):
        raise ConfigError("mode", f"must be 'sim' or 'live', got {mode!r}")
    live = mode == "live"

    s = _Section("run", merged["run"])
    run_name = _run_name(s.string("name", required=True))  # type: ignore[arg-type]
    run = RunSection(
        name=run_name,
        output_dir=s.path("output_dir", base_dir, required=True),  # type: ignore[arg-type]
        seed=s.integer("seed", minimum=0),
    )

    s = _Section("task", merged["task"])
    symptom = s.string("symptom", required=True)
    if not live and symptom not in TERM_MODELS:
        raise ConfigError("task.symptom", f"sim mode supports {sorted(TERM_MODELS)}, got {symptom!r}")
    task = TaskConfig(
        symptom=symptom,  # type: ignore[arg-type]
        condition=s.string("condition") or symptom,  # type: ignore[arg-type]
        sop_path=s.path("sop_path", base_dir, must_exist=True),
        dev_path=s.path("dev_path", base_dir, required=live, must_exist=live),
        val_path=s.path("val_path", base_dir, required=live, must_exist=live),
        lexicon_path=s.path("lexicon_path", base_dir, must_exist=True),
        prevalence=_fraction(s, "prevalence", s.number("prevalence")),
        n_notes=s.integer("n_notes", minimum=4),
    )
    if task.n_notes % 2:
        raise ConfigError("task.n_notes", f"must be even, got {task.n_notes}")

    s = _Section("backend", merged["backend"])
    backend = BackendSettings(
        endpoint_url=s.string("endpoint_url", required=live),
        model_name=s.string("model_name", required=live),
        timeout=s.number("timeout"),
        retry_budget=s.integer("retry_budget", minimum=0),
        parallelism=s.integer("parallelism", minimum=1),
        cache_dir=s.path("cache_dir", base_dir),
        resume=s.boolean("resume"),
    )
    if backend.timeout <= 0:
        raise ConfigError("backend.timeout", f"must be positive, got {backend.timeout}")

    s = _Section("optimizer", merged["optimizer"])
    optimizer = OptimizerConfig(
        theta_sensitivity=s.number("theta_sensitivity"),
        theta_specificity=s.number("theta_specificity"),
        t_max=s.integer("t_max", minimum=1),
        guiding_enabled=s.boolean("guiding_enabled"),
        selection_strategy=s.choice("selection_strategy", SELECTION_STRATEGIES),
        degradation_prevention=s.boolean("degradation_prevention"),
        degradation_baseline=s.choice("degradation_baseline", DEGRADATION_BASELINES),
        validate_all=s.boolean("validate_all"),
    )
    for key in ("theta_sensitivity", "theta_specificity"):
        if not 0.0 < getattr(optimizer, key) <= 1.0:
            raise ConfigError(f"optimizer.{key}", "must be in (0, 1]")

    s = _Section("simulation", merged["simulation"])
    prevalences = s.raw["prevalences"]
    if not isinstance(prevalences, list) or not prevalences:
        raise ConfigError("simulation.prevalences", "must be a non-empty list")
    for value in prevalences:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("simulation.prevalences", f"must hold numbers, got {value!r}")
        _fraction(s, "prevalences", float(value))
    simulation = SimulationConfig(
        separation=s.number("separation"),
        step_gain=s.number("step_gain"),
        noise_scale=s.number("noise_scale"),
        clamp=s.number("clamp"),
        prevalences=tuple(float(value) for value in prevalences),
        seeds=s.integer("seeds", minimum=1),
        base_seed=s.integer("base_seed", minimum=0),
        n_notes=s.integer("n_notes", minimum=4),
        t_max=s.integer("t_max", minimum=1),
        workers=s.integer("workers", minimum=1),
    )
    if simulation.n_notes % 2:
        raise ConfigError("simulation.n_notes", f"must be even, got {simulation.n_notes}")
    try:
        simulation.params()
    except ValueError as err:
        raise ConfigError("simulation", str(err)) from err

    return RunConfig(
        mode=mode,
        run=run,
        task=task,
        backend=backend,
        optimizer=optimizer,
        simulation=simulation,
    )


def load_config(
    file_path: FilePath,
    overrides: Iterable[tuple[str, Any]] = (),
) -> RunConfig:
    """Load, override and validate a configuration file.

    Args:
        file_path (FilePath): Path of the JSON configuration file.
        overrides (Iterable[tuple[str, Any]], optional): Dotted keys and values applied
            before validation. Defaults to ().

    Returns:
        RunConfig: The validated configuration.

    Raises:
        ConfigError: If the file is missing, not valid JSON, or fails validation.
    """
    file_path = resolve_path(file_path)
    if not os.path.isfile(file_path):
        raise ConfigError("config", f"file not found: {file_path}")
    try:
        raw = json_load(file_path, lenient=True)
    except JSONDecodeError as err:
        raise ConfigError("config", f"invalid JSON in {file_path}: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError("config", "must be an object")
    for key, value in overrides:
        try:
            set_nested_key(raw, key, value)
        except ValueError as err:
            raise ConfigError(key, str(err)) from err
        logger.debug(f"Override {key}={value!r}")
    return config_from_dict(raw, base_dir=os.path.dirname(file_path))


def config_to_dict(config: RunConfig) -> dict:
    """Plain representation for run.json (paths already absolute)."""
    obj = dataclasses.asdict(config)
    obj["simulation"]["prevalences"] = list(config.simulation.prevalences)
    return obj

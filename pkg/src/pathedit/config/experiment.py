"""Experiment configuration files.

A config is a JSON document of nested sections; every key is optional and
falls back to the defaults in :mod:`pathedit.config.settings`. Unknown keys
are rejected so a typo never silently runs the default.
"""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from ..core.distributions import PromptCondition
from ..core.editor import EditConfig, GuidanceConfig, RegSchedule
from ..core.errors import ConfigError
from ..core.registry import DistributionRegistry, load_registry
from ..core.schedule import NoiseSchedule, TimestepGrid, make_timestep_grid
from ..utils.paths import get_data_file_path
from .settings import (
    DEFAULT_DYNAMIC_RANGE,
    DEFAULT_FD_STEP,
    DEFAULT_GRADCHECK_STATES,
    DEFAULT_GRADCHECK_TOLERANCE,
    DEFAULT_GUIDANCE_SCALE,
    DEFAULT_MC_SAMPLES,
    DEFAULT_MC_TRIPLES,
    DEFAULT_N_INSTANCES,
    DEFAULT_N_STEPS,
    DEFAULT_SPACING,
    DEFAULT_SRC_DISTRIBUTION,
    DEFAULT_SWEEP_ACTIVE_STEPS,
    DEFAULT_SWEEP_STRENGTHS,
    DEFAULT_T_MAX_FRACTION,
    DEFAULT_TAR_DISTRIBUTION,
)

logger = logging.getLogger(__name__)

BUILTIN_REGISTRY = "builtin"
DEFAULT_OUTPUT_DIR = "runs"


@dataclass(frozen=True)
class GridSettings:
    n_steps: int = DEFAULT_N_STEPS
    t_max_fraction: float = DEFAULT_T_MAX_FRACTION
    spacing: str = DEFAULT_SPACING


@dataclass(frozen=True)
class GuidanceSettings:
    src_scale: float = DEFAULT_GUIDANCE_SCALE
    tar_scale: float = DEFAULT_GUIDANCE_SCALE
    uncond: Optional[str] = None


@dataclass(frozen=True)
class BenchmarkSettings:
    n_instances: int = DEFAULT_N_INSTANCES
    src_distribution: str = DEFAULT_SRC_DISTRIBUTION
    tar_distribution: str = DEFAULT_TAR_DISTRIBUTION


@dataclass(frozen=True)
class SweepSettings:
    active_steps: List[int] = field(default_factory=lambda: list(DEFAULT_SWEEP_ACTIVE_STEPS))
    strength: List[float] = field(default_factory=lambda: list(DEFAULT_SWEEP_STRENGTHS))


@dataclass(frozen=True)
class VerifySettings:
    n_states: int = DEFAULT_GRADCHECK_STATES
    tolerance: float = DEFAULT_GRADCHECK_TOLERANCE
    mc_triples: int = DEFAULT_MC_TRIPLES
    mc_samples: int = DEFAULT_MC_SAMPLES
    fd_step: float = DEFAULT_FD_STEP


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully parsed experiment config.

    ``base_dir`` is the directory relative paths in the file resolve against.
    """

    schedule: NoiseSchedule = field(default_factory=NoiseSchedule)
    grid: GridSettings = field(default_factory=GridSettings)
    reg: RegSchedule = field(default_factory=RegSchedule)
    guidance: GuidanceSettings = field(default_factory=GuidanceSettings)
    seed: int = 0
    registry: str = BUILTIN_REGISTRY
    benchmark: BenchmarkSettings = field(default_factory=BenchmarkSettings)
    dynamic_range: float = DEFAULT_DYNAMIC_RANGE
    sweep: SweepSettings = field(default_factory=SweepSettings)
    verify: VerifySettings = field(default_factory=VerifySettings)
    edit_instance: int = 0
    workers: int = 1
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)
    base_dir: Path = Path(".")

    def __post_init__(self) -> None:
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if not self.dynamic_range > 0:
            raise ConfigError(f"metrics.dynamic_range must be positive, got {self.dynamic_range!r}")
        if isinstance(self.workers, bool) or not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError(f"workers must be a positive integer, got {self.workers!r}")
        if self.edit_instance < 0:
            raise ConfigError(f"edit.instance must be non-negative, got {self.edit_instance!r}")
        if any(not 0 <= m <= self.grid.n_steps for m in self.sweep.active_steps):
            raise ConfigError(
                f"sweep.active_steps must lie in [0, {self.grid.n_steps}]: {self.sweep.active_steps}"
            )
        if any(not 0.0 <= s <= 1.0 for s in self.sweep.strength):
            raise ConfigError(f"sweep.strength values must lie in [0, 1]: {self.sweep.strength}")
        # Catches an oversized active_steps before any run starts.
        self.edit_config()

    def make_grid(self) -> TimestepGrid:
        return make_timestep_grid(
            self.schedule, self.grid.n_steps, self.grid.t_max_fraction, self.grid.spacing
        )

    def registry_path(self) -> Path:
        if self.registry == BUILTIN_REGISTRY:
            return get_data_file_path("distributions.json")
        return (self.base_dir / self.registry).resolve()

    def load_registry(self) -> DistributionRegistry:
        """Load the distribution registry and check every referenced name.

        Raises:
            ConfigError: If the registry is unreadable or a name is unknown
        """
        registry = load_registry(self.registry_path())
        for name in (self.benchmark.src_distribution, self.benchmark.tar_distribution, self.guidance.uncond):
            if name is not None:
                registry.get(name)
        return registry

    def uncond_prompt(self) -> Optional[PromptCondition]:
        if self.guidance.uncond is None:
            return None
        return PromptCondition(self.guidance.uncond, self.guidance.uncond)

    def edit_config(self, seed: Optional[int] = None) -> EditConfig:
        guidance = GuidanceConfig(self.guidance.src_scale, self.guidance.tar_scale, self.uncond_prompt())
        return EditConfig(self.make_grid(), self.reg, guidance, self.seed if seed is None else seed)

    def to_dict(self) -> Dict[str, Any]:
        """Config echo in the same layout as the file."""
        return {
            "schedule": {
                "kind": self.schedule.kind,
                "T": self.schedule.horizon,
                "alpha_floor": self.schedule.alpha_floor,
            },
            "grid": {
                "n_steps": self.grid.n_steps,
                "t_max_fraction": self.grid.t_max_fraction,
                "spacing": self.grid.spacing,
            },
            "reg": self.reg.to_dict(),
            "guidance": {
                "src_scale": self.guidance.src_scale,
                "tar_scale": self.guidance.tar_scale,
                "uncond": self.guidance.uncond,
            },
            "seed": self.seed,
            "model": {"registry": self.registry},
            "benchmark": {
                "n_instances": self.benchmark.n_instances,
                "src_distribution": self.benchmark.src_distribution,
                "tar_distribution": self.benchmark.tar_distribution,
            },
            "metrics": {"dynamic_range": self.dynamic_range},
            "sweep": {"active_steps": list(self.sweep.active_steps), "strength": list(self.sweep.strength)},
            "verify": {
                "n_states": self.verify.n_states,
                "tolerance": self.verify.tolerance,
                "mc_triples": self.verify.mc_triples,
                "mc_samples": self.verify.mc_samples,
                "fd_step": self.verify.fd_step,
            },
            "edit": {"instance": self.edit_instance},
            "workers": self.workers,
            "output_dir": str(self.output_dir),
        }


TOP_LEVEL_KEYS = {
    "schedule", "grid", "reg", "guidance", "seed", "model", "benchmark",
    "metrics", "sweep", "verify", "edit", "workers", "output_dir",
}


def _section(data: Mapping[str, Any], name: str, allowed: set) -> Dict[str, Any]:
    section = data.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"Config section '{name}' must be an object")
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"Unknown keys in '{name}': {', '.join(sorted(unknown))}")
    return section


def config_from_dict(data: Mapping[str, Any], base_dir: Path = Path(".")) -> ExperimentConfig:
    """Parse a config document.

    Raises:
        ConfigError: On unknown keys or invalid values
    """
    unknown = set(data) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"Unknown config keys: {', '.join(sorted(unknown))}")

    schedule = dict(_section(data, "schedule", {"kind", "T", "alpha_floor"}))
    if "T" in schedule:
        schedule["horizon"] = schedule.pop("T")
    model = _section(data, "model", {"registry"})
    metrics = _section(data, "metrics", {"dynamic_range"})
    edit = _section(data, "edit", {"instance"})

    try:
        config = ExperimentConfig(
            schedule=NoiseSchedule(**schedule),
            grid=GridSettings(**_section(data, "grid", {"n_steps", "t_max_fraction", "spacing"})),
            reg=RegSchedule(**_section(data, "reg", {"form", "strength", "active_steps", "taylor_delta"})),
            guidance=GuidanceSettings(**_section(data, "guidance", {"src_scale", "tar_scale", "uncond"})),
            seed=data.get("seed", 0),
            registry=model.get("registry", BUILTIN_REGISTRY),
            benchmark=BenchmarkSettings(**_section(
                data, "benchmark", {"n_instances", "src_distribution", "tar_distribution"}
            )),
            dynamic_range=metrics.get("dynamic_range", DEFAULT_DYNAMIC_RANGE),
            sweep=SweepSettings(**_section(data, "sweep", {"active_steps", "strength"})),
            verify=VerifySettings(**_section(
                data, "verify", {"n_states", "tolerance", "mc_triples", "mc_samples", "fd_step"}
            )),
            edit_instance=edit.get("instance", 0),
            workers=data.get("workers", 1),
            output_dir=Path(data.get("output_dir", DEFAULT_OUTPUT_DIR)),
            base_dir=base_dir,
        )
    except TypeError as e:
        raise ConfigError(f"Invalid config value: {e}") from e
    return config


def load_config(
    path: Optional[Path] = None,
    seed: Optional[int] = None,
    out: Optional[Path] = None,
) -> ExperimentConfig:
    """Load a config file, applying command-line overrides.

    Args:
        path: Config file; the packaged default config when None
        seed: Overrides ``seed`` when given
        out: Overrides ``output_dir`` when given

    Raises:
        ConfigError: If the file is missing, not valid JSON or invalid
    """
    path = Path(path) if path is not None else get_data_file_path("default_config.json")
    try:
        with path.open("r") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must contain a JSON object")

    if seed is not None:
        data["seed"] = seed
    if out is not None:
        data["output_dir"] = str(out)
    config = config_from_dict(data, base_dir=path.parent)
    logger.info("Loaded config %s (seed %d)", path, config.seed)
    return config

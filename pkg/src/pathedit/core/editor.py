"""Inversion-free editing along the direct path between source and target.

The edit keeps a mixed latent z_mix that starts at the source image. At each
grid step the source is diffused with fresh noise, the target latent is placed
at the same offset from it as z_mix is from the source, and both are denoised
under their prompts. The calibrated difference of the two predictions moves
z_mix towards the target; on the first ``active_steps`` steps a path
regularization gradient pulls the update back towards the source so the
target's denoising path stays close to the source's.
"""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..config.settings import (
    DEFAULT_ACTIVE_STEPS,
    DEFAULT_GUIDANCE_SCALE,
    DEFAULT_REG_FORM,
    DEFAULT_STRENGTH,
    DEFAULT_TAYLOR_DELTA,
    REG_FORMS,
)
from .denoiser import Denoiser, guided_predict
from .distributions import PromptCondition
from .errors import ConfigError, NumericError, ShapeError
from .forward import NoiseStream, shared_noise_pair
from .schedule import NoiseSchedule, TimestepGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegSchedule:
    """Path regularization settings.

    Attributes:
        form: ``full_eq10``, ``simplified`` or ``bypass``
        strength: s in [0, 1]; 0 is pure direct-path editing, 1 keeps the
            source-target offset unchanged on regularized steps
        active_steps: Number of leading grid steps that are regularized
        taylor_delta: Expansion point of the full gradient's Taylor term
    """

    form: str = DEFAULT_REG_FORM
    strength: float = DEFAULT_STRENGTH
    active_steps: int = DEFAULT_ACTIVE_STEPS
    taylor_delta: float = DEFAULT_TAYLOR_DELTA

    def __post_init__(self) -> None:
        if self.form not in REG_FORMS:
            raise ConfigError(f"Unknown reg.form '{self.form}', expected one of {REG_FORMS}")
        if not 0.0 <= self.strength <= 1.0:
            raise ConfigError(f"reg.strength must lie in [0, 1], got {self.strength!r}")
        if isinstance(self.active_steps, bool) or not isinstance(self.active_steps, int) \
                or self.active_steps < 0:
            raise ConfigError(f"reg.active_steps must be a non-negative integer, got {self.active_steps!r}")
        if not 0.0 < self.taylor_delta <= 1.0:
            raise ConfigError(f"reg.taylor_delta must lie in (0, 1], got {self.taylor_delta!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "form": self.form,
            "strength": self.strength,
            "active_steps": self.active_steps,
            "taylor_delta": self.taylor_delta,
        }


@dataclass(frozen=True)
class GuidanceConfig:
    """Guidance scales for the source and target predictions.

    ``uncond`` is the unconditional prompt; without one, guidance is off.
    """

    src_scale: float = DEFAULT_GUIDANCE_SCALE
    tar_scale: float = DEFAULT_GUIDANCE_SCALE
    uncond: Optional[PromptCondition] = None

    def __post_init__(self) -> None:
        if self.src_scale < 0 or self.tar_scale < 0:
            raise ConfigError(
                f"Guidance scales must be non-negative, got {self.src_scale}, {self.tar_scale}"
            )

    def to_dict(self) -> Dict[str, Any]:
        uncond = None
        if self.uncond is not None:
            uncond = {"label": self.uncond.label, "distribution_ref": self.uncond.distribution_ref}
        return {"src_scale": self.src_scale, "tar_scale": self.tar_scale, "uncond": uncond}


@dataclass(frozen=True)
class EditConfig:
    """Everything one edit run depends on besides the denoiser and schedule."""

    grid: TimestepGrid
    reg: RegSchedule = field(default_factory=RegSchedule)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.reg.active_steps > len(self.grid):
            raise ConfigError(
                f"reg.active_steps={self.reg.active_steps} exceeds grid length {len(self.grid)}"
            )
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "grid": {"timesteps": list(self.grid.timesteps)},
            "reg": self.reg.to_dict(),
            "guidance": self.guidance.to_dict(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EditConfig":
        """Rebuild a config written by :meth:`to_dict`.

        Raises:
            ConfigError: If a field is missing or invalid
        """
        try:
            guidance = dict(data["guidance"])
            uncond = guidance.pop("uncond", None)
            if uncond is not None:
                uncond = PromptCondition(uncond["label"], uncond["distribution_ref"])
            return cls(
                grid=TimestepGrid(tuple(data["grid"]["timesteps"])),
                reg=RegSchedule(**data["reg"]),
                guidance=GuidanceConfig(uncond=uncond, **guidance),
                seed=data["seed"],
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"Malformed edit config: {e}") from e

    def with_reg(self, **changes: Any) -> "EditConfig":
        """Copy with some regularization fields replaced."""
        reg = RegSchedule(**{**self.reg.to_dict(), **changes})
        return EditConfig(self.grid, reg, self.guidance, self.seed)

    def with_seed(self, seed: int) -> "EditConfig":
        return EditConfig(self.grid, self.reg, self.guidance, seed)


@dataclass(frozen=True, eq=False)
class StepRecord:
    """State of one edit step. Predictions are None on bypassed steps."""

    step_index: int
    t: float
    alpha_bar: float
    z_mix_before: np.ndarray
    z_src: np.ndarray
    z_tar: np.ndarray
    zhat0_src: Optional[np.ndarray]
    zhat0_tar: Optional[np.ndarray]
    v_t: np.ndarray
    reg_grad: np.ndarray
    z_mix_after: np.ndarray

    ARRAY_FIELDS = (
        "z_mix_before", "z_src", "z_tar", "zhat0_src", "zhat0_tar", "v_t", "reg_grad", "z_mix_after",
    )

    def to_dict(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "step_index": self.step_index,
            "t": self.t,
            "alpha_bar": self.alpha_bar,
        }
        for name in self.ARRAY_FIELDS:
            value = getattr(self, name)
            record[name] = None if value is None else np.asarray(value).reshape(-1).tolist()
        return record

    @classmethod
    def from_dict(cls, data: Dict[str, Any], shape: Tuple[int, ...]) -> "StepRecord":
        arrays = {}
        for name in cls.ARRAY_FIELDS:
            value = data[name]
            if value is None:
                arrays[name] = None
                continue
            array = np.asarray(value, dtype=float)
            if array.size != int(np.prod(shape)):
                raise ShapeError(f"Field {name} has {array.size} values, expected shape {shape}")
            arrays[name] = array.reshape(shape)
        return cls(
            step_index=int(data["step_index"]),
            t=float(data["t"]),
            alpha_bar=float(data["alpha_bar"]),
            **arrays,
        )


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A full edit: source, output, every step and the config that produced it."""

    source: np.ndarray
    output: np.ndarray
    steps: Tuple[StepRecord, ...]
    config: EditConfig

    FORMAT_VERSION = 1

    def to_records(self) -> List[Dict[str, Any]]:
        """Header record followed by one record per step."""
        header = {
            "kind": "header",
            "version": self.FORMAT_VERSION,
            "shape": list(np.shape(self.source)),
            "config": self.config.to_dict(),
            "source": np.asarray(self.source).reshape(-1).tolist(),
            "output": np.asarray(self.output).reshape(-1).tolist(),
        }
        return [header] + [{"kind": "step", **step.to_dict()} for step in self.steps]

    @classmethod
    def from_records(cls, records: List[Dict[str, Any]]) -> "Trajectory":
        """Rebuild a trajectory and check every step invariant.

        Raises:
            ConfigError: On an unknown version or malformed records
            NumericError: If a step invariant does not hold
        """
        if not records or records[0].get("kind") != "header":
            raise ConfigError("Trajectory records must start with a header")
        header = records[0]
        if header.get("version") != cls.FORMAT_VERSION:
            raise ConfigError(f"Incompatible trajectory format version: {header.get('version')}")
        try:
            shape = tuple(int(n) for n in header["shape"])
            steps = tuple(StepRecord.from_dict(r, shape) for r in records[1:])
            trajectory = cls(
                source=np.asarray(header["source"], dtype=float).reshape(shape),
                output=np.asarray(header["output"], dtype=float).reshape(shape),
                steps=steps,
                config=EditConfig.from_dict(header["config"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f"Malformed trajectory records: {e}") from e
        validate_trajectory(trajectory)
        return trajectory


def _require_same_shape(*arrays: np.ndarray) -> None:
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise ShapeError(f"Latent shapes differ: {sorted(shapes)}")


def calibrated_target_prediction(
    zhat0_tar: np.ndarray, zhat0_src: np.ndarray, z0_src: np.ndarray
) -> np.ndarray:
    """Correct the target prediction by the known source prediction error."""
    _require_same_shape(zhat0_tar, zhat0_src, z0_src)
    return np.asarray(z0_src) + (np.asarray(zhat0_tar) - np.asarray(zhat0_src))


def edit_direction(
    z0_src: np.ndarray,
    zhat0_src: np.ndarray,
    zhat0_tar: np.ndarray,
    t_next: float,
    schedule: NoiseSchedule,
) -> np.ndarray:
    """Next mixed latent before regularization: z0 + sqrt(a_next) (zhat_tar - zhat_src)."""
    _require_same_shape(z0_src, zhat0_src, zhat0_tar)
    scale = schedule.sqrt_alpha_bar(t_next)
    return np.asarray(z0_src) + scale * (np.asarray(zhat0_tar) - np.asarray(zhat0_src))


def path_gradient(
    z_src: np.ndarray,
    z_tar: np.ndarray,
    zhat0_src: np.ndarray,
    zhat0_tar: np.ndarray,
    sqrt_alpha_bar: float,
    alpha_bar_dot: float,
    gamma_hat: float,
    taylor_delta: float = DEFAULT_TAYLOR_DELTA,
) -> np.ndarray:
    """gamma_hat [(z_src - z_tar) - kappa (zhat_src - zhat_tar)], kappa = delta adot / (2 sqrt(a))."""
    _require_same_shape(z_src, z_tar, zhat0_src, zhat0_tar)
    kappa = taylor_delta * alpha_bar_dot / (2.0 * sqrt_alpha_bar)
    return gamma_hat * (
        (np.asarray(z_src) - np.asarray(z_tar))
        - kappa * (np.asarray(zhat0_src) - np.asarray(zhat0_tar))
    )


def reg_gradient_full(
    z_src: np.ndarray,
    z_tar: np.ndarray,
    zhat0_src: np.ndarray,
    zhat0_tar: np.ndarray,
    t: float,
    gamma_hat: float,
    schedule: NoiseSchedule,
    taylor_delta: float = DEFAULT_TAYLOR_DELTA,
) -> np.ndarray:
    """Path regularization gradient with the schedule-derivative term.

    Raises:
        DegenerateTimestepError: If alpha_bar(t) is clamped
    """
    alpha_bar_dot = schedule.alpha_bar_dot(t)
    return path_gradient(
        z_src, z_tar, zhat0_src, zhat0_tar,
        schedule.sqrt_alpha_bar(t), alpha_bar_dot, gamma_hat, taylor_delta,
    )


def reg_gradient_simplified(
    zhat0_src: np.ndarray, zhat0_tar: np.ndarray, gamma_hat: float
) -> np.ndarray:
    _require_same_shape(zhat0_src, zhat0_tar)
    return gamma_hat * (np.asarray(zhat0_src) - np.asarray(zhat0_tar))


def _is_active(reg: RegSchedule, step_index: int) -> bool:
    return step_index < reg.active_steps and reg.strength != 0.0


def effective_coefficient(
    reg: RegSchedule, step_index: int, t: float, t_next: float, schedule: NoiseSchedule
) -> float:
    """Coefficient c of the prediction gap in z_mix_after = z0 + c (zhat_tar - zhat_src).

    Interpolates between sqrt(a_next) (pure editing) and sqrt(a) (full
    preservation) on regularized steps.
    """
    sqrt_next = schedule.sqrt_alpha_bar(t_next)
    if not _is_active(reg, step_index):
        return sqrt_next
    return sqrt_next + reg.strength * (schedule.sqrt_alpha_bar(t) - sqrt_next)


def gamma_hat_for_step(
    reg: RegSchedule, step_index: int, t: float, t_next: float, schedule: NoiseSchedule
) -> float:
    """Regularization weight for one step.

    Zero outside the first ``active_steps`` steps. Otherwise the simplified
    and bypass forms use s (sqrt(a) - sqrt(a_next)), which is not positive;
    the full form divides that by (sqrt(a) - kappa) so its update matches the
    simplified one when the predictions are consistent with the latents.
    """
    if not _is_active(reg, step_index):
        return 0.0
    sqrt_ab = schedule.sqrt_alpha_bar(t)
    gamma_hat = reg.strength * (sqrt_ab - schedule.sqrt_alpha_bar(t_next))
    if reg.form != "full_eq10":
        return gamma_hat
    kappa = reg.taylor_delta * schedule.alpha_bar_dot(t) / (2.0 * sqrt_ab)
    return gamma_hat / (sqrt_ab - kappa)


def _check_finite(name: str, value: np.ndarray, step_index: int) -> None:
    if not np.all(np.isfinite(value)):
        raise NumericError(f"Non-finite {name} at step {step_index}")


def direct_path_edit(
    denoiser: Denoiser,
    z0_src: np.ndarray,
    p_src: PromptCondition,
    p_tar: PromptCondition,
    config: EditConfig,
    schedule: NoiseSchedule,
) -> Tuple[np.ndarray, Trajectory]:
    """Edit ``z0_src`` from prompt ``p_src`` towards ``p_tar``.

    Args:
        denoiser: Clean-sample predictor shared by both prompts
        z0_src: Source latent, vector or grid layout
        p_src: Source prompt
        p_tar: Target prompt
        config: Grid, regularization, guidance and seed
        schedule: Noise schedule

    Returns:
        ``(output, trajectory)``

    Raises:
        NumericError: On non-finite inputs or intermediates
        DegenerateTimestepError: If the full form meets a clamped timestep
    """
    z0 = np.array(z0_src, dtype=float)
    _check_finite("source", z0, 0)
    z0.setflags(write=False)
    reg = config.reg
    guidance = config.guidance

    z_mix = z0.copy()
    noise = NoiseStream(config.seed, z0.shape)
    debug = logger.isEnabledFor(logging.DEBUG)
    steps: List[StepRecord] = []
    for step_index, t, t_next in config.grid.steps():
        alpha_bar = schedule.alpha_bar(t)
        gamma_hat = gamma_hat_for_step(reg, step_index, t, t_next, schedule)
        eps = noise.draw(step_index)
        z_src, z_tar = shared_noise_pair(z0, z_mix, t, eps, schedule)

        zhat0_src: Optional[np.ndarray] = None
        zhat0_tar: Optional[np.ndarray] = None
        if reg.form == "bypass" and gamma_hat != 0.0:
            sqrt_ab = math.sqrt(alpha_bar)
            v_t = z0 + (schedule.sqrt_alpha_bar(t_next) / sqrt_ab) * (z_mix - z0)
            reg_grad = -gamma_hat * (z_tar - z_src) / sqrt_ab
        else:
            zhat0_src = np.asarray(
                guided_predict(denoiser, z_src, t, p_src, guidance.uncond, guidance.src_scale), dtype=float
            )
            zhat0_tar = np.asarray(
                guided_predict(denoiser, z_tar, t, p_tar, guidance.uncond, guidance.tar_scale), dtype=float
            )
            _check_finite("source prediction", zhat0_src, step_index)
            _check_finite("target prediction", zhat0_tar, step_index)
            v_t = edit_direction(z0, zhat0_src, zhat0_tar, t_next, schedule)
            if gamma_hat == 0.0:
                reg_grad = np.zeros_like(z0)
            elif reg.form == "full_eq10":
                reg_grad = reg_gradient_full(
                    z_src, z_tar, zhat0_src, zhat0_tar, t, gamma_hat, schedule, reg.taylor_delta
                )
            else:
                reg_grad = reg_gradient_simplified(zhat0_src, zhat0_tar, gamma_hat)

        z_after = v_t - reg_grad
        _check_finite("update", z_after, step_index)
        if debug:
            logger.debug(
                "step %d t=%.3f alpha_bar=%.6f gamma_hat=%.6f |update|=%.6g",
                step_index, t, alpha_bar, gamma_hat, float(np.linalg.norm(z_after - z_mix)),
            )
        steps.append(StepRecord(
            step_index=step_index,
            t=t,
            alpha_bar=alpha_bar,
            z_mix_before=z_mix,
            z_src=z_src,
            z_tar=z_tar,
            zhat0_src=zhat0_src,
            zhat0_tar=zhat0_tar,
            v_t=v_t,
            reg_grad=reg_grad,
            z_mix_after=z_after,
        ))
        z_mix = z_after

    trajectory = Trajectory(source=np.array(z0), output=z_mix, steps=tuple(steps), config=config)
    return z_mix, trajectory


def validate_trajectory(trajectory: Trajectory) -> None:
    """Check the boundary and per-step invariants of a trajectory.

    The shared-noise offset identity is checked to within two units in the
    last place of the operands, since the target latent is formed by one
    rounded addition.

    Raises:
        NumericError: On the first violated invariant
    """
    steps = trajectory.steps
    if not steps:
        raise NumericError("Trajectory has no steps")
    source = np.asarray(trajectory.source)
    if not np.array_equal(steps[0].z_mix_before, source):
        raise NumericError("First step does not start at the source")
    if not np.array_equal(steps[-1].z_mix_after, trajectory.output):
        raise NumericError("Output differs from the last step's result")

    for i, step in enumerate(steps):
        if step.step_index != i:
            raise NumericError(f"Step {i} is recorded with index {step.step_index}")
        if i > 0 and not np.array_equal(step.z_mix_before, steps[i - 1].z_mix_after):
            raise NumericError(f"Step {i} does not continue from step {i - 1}")
        if not np.array_equal(step.z_mix_after, step.v_t - step.reg_grad):
            raise NumericError(f"Step {i}: z_mix_after != v_t - reg_grad")
        offset_error = np.abs((step.z_tar - step.z_src) - (step.z_mix_before - source))
        scale = np.maximum.reduce([
            np.abs(step.z_tar), np.abs(step.z_src), np.abs(step.z_mix_before), np.abs(source),
        ])
        if np.any(offset_error > 2.0 * np.spacing(scale)):
            raise NumericError(f"Step {i}: z_tar - z_src does not match z_mix - z0_src")

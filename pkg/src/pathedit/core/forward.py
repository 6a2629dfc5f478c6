"""Forward diffusion, shared-noise pairs and multistep consistency sampling."""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .denoiser import Denoiser
from .distributions import PromptCondition
from .errors import ConfigError, ShapeError
from .schedule import NoiseSchedule, TimestepGrid

logger = logging.getLogger(__name__)


_WORD = 2 ** 64


@dataclass(frozen=True, eq=False)
class NoiseDraw:
    """A standard-normal draw with its (seed, step_index) provenance."""

    values: np.ndarray
    seed: int
    step_index: int


class NoiseStream:
    """Standard-normal draws keyed by (seed, step_index) from one generator.

    A counter-based Philox generator keyed by the seed is rewound to the step
    index before every draw, so a draw depends on (seed, step_index) alone and
    not on which steps were drawn before it.

    Raises:
        ConfigError: If the seed is negative or wider than 128 bits
    """

    def __init__(self, seed: int, shape: Tuple[int, ...]) -> None:
        if seed < 0 or seed >= _WORD ** 2:
            raise ConfigError(f"Seed must be a non-negative 128-bit integer, got {seed}")
        self.seed = int(seed)
        self.shape = tuple(shape)
        key = np.array([self.seed % _WORD, self.seed // _WORD], dtype=np.uint64)
        self._bit_generator = np.random.Philox(key=key)
        self._generator = np.random.Generator(self._bit_generator)
        self._state = self._bit_generator.state

    def draw(self, step_index: int) -> NoiseDraw:
        """Noise for one step.

        Raises:
            ConfigError: If the step index is negative
        """
        if step_index < 0:
            raise ConfigError(f"Step index must be non-negative, got {step_index}")
        self._state["state"]["counter"] = np.array([0, step_index, 0, 0], dtype=np.uint64)
        self._state["buffer_pos"] = 4
        self._state["has_uint32"] = 0
        self._bit_generator.state = self._state
        values = self._generator.standard_normal(self.shape)
        values.setflags(write=False)
        return NoiseDraw(values, self.seed, int(step_index))


def draw_noise(seed: int, step_index: int, shape: Tuple[int, ...]) -> NoiseDraw:
    """Draw reproducible standard-normal noise keyed by (seed, step_index).

    Raises:
        ConfigError: If the seed or step index is negative
    """
    if seed < 0 or step_index < 0:
        raise ConfigError(f"Seed and step index must be non-negative, got ({seed}, {step_index})")
    return NoiseStream(seed, shape).draw(step_index)


def _noise_values(eps: Union[NoiseDraw, np.ndarray]) -> np.ndarray:
    return eps.values if isinstance(eps, NoiseDraw) else np.asarray(eps, dtype=float)


def diffuse(
    z0: np.ndarray,
    t: float,
    eps: Union[NoiseDraw, np.ndarray],
    schedule: NoiseSchedule,
) -> np.ndarray:
    """sqrt(a) z0 + sqrt(1 - a) eps at a = alpha_bar(t).

    Raises:
        ShapeError: If ``z0`` and ``eps`` differ in shape
    """
    z0 = np.asarray(z0, dtype=float)
    noise = _noise_values(eps)
    if z0.shape != noise.shape:
        raise ShapeError(f"Latent shape {z0.shape} does not match noise shape {noise.shape}")
    alpha_bar = schedule.alpha_bar(t)
    if alpha_bar == 1.0:
        return z0.copy()
    return math.sqrt(alpha_bar) * z0 + math.sqrt(1.0 - alpha_bar) * noise


def shared_noise_pair(
    z0_src: np.ndarray,
    z_mix: np.ndarray,
    t: float,
    eps: Union[NoiseDraw, np.ndarray],
    schedule: NoiseSchedule,
) -> Tuple[np.ndarray, np.ndarray]:
    """Diffuse the source and place the target at the same offset as z_mix.

    Returns:
        ``(z_src, z_tar)`` with ``z_tar = (z_mix - z0_src) + z_src``
    """
    z0_src = np.asarray(z0_src, dtype=float)
    z_mix = np.asarray(z_mix, dtype=float)
    if z0_src.shape != z_mix.shape:
        raise ShapeError(f"Source shape {z0_src.shape} does not match mix shape {z_mix.shape}")
    z_src = diffuse(z0_src, t, eps, schedule)
    z_tar = (z_mix - z0_src) + z_src
    return z_src, z_tar


def consistency_sample(
    denoiser: Denoiser,
    prompt: PromptCondition,
    grid: TimestepGrid,
    z_init: np.ndarray,
    rng_seed: int,
    schedule: NoiseSchedule,
) -> np.ndarray:
    """Multistep consistency sampling down a grid.

    Predicts the clean sample at each grid time and re-noises it to the next
    grid time with noise keyed by (rng_seed, step). The prediction at the last
    grid time is returned without re-noising.

    Args:
        denoiser: Clean-sample predictor
        prompt: Condition passed to every prediction
        grid: Descending timestep grid
        z_init: Latent at the first grid time
        rng_seed: Seed for the per-step noise
        schedule: Noise schedule

    Raises:
        ConfigError: If the grid is empty
    """
    if len(grid) == 0:
        raise ConfigError("Consistency sampling needs a non-empty grid")
    z = np.asarray(z_init, dtype=float)
    timesteps = grid.timesteps
    prediction = z
    noise = NoiseStream(rng_seed, z.shape)
    for index, t in enumerate(timesteps):
        prediction = denoiser.predict(z, t, prompt)
        if index == len(timesteps) - 1:
            break
        t_next = timesteps[index + 1]
        eps = noise.draw(index)
        z = diffuse(prediction, t_next, eps, schedule)
    return np.asarray(prediction, dtype=float)

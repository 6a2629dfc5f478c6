"""Deterministic DDIM inversion and denoising, the inversion-anchor baseline.

Noise estimates come from the same clean-sample denoiser used by the editor,
converted through the noise adapter, so comparisons isolate the sampler.
"""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import logging
import math
from typing import List, Optional, Sequence

import numpy as np

from .denoiser import Denoiser, noise_prediction
from .distributions import PromptCondition
from .errors import DegenerateTimestepError, NumericError, ShapeError
from .schedule import NoiseSchedule, TimestepGrid

logger = logging.getLogger(__name__)


def ddim_denoise_step(
    z_t: np.ndarray,
    t: float,
    t_next: float,
    eps_hat: np.ndarray,
    schedule: NoiseSchedule,
) -> np.ndarray:
    """Move z_t from time t to t_next along the deterministic DDIM update.

    Works in either direction; inversion calls it with t_next > t.

    Raises:
        DegenerateTimestepError: If either time sits on the alpha floor
        ShapeError: If the latent and noise estimate differ in shape
    """
    z_t = np.asarray(z_t, dtype=float)
    eps_hat = np.asarray(eps_hat, dtype=float)
    if z_t.shape != eps_hat.shape:
        raise ShapeError(f"Latent shape {z_t.shape} does not match noise shape {eps_hat.shape}")
    alpha_bar = schedule.alpha_bar(t)
    alpha_bar_next = schedule.alpha_bar(t_next)
    if min(alpha_bar, alpha_bar_next) <= schedule.alpha_floor:
        raise DegenerateTimestepError(f"DDIM step {t} -> {t_next} touches the clamped region")
    if t_next == t:
        return z_t.copy()
    clean = (z_t - math.sqrt(1.0 - alpha_bar) * eps_hat) / math.sqrt(alpha_bar)
    return math.sqrt(alpha_bar_next) * clean + math.sqrt(1.0 - alpha_bar_next) * eps_hat


def _run(
    denoiser: Denoiser,
    prompt: PromptCondition,
    z: np.ndarray,
    times: Sequence[float],
    schedule: NoiseSchedule,
) -> List[np.ndarray]:
    states = [np.array(z, dtype=float)]
    for t, t_next in zip(times, times[1:]):
        eps_hat = noise_prediction(denoiser, states[-1], t, prompt, schedule)
        nxt = ddim_denoise_step(states[-1], t, t_next, eps_hat, schedule)
        if not np.all(np.isfinite(nxt)):
            raise NumericError(f"Non-finite DDIM state at {t} -> {t_next}")
        states.append(nxt)
    return states


def ddim_invert(
    denoiser: Denoiser,
    prompt: PromptCondition,
    z0: np.ndarray,
    grid: TimestepGrid,
    schedule: NoiseSchedule,
    return_path: bool = False,
):
    """Invert a clean latent to the grid's first (largest) time.

    The run visits t = 0 and then the grid in ascending order.

    Returns:
        The inverted latent, or ``(latent, visited_states)`` with
        ``return_path``
    """
    times = [0.0] + list(reversed(grid.timesteps))
    states = _run(denoiser, prompt, z0, times, schedule)
    logger.debug("Inverted over %d steps", len(times) - 1)
    return (states[-1], states) if return_path else states[-1]


def ddim_denoise(
    denoiser: Denoiser,
    prompt: PromptCondition,
    z_T: np.ndarray,
    grid: TimestepGrid,
    schedule: NoiseSchedule,
    return_path: bool = False,
):
    """Denoise from the grid's first time down to t = 0."""
    times = list(grid.timesteps) + [0.0]
    states = _run(denoiser, prompt, z_T, times, schedule)
    return (states[-1], states) if return_path else states[-1]


def ddim_reconstruct(
    denoiser: Denoiser,
    prompt: PromptCondition,
    z0: np.ndarray,
    grid: TimestepGrid,
    schedule: NoiseSchedule,
    return_path: bool = False,
):
    """Invert then denoise under the same prompt."""
    return ddim_edit(denoiser, prompt, prompt, z0, grid, schedule, return_path)


def ddim_edit(
    denoiser: Denoiser,
    p_src: PromptCondition,
    p_tar: PromptCondition,
    z0_src: np.ndarray,
    grid: TimestepGrid,
    schedule: NoiseSchedule,
    return_path: bool = False,
    tar_denoiser: Optional[Denoiser] = None,
):
    """Invert under the source prompt, then denoise under the target prompt.

    ``tar_denoiser``, when given, replaces ``denoiser`` for the denoising half,
    so the two halves can carry different guidance scales.

    Returns:
        The edited latent, or ``(latent, visited_states)`` with ``return_path``;
        the visited states run from the source through the inversion anchor
        to the output.
    """
    anchor, forward = ddim_invert(denoiser, p_src, z0_src, grid, schedule, return_path=True)
    if tar_denoiser is None:
        tar_denoiser = denoiser
    output, backward = ddim_denoise(tar_denoiser, p_tar, anchor, grid, schedule, return_path=True)
    return (output, forward + backward[1:]) if return_path else output

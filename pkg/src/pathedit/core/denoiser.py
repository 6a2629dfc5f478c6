"""Clean-sample predictors.

A denoiser maps a noisy latent z_t, a time t and a prompt to an estimate of
the clean sample z_0. The analytic denoiser computes the exact posterior mean
under a registered Gaussian mixture; adapter denoisers wrap raw noise or
velocity predictors so they expose the same interface.
"""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import math
from abc import ABC, abstractmethod
from typing import Callable, Optional

import numpy as np

from .distributions import GaussianMixture, PromptCondition, flatten_latent, responsibilities
from .errors import ConfigError, DegenerateTimestepError, DomainError, NumericError, ShapeError
from .registry import DistributionRegistry
from .schedule import NoiseSchedule

NoiseFn = Callable[[np.ndarray, float, PromptCondition], np.ndarray]
VelocityFn = Callable[[np.ndarray, float, PromptCondition], np.ndarray]


class Denoiser(ABC):
    """Predicts z_0 from (z_t, t, prompt).

    Implementations must be pure: repeated calls with the same arguments
    return identical arrays, and no call mutates the denoiser.
    """

    @abstractmethod
    def predict(self, z: np.ndarray, t: float, prompt: PromptCondition) -> np.ndarray:
        """Estimate the clean sample behind ``z`` at time ``t``."""


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if np.shape(a) != np.shape(b):
        raise ShapeError(f"Shape mismatch: {np.shape(a)} vs {np.shape(b)}")


def gmm_posterior_mean(
    mixture: GaussianMixture,
    z: np.ndarray,
    t: float,
    schedule: NoiseSchedule,
) -> np.ndarray:
    """Exact E[z_0 | z_t = z] for z_0 drawn from a Gaussian mixture.

    Each component contributes mu_k + g (z - sqrt(a) mu_k) with
    g = sqrt(a) sigma^2 / (a sigma^2 + 1 - a), weighted by the log-space
    component posteriors. Because sigma is shared, the weighted sum collapses
    to mu_bar + g (z - sqrt(a) mu_bar).

    Args:
        mixture: Data distribution
        z: Noisy latent, vector or grid layout
        t: Time in [0, T]
        schedule: Noise schedule

    Returns:
        Prediction with the same shape as ``z``

    Raises:
        ShapeError: If ``z`` does not match the mixture dimension
        NumericError: If ``z`` is not finite
    """
    flat = flatten_latent(z, mixture)
    alpha_bar = schedule.alpha_bar(t)
    if alpha_bar == 1.0:
        return flat.reshape(np.shape(z)).copy()

    if mixture.n_components == 1:
        mean = mixture.means[0]
    else:
        mean = responsibilities(mixture, flat, alpha_bar) @ mixture.means
    sqrt_ab = math.sqrt(alpha_bar)
    variance = alpha_bar * mixture.component_sigma ** 2 + (1.0 - alpha_bar)
    gain = sqrt_ab * mixture.component_sigma ** 2 / variance
    return (mean + gain * (flat - sqrt_ab * mean)).reshape(np.shape(z))


class PosteriorMeanDenoiser(Denoiser):
    """Exact posterior-mean denoiser over a registry of mixtures."""

    def __init__(self, registry: DistributionRegistry, schedule: NoiseSchedule) -> None:
        self.registry = registry
        self.schedule = schedule

    def predict(self, z: np.ndarray, t: float, prompt: PromptCondition) -> np.ndarray:
        return gmm_posterior_mean(self.registry.resolve(prompt), z, t, self.schedule)


def clean_from_noise_pred(
    z: np.ndarray, t: float, eps_hat: np.ndarray, schedule: NoiseSchedule
) -> np.ndarray:
    """Convert a noise prediction to a clean prediction.

    Raises:
        DegenerateTimestepError: If alpha_bar(t) sits on the floor
    """
    _check_pair(z, eps_hat)
    alpha_bar = schedule.alpha_bar(t)
    if alpha_bar <= schedule.alpha_floor:
        raise DegenerateTimestepError(f"Cannot recover a clean prediction at clamped t={t}")
    return (np.asarray(z) - math.sqrt(1.0 - alpha_bar) * np.asarray(eps_hat)) / math.sqrt(alpha_bar)


def noise_from_clean_pred(
    z: np.ndarray, t: float, clean: np.ndarray, schedule: NoiseSchedule
) -> np.ndarray:
    """Convert a clean prediction to a noise prediction; zero at alpha_bar = 1."""
    _check_pair(z, clean)
    alpha_bar = schedule.alpha_bar(t)
    if alpha_bar == 1.0:
        return np.zeros(np.shape(z))
    return (np.asarray(z) - math.sqrt(alpha_bar) * np.asarray(clean)) / math.sqrt(1.0 - alpha_bar)


def _check_unit_time(t_unit: float) -> float:
    t_unit = float(t_unit)
    if not 0.0 <= t_unit <= 1.0:
        raise DomainError(f"Linear-path time {t_unit} outside [0, 1]")
    return t_unit


def clean_from_velocity_pred(z: np.ndarray, t_unit: float, v_hat: np.ndarray) -> np.ndarray:
    """Clean prediction z - t v for a linear-path velocity predictor."""
    _check_pair(z, v_hat)
    t_unit = _check_unit_time(t_unit)
    return np.asarray(z) - t_unit * np.asarray(v_hat)


def velocity_from_clean_pred(z: np.ndarray, t_unit: float, clean: np.ndarray) -> np.ndarray:
    _check_pair(z, clean)
    t_unit = _check_unit_time(t_unit)
    if t_unit == 0.0:
        raise DomainError("Velocity is undefined at linear-path time 0")
    return (np.asarray(z) - np.asarray(clean)) / t_unit


class NoisePredictionDenoiser(Denoiser):
    """Wraps an epsilon-predictor ``noise_fn(z, t, prompt)``."""

    def __init__(self, noise_fn: NoiseFn, schedule: NoiseSchedule) -> None:
        self.noise_fn = noise_fn
        self.schedule = schedule

    def predict(self, z: np.ndarray, t: float, prompt: PromptCondition) -> np.ndarray:
        return clean_from_noise_pred(z, t, self.noise_fn(z, t, prompt), self.schedule)


class VelocityPredictionDenoiser(Denoiser):
    """Wraps a velocity predictor ``velocity_fn(z, t_unit, prompt)``.

    Schedule time t maps to linear-path time t / T.
    """

    def __init__(self, velocity_fn: VelocityFn, horizon: int) -> None:
        if horizon <= 0:
            raise ConfigError(f"horizon must be positive, got {horizon}")
        self.velocity_fn = velocity_fn
        self.horizon = horizon

    def predict(self, z: np.ndarray, t: float, prompt: PromptCondition) -> np.ndarray:
        t_unit = float(t) / self.horizon
        return clean_from_velocity_pred(z, t_unit, self.velocity_fn(z, t_unit, prompt))


def guided_predict(
    denoiser: Denoiser,
    z: np.ndarray,
    t: float,
    cond: PromptCondition,
    uncond: Optional[PromptCondition],
    scale: float,
) -> np.ndarray:
    """Guidance blend uncond + scale (cond - uncond).

    Scale 1 returns the conditional prediction and scale 0 the unconditional
    one without blending arithmetic. With no unconditional prompt, guidance
    is inactive and the conditional prediction is returned.

    Raises:
        ConfigError: On a negative scale or an unresolvable prompt
    """
    if scale < 0:
        raise ConfigError(f"Guidance scale must be non-negative, got {scale}")
    if uncond is None or scale == 1.0:
        return denoiser.predict(z, t, cond)
    if scale == 0.0:
        return denoiser.predict(z, t, uncond)
    unconditional = denoiser.predict(z, t, uncond)
    conditional = denoiser.predict(z, t, cond)
    return unconditional + scale * (conditional - unconditional)


class GuidedDenoiser(Denoiser):
    """A denoiser with a fixed guidance blend applied to every prediction."""

    def __init__(self, inner: Denoiser, uncond: Optional[PromptCondition], scale: float) -> None:
        if scale < 0:
            raise ConfigError(f"Guidance scale must be non-negative, got {scale}")
        self.inner = inner
        self.uncond = uncond
        self.scale = scale

    def predict(self, z: np.ndarray, t: float, prompt: PromptCondition) -> np.ndarray:
        return guided_predict(self.inner, z, t, prompt, self.uncond, self.scale)


def noise_prediction(
    denoiser: Denoiser,
    z: np.ndarray,
    t: float,
    prompt: PromptCondition,
    schedule: NoiseSchedule,
) -> np.ndarray:
    """Epsilon estimate derived from a denoiser's clean prediction."""
    clean = denoiser.predict(z, t, prompt)
    eps = noise_from_clean_pred(z, t, clean, schedule)
    if not np.all(np.isfinite(eps)):
        raise NumericError(f"Non-finite noise estimate at t={t}")
    return eps

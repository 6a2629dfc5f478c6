"""Gaussian mixtures used as known data distributions.

Each mixture has isotropic components sharing one standard deviation, which
keeps both the diffused marginal and the posterior over components in closed
form. Template-set mixtures are the same object with ``grid_size`` set, so
samples and predictions carry a (G, G) layout.
"""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, NumericError, ShapeError


@dataclass(frozen=True)
class PromptCondition:
    """A prompt, standing in for text conditioning.

    Attributes:
        label: Prompt identifier as it appears in configs and traces
        distribution_ref: Name of the registered distribution it selects
    """

    label: str
    distribution_ref: str


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Isotropic Gaussian mixture with a shared component standard deviation.

    Attributes:
        weights: Component weights, positive and summing to 1
        means: Component means, shape (K, D)
        component_sigma: Shared isotropic standard deviation
        grid_size: Side length G when the mixture describes G x G grids
    """

    weights: np.ndarray
    means: np.ndarray
    component_sigma: float
    grid_size: Optional[int] = None
    log_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        weights = np.array(self.weights, dtype=float)
        means = np.array(self.means, dtype=float)
        if means.ndim == 1:
            means = means[np.newaxis, :]
        if weights.ndim != 1 or means.ndim != 2 or len(weights) != means.shape[0]:
            raise ShapeError(
                f"Mixture needs K weights and (K, D) means, got {weights.shape} and {means.shape}"
            )
        if means.shape[1] < 1:
            raise ShapeError("Mixture dimension must be at least 1")
        if np.any(weights <= 0) or abs(float(weights.sum()) - 1.0) > 1e-12:
            raise ConfigError(f"Mixture weights must be positive and sum to 1, got {weights.tolist()}")
        if not np.all(np.isfinite(means)):
            raise ConfigError("Mixture means must be finite")
        if not (self.component_sigma > 0 and math.isfinite(self.component_sigma)):
            raise ConfigError(f"component_sigma must be positive, got {self.component_sigma!r}")
        if self.grid_size is not None and self.grid_size ** 2 != means.shape[1]:
            raise ShapeError(f"Grid size {self.grid_size} does not match dimension {means.shape[1]}")
        weights.setflags(write=False)
        means.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "component_sigma", float(self.component_sigma))
        log_weights = np.log(weights)
        log_weights.setflags(write=False)
        object.__setattr__(self, "log_weights", log_weights)

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    @property
    def n_components(self) -> int:
        return int(self.means.shape[0])

    @property
    def sample_shape(self) -> tuple:
        if self.grid_size is None:
            return (self.dim,)
        return (self.grid_size, self.grid_size)


def flatten_latent(z: np.ndarray, mixture: GaussianMixture) -> np.ndarray:
    """Flatten a latent to a D-vector, checking it matches the mixture.

    Raises:
        ShapeError: On dimension mismatch
        NumericError: On non-finite entries
    """
    flat = np.asarray(z, dtype=float).reshape(-1)
    if flat.size != mixture.dim:
        raise ShapeError(f"Latent of size {flat.size} does not match mixture dimension {mixture.dim}")
    if not np.all(np.isfinite(flat)):
        raise NumericError("Latent contains non-finite values")
    return flat


def _log_terms(mixture: GaussianMixture, flat: np.ndarray, alpha_bar: float) -> np.ndarray:
    variance = alpha_bar * mixture.component_sigma ** 2 + (1.0 - alpha_bar)
    centred = flat[np.newaxis, :] - math.sqrt(alpha_bar) * mixture.means
    sq_dist = np.einsum("kd,kd->k", centred, centred)
    return (
        mixture.log_weights
        - 0.5 * sq_dist / variance
        - 0.5 * mixture.dim * math.log(2.0 * math.pi * variance)
    )


def log_component_terms(mixture: GaussianMixture, z: np.ndarray, alpha_bar: float) -> np.ndarray:
    """log w_k + log N(z; sqrt(alpha_bar) mu_k, (alpha_bar sigma^2 + 1 - alpha_bar) I)."""
    return _log_terms(mixture, flatten_latent(z, mixture), alpha_bar)


def log_responsibilities(mixture: GaussianMixture, z: np.ndarray, alpha_bar: float) -> np.ndarray:
    """Log posterior component probabilities of the diffused mixture at z."""
    flat = flatten_latent(z, mixture)
    if mixture.n_components == 1:
        return np.zeros(1)
    shifted = _log_terms(mixture, flat, alpha_bar)
    shifted -= shifted.max()
    return shifted - math.log(np.exp(shifted).sum())


def responsibilities(mixture: GaussianMixture, z: np.ndarray, alpha_bar: float) -> np.ndarray:
    return np.exp(log_responsibilities(mixture, z, alpha_bar))


def log_density(mixture: GaussianMixture, z: np.ndarray) -> float:
    """Log density of the clean mixture at z."""
    return float(logsumexp(log_component_terms(mixture, z, 1.0)))


def sample_mixture(mixture: GaussianMixture, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n samples, shaped (n, D) or (n, G, G) for grid mixtures."""
    if n < 0:
        raise ConfigError(f"Sample count must be non-negative, got {n}")
    components = rng.choice(mixture.n_components, size=n, p=mixture.weights)
    noise = rng.standard_normal((n, mixture.dim))
    samples = mixture.means[components] + mixture.component_sigma * noise
    return samples.reshape((n,) + mixture.sample_shape)


def make_mixture(
    means: Sequence[Sequence[float]],
    sigma: float,
    weights: Optional[Sequence[float]] = None,
    grid_size: Optional[int] = None,
) -> GaussianMixture:
    """Convenience constructor with uniform weights by default."""
    means = np.asarray(means, dtype=float)
    if means.ndim == 1:
        means = means[np.newaxis, :]
    if weights is None:
        weights = np.full(means.shape[0], 1.0 / means.shape[0])
    return GaussianMixture(np.asarray(weights, dtype=float), means, sigma, grid_size)

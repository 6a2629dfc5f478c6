"""Independent oracles for the editor's numerics.

The regularization gradient is checked against central finite differences of
the surrogate objective it is derived from, where the target prediction is
linearized around a frozen noise estimate so that its Jacobian with respect
to z_mix is I / sqrt(alpha_bar). The analytic denoiser is checked against a
self-normalized importance-sampling estimate of the posterior mean.
"""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Tuple

import numpy as np
from scipy.special import logsumexp

from ..config.settings import (
    ADAPTER_TOLERANCE,
    DEFAULT_FD_STEP,
    DEFAULT_GRADCHECK_STATES,
    DEFAULT_GRADCHECK_TOLERANCE,
    DEFAULT_MC_SAMPLES,
    DEFAULT_MC_TRIPLES,
    DEFAULT_TAYLOR_DELTA,
    MC_COVERAGE_REQUIRED,
    MC_COVERAGE_SIGMAS,
    MIN_EFFECTIVE_SAMPLES,
    MIN_MC_SAMPLES,
)
from .denoiser import (
    clean_from_noise_pred,
    clean_from_velocity_pred,
    gmm_posterior_mean,
    noise_from_clean_pred,
    velocity_from_clean_pred,
)
from .distributions import GaussianMixture, flatten_latent, make_mixture, sample_mixture
from .editor import reg_gradient_full
from .errors import ConfigError, NumericError, UnreliableEstimateError
from .forward import diffuse
from .schedule import NoiseSchedule

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GradCheckReport:
    max_rel_error: float
    per_coordinate_errors: np.ndarray
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


@dataclass(frozen=True, eq=False)
class FrozenState:
    """Quantities held fixed while the surrogate is differentiated in z_mix."""

    z0_src: np.ndarray
    z_src: np.ndarray
    eps_hat_tar: np.ndarray
    zhat0_src: np.ndarray


@dataclass(frozen=True)
class SuiteReport:
    """Outcome of one verification suite."""

    name: str
    passed: bool
    n_checked: int
    n_failed: int
    summary: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "n_checked": self.n_checked,
            "n_failed": self.n_failed,
            "summary": self.summary,
        }


def _linearized_target(frozen: FrozenState, z_mix: np.ndarray, t: float, schedule: NoiseSchedule):
    alpha_bar = schedule.alpha_bar(t)
    z_tar = z_mix - frozen.z0_src + frozen.z_src
    zhat0_tar = (z_tar - math.sqrt(1.0 - alpha_bar) * frozen.eps_hat_tar) / math.sqrt(alpha_bar)
    return z_tar, zhat0_tar


def surrogate_objective(
    z_mix: np.ndarray,
    frozen: FrozenState,
    t: float,
    gamma_t: float,
    schedule: NoiseSchedule,
    taylor_delta: float = DEFAULT_TAYLOR_DELTA,
) -> float:
    """gamma ||z_src - z_tar - c (zhat_src - f(z_tar))||^2 with c = delta adot / (2 sqrt(a)).

    Raises:
        DegenerateTimestepError: If alpha_bar(t) is clamped
    """
    alpha_bar_dot = schedule.alpha_bar_dot(t)
    coeff = taylor_delta * alpha_bar_dot / (2.0 * schedule.sqrt_alpha_bar(t))
    z_tar, zhat0_tar = _linearized_target(frozen, np.asarray(z_mix, dtype=float), t, schedule)
    residual = frozen.z_src - z_tar - coeff * (frozen.zhat0_src - zhat0_tar)
    return gamma_t * math.fsum((residual * residual).ravel())


def finite_diff_gradient(
    objective: Callable[[np.ndarray], float],
    z: np.ndarray,
    h: float = DEFAULT_FD_STEP,
) -> np.ndarray:
    """Central-difference gradient, one coordinate at a time.

    Raises:
        ConfigError: If h is not positive
        NumericError: If the objective returns a non-finite value
    """
    if not h > 0:
        raise ConfigError(f"Finite-difference step must be positive, got {h}")
    z = np.asarray(z, dtype=float)
    grad = np.empty(z.size)
    flat = z.reshape(-1)
    for i in range(flat.size):
        plus = flat.copy()
        minus = flat.copy()
        plus[i] += h
        minus[i] -= h
        f_plus = objective(plus.reshape(z.shape))
        f_minus = objective(minus.reshape(z.shape))
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise NumericError(f"Objective is not finite around coordinate {i}")
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad.reshape(z.shape)


def full_form_gamma_hat(
    gamma_t: float, t: float, schedule: NoiseSchedule, taylor_delta: float = DEFAULT_TAYLOR_DELTA
) -> float:
    """Weight that turns the surrogate's gradient into the path-gradient form: 2 gamma (-1 + kappa / sqrt(a))."""
    sqrt_ab = schedule.sqrt_alpha_bar(t)
    kappa = taylor_delta * schedule.alpha_bar_dot(t) / (2.0 * sqrt_ab)
    return 2.0 * gamma_t * (-1.0 + kappa / sqrt_ab)


def check_reg_gradient(
    z_mix: np.ndarray,
    frozen: FrozenState,
    t: float,
    gamma_t: float,
    schedule: NoiseSchedule,
    h: float = DEFAULT_FD_STEP,
    tolerance: float = DEFAULT_GRADCHECK_TOLERANCE,
    taylor_delta: float = DEFAULT_TAYLOR_DELTA,
) -> GradCheckReport:
    """Compare the full regularization gradient with finite differences of the surrogate."""
    z_mix = np.asarray(z_mix, dtype=float)
    z_tar, zhat0_tar = _linearized_target(frozen, z_mix, t, schedule)
    analytic = reg_gradient_full(
        frozen.z_src, z_tar, frozen.zhat0_src, zhat0_tar, t,
        full_form_gamma_hat(gamma_t, t, schedule, taylor_delta), schedule, taylor_delta,
    )
    numeric = finite_diff_gradient(
        lambda z: surrogate_objective(z, frozen, t, gamma_t, schedule, taylor_delta), z_mix, h
    )
    scale = max(float(np.max(np.abs(analytic))), np.finfo(float).tiny)
    per_coordinate = np.abs(numeric - analytic) / scale
    return GradCheckReport(float(np.max(per_coordinate)), per_coordinate, tolerance)


def mc_posterior_mean(
    mixture: GaussianMixture,
    z: np.ndarray,
    t: float,
    n_samples: int,
    seed: int,
    schedule: NoiseSchedule,
) -> Tuple[np.ndarray, np.ndarray]:
    """Importance-sampling estimate of E[z_0 | z_t = z] and its standard error.

    Samples z_0 from the mixture and weights each by N(z; sqrt(a) z_0, (1 - a) I).

    Raises:
        ConfigError: If fewer than the minimum number of samples is requested
        UnreliableEstimateError: If the effective sample size is too small
    """
    if n_samples < MIN_MC_SAMPLES:
        raise ConfigError(f"Monte-Carlo estimate needs at least {MIN_MC_SAMPLES} samples, got {n_samples}")
    flat = flatten_latent(z, mixture)
    alpha_bar = schedule.alpha_bar(t)
    if alpha_bar == 1.0:
        return flat.reshape(np.shape(z)).copy(), np.zeros(np.shape(z))

    rng = np.random.default_rng(seed)
    samples = sample_mixture(mixture, n_samples, rng).reshape(n_samples, mixture.dim)
    diff = flat[np.newaxis, :] - math.sqrt(alpha_bar) * samples
    log_w = -0.5 * np.einsum("nd,nd->n", diff, diff) / (1.0 - alpha_bar)
    weights = np.exp(log_w - logsumexp(log_w))
    ess = 1.0 / float(np.sum(weights ** 2))
    if ess < MIN_EFFECTIVE_SAMPLES:
        raise UnreliableEstimateError(f"Effective sample size {ess:.1f} below {MIN_EFFECTIVE_SAMPLES}")

    estimate = weights @ samples
    centred = samples - estimate
    std_error = np.sqrt((weights ** 2) @ (centred ** 2))
    return estimate.reshape(np.shape(z)), std_error.reshape(np.shape(z))


def gradient_suite(
    schedule: NoiseSchedule,
    n_states: int = DEFAULT_GRADCHECK_STATES,
    tolerance: float = DEFAULT_GRADCHECK_TOLERANCE,
    h: float = DEFAULT_FD_STEP,
    seed: int = 0,
) -> SuiteReport:
    """Gradient check on random states with alpha_bar in [0.1, 0.9]."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    failed = 0
    for _ in range(n_states):
        dim = int(rng.integers(2, 9))
        t = schedule.t_for_alpha_bar(float(rng.uniform(0.1, 0.9)))
        frozen = FrozenState(*(2.0 * rng.standard_normal(dim) for _ in range(4)))
        z_mix = 2.0 * rng.standard_normal(dim)
        report = check_reg_gradient(
            z_mix, frozen, t, float(rng.uniform(0.1, 2.0)), schedule, h, tolerance
        )
        worst = max(worst, report.max_rel_error)
        failed += int(not report.passed)
    logger.info("Gradient suite: %d/%d failed, worst relative error %.3e", failed, n_states, worst)
    return SuiteReport(
        "gradient", failed == 0, int(n_states), int(failed),
        f"max relative error {worst:.3e} (tolerance {tolerance:.0e})",
    )


def _random_mixture(rng: np.random.Generator, dim: int = 2) -> GaussianMixture:
    n_components = int(rng.integers(1, 4))
    means = rng.uniform(-3.0, 3.0, size=(n_components, dim))
    weights = rng.dirichlet(np.ones(n_components))
    return make_mixture(means, float(rng.uniform(0.5, 1.5)), weights)


def mc_coverage_suite(
    schedule: NoiseSchedule,
    n_triples: int = DEFAULT_MC_TRIPLES,
    n_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
    required: float = MC_COVERAGE_REQUIRED,
    sigmas: float = MC_COVERAGE_SIGMAS,
) -> SuiteReport:
    """Posterior mean versus importance sampling on random (mixture, z, t) triples."""
    rng = np.random.default_rng(seed)
    covered = 0
    for i in range(n_triples):
        mixture = _random_mixture(rng)
        z0 = sample_mixture(mixture, 1, rng)[0]
        t = schedule.t_for_alpha_bar(float(rng.uniform(0.1, 0.9)))
        z = diffuse(z0, t, rng.standard_normal(mixture.dim), schedule)
        exact = gmm_posterior_mean(mixture, z, t, schedule)
        try:
            estimate, std_error = mc_posterior_mean(mixture, z, t, n_samples, seed + i + 1, schedule)
        except UnreliableEstimateError as e:
            logger.warning("Triple %d skipped: %s", i, e)
            continue
        covered += bool(np.all(np.abs(estimate - exact) <= sigmas * std_error))
    ratio = covered / n_triples if n_triples else 1.0
    logger.info("Monte-Carlo coverage %d/%d", covered, n_triples)
    return SuiteReport(
        "mc_coverage", bool(ratio >= required), int(n_triples), int(n_triples - covered),
        f"{covered}/{n_triples} within {sigmas:g} standard errors (need {required:.0%})",
    )


def adapter_suite(
    schedule: NoiseSchedule,
    n_states: int = 1000,
    tolerance: float = ADAPTER_TOLERANCE,
    seed: int = 0,
) -> SuiteReport:
    """Round trips through the noise and velocity adapters."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    failed = 0
    for _ in range(n_states):
        z, clean, eps, velocity = (rng.standard_normal(4) for _ in range(4))
        t = schedule.t_for_alpha_bar(float(rng.uniform(1e-3, 0.999)))
        t_unit = float(rng.uniform(0.01, 1.0))
        errors = [
            clean_from_noise_pred(z, t, noise_from_clean_pred(z, t, clean, schedule), schedule) - clean,
            noise_from_clean_pred(z, t, clean_from_noise_pred(z, t, eps, schedule), schedule) - eps,
            clean_from_velocity_pred(z, t_unit, velocity_from_clean_pred(z, t_unit, clean)) - clean,
            velocity_from_clean_pred(z, t_unit, clean_from_velocity_pred(z, t_unit, velocity)) - velocity,
        ]
        error = max(float(np.max(np.abs(e))) for e in errors)
        worst = max(worst, error)
        failed += int(error > tolerance)
    return SuiteReport(
        "adapters", failed == 0, int(n_states), int(failed),
        f"max round-trip error {worst:.3e} (tolerance {tolerance:.0e})",
    )


def shared_noise_suite(
    schedule: NoiseSchedule,
    n_pairs: int = 1000,
    dim: int = 64,
    seed: int = 0,
    required: float = 0.95,
) -> SuiteReport:
    """Distance identity under shared noise and its failure under independent noise."""
    rng = np.random.default_rng(seed)
    identity_failures = 0
    broken = 0
    for _ in range(n_pairs):
        alpha_bar = float(rng.uniform(0.05, 0.5))
        t = schedule.t_for_alpha_bar(alpha_bar)
        sqrt_ab = schedule.sqrt_alpha_bar(t)
        z_a, z_b, eps, eps_other = (rng.standard_normal(dim) for _ in range(4))
        expected = sqrt_ab * np.linalg.norm(z_a - z_b)
        shared = np.linalg.norm(diffuse(z_a, t, eps, schedule) - diffuse(z_b, t, eps, schedule))
        identity_failures += int(abs(shared - expected) > 1e-12 * expected)
        independent = np.linalg.norm(diffuse(z_a, t, eps, schedule) - diffuse(z_b, t, eps_other, schedule))
        broken += int(independent > expected)
    ratio = broken / n_pairs if n_pairs else 1.0
    return SuiteReport(
        "shared_noise", identity_failures == 0 and ratio >= required, int(n_pairs), identity_failures,
        f"identity failures {identity_failures}; independent noise breaks it in {ratio:.1%}",
    )

"""Shared fixtures for the PathEdit test suite."""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

from typing import Dict

import numpy as np
import pytest

from pathedit.core.denoiser import Denoiser, PosteriorMeanDenoiser
from pathedit.core.distributions import PromptCondition
from pathedit.core.registry import load_registry
from pathedit.core.schedule import NoiseSchedule, make_timestep_grid
from pathedit.utils.paths import get_data_file_path


class FixedDenoiser(Denoiser):
    """Returns a fixed prediction per prompt label, whatever the input."""

    def __init__(self, predictions: Dict[str, np.ndarray]) -> None:
        self.predictions = {k: np.asarray(v, dtype=float) for k, v in predictions.items()}

    def predict(self, z, t, prompt):
        return self.predictions[prompt.label].copy()


class BroadPriorDenoiser(Denoiser):
    """Posterior mean under an infinitely broad prior: z / sqrt(alpha_bar)."""

    def __init__(self, schedule: NoiseSchedule) -> None:
        self.schedule = schedule

    def predict(self, z, t, prompt):
        return np.asarray(z, dtype=float) / self.schedule.sqrt_alpha_bar(t)


@pytest.fixture
def schedule():
    return NoiseSchedule()


@pytest.fixture
def linear_schedule():
    return NoiseSchedule(kind="scaled_linear")


@pytest.fixture
def grid(schedule):
    return make_timestep_grid(schedule)


@pytest.fixture
def registry():
    return load_registry(get_data_file_path("distributions.json"))


@pytest.fixture
def denoiser(registry, schedule):
    return PosteriorMeanDenoiser(registry, schedule)


@pytest.fixture
def prompts(registry):
    return registry.prompt("source"), registry.prompt("target")


@pytest.fixture
def stub_prompts():
    return PromptCondition("a", "a"), PromptCondition("b", "b")


def time_for(schedule: NoiseSchedule, alpha_bar: float) -> float:
    """Time at which the schedule reaches ``alpha_bar``."""
    return schedule.t_for_alpha_bar(alpha_bar)

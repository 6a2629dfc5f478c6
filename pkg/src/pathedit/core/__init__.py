"""Core functionality package for PathEdit."""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

from .schedule import NoiseSchedule, TimestepGrid, make_timestep_grid
from .distributions import GaussianMixture, PromptCondition, make_mixture
from .registry import DistributionRegistry, load_registry
from .denoiser import Denoiser, PosteriorMeanDenoiser, gmm_posterior_mean
from .editor import EditConfig, GuidanceConfig, RegSchedule, Trajectory, direct_path_edit

__all__ = [
    'NoiseSchedule',
    'TimestepGrid',
    'make_timestep_grid',
    'GaussianMixture',
    'PromptCondition',
    'make_mixture',
    'DistributionRegistry',
    'load_registry',
    'Denoiser',
    'PosteriorMeanDenoiser',
    'gmm_posterior_mean',
    'EditConfig',
    'GuidanceConfig',
    'RegSchedule',
    'Trajectory',
    'direct_path_edit'
]

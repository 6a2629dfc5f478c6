"""Synthetic editing benchmark: sources drawn from one distribution, edited towards another."""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from .distributions import PromptCondition, sample_mixture
from .errors import ConfigError
from .registry import DistributionRegistry

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BenchmarkInstance:
    """One edit task with its own noise seed."""

    instance_id: int
    z0_src: np.ndarray
    p_src: PromptCondition
    p_tar: PromptCondition
    seed: int


def make_instance(
    instance_id: int,
    src_distribution: str,
    tar_distribution: str,
    seed: int,
    registry: DistributionRegistry,
) -> BenchmarkInstance:
    """Build instance ``instance_id`` of the benchmark for ``seed``.

    The source sample and the edit seed come from independent children of
    ``SeedSequence([seed, instance_id])``, so an instance does not depend on
    how many others are generated.
    """
    source = registry.get(src_distribution)
    target = registry.get(tar_distribution)
    if source.sample_shape != target.sample_shape:
        raise ConfigError(
            f"Distributions '{src_distribution}' {source.sample_shape} and "
            f"'{tar_distribution}' {target.sample_shape} have different layouts"
        )
    sample_seq, noise_seq = np.random.SeedSequence([seed, instance_id]).spawn(2)
    z0 = sample_mixture(source, 1, np.random.default_rng(sample_seq))[0]
    z0.setflags(write=False)
    return BenchmarkInstance(
        instance_id=instance_id,
        z0_src=z0,
        p_src=registry.prompt(src_distribution),
        p_tar=registry.prompt(tar_distribution),
        seed=int(noise_seq.generate_state(1)[0]),
    )


def make_benchmark(
    n_instances: int,
    src_distribution: str,
    tar_distribution: str,
    seed: int,
    registry: DistributionRegistry,
) -> List[BenchmarkInstance]:
    """Sample benchmark instances deterministically from ``seed``.

    Raises:
        ConfigError: If a distribution is unknown, the two have different
            layouts, or ``n_instances`` is negative
    """
    if n_instances < 0:
        raise ConfigError(f"benchmark.n_instances must be non-negative, got {n_instances}")
    registry.get(src_distribution)
    registry.get(tar_distribution)
    instances = [
        make_instance(i, src_distribution, tar_distribution, seed, registry)
        for i in range(n_instances)
    ]
    logger.info("Generated %d benchmark instances (%s -> %s)", n_instances, src_distribution, tar_distribution)
    return instances

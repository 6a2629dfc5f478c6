"""Named data distributions that prompts select.

The registry file is JSON with a list of entries:

    {"name": "source", "kind": "gmm", "weights": [1.0],
     "means": [[-10.0, 0.0]], "sigma": 4.0}

    {"name": "blob_left", "kind": "templates", "grid_size": 16, "sigma": 0.05,
     "templates": [[{"center": [8, 4], "amplitude": 1.0, "width": 2.0}]]}

Template entries are rendered onto a G x G grid at load time and become
mixture means; ``weights`` is optional for both kinds and defaults to uniform.
"""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional

import numpy as np

from .distributions import GaussianMixture, PromptCondition, make_mixture
from .errors import ConfigError

logger = logging.getLogger(__name__)


def render_blobs(blobs: Iterable[Mapping[str, Any]], grid_size: int) -> np.ndarray:
    """Render isotropic Gaussian blobs onto a G x G grid.

    Args:
        blobs: Entries with ``center`` ([row, col]), ``amplitude`` and ``width``
        grid_size: Side length G

    Returns:
        Array of shape (G, G)
    """
    if grid_size < 1:
        raise ConfigError(f"grid_size must be positive, got {grid_size}")
    rows, cols = np.mgrid[0:grid_size, 0:grid_size].astype(float)
    image = np.zeros((grid_size, grid_size))
    for blob in blobs:
        try:
            row, col = (float(c) for c in blob["center"])
            amplitude = float(blob["amplitude"])
            width = float(blob["width"])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Malformed blob entry {blob!r}: {e}") from e
        if width <= 0:
            raise ConfigError(f"Blob width must be positive, got {width}")
        image += amplitude * np.exp(-((rows - row) ** 2 + (cols - col) ** 2) / (2.0 * width ** 2))
    return image


class DistributionRegistry:
    """Lookup table from distribution names to mixtures."""

    def __init__(self, distributions: Optional[Mapping[str, GaussianMixture]] = None) -> None:
        self._distributions: Dict[str, GaussianMixture] = dict(distributions or {})

    def register(self, name: str, mixture: GaussianMixture) -> None:
        if name in self._distributions:
            raise ConfigError(f"Distribution '{name}' is registered twice")
        self._distributions[name] = mixture

    @property
    def names(self) -> List[str]:
        return sorted(self._distributions)

    def __contains__(self, name: object) -> bool:
        return name in self._distributions

    def get(self, name: str) -> GaussianMixture:
        try:
            return self._distributions[name]
        except KeyError:
            raise ConfigError(
                f"Unknown distribution '{name}'; registered: {', '.join(self.names) or 'none'}"
            ) from None

    def resolve(self, prompt: PromptCondition) -> GaussianMixture:
        """Return the distribution a prompt selects.

        Raises:
            ConfigError: If the prompt references an unregistered distribution
        """
        return self.get(prompt.distribution_ref)

    def prompt(self, name: str, label: Optional[str] = None) -> PromptCondition:
        """Build a prompt for a registered distribution."""
        self.get(name)
        return PromptCondition(label=label or name, distribution_ref=name)


def _parse_entry(entry: Mapping[str, Any]) -> GaussianMixture:
    kind = entry.get("kind", "gmm")
    sigma = entry.get("sigma")
    if sigma is None:
        raise ConfigError(f"Distribution '{entry.get('name')}' is missing 'sigma'")
    weights = entry.get("weights")

    if kind == "gmm":
        if "means" not in entry:
            raise ConfigError(f"Distribution '{entry.get('name')}' is missing 'means'")
        return make_mixture(entry["means"], float(sigma), weights)

    if kind == "templates":
        grid_size = int(entry.get("grid_size", 0))
        templates = entry.get("templates")
        if not templates:
            raise ConfigError(f"Template distribution '{entry.get('name')}' has no templates")
        means = [render_blobs(blobs, grid_size).reshape(-1) for blobs in templates]
        return make_mixture(means, float(sigma), weights, grid_size=grid_size)

    raise ConfigError(f"Unknown distribution kind '{kind}'")


def registry_from_dict(data: Mapping[str, Any]) -> DistributionRegistry:
    entries = data.get("distributions")
    if not isinstance(entries, list):
        raise ConfigError("Registry must contain a 'distributions' list")
    registry = DistributionRegistry()
    for entry in entries:
        name = entry.get("name")
        if not name:
            raise ConfigError(f"Registry entry without a name: {entry!r}")
        registry.register(name, _parse_entry(entry))
    return registry


def load_registry(path: Path) -> DistributionRegistry:
    """Load a distribution registry from a JSON file.

    Raises:
        ConfigError: If the file is missing, not valid JSON or malformed
    """
    path = Path(path)
    try:
        with path.open("r") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Registry file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"Registry file {path} is not valid JSON: {e}") from None
    registry = registry_from_dict(data)
    logger.info("Loaded %d distributions from %s", len(registry.names), path)
    return registry

"""Consistency and alignment metrics for edits."""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import math
from dataclasses import dataclass
from typing import Any, Dict, Iterable, Optional

import numpy as np
from skimage.metrics import mean_squared_error, peak_signal_noise_ratio, structural_similarity

from ..config.settings import DEFAULT_DYNAMIC_RANGE, SSIM_K1, SSIM_K2, SSIM_WINDOW
from .distributions import GaussianMixture, log_density
from .errors import ConfigError, LayoutError, NumericError, ShapeError


def _pair(a: np.ndarray, b: np.ndarray):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"Cannot compare shapes {a.shape} and {b.shape}")
    return a, b


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared difference over all coordinates."""
    a, b = _pair(a, b)
    return float(mean_squared_error(a, b))


def psnr(a: np.ndarray, b: np.ndarray, dynamic_range: float = DEFAULT_DYNAMIC_RANGE) -> float:
    """Peak signal-to-noise ratio in dB; ``math.inf`` for identical inputs."""
    if dynamic_range <= 0:
        raise ConfigError(f"dynamic_range must be positive, got {dynamic_range}")
    a, b = _pair(a, b)
    if mean_squared_error(a, b) == 0.0:
        return math.inf
    return float(peak_signal_noise_ratio(a, b, data_range=dynamic_range))


def ssim(a: np.ndarray, b: np.ndarray, dynamic_range: float = DEFAULT_DYNAMIC_RANGE) -> float:
    """Single-scale SSIM with a uniform 7x7 window over valid positions.

    Raises:
        LayoutError: If the inputs are not 2-D grids
        ShapeError: If the grids differ or are smaller than the window
    """
    if dynamic_range <= 0:
        raise ConfigError(f"dynamic_range must be positive, got {dynamic_range}")
    a, b = _pair(a, b)
    if a.ndim != 2:
        raise LayoutError(f"SSIM needs grid-layout latents, got shape {a.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ShapeError(f"Grid {a.shape} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    return float(structural_similarity(
        a, b,
        win_size=SSIM_WINDOW,
        data_range=dynamic_range,
        gaussian_weights=False,
        use_sample_covariance=True,
        K1=SSIM_K1,
        K2=SSIM_K2,
    ))


def polyline_length(points: Iterable[np.ndarray]) -> float:
    """Sum of Euclidean distances between consecutive points."""
    points = [np.asarray(p, dtype=float).reshape(-1) for p in points]
    return float(sum(np.linalg.norm(b - a) for a, b in zip(points, points[1:])))


def path_length(trajectory) -> float:
    """Total distance travelled by z_mix over an edit.

    Raises:
        NumericError: If the trajectory has no steps
    """
    if not trajectory.steps:
        raise NumericError("Cannot measure an empty trajectory")
    return float(sum(
        np.linalg.norm(np.asarray(s.z_mix_after - s.z_mix_before).reshape(-1))
        for s in trajectory.steps
    ))


def target_nll(z: np.ndarray, target: GaussianMixture) -> float:
    """Negative log-likelihood of z under the clean target mixture."""
    return -log_density(target, z)


@dataclass(frozen=True)
class MetricReport:
    """Metrics for one edit.

    ``psnr_db`` is ``math.inf`` when the inputs are identical; ``ssim`` is
    None for vector-layout latents.
    """

    mse: float
    psnr_db: float
    ssim: Optional[float]
    path_length: float
    target_nll: float

    def __post_init__(self) -> None:
        if self.mse < 0 or self.path_length < 0:
            raise NumericError(f"Negative metric in report: mse={self.mse}, path_length={self.path_length}")
        if (self.mse == 0.0) != math.isinf(self.psnr_db):
            raise NumericError(f"PSNR {self.psnr_db} inconsistent with MSE {self.mse}")
        if self.mse == 0.0 and self.ssim is not None and self.ssim != 1.0:
            raise NumericError(f"SSIM {self.ssim} on identical inputs")

    def to_dict(self) -> Dict[str, Any]:
        infinite = math.isinf(self.psnr_db)
        return {
            "mse": self.mse,
            "psnr_db": None if infinite else self.psnr_db,
            "psnr_infinite": infinite,
            "ssim": self.ssim,
            "path_length": self.path_length,
            "target_nll": self.target_nll,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MetricReport":
        try:
            psnr_db = math.inf if data["psnr_infinite"] else float(data["psnr_db"])
            ssim_value = data["ssim"]
            return cls(
                mse=float(data["mse"]),
                psnr_db=psnr_db,
                ssim=None if ssim_value is None else float(ssim_value),
                path_length=float(data["path_length"]),
                target_nll=float(data["target_nll"]),
            )
        except (KeyError, TypeError) as e:
            raise ConfigError(f"Malformed metric report: {e}") from e


def evaluate_edit(
    source: np.ndarray,
    output: np.ndarray,
    target: GaussianMixture,
    path_len: float,
    dynamic_range: float = DEFAULT_DYNAMIC_RANGE,
) -> MetricReport:
    """Score an edit's output against its source and the target distribution."""
    source, output = _pair(source, output)
    error = mse(source, output)
    structural = None
    if source.ndim == 2:
        structural = 1.0 if error == 0.0 else ssim(source, output, dynamic_range)
    return MetricReport(
        mse=error,
        psnr_db=psnr(source, output, dynamic_range),
        ssim=structural,
        path_length=float(path_len),
        target_nll=target_nll(output, target),
    )

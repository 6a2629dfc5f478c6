"""Figure writers: SVG for 2-D trajectories, binary PGM for grid latents."""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.editor import Trajectory
from ..core.errors import ConfigError, LayoutError

SVG_SIZE = 480
SVG_MARGIN = 24
PGM_MAXVAL = 65535

COLORS = {
    "path": "#1f77b4",
    "source": "#2ca02c",
    "output": "#d62728",
    "z_src": "#7f7f7f",
    "z_tar": "#ff7f0e",
}


def _fmt(value: float) -> str:
    return f"{value:.3f}"


def _trajectory_points(trajectory: Trajectory) -> List[np.ndarray]:
    if np.shape(trajectory.source) != (2,):
        raise LayoutError(f"Trajectory plots need 2-D vector latents, got {np.shape(trajectory.source)}")
    path = [np.asarray(s.z_mix_before, dtype=float) for s in trajectory.steps]
    path.append(np.asarray(trajectory.output, dtype=float))
    return path


def render_trajectory_svg(trajectory: Trajectory, title: Optional[str] = None) -> str:
    """Render the z_mix path of a 2-D edit with its per-step noisy latents.

    A path that never leaves the source is drawn as a single point marker.

    Raises:
        LayoutError: If the latents are not 2-D vectors
    """
    path = _trajectory_points(trajectory)
    noisy = [(np.asarray(s.z_src), np.asarray(s.z_tar)) for s in trajectory.steps]
    everything = np.vstack(path + [p for pair in noisy for p in pair])
    lo = everything.min(axis=0)
    hi = everything.max(axis=0)
    span = float(max(np.max(hi - lo), 1e-12))
    scale = (SVG_SIZE - 2 * SVG_MARGIN) / span

    def to_canvas(point: np.ndarray) -> Tuple[str, str]:
        x = SVG_MARGIN + (point[0] - lo[0]) * scale
        y = SVG_SIZE - SVG_MARGIN - (point[1] - lo[1]) * scale
        return _fmt(x), _fmt(y)

    def marker(point: np.ndarray, color: str, radius: float, css: str) -> str:
        x, y = to_canvas(point)
        return f'<circle class="{css}" cx="{x}" cy="{y}" r="{radius}" fill="{color}"/>'

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_SIZE}" height="{SVG_SIZE}" '
        f'viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">',
        f'<rect width="{SVG_SIZE}" height="{SVG_SIZE}" fill="white"/>',
    ]
    if title:
        lines.append(f'<text x="{SVG_MARGIN}" y="{SVG_MARGIN - 8}" font-size="12">{title}</text>')
    for z_src, z_tar in noisy:
        lines.append(marker(z_src, COLORS["z_src"], 2.5, "z-src"))
        lines.append(marker(z_tar, COLORS["z_tar"], 2.5, "z-tar"))

    degenerate = all(np.array_equal(p, path[0]) for p in path)
    if degenerate:
        lines.append(marker(path[0], COLORS["path"], 4, "path-point"))
    else:
        coords = " ".join(",".join(to_canvas(p)) for p in path)
        lines.append(
            f'<polyline class="path" points="{coords}" fill="none" '
            f'stroke="{COLORS["path"]}" stroke-width="1.5"/>'
        )
    lines.append(marker(path[0], COLORS["source"], 5, "source"))
    lines.append(marker(path[-1], COLORS["output"], 5, "output"))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def encode_pgm(grid: np.ndarray, value_range: Optional[Sequence[float]] = None) -> bytes:
    """Encode a 2-D latent as a binary 16-bit PGM, rows top to bottom.

    Values are mapped linearly from ``value_range`` (the grid's own range by
    default) to 0..65535 and clipped.

    Raises:
        LayoutError: If the latent is not 2-D
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 2:
        raise LayoutError(f"PGM output needs a 2-D grid, got shape {grid.shape}")
    lo, hi = value_range if value_range is not None else (float(grid.min()), float(grid.max()))
    if hi < lo:
        raise ConfigError(f"Invalid PGM value range ({lo}, {hi})")
    if hi == lo:
        levels = np.zeros(grid.shape)
    else:
        levels = np.clip(np.rint((grid - lo) / (hi - lo) * PGM_MAXVAL), 0, PGM_MAXVAL)
    height, width = grid.shape
    header = f"P5\n{width} {height}\n{PGM_MAXVAL}\n".encode("ascii")
    return header + levels.astype(">u2").tobytes(order="C")

"""Continuous noise schedules and timestep grids.

A schedule maps continuous time t in [0, T] to the signal level alpha_bar(t),
with alpha_bar(0) = 1 and alpha_bar decreasing towards 0 at the horizon. The
value is clamped from below at ``alpha_floor`` so every quantity evaluated on
a grid stays finite.

Two kinds are supported:
    - ``cosine``: alpha_bar(t) = cos^2(pi t / 2T), closed-form derivative.
    - ``scaled_linear``: the continuous product form of a linear beta ramp,
      alpha_bar(t) = exp(integral_0^t log(1 - beta(tau)) dtau), with a
      central finite-difference derivative.
"""

# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at http://mozilla.org/MPL/2.0/.

import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Tuple

import numpy as np
from scipy.optimize import brentq

from ..config.settings import (
    DEFAULT_ALPHA_FLOOR,
    DEFAULT_HORIZON,
    DEFAULT_N_STEPS,
    DEFAULT_SCHEDULE_KIND,
    DEFAULT_SPACING,
    DEFAULT_T_MAX_FRACTION,
    FD_DERIVATIVE_FRACTION,
    GRID_SPACINGS,
    MAX_GRID_STEPS,
    MIN_GRID_STEPS,
    SCALED_LINEAR_BETA_RANGE,
    SCHEDULE_KINDS,
)
from .errors import ConfigError, DegenerateTimestepError, DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseSchedule:
    """Signal level alpha_bar(t) over continuous time.

    Attributes:
        kind: ``cosine`` or ``scaled_linear``
        horizon: Number of discrete timesteps T; time runs over [0, T]
        alpha_floor: Lower clamp for alpha_bar
    """

    kind: str = DEFAULT_SCHEDULE_KIND
    horizon: int = DEFAULT_HORIZON
    alpha_floor: float = DEFAULT_ALPHA_FLOOR

    def __post_init__(self) -> None:
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"Unknown schedule kind '{self.kind}', expected one of {SCHEDULE_KINDS}")
        if isinstance(self.horizon, bool) or not isinstance(self.horizon, int) or self.horizon <= 0:
            raise ConfigError(f"schedule.T must be a positive integer, got {self.horizon!r}")
        if not 0.0 < self.alpha_floor < 1.0:
            raise ConfigError(f"schedule.alpha_floor must lie in (0, 1), got {self.alpha_floor!r}")

    def _check_time(self, t: float) -> float:
        t = float(t)
        if not 0.0 <= t <= self.horizon:
            raise DomainError(f"Time {t} outside [0, {self.horizon}]")
        return t

    def _unclamped(self, t: float) -> float:
        if self.kind == "cosine":
            return math.cos(math.pi * t / (2.0 * self.horizon)) ** 2

        beta_start, beta_end = SCALED_LINEAR_BETA_RANGE
        rate = (beta_end - beta_start) / self.horizon
        u_start = 1.0 - beta_start
        u_t = u_start - rate * t

        def antiderivative(u: float) -> float:
            return u * math.log(u) - u

        return math.exp((antiderivative(u_start) - antiderivative(u_t)) / rate)

    def alpha_bar(self, t: float) -> float:
        """Clamped signal level at time t.

        Raises:
            DomainError: If t lies outside [0, T]
        """
        t = self._check_time(t)
        if t == 0.0:
            return 1.0
        return max(self.alpha_floor, self._unclamped(t))

    def sqrt_alpha_bar(self, t: float) -> float:
        return math.sqrt(self.alpha_bar(t))

    def alpha_bar_dot(self, t: float) -> float:
        """Time derivative of alpha_bar.

        Raises:
            DomainError: If t lies outside [0, T]
            DegenerateTimestepError: If alpha_bar(t) sits on the floor
        """
        t = self._check_time(t)
        if self.alpha_bar(t) <= self.alpha_floor:
            raise DegenerateTimestepError(
                f"alpha_bar({t}) is clamped at {self.alpha_floor}; derivative undefined"
            )
        if self.kind == "cosine":
            return -(math.pi / (2.0 * self.horizon)) * math.sin(math.pi * t / self.horizon)

        h = self.horizon * FD_DERIVATIVE_FRACTION
        lo = max(0.0, t - h)
        hi = min(float(self.horizon), t + h)
        return (self.alpha_bar(hi) - self.alpha_bar(lo)) / (hi - lo)

    def sigma(self, t: float) -> float:
        """Noise scale sqrt(1 - alpha_bar(t)), matching the forward process."""
        return math.sqrt(1.0 - self.alpha_bar(t))

    def t_for_alpha_bar(self, alpha_bar: float) -> float:
        """Invert the schedule: the time at which alpha_bar takes a given value.

        Raises:
            DomainError: If the value lies outside [alpha_bar(T), 1]
        """
        alpha_bar = float(alpha_bar)
        terminal = self.alpha_bar(self.horizon)
        if not terminal <= alpha_bar <= 1.0:
            raise DomainError(f"alpha_bar {alpha_bar} outside [{terminal}, 1]")
        if alpha_bar == 1.0:
            return 0.0
        if alpha_bar == terminal:
            return float(self.horizon)
        if self.kind == "cosine":
            return 2.0 * self.horizon / math.pi * math.acos(math.sqrt(alpha_bar))
        return brentq(lambda t: self.alpha_bar(t) - alpha_bar, 0.0, float(self.horizon), xtol=1e-13)


@dataclass(frozen=True)
class TimestepGrid:
    """Strictly descending evaluation times with their per-step gaps.

    ``strides[i]`` is the gap from ``timesteps[i]`` to the next evaluation
    time; the last stride runs to t = 0, where the final update lands.
    """

    timesteps: Tuple[float, ...]
    strides: Tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        ts = tuple(float(t) for t in self.timesteps)
        object.__setattr__(self, "timesteps", ts)
        if not MIN_GRID_STEPS <= len(ts) <= MAX_GRID_STEPS:
            raise ConfigError(
                f"Grid length must lie in [{MIN_GRID_STEPS}, {MAX_GRID_STEPS}], got {len(ts)}"
            )
        if any(not math.isfinite(t) for t in ts):
            raise ConfigError("Grid timesteps must be finite")
        if any(a <= b for a, b in zip(ts, ts[1:])):
            raise ConfigError(f"Grid timesteps must be strictly descending: {ts}")
        if ts[-1] <= 0.0:
            raise ConfigError("Last grid timestep must be positive")
        strides = tuple(a - b for a, b in zip(ts, ts[1:] + (0.0,)))
        if self.strides and tuple(float(s) for s in self.strides) != strides:
            raise ConfigError("Grid strides do not match the timesteps")
        object.__setattr__(self, "strides", strides)

    def __len__(self) -> int:
        return len(self.timesteps)

    def __iter__(self) -> Iterator[float]:
        return iter(self.timesteps)

    def steps(self) -> Iterator[Tuple[int, float, float]]:
        """Yield ``(index, t, t_next)`` with ``t_next = 0`` after the last point."""
        nexts = self.timesteps[1:] + (0.0,)
        for index, (t, t_next) in enumerate(zip(self.timesteps, nexts)):
            yield index, t, t_next


def make_timestep_grid(
    schedule: NoiseSchedule,
    n_steps: int = DEFAULT_N_STEPS,
    t_max_fraction: float = DEFAULT_T_MAX_FRACTION,
    spacing: str = DEFAULT_SPACING,
) -> TimestepGrid:
    """Build a descending grid from ``t_max_fraction * T`` down to ``T / n_steps``.

    Args:
        schedule: Schedule the grid is built for
        n_steps: Number of evaluation times
        t_max_fraction: Fraction of the horizon where the grid starts
        spacing: ``uniform_t`` (even in t) or ``uniform_sqrt_alpha`` (even in
            sqrt(alpha_bar))

    Raises:
        ConfigError: On invalid parameters
    """
    if isinstance(n_steps, bool) or not isinstance(n_steps, int) or n_steps < MIN_GRID_STEPS:
        raise ConfigError(f"grid.n_steps must be an integer >= {MIN_GRID_STEPS}, got {n_steps!r}")
    if not 0.0 < t_max_fraction <= 1.0:
        raise ConfigError(f"grid.t_max_fraction must lie in (0, 1], got {t_max_fraction!r}")
    if spacing not in GRID_SPACINGS:
        raise ConfigError(f"Unknown grid spacing '{spacing}', expected one of {GRID_SPACINGS}")

    t_hi = t_max_fraction * schedule.horizon
    t_lo = schedule.horizon / n_steps
    if t_hi <= t_lo:
        raise ConfigError(
            f"Grid start {t_hi} must exceed its end {t_lo}; raise t_max_fraction or n_steps"
        )

    if spacing == "uniform_t":
        timesteps = np.linspace(t_hi, t_lo, n_steps)
    else:
        levels = np.linspace(schedule.sqrt_alpha_bar(t_hi), schedule.sqrt_alpha_bar(t_lo), n_steps)
        timesteps = np.empty(n_steps)
        timesteps[0], timesteps[-1] = t_hi, t_lo
        for i in range(1, n_steps - 1):
            timesteps[i] = schedule.t_for_alpha_bar(float(levels[i]) ** 2)

    grid = TimestepGrid(tuple(float(t) for t in timesteps))
    logger.debug("Built %s grid with %d steps: %s", spacing, n_steps, grid.timesteps)
    return grid

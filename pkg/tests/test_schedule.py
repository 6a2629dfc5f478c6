"""Tests for noise schedules and timestep grids."""

import math

import numpy as np
import pytest

from pathedit.core.errors import ConfigError, DegenerateTimestepError, DomainError
from pathedit.core.schedule import NoiseSchedule, TimestepGrid, make_timestep_grid


def test_cosine_boundaries(schedule):
    assert schedule.alpha_bar(0) == 1.0
    assert schedule.alpha_bar(schedule.horizon) == schedule.alpha_floor
    assert schedule.sigma(0) == 0.0


def test_alpha_bar_is_decreasing(schedule, linear_schedule):
    for s in (schedule, linear_schedule):
        values = [s.alpha_bar(t) for t in np.linspace(0, s.horizon, 101)]
        assert all(a >= b for a, b in zip(values, values[1:]))
        assert values[0] == 1.0


@pytest.mark.parametrize("t", [-1.0, 1000.5])
def test_time_outside_horizon(schedule, t):
    with pytest.raises(DomainError):
        schedule.alpha_bar(t)


def test_sigma_matches_alpha_bar(schedule):
    for t in (10.0, 250.0, 700.0):
        assert schedule.sigma(t) ** 2 + schedule.alpha_bar(t) == pytest.approx(1.0, abs=1e-15)


def test_scaled_linear_matches_discrete_product(linear_schedule):
    betas = np.linspace(1e-4, 2e-2, 1000)
    discrete = float(np.prod(1.0 - betas))
    terminal = linear_schedule.alpha_bar(1000)
    assert terminal == pytest.approx(discrete, rel=0.05)
    assert linear_schedule.alpha_floor < terminal < 1e-4


def test_cosine_derivative(schedule):
    assert schedule.alpha_bar_dot(500) == pytest.approx(-math.pi / 2000, rel=1e-12)
    h = 1e-3
    fd = (schedule.alpha_bar(300 + h) - schedule.alpha_bar(300 - h)) / (2 * h)
    assert schedule.alpha_bar_dot(300) == pytest.approx(fd, rel=1e-6)


def test_scaled_linear_derivative(linear_schedule):
    t = 300.0
    beta = 1e-4 + (2e-2 - 1e-4) * t / 1000
    expected = linear_schedule.alpha_bar(t) * math.log(1.0 - beta)
    assert linear_schedule.alpha_bar_dot(t) == pytest.approx(expected, rel=1e-4)


def test_derivative_undefined_on_floor(schedule):
    with pytest.raises(DegenerateTimestepError):
        schedule.alpha_bar_dot(schedule.horizon)


@pytest.mark.parametrize("kind", ["cosine", "scaled_linear"])
@pytest.mark.parametrize("target", [0.9, 0.5, 0.01])
def test_t_for_alpha_bar_inverts(kind, target):
    s = NoiseSchedule(kind=kind)
    assert s.alpha_bar(s.t_for_alpha_bar(target)) == pytest.approx(target, rel=1e-9)


def test_t_for_alpha_bar_domain(schedule):
    assert schedule.t_for_alpha_bar(1.0) == 0.0
    with pytest.raises(DomainError):
        schedule.t_for_alpha_bar(1.5)


@pytest.mark.parametrize("kwargs", [
    {"kind": "sigmoid"},
    {"horizon": 0},
    {"alpha_floor": 1.5},
])
def test_invalid_schedule(kwargs):
    with pytest.raises(ConfigError):
        NoiseSchedule(**kwargs)


def test_default_grid(schedule, grid):
    assert len(grid) == 12
    assert grid.timesteps[0] == pytest.approx(980.0)
    assert grid.timesteps[-1] == pytest.approx(1000 / 12)
    assert all(a > b for a, b in zip(grid.timesteps, grid.timesteps[1:]))
    assert sum(grid.strides) == pytest.approx(980.0)


def test_steps_end_at_zero(grid):
    steps = list(grid.steps())
    assert [i for i, _, _ in steps] == list(range(12))
    assert steps[-1][2] == 0.0
    assert all(t_next == grid.timesteps[i + 1] for i, _, t_next in steps[:-1])


def test_sqrt_alpha_spacing(schedule):
    grid = make_timestep_grid(schedule, n_steps=8, spacing="uniform_sqrt_alpha")
    levels = np.array([schedule.sqrt_alpha_bar(t) for t in grid])
    assert np.allclose(np.diff(levels), np.diff(levels)[0], atol=1e-9)


@pytest.mark.parametrize("timesteps", [
    (500.0,),
    (500.0, 600.0),
    (500.0, 0.0),
    tuple(np.linspace(990, 10, 65)),
])
def test_invalid_grid(timesteps):
    with pytest.raises(ConfigError):
        TimestepGrid(timesteps)


def test_grid_start_must_exceed_end(schedule):
    with pytest.raises(ConfigError):
        make_timestep_grid(schedule, n_steps=2, t_max_fraction=0.4)

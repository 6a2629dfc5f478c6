"""Tests for direct-path editing and its trajectory records."""

import copy
import math
import timeit

import numpy as np
import pytest

from pathedit.core.distributions import PromptCondition
from pathedit.core.editor import (
    EditConfig,
    GuidanceConfig,
    RegSchedule,
    Trajectory,
    calibrated_target_prediction,
    direct_path_edit,
    edit_direction,
    effective_coefficient,
    gamma_hat_for_step,
    path_gradient,
    reg_gradient_full,
    reg_gradient_simplified,
    validate_trajectory,
)
from pathedit.core.errors import ConfigError, DegenerateTimestepError, NumericError
from pathedit.core.forward import diffuse, draw_noise

from conftest import FixedDenoiser, time_for

FORMS = ["full_eq10", "simplified", "bypass"]


def plain_config(grid, seed=0, **reg):
    return EditConfig(grid, RegSchedule(**reg), GuidanceConfig(uncond=None), seed)


@pytest.mark.parametrize("kwargs", [
    {"form": "eq11"},
    {"strength": 1.5},
    {"strength": -0.1},
    {"active_steps": -1},
    {"active_steps": 2.0},
    {"taylor_delta": 0.0},
])
def test_invalid_reg_schedule(kwargs):
    with pytest.raises(ConfigError):
        RegSchedule(**kwargs)


def test_active_steps_cannot_exceed_grid(grid):
    with pytest.raises(ConfigError):
        plain_config(grid, active_steps=13)


def test_negative_seed(grid):
    with pytest.raises(ConfigError):
        plain_config(grid, seed=-1)


def test_negative_guidance():
    with pytest.raises(ConfigError):
        GuidanceConfig(src_scale=-1.0)


def test_with_reg_and_seed(grid):
    config = plain_config(grid, seed=3)
    changed = config.with_reg(active_steps=2, strength=0.5).with_seed(9)
    assert (changed.reg.active_steps, changed.reg.strength, changed.seed) == (2, 0.5, 9)
    assert changed.reg.form == config.reg.form


def test_calibrated_prediction_is_exact_for_equal_predictions():
    z0 = np.array([0.1, 0.2])
    prediction = np.array([5.0, -3.0])
    assert np.array_equal(calibrated_target_prediction(prediction, prediction, z0), z0)


@pytest.mark.parametrize("form", FORMS)
def test_identity_edit_returns_the_source(denoiser, prompts, grid, schedule, form):
    z0 = np.array([-9.0, 2.5])
    output, trajectory = direct_path_edit(
        denoiser, z0, prompts[0], prompts[0], plain_config(grid, form=form), schedule
    )
    assert np.array_equal(output, z0)
    assert all(np.array_equal(step.z_mix_after, z0) for step in trajectory.steps)


@pytest.mark.parametrize("form", FORMS)
def test_trajectory_invariants_hold(denoiser, prompts, grid, schedule, form):
    _, trajectory = direct_path_edit(
        denoiser, np.array([-12.0, 1.0]), prompts[0], prompts[1], plain_config(grid, 4, form=form), schedule
    )
    validate_trajectory(trajectory)
    assert len(trajectory.steps) == len(grid)
    assert [s.step_index for s in trajectory.steps] == list(range(len(grid)))


def test_unregularized_edit_with_fixed_predictions(grid, schedule, stub_prompts):
    fixed = FixedDenoiser({"a": [1.0, 0.0], "b": [3.0, 1.0]})
    z0 = np.array([0.5, 0.5])
    output, trajectory = direct_path_edit(
        fixed, z0, stub_prompts[0], stub_prompts[1], plain_config(grid, active_steps=0), schedule
    )
    assert np.allclose(output, z0 + [2.0, 1.0], atol=1e-14)
    for step in trajectory.steps:
        assert not np.any(step.reg_grad)


@pytest.mark.parametrize("strength", [0.25, 1.0])
def test_simplified_step_uses_effective_coefficient(grid, schedule, stub_prompts, strength):
    fixed = FixedDenoiser({"a": [1.0, 0.0], "b": [3.0, 1.0]})
    z0 = np.zeros(2)
    config = plain_config(grid, strength=strength, active_steps=6)
    _, trajectory = direct_path_edit(fixed, z0, stub_prompts[0], stub_prompts[1], config, schedule)
    for (i, t, t_next), step in zip(grid.steps(), trajectory.steps):
        c = effective_coefficient(config.reg, i, t, t_next, schedule)
        assert np.allclose(step.z_mix_after, c * np.array([2.0, 1.0]), rtol=1e-12, atol=1e-14)


def test_full_strength_uses_current_level(grid, schedule):
    reg = RegSchedule(strength=1.0, active_steps=6)
    t, t_next = grid.timesteps[0], grid.timesteps[1]
    assert effective_coefficient(reg, 0, t, t_next, schedule) == pytest.approx(schedule.sqrt_alpha_bar(t))
    assert effective_coefficient(reg, 6, grid.timesteps[6], grid.timesteps[7], schedule) \
        == schedule.sqrt_alpha_bar(grid.timesteps[7])


def test_gamma_hat_sign_and_schedule(grid, schedule):
    reg = RegSchedule(strength=0.5, active_steps=3)
    values = [gamma_hat_for_step(reg, i, t, n, schedule) for i, t, n in grid.steps()]
    assert all(v < 0 for v in values[:3])
    assert all(v == 0.0 for v in values[3:])
    assert gamma_hat_for_step(RegSchedule(strength=0.0), 0, 500.0, 400.0, schedule) == 0.0


def test_full_form_agrees_with_simplified_for_consistent_predictions(schedule):
    rng = np.random.default_rng(12)
    t, t_next = time_for(schedule, 0.3), time_for(schedule, 0.45)
    sqrt_ab = schedule.sqrt_alpha_bar(t)
    z_src, z_tar = rng.standard_normal(5), rng.standard_normal(5)
    zhat_src, zhat_tar = z_src / sqrt_ab, z_tar / sqrt_ab
    full = reg_gradient_full(
        z_src, z_tar, zhat_src, zhat_tar, t,
        gamma_hat_for_step(RegSchedule(form="full_eq10"), 0, t, t_next, schedule), schedule,
    )
    simplified = reg_gradient_simplified(
        zhat_src, zhat_tar, gamma_hat_for_step(RegSchedule(form="simplified"), 0, t, t_next, schedule)
    )
    assert np.allclose(full, simplified, rtol=1e-10, atol=1e-14)


def test_bypass_at_full_strength_holds_the_offset(denoiser, prompts, grid, schedule):
    config = plain_config(grid, form="bypass", strength=1.0, active_steps=6)
    _, trajectory = direct_path_edit(denoiser, np.array([-8.0, 0.0]), prompts[0], prompts[1], config, schedule)
    for step in trajectory.steps[:6]:
        assert step.zhat0_src is None and step.zhat0_tar is None
        assert np.allclose(step.z_mix_after, step.z_mix_before, atol=1e-12)
    assert trajectory.steps[6].zhat0_src is not None
    assert not np.allclose(trajectory.output, [-8.0, 0.0])


def test_unregularized_edit_matches_a_plain_loop(denoiser, prompts, grid, schedule):
    p_src, p_tar = prompts
    for seed in range(50):
        z0 = np.array([-10.0 + 0.1 * seed, 0.05 * seed])
        output, _ = direct_path_edit(denoiser, z0, p_src, p_tar, plain_config(grid, seed, active_steps=0), schedule)
        z_mix = z0.copy()
        for i, t, t_next in grid.steps():
            z_src = diffuse(z0, t, draw_noise(seed, i, z0.shape), schedule)
            z_tar = (z_mix - z0) + z_src
            gap = denoiser.predict(z_tar, t, p_tar) - denoiser.predict(z_src, t, p_src)
            z_mix = z0 + schedule.sqrt_alpha_bar(t_next) * gap
        assert np.array_equal(output, z_mix)


def test_edit_is_reproducible(denoiser, prompts, grid, schedule):
    z0 = np.array([-10.0, 0.0])
    first, _ = direct_path_edit(denoiser, z0, *prompts, plain_config(grid, 5), schedule)
    second, _ = direct_path_edit(denoiser, z0, *prompts, plain_config(grid, 5), schedule)
    other, _ = direct_path_edit(denoiser, z0, *prompts, plain_config(grid, 6), schedule)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, other)


def test_edit_moves_towards_the_target(denoiser, prompts, grid, schedule):
    output, _ = direct_path_edit(denoiser, np.array([-10.0, 0.0]), *prompts, plain_config(grid, active_steps=0), schedule)
    assert output[0] > 0


def test_source_is_not_mutated(denoiser, prompts, grid, schedule):
    z0 = np.array([-10.0, 0.0])
    direct_path_edit(denoiser, z0, *prompts, plain_config(grid), schedule)
    assert z0.tolist() == [-10.0, 0.0]


def test_unit_guidance_matches_no_guidance(denoiser, registry, prompts, grid, schedule):
    z0 = np.array([-10.0, 1.0])
    unguided, _ = direct_path_edit(denoiser, z0, *prompts, plain_config(grid), schedule)
    guided_config = EditConfig(grid, RegSchedule(), GuidanceConfig(1.0, 1.0, registry.prompt("anything")), 0)
    guided, _ = direct_path_edit(denoiser, z0, *prompts, guided_config, schedule)
    assert np.array_equal(unguided, guided)


def test_grid_latents(denoiser, registry, grid, schedule):
    z0 = np.zeros((16, 16))
    output, trajectory = direct_path_edit(
        denoiser, z0, registry.prompt("blob_left"), registry.prompt("blob_right"), plain_config(grid), schedule
    )
    assert output.shape == (16, 16)
    assert trajectory.steps[0].z_src.shape == (16, 16)


def test_non_finite_source(denoiser, prompts, grid, schedule):
    with pytest.raises(NumericError):
        direct_path_edit(denoiser, np.array([np.nan, 0.0]), *prompts, plain_config(grid), schedule)


def test_non_finite_prediction(grid, schedule, stub_prompts):
    fixed = FixedDenoiser({"a": [0.0, 0.0], "b": [np.inf, 0.0]})
    with pytest.raises(NumericError):
        direct_path_edit(fixed, np.zeros(2), *stub_prompts, plain_config(grid), schedule)


def test_trajectory_records_rebuild(denoiser, prompts, grid, schedule):
    _, trajectory = direct_path_edit(
        denoiser, np.array([-10.0, 0.0]), *prompts, plain_config(grid, form="bypass"), schedule
    )
    rebuilt = Trajectory.from_records(trajectory.to_records())
    assert np.array_equal(rebuilt.output, trajectory.output)
    assert rebuilt.config == trajectory.config
    assert rebuilt.steps[0].zhat0_src is None


def test_tampered_records_are_rejected(denoiser, prompts, grid, schedule):
    _, trajectory = direct_path_edit(denoiser, np.array([-10.0, 0.0]), *prompts, plain_config(grid), schedule)
    records = copy.deepcopy(trajectory.to_records())
    records[3]["z_mix_after"][0] += 1.0
    with pytest.raises(NumericError):
        Trajectory.from_records(records)


def test_unknown_record_version(denoiser, prompts, grid, schedule):
    _, trajectory = direct_path_edit(denoiser, np.array([-10.0, 0.0]), *prompts, plain_config(grid), schedule)
    records = trajectory.to_records()
    records[0]["version"] = 99
    with pytest.raises(ConfigError):
        Trajectory.from_records(records)


def test_config_round_trip_with_uncond(grid):
    config = EditConfig(grid, RegSchedule(form="full_eq10"), GuidanceConfig(2.0, 3.0, PromptCondition("u", "anything")), 4)
    assert EditConfig.from_dict(config.to_dict()) == config


def test_calibrated_prediction_value():
    result = calibrated_target_prediction(np.array([1.4]), np.array([1.0]), np.array([0.9]))
    assert result[0] == pytest.approx(1.3)


def test_edit_direction_value(schedule):
    t_next = time_for(schedule, 0.81)
    result = edit_direction(np.zeros(1), np.zeros(1), np.ones(1), t_next, schedule)
    assert result[0] == pytest.approx(0.9)


def test_edit_direction_at_time_zero(schedule):
    z0, src, tar = np.array([0.2]), np.array([1.0]), np.array([1.7])
    assert np.array_equal(edit_direction(z0, src, tar, 0.0, schedule), calibrated_target_prediction(tar, src, z0))


def test_path_gradient_value():
    grad = path_gradient(
        np.array([0.5]), np.array([0.7]), np.array([1.0]), np.array([1.4]),
        sqrt_alpha_bar=0.5, alpha_bar_dot=-1.0, gamma_hat=1.0,
    )
    assert grad[0] == pytest.approx(-0.4)


def test_full_gradient_vanishes_without_divergence(schedule):
    z, zhat = np.array([0.3, 0.1]), np.array([1.0, 2.0])
    assert not np.any(reg_gradient_full(z, z, zhat, zhat, 400.0, -0.3, schedule))


def test_full_gradient_on_the_floor(schedule):
    z = np.zeros(2)
    with pytest.raises(DegenerateTimestepError):
        reg_gradient_full(z, z, z, z, schedule.horizon, -0.3, schedule)


def test_simplified_gradient_value():
    assert reg_gradient_simplified(np.array([1.0]), np.array([0.0]), -0.1)[0] == pytest.approx(-0.1)


def test_gamma_hat_at_full_strength(schedule):
    t, t_next = time_for(schedule, 0.25), time_for(schedule, 0.81)
    reg = RegSchedule(strength=1.0, active_steps=1)
    assert gamma_hat_for_step(reg, 0, t, t_next, schedule) == pytest.approx(-0.4)
    assert effective_coefficient(reg, 0, t, t_next, schedule) == pytest.approx(0.5)


def test_gamma_hat_is_active_on_the_first_steps_only(grid, schedule):
    reg = RegSchedule(active_steps=6)
    active = [i for i, t, n in grid.steps() if gamma_hat_for_step(reg, i, t, n, schedule) != 0.0]
    assert active == [0, 1, 2, 3, 4, 5]


def test_identity_edit_over_many_seeds(denoiser, prompts, grid, schedule):
    z0 = np.array([-7.5, 3.0])
    for seed in range(100):
        output, _ = direct_path_edit(denoiser, z0, prompts[0], prompts[0], plain_config(grid, seed), schedule)
        assert np.array_equal(output, z0)


@pytest.mark.parametrize("alpha_bar", [0.2, 0.5, 0.8])
def test_full_and_simplified_updates_agree_mid_schedule(registry, denoiser, schedule, alpha_bar):
    # At s = 1 the two updates differ by |gamma_hat| / (sqrt(a) - kappa) of the
    # update, whatever the state; this spacing keeps that under 0.09.
    p_src, p_tar = registry.prompt("two_modes"), registry.prompt("anything")
    t = time_for(schedule, alpha_bar)
    sqrt_ab = schedule.sqrt_alpha_bar(t)
    t_next = time_for(schedule, (1.09 * sqrt_ab) ** 2)
    full_gamma = gamma_hat_for_step(RegSchedule(form="full_eq10"), 0, t, t_next, schedule)
    simple_gamma = gamma_hat_for_step(RegSchedule(form="simplified"), 0, t, t_next, schedule)
    kappa = 0.5 * schedule.alpha_bar_dot(t) / (2.0 * sqrt_ab)
    rng = np.random.default_rng(int(alpha_bar * 10))
    for _ in range(200):
        z0 = 4.0 * rng.standard_normal(2)
        z_mix = z0 + 6.0 * rng.standard_normal(2)
        z_src = diffuse(z0, t, rng.standard_normal(2), schedule)
        z_tar = (z_mix - z0) + z_src
        zhat_src = denoiser.predict(z_src, t, p_src)
        zhat_tar = denoiser.predict(z_tar, t, p_tar)
        v_t = edit_direction(z0, zhat_src, zhat_tar, t_next, schedule)
        full = v_t - reg_gradient_full(z_src, z_tar, zhat_src, zhat_tar, t, full_gamma, schedule)
        simplified = v_t - reg_gradient_simplified(zhat_src, zhat_tar, simple_gamma)
        gap = np.linalg.norm(full - simplified)
        update = np.linalg.norm(simplified - z_mix)
        assert gap == pytest.approx(abs(simple_gamma) / (sqrt_ab - kappa) * update, rel=1e-6)
        assert gap <= 0.1 * update


def test_full_and_simplified_gap_on_the_default_grid(grid, schedule):
    reg = RegSchedule(form="full_eq10")
    for i, t, t_next in grid.steps():
        alpha_bar = schedule.alpha_bar(t)
        if not 0.2 <= alpha_bar <= 0.8:
            continue
        sqrt_ab = math.sqrt(alpha_bar)
        kappa = 0.5 * schedule.alpha_bar_dot(t) / (2.0 * sqrt_ab)
        simple_gamma = gamma_hat_for_step(RegSchedule(form="simplified"), i, t, t_next, schedule)
        assert gamma_hat_for_step(reg, i, t, t_next, schedule) == pytest.approx(simple_gamma / (sqrt_ab - kappa))
        assert 0.0 < abs(simple_gamma) / (sqrt_ab - kappa) < 0.3


def test_small_edit_is_fast(denoiser, prompts, grid, schedule):
    z0 = np.array([-10.0, 0.0])
    config = plain_config(grid, seed=3)
    direct_path_edit(denoiser, z0, *prompts, config, schedule)
    best = min(timeit.repeat(
        lambda: direct_path_edit(denoiser, z0, *prompts, config, schedule), number=100, repeat=5,
    ))
    assert best / 100 < 1e-3

"""Tests for mixtures and the distribution registry."""

import json

import numpy as np
import pytest
from scipy.special import logsumexp

from pathedit.core.distributions import (
    PromptCondition,
    log_component_terms,
    log_density,
    log_responsibilities,
    make_mixture,
    responsibilities,
    sample_mixture,
)
from pathedit.core.errors import ConfigError, NumericError, ShapeError
from pathedit.core.registry import DistributionRegistry, load_registry, registry_from_dict, render_blobs


def test_weights_must_sum_to_one():
    with pytest.raises(ConfigError):
        make_mixture([[0.0], [1.0]], 1.0, weights=[0.5, 0.6])


def test_weights_must_be_positive():
    with pytest.raises(ConfigError):
        make_mixture([[0.0], [1.0]], 1.0, weights=[1.0, 0.0])


def test_means_and_weights_must_agree():
    with pytest.raises(ShapeError):
        make_mixture([[0.0, 0.0], [1.0, 1.0]], 1.0, weights=[1.0])


def test_sigma_must_be_positive():
    with pytest.raises(ConfigError):
        make_mixture([[0.0]], 0.0)


def test_mixture_arrays_are_read_only():
    mixture = make_mixture([[0.0, 1.0]], 1.0)
    with pytest.raises(ValueError):
        mixture.means[0, 0] = 5.0


def test_log_responsibilities_normalize_the_component_terms():
    rng = np.random.default_rng(4)
    mixture = make_mixture(rng.uniform(-3.0, 3.0, size=(3, 2)), 0.7, [0.2, 0.5, 0.3])
    z = rng.standard_normal(2)
    terms = log_component_terms(mixture, z, 0.4)
    assert np.allclose(log_responsibilities(mixture, z, 0.4), terms - logsumexp(terms), atol=1e-14)


def test_single_component_responsibility():
    mixture = make_mixture([[1.0, 2.0]], 0.5)
    assert responsibilities(mixture, np.array([100.0, -4.0]), 0.3).tolist() == [1.0]
    with pytest.raises(ShapeError):
        responsibilities(mixture, np.zeros(3), 0.3)


def test_symmetric_responsibilities():
    mixture = make_mixture([[-3.0, 0.0], [3.0, 0.0]], 1.0)
    weights = responsibilities(mixture, np.array([0.0, 2.0]), 0.5)
    assert weights[0] == weights[1] == pytest.approx(0.5)


def test_responsibilities_far_from_the_modes():
    mixture = make_mixture([[-3.0, 0.0], [3.0, 0.0]], 1.0)
    weights = responsibilities(mixture, np.array([1e3, 0.0]), 0.9)
    assert np.all(np.isfinite(weights))
    assert weights.sum() == pytest.approx(1.0)
    assert weights[1] == pytest.approx(1.0)


def test_non_finite_latent():
    mixture = make_mixture([[0.0, 0.0]], 1.0)
    with pytest.raises(NumericError):
        log_density(mixture, np.array([np.nan, 0.0]))


def test_sample_shapes(registry):
    rng = np.random.default_rng(0)
    assert sample_mixture(registry.get("source"), 5, rng).shape == (5, 2)
    assert sample_mixture(registry.get("blob_left"), 3, rng).shape == (3, 16, 16)
    assert sample_mixture(registry.get("source"), 0, rng).shape == (0, 2)


def test_sample_moments():
    mixture = make_mixture([[2.0, -1.0]], 0.5)
    samples = sample_mixture(mixture, 20000, np.random.default_rng(1))
    assert np.allclose(samples.mean(axis=0), [2.0, -1.0], atol=0.02)
    assert np.allclose(samples.std(axis=0), 0.5, atol=0.02)


def test_render_blobs():
    image = render_blobs([{"center": [3, 5], "amplitude": 2.0, "width": 1.0}], 8)
    assert image.shape == (8, 8)
    assert image[3, 5] == pytest.approx(2.0)
    assert np.unravel_index(np.argmax(image), image.shape) == (3, 5)


def test_render_blobs_rejects_bad_width():
    with pytest.raises(ConfigError):
        render_blobs([{"center": [3, 5], "amplitude": 2.0, "width": 0.0}], 8)


def test_builtin_registry(registry):
    assert {"source", "target", "anything", "two_modes", "blob_left", "blob_right"} <= set(registry.names)
    assert registry.get("source").dim == 2
    assert registry.get("blob_left").sample_shape == (16, 16)


def test_prompts_resolve(registry):
    prompt = registry.prompt("target")
    assert prompt == PromptCondition("target", "target")
    assert registry.resolve(prompt) is registry.get("target")


def test_unknown_distribution(registry):
    with pytest.raises(ConfigError):
        registry.prompt("nowhere")
    with pytest.raises(ConfigError):
        registry.resolve(PromptCondition("x", "nowhere"))


def test_duplicate_names():
    registry = DistributionRegistry()
    registry.register("a", make_mixture([[0.0]], 1.0))
    with pytest.raises(ConfigError):
        registry.register("a", make_mixture([[1.0]], 1.0))


def test_unknown_kind():
    with pytest.raises(ConfigError):
        registry_from_dict({"distributions": [{"name": "x", "kind": "flow", "sigma": 1.0}]})


def test_missing_registry_file(tmp_path):
    with pytest.raises(ConfigError):
        load_registry(tmp_path / "missing.json")


def test_invalid_registry_json(tmp_path):
    path = tmp_path / "registry.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_registry(path)


def test_registry_from_file(tmp_path):
    path = tmp_path / "registry.json"
    path.write_text(json.dumps({"distributions": [
        {"name": "single", "kind": "gmm", "means": [[1.0, 2.0, 3.0]], "sigma": 0.5},
    ]}))
    registry = load_registry(path)
    mixture = registry.get("single")
    assert mixture.dim == 3
    assert mixture.weights.tolist() == [1.0]

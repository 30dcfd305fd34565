"""Shared fixtures: tiny datasets and model specs used across test modules."""

from __future__ import annotations

import numpy as np
import pytest

from silofed.data import Dataset
from silofed.nn import ModelParams, ModelSpec, init_params


@pytest.fixture
def tiny_spec() -> ModelSpec:
    return ModelSpec((2, 4, 3))


@pytest.fixture
def tiny_params(tiny_spec: ModelSpec) -> ModelParams:
    return init_params(tiny_spec, seed=7)


def make_dataset(n_per_class: int = 10, class_count: int = 3, dim: int = 2, seed: int = 0) -> Dataset:
    """Small labelled blob set with well-separated integer-grid centers."""
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(class_count), n_per_class)
    centers = np.zeros((class_count, dim))
    centers[:, 0] = 10.0 * np.arange(class_count)
    features = centers[labels] + 0.1 * rng.normal(size=(labels.size, dim))
    return Dataset(features, labels, class_count, name="fixture")


@pytest.fixture
def small_data() -> Dataset:
    return make_dataset()

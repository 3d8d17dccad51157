import numpy as np
import pytest

from qadvlab.datasets import Dataset, GaussianTaskSpec, gen_dataset
from qadvlab.embeddings import EmbeddingFamily, EmbeddingSpec
from qadvlab.model import ModelConfig, build_model


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def angle_spec():
    return EmbeddingSpec(family=EmbeddingFamily.ANGLE, input_dim=2)


@pytest.fixture
def small_model(angle_spec):
    """Two-qubit, two-layer binary classifier on the angle embedding."""
    return build_model(angle_spec, ModelConfig(layers=2), seed=7)


@pytest.fixture
def tiny_data():
    train, test = gen_dataset(GaussianTaskSpec(d=2, train_m=8, test_m=16, seed=3))
    return train, test


@pytest.fixture
def toy_dataset(rng) -> Dataset:
    X = rng.normal(size=(5, 2))
    return Dataset(X=X, y=np.array([0, 1, 0, 1, 1]))

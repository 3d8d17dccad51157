# src/qadvlab/datasets.py
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .model import LabeledSample
from .settings import substream


class GaussianTaskSpec(BaseModel):
    """Two equiprobable classes, x | y ~ N(mu_y, I_d)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    d: int = Field(default=2, ge=1)
    train_m: int = Field(default=20, ge=1)
    test_m: int = Field(default=1000, ge=1)
    seed: int = Field(default=0, ge=0)


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return int(self.y.size)

    @property
    def dim(self) -> int:
        return int(self.X.shape[1])

    def samples(self) -> List[LabeledSample]:
        return [LabeledSample(x=row, y=int(label)) for row, label in zip(self.X, self.y)]

    def head(self, m: int) -> "Dataset":
        return Dataset(self.X[:m], self.y[:m])


def class_means(d: int) -> np.ndarray:
    """
    (2, d): mu_0 = (pi/4) 1_d and mu_1 = (pi/4) (1 on the first floor(d/2)
    coordinates, -1 on the rest).
    """
    half = d // 2
    mu1 = np.concatenate([np.ones(half), -np.ones(d - half)])
    return (math.pi / 4.0) * np.stack([np.ones(d), mu1])


def sample_gaussian(rng: np.random.Generator, d: int, m: int) -> Dataset:
    y = rng.integers(0, 2, size=m)
    X = class_means(d)[y] + rng.standard_normal((m, d))
    return Dataset(X=X, y=y)


def gen_dataset(spec: GaussianTaskSpec) -> Tuple[Dataset, Dataset]:
    """(train, test), the training rows drawn first from the seed's data stream."""
    rng = substream(spec.seed, "data")
    train = sample_gaussian(rng, spec.d, spec.train_m)
    test = sample_gaussian(rng, spec.d, spec.test_m)
    return train, test

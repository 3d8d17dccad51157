# src/qadvlab/config.py
"""
The experiment config file: one JSON object with the blocks task, embedding,
model, train, attack, bounds and sweep. Every block has defaults, so `{}` is
a complete config describing the Gaussian-task protocol.
"""
from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

import orjson
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .attacks import AttackConfig, AttackSpace
from .bounds import BoundConfig, ExcessVariant
from .datasets import GaussianTaskSpec
from .embeddings import EmbeddingFamily, EmbeddingSpec
from .errors import ConfigError
from .model import ModelConfig
from .training import TrainConfig


class Theorem(str, Enum):
    ALL = "all"
    RC = "thm2"
    ARC = "thm3"
    NOISY = "thm4"
    MULTICLASS = "thm5"
    COVERING = "lemma1"
    PAC = "pac"


class BoundsBlock(BoundConfig):
    """BoundConfig plus what the `bounds` step evaluates."""

    theorem: Theorem = Theorem.ALL
    variant: ExcessVariant = ExcessVariant.PROP1
    covering_delta: Optional[float] = Field(default=None, gt=0)
    empirical_risk: float = Field(default=0.0, ge=0)
    mc_draws: int = Field(default=0, ge=0)


class SweepConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    dims: List[int] = Field(default_factory=lambda: [2, 4, 6, 8])
    families: List[EmbeddingFamily] = Field(default_factory=lambda: [EmbeddingFamily.ANGLE])
    n_seeds: int = Field(default=5, ge=1)
    epsilons: List[float] = Field(default_factory=lambda: [0.001, 0.0025, 0.005, 0.0075, 0.01])
    noise_family: EmbeddingFamily = EmbeddingFamily.AMPLITUDE
    noise_d: int = Field(default=6, ge=1)
    lambda_min: float = Field(default=0.011, ge=0)
    noise_train_epsilon: float = Field(default=0.001, ge=0)
    mc_draws: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "SweepConfig":
        if not self.dims or not self.families or not self.epsilons:
            raise ValueError("dims, families and epsilons must be non-empty")
        if any(e < 0 for e in self.epsilons):
            raise ValueError("epsilons must be >= 0")
        return self


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    task: GaussianTaskSpec = GaussianTaskSpec()
    embedding: EmbeddingSpec = EmbeddingSpec()
    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    attack: AttackConfig = AttackConfig()
    bounds: BoundsBlock = BoundsBlock()
    sweep: SweepConfig = SweepConfig()

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if self.embedding.input_dim != self.task.d:
            raise ValueError(
                f"embedding.input_dim={self.embedding.input_dim} differs from task.d={self.task.d}"
            )
        return self

    @property
    def training(self) -> TrainConfig:
        """The train block, attacking with the attack block unless it names its own attack."""
        if self.train.attack is not None:
            return self.train
        return self.train.model_copy(update={"attack": self.attack})

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return self.model_copy(
            update={
                "task": self.task.model_copy(update={"seed": seed}),
                "train": self.train.model_copy(update={"seed": seed}),
                "attack": self.attack.model_copy(update={"seed": seed}),
            }
        )

    def with_dimension(self, family: EmbeddingFamily, d: int, noise: Optional[float] = None) -> "ExperimentConfig":
        """Same experiment on d features with another embedding family."""
        layered = family in (EmbeddingFamily.LLAYER_ANGLE, EmbeddingFamily.LLAYER_DENSE)
        embedding = EmbeddingSpec(
            family=family,
            input_dim=d,
            layers=self.embedding.layers if layered else 1,
            fixed_unitary_seed=self.embedding.fixed_unitary_seed,
            depolarize_lambda=self.embedding.depolarize_lambda if noise is None else noise,
        )
        return self.model_copy(
            update={"task": self.task.model_copy(update={"d": d}), "embedding": embedding}
        )


def parse_config(data: Dict[str, Any], source: str = "<config>") -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {source}:\n{exc}") from exc


def load_config(path: Optional[Path]) -> ExperimentConfig:
    """Read a JSON experiment config; None gives the defaults."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file does not exist: {path}")
    try:
        data = orjson.loads(path.read_bytes())
    except orjson.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return parse_config(data, str(path))


def quantum_attack(cfg: ExperimentConfig, epsilon: float) -> AttackConfig:
    return cfg.attack.model_copy(update={"space": AttackSpace.QUANTUM, "epsilon": float(epsilon)})

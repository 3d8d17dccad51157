# src/qadvlab/training.py
"""
Adversarial training and risk estimation.

Each epoch attacks every training sample at the current angles, then takes one
full-batch step on the mean loss at the attacked inputs. With no attack (or
epsilon = 0) this is ordinary empirical risk minimisation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .attacks import AttackConfig, attack_batch
from .datasets import Dataset
from .embeddings import embed_batch
from .errors import DivergenceError
from .model import ClassifierModel, batch_losses, loss_grad_params

logger = logging.getLogger(__name__)

EpochCallback = Callable[[int, ClassifierModel, float], None]


class Optimizer(str, Enum):
    GD = "gd"
    ADAM = "adam"


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    epochs: int = Field(default=40, ge=0)
    learning_rate: float = Field(default=0.1, gt=0)
    optimizer: Optimizer = Optimizer.GD
    seed: int = Field(default=0, ge=0)
    attack: Optional[AttackConfig] = None


@dataclass
class TrainResult:
    model: ClassifierModel
    trace: List[float] = field(default_factory=list)

    def trace_rows(self) -> List[dict]:
        return [{"epoch": i, "adv_empirical_risk": v} for i, v in enumerate(self.trace)]


class _Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: Optional[np.ndarray] = None
        self.v: Optional[np.ndarray] = None
        self.t = 0

    def step(self, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _attacked_batch(model: ClassifierModel, data: Dataset, attack: Optional[AttackConfig]):
    if attack is None or attack.epsilon == 0:
        return embed_batch(data.X, model.embedding)
    return attack_batch(model, data.X, data.y, attack).batch


def train_adversarial(
    model: ClassifierModel,
    train: Dataset,
    cfg: TrainConfig,
    on_epoch: Optional[EpochCallback] = None,
) -> TrainResult:
    """
    Full-batch descent on the adversarial empirical risk. `trace[e]` is the
    risk at the start of epoch e, before that epoch's update.
    """
    adam = _Adam(cfg.learning_rate) if cfg.optimizer is Optimizer.ADAM else None
    trace: List[float] = []

    for epoch in range(cfg.epochs):
        batch = _attacked_batch(model, train, cfg.attack)
        losses, grad = loss_grad_params(model, batch, train.y)
        risk = math.fsum(losses) / losses.size
        if not math.isfinite(risk) or not np.all(np.isfinite(grad)):
            raise DivergenceError(f"non-finite loss or gradient at epoch {epoch}")
        trace.append(risk)

        step = adam.step(grad) if adam is not None else cfg.learning_rate * grad
        model = model.with_angles(model.angles - step)
        logger.info("[train] epoch %d/%d adversarial risk %.6f", epoch + 1, cfg.epochs, risk)
        if on_epoch is not None:
            on_epoch(epoch, model, risk)

    return TrainResult(model=model, trace=trace)


# ---------------------------------------------------------------------
# Risks
# ---------------------------------------------------------------------


class RiskTable(BaseModel):
    model_config = ConfigDict(frozen=True)

    clean_train: float
    clean_test: float
    adv_train: float
    adv_test: float
    clean_train_stderr: float = 0.0
    clean_test_stderr: float = 0.0
    adv_train_stderr: float = 0.0
    adv_test_stderr: float = 0.0

    @property
    def clean_gap(self) -> float:
        return self.clean_test - self.clean_train

    @property
    def adv_gap(self) -> float:
        return self.adv_test - self.adv_train

    def as_row(self) -> dict:
        return {**self.model_dump(), "clean_gap": self.clean_gap, "adv_gap": self.adv_gap}


def _mean_stderr(losses: np.ndarray) -> tuple[float, float]:
    mean = math.fsum(losses) / losses.size
    if losses.size < 2:
        return mean, 0.0
    return mean, float(np.std(losses, ddof=1) / math.sqrt(losses.size))


def _clean_and_adversarial(model: ClassifierModel, data: Dataset, attack: Optional[AttackConfig]):
    if attack is None or attack.epsilon == 0:
        clean = batch_losses(model, embed_batch(data.X, model.embedding), data.y)
        return clean, clean
    outcome = attack_batch(model, data.X, data.y, attack)
    return outcome.clean_losses, outcome.losses


def estimate_risks(
    model: ClassifierModel,
    train: Dataset,
    test: Dataset,
    attack: Optional[AttackConfig],
) -> RiskTable:
    """Clean and adversarial mean losses on both sets at the model's current angles."""
    clean_tr, adv_tr = _clean_and_adversarial(model, train, attack)
    clean_te, adv_te = _clean_and_adversarial(model, test, attack)
    values = {}
    for name, losses in (
        ("clean_train", clean_tr),
        ("clean_test", clean_te),
        ("adv_train", adv_tr),
        ("adv_test", adv_te),
    ):
        mean, err = _mean_stderr(losses)
        if not math.isfinite(mean):
            raise DivergenceError(f"{name} risk is not finite")
        values[name] = mean
        values[f"{name}_stderr"] = err
    return RiskTable(**values)

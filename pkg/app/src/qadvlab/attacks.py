# src/qadvlab/attacks.py
"""
Adversaries.

Classical attacks move the feature vector inside an l_p ball (one-step
steepest ascent, FGSM at p = inf). The quantum attack conjugates the embedded
state with one layer of per-qubit Rot gates; the angles start from the loss
gradient sign at the identity and are halved until the p-Schatten budget
holds, falling back to the identity channel when the halvings run out.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .embeddings import embed_batch
from .errors import DomainError, UnsupportedOrder
from .model import (
    ClassifierModel,
    LabeledSample,
    PARAM_SHIFT,
    batch_losses,
    batch_scores,
    column_scores,
    loss_grad_inputs,
    loss_score_weights,
)
from .qmath import INF, SchattenOrder, as_matrix, schatten_norm, symmetrize
from .settings import substream
from .simulator import StateBatch, apply_rot_layer, density_batch, rot_matrices

logger = logging.getLogger(__name__)


class AttackSpace(str, Enum):
    CLASSICAL = "classical"
    QUANTUM = "quantum"


class AttackBudget(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    space: AttackSpace = AttackSpace.CLASSICAL
    p: SchattenOrder = INF
    epsilon: float = Field(default=0.3, ge=0.0)


class AttackConfig(AttackBudget):
    """Budget plus the knobs of the attack that approximates the inner max."""

    lr: Optional[float] = Field(default=None, ge=0.0)
    max_iter: int = Field(default=30, ge=0)
    seed: int = 0
    reject_worse: bool = True

    @property
    def step_size(self) -> float:
        """Initial channel step; the budget radius unless set."""
        return self.epsilon if self.lr is None else self.lr

    def budget(self) -> AttackBudget:
        return AttackBudget(space=self.space, p=self.p, epsilon=self.epsilon)

    def at_epsilon(self, epsilon: float) -> "AttackConfig":
        return self.model_copy(update={"epsilon": float(epsilon)})


@dataclass(frozen=True, eq=False)
class QuantumAttackChannel:
    """rho -> W rho W^dagger with W a tensor product of Rot gates."""

    thetas: np.ndarray

    @classmethod
    def identity(cls, n_qubits: int) -> "QuantumAttackChannel":
        return cls(np.zeros((1, n_qubits, 3)))

    @property
    def n_qubits(self) -> int:
        return int(self.thetas.shape[1])

    @property
    def is_identity(self) -> bool:
        return not np.any(self.thetas)

    def unitary(self) -> np.ndarray:
        mats = rot_matrices(self.thetas[0])
        out = np.ones((1, 1), dtype=complex)
        for mat in mats:
            out = np.kron(out, mat)
        return out

    def apply(self, rho: np.ndarray) -> np.ndarray:
        if self.is_identity:
            return np.array(rho, dtype=complex, copy=True)
        w = self.unitary()
        return w @ rho @ w.conj().T


@dataclass(frozen=True, eq=False)
class AttackOutcome:
    batch: StateBatch
    losses: np.ndarray
    clean_losses: np.ndarray
    inputs: Optional[np.ndarray] = None
    iterations: Optional[np.ndarray] = None
    accepted: Optional[np.ndarray] = None

    @property
    def rejected(self) -> int:
        """Samples whose attacked loss fell strictly below the clean loss."""
        if self.accepted is None:
            return 0
        return int(np.sum(~self.accepted))


# ---------------------------------------------------------------------
# Classical
# ---------------------------------------------------------------------


def steepest_ascent_directions(grads: np.ndarray, p: float) -> np.ndarray:
    """
    Unit-l_p directions maximising <g, delta>, row by row. Zero rows stay zero.
    """
    g = np.atleast_2d(np.asarray(grads, dtype=float))
    out = np.zeros_like(g)
    scale = np.max(np.abs(g), axis=1)
    live = scale > 0
    if not np.any(live):
        return out
    gl = g[live] / scale[live, None]

    if math.isinf(p):
        out[live] = np.sign(gl)
    elif p == 1.0:
        top = np.argmax(np.abs(gl), axis=1)
        rows = np.arange(gl.shape[0])
        d = np.zeros_like(gl)
        d[rows, top] = np.sign(gl[rows, top])
        out[live] = d
    elif p == 2.0:
        out[live] = gl / np.linalg.norm(gl, axis=1, keepdims=True)
    else:
        s = np.sign(gl) * np.abs(gl) ** (1.0 / (p - 1.0))
        norms = np.sum(np.abs(s) ** p, axis=1) ** (1.0 / p)
        out[live] = s / norms[:, None]
    return out


def fgsm_inputs(model: ClassifierModel, X: np.ndarray, labels: np.ndarray, budget: AttackBudget) -> np.ndarray:
    """One steepest-ascent step of size epsilon for every row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if budget.epsilon == 0:
        return X.copy()
    _, grads = loss_grad_inputs(model, X, labels)
    return X + budget.epsilon * steepest_ascent_directions(grads, budget.p)


def fgsm_classical(model: ClassifierModel, sample: LabeledSample, budget: AttackBudget) -> np.ndarray:
    if budget.space is not AttackSpace.CLASSICAL:
        raise DomainError("fgsm_classical needs a classical budget")
    x = np.asarray(sample.x, dtype=float)
    return fgsm_inputs(model, x[None, :], np.array([sample.y]), budget)[0]


def random_perturbations(x: np.ndarray, budget: AttackBudget, rng: np.random.Generator, count: int) -> np.ndarray:
    """`count` points uniform in the l_p ball of radius epsilon around x (p in {2, inf})."""
    x = np.asarray(x, dtype=float).reshape(-1)
    d = x.size
    eps = budget.epsilon
    if math.isinf(budget.p):
        delta = rng.uniform(-eps, eps, size=(count, d))
    elif budget.p == 2.0:
        direction = rng.standard_normal((count, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = eps * rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / d)
        delta = radius * direction
    else:
        raise UnsupportedOrder(f"random baseline supports p = 2 or inf, got p = {budget.p}")
    return x[None, :] + delta


def random_perturb(sample: LabeledSample, budget: AttackBudget, seed: int) -> np.ndarray:
    if budget.space is not AttackSpace.CLASSICAL:
        raise DomainError("random_perturb needs a classical budget")
    return random_perturbations(sample.x, budget, substream(seed, "perturb"), 1)[0]


# ---------------------------------------------------------------------
# Quantum
# ---------------------------------------------------------------------


def channel_gradients(model: ClassifierModel, batch: StateBatch, labels: np.ndarray) -> np.ndarray:
    """d loss / d theta of the attack channel at theta = 0, shape (m, n, 3)."""
    n = model.n_qubits
    n_params = 3 * n
    C = batch.columns.shape[1]
    K = model.num_classes

    shifts = np.zeros((2 * n_params, n_params))
    shifts[np.arange(n_params), np.arange(n_params)] = PARAM_SHIFT
    shifts[n_params + np.arange(n_params), np.arange(n_params)] = -PARAM_SHIFT
    shifts = shifts.reshape(2 * n_params, n, 3)

    cols = np.tile(batch.columns, (1, shifts.shape[0]))
    per_column = np.repeat(shifts, C, axis=0)
    moved = apply_rot_layer(cols, per_column, n)
    raw = column_scores(model, moved).reshape(shifts.shape[0], C, K)
    per_state = np.stack([batch.sum_by_owner(r) for r in raw])
    jac = 0.5 * batch.purity_weight * (per_state[:n_params] - per_state[n_params:])

    weights = loss_score_weights(model, batch_scores(model, batch), labels)
    grads = np.einsum("mk,pmk->mp", weights, jac)
    return grads.reshape(batch.count, n, 3)


def _apply_channels(batch: StateBatch, thetas: np.ndarray) -> StateBatch:
    """Per-state channels, thetas shaped (m, n, 3)."""
    per_column = thetas[batch.owners]
    return batch.with_columns(apply_rot_layer(batch.columns, per_column, batch.n_qubits))


def _budget_distance(batch: StateBatch, moved: StateBatch, i: int, p: float) -> float:
    diff = symmetrize(batch.density(i) - moved.density(i))
    return schatten_norm(diff, p)


def _halve_until_feasible(
    batch: StateBatch,
    i: int,
    start: np.ndarray,
    budget: AttackBudget,
    max_iter: int,
) -> Tuple[np.ndarray, int]:
    single = batch.select(np.array([i]))
    theta = start.copy()
    it = 0
    while it < max_iter:
        moved = _apply_channels(single, theta[None])
        if _budget_distance(single, moved, 0, budget.p) < budget.epsilon:
            break
        theta = theta / 2.0
        it += 1
    if it == max_iter:
        theta = np.zeros_like(theta)
    return theta, it


def quantum_fgsm_states(
    model: ClassifierModel,
    batch: StateBatch,
    labels: np.ndarray,
    budget: AttackBudget,
    max_iter: int,
    lr: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Channel angles (m, n, 3) and halving counts (m,) for every state in the batch."""
    if budget.space is not AttackSpace.QUANTUM:
        raise DomainError("quantum FGSM needs a quantum budget")
    grads = channel_gradients(model, batch, labels)
    starts = lr * np.sign(grads)
    thetas = np.zeros_like(starts)
    iterations = np.zeros(batch.count, dtype=int)
    for i in range(batch.count):
        thetas[i], iterations[i] = _halve_until_feasible(batch, i, starts[i], budget, max_iter)
    return thetas, iterations


def quantum_fgsm_channel(
    model: ClassifierModel,
    rho: Any,
    y: int,
    budget: AttackBudget,
    max_iter: int = 30,
    lr: Optional[float] = None,
) -> Tuple[QuantumAttackChannel, int]:
    batch = density_batch([as_matrix(rho)])
    lr = budget.epsilon if lr is None else lr
    thetas, iterations = quantum_fgsm_states(model, batch, np.array([y]), budget, max_iter, lr)
    return QuantumAttackChannel(thetas[0][None]), int(iterations[0])


def quantum_fgsm(
    model: ClassifierModel,
    rho: Any,
    y: int,
    budget: AttackBudget,
    max_iter: int = 30,
    lr: Optional[float] = None,
) -> np.ndarray:
    """The attacked state U_theta(rho); rho itself when no halving met the budget."""
    channel, _ = quantum_fgsm_channel(model, rho, y, budget, max_iter, lr)
    return channel.apply(as_matrix(rho))


# ---------------------------------------------------------------------
# Harness: attacks on whole datasets
# ---------------------------------------------------------------------


def _keep_better(
    model: ClassifierModel,
    clean: StateBatch,
    attacked: StateBatch,
    labels: np.ndarray,
    clean_losses: np.ndarray,
    reject: bool,
) -> Tuple[StateBatch, np.ndarray, np.ndarray]:
    losses = batch_losses(model, attacked, labels)
    if not reject:
        return attacked, losses, np.ones(clean.count, dtype=bool)
    accepted = losses >= clean_losses
    cols = np.where(accepted[clean.owners][None, :], attacked.columns, clean.columns)
    return clean.with_columns(cols), np.where(accepted, losses, clean_losses), accepted


def attack_batch(
    model: ClassifierModel,
    X: np.ndarray,
    labels: np.ndarray,
    cfg: AttackConfig,
    batch: Optional[StateBatch] = None,
) -> AttackOutcome:
    """
    Run the configured attack on every sample. With the rejection rule on, a
    sample whose loss would drop keeps its clean input, so the returned
    losses never fall below the clean ones.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = np.asarray(labels, dtype=int)
    clean = embed_batch(X, model.embedding) if batch is None else batch
    clean_losses = batch_losses(model, clean, labels)

    if cfg.epsilon == 0:
        return AttackOutcome(clean, clean_losses, clean_losses, inputs=X)

    if cfg.space is AttackSpace.CLASSICAL:
        X_adv = fgsm_inputs(model, X, labels, cfg)
        attacked = embed_batch(X_adv, model.embedding)
        chosen, losses, accepted = _keep_better(
            model, clean, attacked, labels, clean_losses, cfg.reject_worse
        )
        inputs = np.where(accepted[:, None], X_adv, X)
        return AttackOutcome(chosen, losses, clean_losses, inputs=inputs, accepted=accepted)

    thetas, iterations = quantum_fgsm_states(model, clean, labels, cfg, cfg.max_iter, cfg.step_size)
    attacked = _apply_channels(clean, thetas)
    chosen, losses, accepted = _keep_better(model, clean, attacked, labels, clean_losses, cfg.reject_worse)
    logger.debug(
        "[attack] quantum fgsm eps=%g: %d/%d identity fallbacks",
        cfg.epsilon,
        int(np.sum(iterations == cfg.max_iter)),
        clean.count,
    )
    return AttackOutcome(chosen, losses, clean_losses, iterations=iterations, accepted=accepted)


def adversarial_loss(
    model: ClassifierModel,
    sample: LabeledSample,
    budget: AttackBudget,
    attack_config: Optional[AttackConfig] = None,
) -> float:
    """Loss at the attack's output: a feasible point, so a lower bound on the inner max."""
    cfg = attack_config or AttackConfig(space=budget.space, p=budget.p, epsilon=budget.epsilon)
    cfg = cfg.model_copy(update={"space": budget.space, "p": budget.p, "epsilon": budget.epsilon})
    x = np.asarray(sample.x, dtype=float)[None, :]
    return float(attack_batch(model, x, np.array([sample.y]), cfg).losses[0])


def warm_started_losses(
    model: ClassifierModel,
    X: np.ndarray,
    labels: np.ndarray,
    epsilons: Sequence[float],
    cfg: AttackConfig,
) -> np.ndarray:
    """
    Adversarial losses over an increasing epsilon grid, shape (len(epsilons), m).
    The best point found at a smaller radius stays feasible at a larger one,
    so each row dominates the previous.
    """
    eps = np.asarray(epsilons, dtype=float)
    if np.any(np.diff(eps) < 0):
        raise DomainError("epsilon grid must be non-decreasing")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = np.asarray(labels, dtype=int)
    clean = embed_batch(X, model.embedding)
    best = batch_losses(model, clean, labels)
    out = np.zeros((eps.size, X.shape[0]))

    for row, e in enumerate(eps):
        outcome = attack_batch(model, X, labels, cfg.at_epsilon(e), batch=clean)
        best = np.maximum(best, outcome.losses)
        out[row] = best
    return out


# src/qadvlab/model.py
"""
Variational quantum classifier.

The observable is A_k = U_theta^dagger M_k U_theta with U_theta a strongly
entangling circuit and M_k a diagonal Pauli-Z measurement, so scores are
f_k(rho) = Tr(A_k rho). Binary models (K = 2) are trained with the sigmoid
loss 1 / (1 + exp(alpha * y~ * f)) where y~ = 1 - 2y; K >= 3 models use the
ramp loss on the multiclass margin.

Gradients are exact: parameter shift for circuit angles and for rotation
inputs, central differences for amplitude inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterator, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import expit

from .embeddings import (
    EmbeddingSpec,
    amplitude_columns,
    embed_batch,
    layer_inputs,
    rotation_columns,
)
from .errors import DomainError
from .qmath import as_matrix
from .settings import substream
from .simulator import (
    StateBatch,
    apply_circuit,
    circuit_unitary,
    density_batch,
    diagonal_expectations,
    z_diagonal,
)

PARAM_SHIFT = math.pi / 2
INPUT_SHIFT = math.pi / 4
# complex entries per simulation chunk
CHUNK_ELEMENTS = 1 << 21


class Measurement(str, Enum):
    Z_ALL = "z_all"
    Z_FIRST = "z_first"


class ModelConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    layers: int = Field(default=4, ge=1)
    measurement: Measurement = Measurement.Z_ALL
    num_classes: int = Field(default=2, ge=2)
    alpha: float = Field(default=10.0, gt=0)
    gamma: float = Field(default=1.0, gt=0)


@dataclass(frozen=True, eq=False)
class CircuitParams:
    angles: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.angles, dtype=float)
        if a.ndim != 3 or a.shape[2] != 3:
            raise DomainError(f"circuit angles must have shape (layers, n_qubits, 3), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DomainError("circuit angles contain NaN or infinite values")
        object.__setattr__(self, "angles", a)

    @property
    def layers(self) -> int:
        return int(self.angles.shape[0])

    @property
    def n_qubits(self) -> int:
        return int(self.angles.shape[1])

    @classmethod
    def zeros(cls, layers: int, n_qubits: int) -> "CircuitParams":
        return cls(np.zeros((layers, n_qubits, 3)))

    @classmethod
    def random(cls, rng: np.random.Generator, layers: int, n_qubits: int) -> "CircuitParams":
        return cls(rng.uniform(0.0, 2.0 * math.pi, size=(layers, n_qubits, 3)))


@dataclass(frozen=True, eq=False)
class LabeledSample:
    x: np.ndarray
    y: int


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    embedding: EmbeddingSpec
    params: CircuitParams
    measurement: Measurement = Measurement.Z_ALL
    num_classes: int = 2
    alpha: float = 10.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if self.params.n_qubits != self.embedding.n_qubits:
            raise DomainError(
                f"circuit acts on {self.params.n_qubits} qubits but the embedding "
                f"uses {self.embedding.n_qubits}"
            )
        if self.num_classes < 2:
            raise DomainError("num_classes must be >= 2")
        if self.num_classes > 2 and self.num_classes > self.n_qubits:
            raise DomainError(
                f"{self.num_classes} classes need as many qubits, model has {self.n_qubits}"
            )
        if self.alpha <= 0 or self.gamma <= 0:
            raise DomainError("alpha and gamma must be positive")

    @property
    def n_qubits(self) -> int:
        return self.embedding.n_qubits

    @property
    def dim(self) -> int:
        return self.embedding.hilbert_dim

    @property
    def angles(self) -> np.ndarray:
        return self.params.angles

    @property
    def is_binary(self) -> bool:
        return self.num_classes == 2

    def with_angles(self, angles: np.ndarray) -> "ClassifierModel":
        return replace(self, params=CircuitParams(angles))

    def with_embedding(self, embedding: EmbeddingSpec) -> "ClassifierModel":
        return replace(self, embedding=embedding)


def build_model(embedding: EmbeddingSpec, cfg: ModelConfig, seed: int) -> ClassifierModel:
    """Fresh classifier with angles uniform in [0, 2 pi) drawn from `seed`."""
    rng = substream(seed, "init")
    return ClassifierModel(
        embedding=embedding,
        params=CircuitParams.random(rng, cfg.layers, embedding.n_qubits),
        measurement=cfg.measurement,
        num_classes=cfg.num_classes,
        alpha=cfg.alpha,
        gamma=cfg.gamma,
    )


# ---------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------


def measurement_diagonal(model: ClassifierModel) -> np.ndarray:
    n = model.n_qubits
    if model.measurement is Measurement.Z_FIRST:
        return z_diagonal(n, 0)
    return np.sum([z_diagonal(n, q) for q in range(n)], axis=0)


def class_diagonals(model: ClassifierModel) -> np.ndarray:
    """(K, d_H) diagonals of M_k: (M, -M) for two classes, Z_k otherwise."""
    if model.is_binary:
        m = measurement_diagonal(model)
        return np.stack([m, -m])
    return np.stack([z_diagonal(model.n_qubits, k) for k in range(model.num_classes)])


def observable_norm(model: ClassifierModel, r: float) -> float:
    """b = ||M||_r of the binary measurement (unitary invariant, so also of A)."""
    mags = np.abs(measurement_diagonal(model))
    if math.isinf(r):
        return float(mags.max())
    return float(np.sum(mags**r) ** (1.0 / r))


def effective_observable(model: ClassifierModel, class_k: int = 0) -> np.ndarray:
    if not 0 <= class_k < model.num_classes:
        raise DomainError(f"class {class_k} out of range for K={model.num_classes}")
    u = circuit_unitary(model.angles)
    d = class_diagonals(model)[class_k]
    return u.conj().T @ (d[:, None] * u)


# ---------------------------------------------------------------------
# Scores
# ---------------------------------------------------------------------


def column_scores(model: ClassifierModel, columns: np.ndarray, angles: np.ndarray | None = None) -> np.ndarray:
    """<b| A_k |b> for every column b, shape (C, K). `angles` may be per column."""
    angles = model.angles if angles is None else angles
    evolved = apply_circuit(columns, angles)
    return diagonal_expectations(evolved, class_diagonals(model))


def _noise_offsets(model: ClassifierModel, noise: float) -> np.ndarray:
    return noise * class_diagonals(model).sum(axis=1)


def batch_scores(model: ClassifierModel, batch: StateBatch) -> np.ndarray:
    """Class scores (m, K) of every state in the batch."""
    if batch.dim != model.dim:
        raise DomainError(f"state dimension {batch.dim} does not match model d_H={model.dim}")
    raw = batch.sum_by_owner(column_scores(model, batch.columns))
    return batch.purity_weight * raw + _noise_offsets(model, batch.noise)


def input_scores(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    return batch_scores(model, embed_batch(X, model.embedding))


def scores(model: ClassifierModel, rho: Any) -> np.ndarray:
    """Tr(A_k rho) for every class k."""
    rho = as_matrix(rho)
    if rho.shape[0] != model.dim:
        raise DomainError(f"state dimension {rho.shape[0]} does not match model d_H={model.dim}")
    u = circuit_unitary(model.angles)
    evolved = u @ rho @ u.conj().T
    values = class_diagonals(model) @ np.diag(evolved)
    if np.max(np.abs(values.imag)) > 1e-10:
        raise DomainError(f"score has imaginary residue {np.max(np.abs(values.imag)):.3e}")
    return values.real


def score(model: ClassifierModel, rho: Any) -> float:
    """Binary score f = Tr(A rho) with A the class-0 observable."""
    return float(scores(model, rho)[0])


# ---------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------


def signed_labels(y: np.ndarray) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(y, dtype=float)


def sigmoid_loss(t: np.ndarray, alpha: float) -> np.ndarray:
    """phi(t) = 1 / (1 + exp(alpha t))."""
    return expit(-alpha * np.asarray(t, dtype=float))


def sigmoid_loss_slope(t: np.ndarray, alpha: float) -> np.ndarray:
    phi = sigmoid_loss(t, alpha)
    return -alpha * phi * (1.0 - phi)


def ramp_loss(t: np.ndarray, gamma: float) -> np.ndarray:
    return np.clip(1.0 - np.asarray(t, dtype=float) / gamma, 0.0, 1.0)


def ramp_loss_slope(t: np.ndarray, gamma: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.where((t > 0) & (t < gamma), -1.0 / gamma, 0.0)


def margins(class_scores: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """f_y - max_{k != y} f_k and the maximising competitor k."""
    labels = np.asarray(labels, dtype=int)
    rows = np.arange(class_scores.shape[0])
    own = class_scores[rows, labels]
    others = class_scores.copy()
    others[rows, labels] = -np.inf
    rival = np.argmax(others, axis=1)
    return own - others[rows, rival], rival


def _check_labels(model: ClassifierModel, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=int).reshape(-1)
    if np.any(labels < 0) or np.any(labels >= model.num_classes):
        raise DomainError(f"labels must lie in [0, {model.num_classes})")
    return labels


def losses_from_scores(model: ClassifierModel, class_scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    labels = _check_labels(model, labels)
    if model.is_binary:
        return sigmoid_loss(signed_labels(labels) * class_scores[:, 0], model.alpha)
    margin, _ = margins(class_scores, labels)
    return ramp_loss(margin, model.gamma)


def loss_score_weights(model: ClassifierModel, class_scores: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d loss / d f_k for every sample, shape (m, K)."""
    labels = _check_labels(model, labels)
    weights = np.zeros_like(class_scores)
    if model.is_binary:
        signed = signed_labels(labels)
        weights[:, 0] = sigmoid_loss_slope(signed * class_scores[:, 0], model.alpha) * signed
        return weights
    margin, rival = margins(class_scores, labels)
    slope = ramp_loss_slope(margin, model.gamma)
    rows = np.arange(labels.size)
    weights[rows, labels] += slope
    weights[rows, rival] -= slope
    return weights


def batch_losses(model: ClassifierModel, batch: StateBatch, labels: np.ndarray) -> np.ndarray:
    return losses_from_scores(model, batch_scores(model, batch), labels)


def input_losses(model: ClassifierModel, X: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return batch_losses(model, embed_batch(X, model.embedding), labels)


def binary_loss(model: ClassifierModel, sample: LabeledSample) -> float:
    if not model.is_binary:
        raise DomainError("binary_loss needs a two-class model")
    f = input_scores(model, np.asarray(sample.x, dtype=float)[None, :])
    return float(sigmoid_loss(signed_labels([sample.y]) * f[:, 0], model.alpha)[0])


def multiclass_loss(model: ClassifierModel, sample: LabeledSample) -> float:
    f = input_scores(model, np.asarray(sample.x, dtype=float)[None, :])
    margin, _ = margins(f, _check_labels(model, [sample.y]))
    return float(ramp_loss(margin, model.gamma)[0])


# ---------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------


def _blocks(total: int, per_block_columns: int, dim: int) -> Iterator[slice]:
    size = max(1, CHUNK_ELEMENTS // max(1, per_block_columns * dim))
    for start in range(0, total, size):
        yield slice(start, min(total, start + size))


def score_jacobian_params(model: ClassifierModel, batch: StateBatch) -> np.ndarray:
    """d f_k / d theta for every state, shape (m, K, layers, n, 3)."""
    base = model.angles
    n_params = base.size
    C = batch.columns.shape[1]
    K = model.num_classes
    jac = np.zeros((batch.count, K, n_params))

    for block in _blocks(n_params, 2 * C, batch.dim):
        idx = np.arange(block.start, block.stop)
        shifted = np.repeat(base.reshape(1, -1), 2 * idx.size, axis=0)
        shifted[np.arange(idx.size), idx] += PARAM_SHIFT
        shifted[idx.size + np.arange(idx.size), idx] -= PARAM_SHIFT
        shifted = shifted.reshape((-1,) + base.shape)

        cols = np.tile(batch.columns, (1, shifted.shape[0]))
        per_column = np.repeat(shifted, C, axis=0)
        raw = column_scores(model, cols, per_column).reshape(shifted.shape[0], C, K)
        per_state = np.stack([batch.sum_by_owner(r) for r in raw])
        plus, minus = per_state[: idx.size], per_state[idx.size :]
        jac[:, :, idx] = np.transpose(0.5 * (plus - minus), (1, 2, 0))

    jac *= batch.purity_weight
    return jac.reshape((batch.count, K) + base.shape)


def loss_grad_params(model: ClassifierModel, batch: StateBatch, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(per-sample losses, gradient of the mean loss w.r.t. the angles)."""
    class_scores = batch_scores(model, batch)
    losses = losses_from_scores(model, class_scores, labels)
    weights = loss_score_weights(model, class_scores, labels)
    jac = score_jacobian_params(model, batch)
    grad = np.einsum("mk,mk...->...", weights, jac) / batch.count
    return losses, grad


def grad_params(model: ClassifierModel, rho: Any, sample: LabeledSample) -> np.ndarray:
    """Gradient of the sample's loss at state rho w.r.t. every circuit angle."""
    batch = density_batch([as_matrix(rho)])
    _, grad = loss_grad_params(model, batch, np.array([sample.y]))
    return grad


def _rotation_input_jacobian(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    spec = model.embedding
    XL = layer_inputs(X, spec)
    m, uploads, d_eff = XL.shape
    n_shift = uploads * d_eff
    K = model.num_classes
    jac = np.zeros((m, K, d_eff))

    for block in _blocks(m, 2 * n_shift, spec.hilbert_dim):
        xl = XL[block]
        rows = xl.shape[0]
        variants = np.repeat(xl[:, None], 2 * n_shift, axis=1)
        for s in range(n_shift):
            layer, j = divmod(s, d_eff)
            variants[:, s, layer, j] += INPUT_SHIFT
            variants[:, n_shift + s, layer, j] -= INPUT_SHIFT
        cols = rotation_columns(variants.reshape(-1, uploads, d_eff), spec)
        f = column_scores(model, cols).reshape(rows, 2, uploads, d_eff, K)
        diff = (f[:, 0] - f[:, 1]).sum(axis=1)
        jac[block] = np.transpose(diff, (0, 2, 1))

    return jac[:, :, : spec.input_dim]


def _amplitude_input_jacobian(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    spec = model.embedding
    m, d = X.shape
    K = model.num_classes
    jac = np.zeros((m, K, d))
    h = 1e-6 * np.maximum(1.0, np.abs(X))

    for block in _blocks(m, 2 * d, spec.hilbert_dim):
        x = X[block]
        hb = h[block]
        rows = x.shape[0]
        eye = np.eye(d)
        plus = x[:, None, :] + hb[:, :, None] * eye[None]
        minus = x[:, None, :] - hb[:, :, None] * eye[None]
        variants = np.concatenate([plus, minus], axis=1).reshape(-1, d)
        f = column_scores(model, amplitude_columns(variants, spec)).reshape(rows, 2, d, K)
        diff = (f[:, 0] - f[:, 1]) / (2.0 * hb[:, :, None])
        jac[block] = np.transpose(diff, (0, 2, 1))

    return jac


def score_jacobian_inputs(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    """d f_k / d x_j for every row of X, shape (m, K, d)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if model.embedding.is_rotation:
        jac = _rotation_input_jacobian(model, X)
    else:
        jac = _amplitude_input_jacobian(model, X)
    return (1.0 - model.embedding.depolarize_lambda * model.dim) * jac


def loss_grad_inputs(model: ClassifierModel, X: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(per-sample losses, per-sample loss gradients w.r.t. x, shape (m, d))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    class_scores = input_scores(model, X)
    losses = losses_from_scores(model, class_scores, labels)
    weights = loss_score_weights(model, class_scores, labels)
    grads = np.einsum("mk,mkd->md", weights, score_jacobian_inputs(model, X))
    return losses, grads


def grad_input(model: ClassifierModel, sample: LabeledSample) -> np.ndarray:
    _, grads = loss_grad_inputs(model, np.asarray(sample.x, dtype=float)[None, :], np.array([sample.y]))
    return grads[0]

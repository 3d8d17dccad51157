# src/qadvlab/embeddings.py
"""
Quantum feature maps x -> rho(x) and the global depolarizing channel.

Rotation families (angle, dense and their re-uploading variants) are built
as statevectors on n qubits, qubit 0 first. Amplitude embedding writes the
normalised, zero-padded features straight into the amplitudes.
"""
from __future__ import annotations

import logging
import math
from enum import Enum
from functools import lru_cache
from typing import Any, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import DimensionCapExceeded, DomainError
from .qmath import pure_density, random_unitary, validate_density
from .settings import TOL
from .simulator import StateBatch, apply_1q, pure_batch, ry_matrices, rz_matrices

logger = logging.getLogger(__name__)


class EmbeddingFamily(str, Enum):
    AMPLITUDE = "amplitude"
    ANGLE = "angle"
    DENSE = "dense"
    LLAYER_ANGLE = "llayer_angle"
    LLAYER_DENSE = "llayer_dense"


_ANGLE_FAMILIES = {EmbeddingFamily.ANGLE, EmbeddingFamily.LLAYER_ANGLE}
_DENSE_FAMILIES = {EmbeddingFamily.DENSE, EmbeddingFamily.LLAYER_DENSE}
_LAYERED_FAMILIES = {EmbeddingFamily.LLAYER_ANGLE, EmbeddingFamily.LLAYER_DENSE}


class EmbeddingSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", use_enum_values=False)

    family: EmbeddingFamily = EmbeddingFamily.ANGLE
    input_dim: int = Field(default=2, ge=1)
    layers: int = Field(default=1, ge=1)
    fixed_unitary_seed: int = Field(default=0, ge=0)
    depolarize_lambda: float = Field(default=0.0, ge=0.0)

    @model_validator(mode="after")
    def _check(self) -> "EmbeddingSpec":
        if self.family not in _LAYERED_FAMILIES and self.layers != 1:
            raise ValueError(f"family {self.family.value} takes layers = 1, got {self.layers}")
        if self.depolarize_lambda * self.hilbert_dim > 1.0 + 1e-12:
            raise ValueError(
                f"depolarize_lambda={self.depolarize_lambda} exceeds 1/d_H = 1/{self.hilbert_dim}"
            )
        return self

    @property
    def is_rotation(self) -> bool:
        return self.family is not EmbeddingFamily.AMPLITUDE

    @property
    def is_dense(self) -> bool:
        return self.family in _DENSE_FAMILIES

    @property
    def effective_dim(self) -> int:
        """Feature count after padding (dense families pad odd d with a zero)."""
        if self.is_dense:
            return self.input_dim + self.input_dim % 2
        return self.input_dim

    @property
    def n_qubits(self) -> int:
        if self.family is EmbeddingFamily.AMPLITUDE:
            return max(1, math.ceil(math.log2(self.input_dim)))
        if self.is_dense:
            return self.effective_dim // 2
        return self.input_dim

    @property
    def hilbert_dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def uploads(self) -> int:
        """How many times each feature is encoded."""
        return self.layers if self.is_rotation else 1


def _features(x: Any, d: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.size == 0:
        raise DomainError("empty feature vector")
    if d is not None and v.size != d:
        raise DomainError(f"expected {d} features, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise DomainError("feature vector has NaN or infinite entries")
    return v


def _check_caps(spec: EmbeddingSpec) -> None:
    if spec.n_qubits > TOL.qubit_cap:
        raise DimensionCapExceeded(
            f"{spec.family.value} embedding of d={spec.input_dim} needs {spec.n_qubits} qubits "
            f"(cap {TOL.qubit_cap})"
        )
    if spec.hilbert_dim > TOL.dimension_cap:
        raise DimensionCapExceeded(f"d_H={spec.hilbert_dim} exceeds cap {TOL.dimension_cap}")


@lru_cache(maxsize=64)
def _fixed_unitaries(dim: int, layers: int, seed: int) -> Tuple[np.ndarray, ...]:
    rng = np.random.default_rng(seed)
    out = tuple(random_unitary(rng, dim) for _ in range(layers))
    for v in out:
        v.setflags(write=False)
    logger.debug("[embed] drew %d fixed unitaries, d_H=%d, seed=%d", layers, dim, seed)
    return out


def fixed_unitaries(spec: EmbeddingSpec) -> List[np.ndarray]:
    """
    V^(1..L) for the re-uploading families, drawn from fixed_unitary_seed.
    A single layer uses V = I so that L = 1 is the plain rotation embedding.
    """
    if spec.layers == 1 or not spec.is_rotation:
        return [np.eye(spec.hilbert_dim, dtype=complex)]
    return list(_fixed_unitaries(spec.hilbert_dim, spec.layers, spec.fixed_unitary_seed))


# ---------------------------------------------------------------------
# Statevector construction (batched over columns)
# ---------------------------------------------------------------------


def amplitude_columns(X: np.ndarray, spec: EmbeddingSpec) -> np.ndarray:
    """Normalised, zero-padded amplitude vectors as columns (d_H, C)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms <= 1e-12):
        raise DomainError("amplitude embedding of a (numerically) zero vector")
    cols = np.zeros((spec.hilbert_dim, X.shape[0]), dtype=complex)
    cols[: X.shape[1], :] = (X / norms[:, None]).T
    return cols


def layer_inputs(X: np.ndarray, spec: EmbeddingSpec) -> np.ndarray:
    """
    Per-upload copies of the padded features, shape (C, L, d_eff). Shifting
    one copy moves a single occurrence of a feature in the circuit.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    padded = np.zeros((X.shape[0], spec.effective_dim))
    padded[:, : X.shape[1]] = X
    return np.repeat(padded[:, None, :], spec.uploads, axis=1)


def _encode_layer(states: np.ndarray, feats: np.ndarray, spec: EmbeddingSpec) -> np.ndarray:
    """U(x) on every column; feats is (C, d_eff)."""
    n = spec.n_qubits
    if spec.is_dense:
        for q in range(n):
            states = apply_1q(states, ry_matrices(2.0 * feats[:, 2 * q]), q, n)
            states = apply_1q(states, rz_matrices(2.0 * feats[:, 2 * q + 1]), q, n)
    else:
        for q in range(n):
            states = apply_1q(states, ry_matrices(2.0 * feats[:, q]), q, n)
    return states


def rotation_columns(XL: np.ndarray, spec: EmbeddingSpec) -> np.ndarray:
    """|psi> = V^(L) U(x_L) ... V^(1) U(x_1) |0>, one column per row of XL."""
    _check_caps(spec)
    count = XL.shape[0]
    states = np.zeros((spec.hilbert_dim, count), dtype=complex)
    states[0, :] = 1.0
    unitaries = fixed_unitaries(spec)
    for layer in range(spec.uploads):
        states = _encode_layer(states, XL[:, layer, :], spec)
        if spec.layers > 1:
            states = unitaries[layer] @ states
    return states


def embed_columns(X: np.ndarray, spec: EmbeddingSpec) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec.input_dim:
        raise DomainError(f"expected {spec.input_dim} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise DomainError("feature matrix has NaN or infinite entries")
    if spec.is_rotation:
        return rotation_columns(layer_inputs(X, spec), spec)
    _check_caps(spec)
    return amplitude_columns(X, spec)


def embed_batch(X: np.ndarray, spec: EmbeddingSpec) -> StateBatch:
    """Every row of X embedded, depolarizing noise carried as the batch noise level."""
    return pure_batch(embed_columns(X, spec), noise=spec.depolarize_lambda)


def embed_state(x: Any, spec: EmbeddingSpec) -> np.ndarray:
    """Pure statevector of x before any noise."""
    return embed_columns(_features(x, spec.input_dim)[None, :], spec)[:, 0]


def embed(x: Any, spec: EmbeddingSpec) -> np.ndarray:
    rho = pure_density(embed_state(x, spec))
    if spec.depolarize_lambda > 0:
        rho = depolarize(rho, spec.depolarize_lambda)
    return rho


# ---------------------------------------------------------------------
# Single-family entry points
# ---------------------------------------------------------------------


def amplitude_embed(x: Any) -> np.ndarray:
    v = _features(x)
    return embed(v, EmbeddingSpec(family=EmbeddingFamily.AMPLITUDE, input_dim=v.size))


def angle_embed(x: Any) -> np.ndarray:
    v = _features(x)
    return embed(v, EmbeddingSpec(family=EmbeddingFamily.ANGLE, input_dim=v.size))


def dense_embed(x: Any) -> np.ndarray:
    v = _features(x)
    return embed(v, EmbeddingSpec(family=EmbeddingFamily.DENSE, input_dim=v.size))


def llayer_embed(x: Any, spec: EmbeddingSpec) -> np.ndarray:
    if spec.family not in _LAYERED_FAMILIES:
        raise DomainError(f"llayer_embed needs a re-uploading family, got {spec.family.value}")
    return embed(x, spec)


# ---------------------------------------------------------------------
# Channels and distances
# ---------------------------------------------------------------------


def depolarize(rho: Any, lambda_min: float) -> np.ndarray:
    """
    (1 - lambda_min * d_H) rho + lambda_min I. Every eigenvalue of the result
    is at least lambda_min.
    """
    rho = np.asarray(rho, dtype=complex)
    dim = rho.shape[0]
    if lambda_min < 0 or lambda_min * dim > 1.0 + 1e-12:
        raise DomainError(f"lambda_min={lambda_min} outside [0, 1/{dim}]")
    if lambda_min == 0:
        return rho.copy()
    return (1.0 - lambda_min * dim) * rho + lambda_min * np.eye(dim)


def _purity(rho: np.ndarray) -> float:
    return float(np.real(np.sum(rho * rho.T)))


def pure_trace_distance(rho: Any, rho_other: Any) -> float:
    """||rho - rho'||_1 for pure states, from the overlap Tr(rho rho')."""
    a = validate_density(rho)
    b = validate_density(rho_other)
    for m in (a, b):
        if abs(_purity(m) - 1.0) > TOL.purity:
            raise DomainError(f"state is not pure (purity {_purity(m):.10f})")
    overlap = float(np.real(np.sum(a * b.T)))
    return 2.0 * math.sqrt(max(0.0, 1.0 - overlap))

# src/qadvlab/simulator.py
"""
Batched statevector simulation.

States are stored as columns of a (2**n, C) complex array, qubit 0 being the
most significant bit (the `np.kron` ordering used by qmath). A gate is applied
to every column at once; single-qubit gates may also carry one 2x2 matrix per
column, which is how shifted parameters are evaluated in a single pass.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List

import numpy as np

from .errors import DomainError
from .qmath import psd_factor


# ---------------------------------------------------------------------
# Gate matrices, vectorised over leading axes
# ---------------------------------------------------------------------


def ry_matrices(theta: np.ndarray) -> np.ndarray:
    """RY(t) = exp(-i t Y / 2), shape (..., 2, 2)."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    out = np.empty(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    return out


def rz_matrices(theta: np.ndarray) -> np.ndarray:
    """RZ(t) = exp(-i t Z / 2), shape (..., 2, 2)."""
    theta = np.asarray(theta, dtype=float)
    out = np.zeros(theta.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.exp(-0.5j * theta)
    out[..., 1, 1] = np.exp(0.5j * theta)
    return out


def rot_matrices(angles: np.ndarray) -> np.ndarray:
    """
    Rot(a, b, g) = RZ(a) RY(b) RZ(g) for angles[..., 0:3] = (a, b, g).
    """
    angles = np.asarray(angles, dtype=float)
    a, b, g = angles[..., 0], angles[..., 1], angles[..., 2]
    c, s = np.cos(b / 2), np.sin(b / 2)
    plus = np.exp(-0.5j * (a + g))
    minus = np.exp(-0.5j * (a - g))
    out = np.empty(angles.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = plus * c
    out[..., 0, 1] = -minus * s
    out[..., 1, 0] = np.conj(minus) * s
    out[..., 1, 1] = np.conj(plus) * c
    return out


# ---------------------------------------------------------------------
# Gate application
# ---------------------------------------------------------------------


def num_qubits(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise DomainError(f"state dimension {dim} is not a power of two >= 2")
    return n


def apply_1q(states: np.ndarray, mat: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """
    Apply a single-qubit gate on `qubit` to every column of `states`.
    `mat` is one (2, 2) matrix or a stack (C, 2, 2), one per column.
    """
    cols = states.shape[1]
    psi = states.reshape(1 << qubit, 2, 1 << (n - qubit - 1), cols)
    if mat.ndim == 2:
        out = np.einsum("ab,ibjc->iajc", mat, psi)
    else:
        out = np.einsum("cab,ibjc->iajc", mat, psi)
    return out.reshape(-1, cols)


def apply_cnot(states: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    cols = states.shape[1]
    psi = states.reshape([2] * n + [cols]).copy()
    idx = [slice(None)] * (n + 1)
    idx[control] = 1
    sub = psi[tuple(idx)]
    axis = target if target < control else target - 1
    psi[tuple(idx)] = np.flip(sub, axis=axis).copy()
    return psi.reshape(-1, cols)


def apply_rot_layer(states: np.ndarray, angles: np.ndarray, n: int) -> np.ndarray:
    """
    One Rot gate per qubit. `angles` is (n, 3), or (C, n, 3) for per-column
    parameters.
    """
    mats = rot_matrices(angles)
    for q in range(n):
        mat = mats[q] if mats.ndim == 3 else mats[:, q]
        states = apply_1q(states, mat, q, n)
    return states


def apply_entangler_ring(states: np.ndarray, n: int) -> np.ndarray:
    if n < 2:
        return states
    for q in range(n):
        states = apply_cnot(states, q, (q + 1) % n, n)
    return states


def apply_circuit(states: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """
    Strongly entangling circuit: for each layer a Rot on every qubit, then
    the CNOT ring. `angles` is (L, n, 3) or per-column (C, L, n, 3).
    """
    per_column = angles.ndim == 4
    layers, n = angles.shape[-3], angles.shape[-2]
    for layer in range(layers):
        layer_angles = angles[:, layer] if per_column else angles[layer]
        states = apply_rot_layer(states, layer_angles, n)
        states = apply_entangler_ring(states, n)
    return states


def circuit_unitary(angles: np.ndarray) -> np.ndarray:
    n = angles.shape[-2]
    return apply_circuit(np.eye(1 << n, dtype=complex), angles)


def z_diagonal(n: int, qubit: int) -> np.ndarray:
    """Diagonal of Z acting on `qubit` of an n-qubit register."""
    bits = (np.arange(1 << n) >> (n - 1 - qubit)) & 1
    return 1.0 - 2.0 * bits


def diagonal_expectations(states: np.ndarray, diagonals: np.ndarray) -> np.ndarray:
    """<psi_c| D_k |psi_c> for every column c and diagonal D_k: shape (C, K)."""
    probs = np.abs(states) ** 2
    return probs.T @ diagonals.T


# ---------------------------------------------------------------------
# State batches
# ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StateBatch:
    """
    m density matrices written as

        rho_i = (1 - noise * dim) * sum_{c: owners[c] == i} b_c b_c^dagger + noise * I

    Embedded pure states have one column each; general densities are stored
    through a PSD factor with `noise` 0.
    """

    columns: np.ndarray
    owners: np.ndarray
    count: int
    noise: float = 0.0

    @property
    def dim(self) -> int:
        return int(self.columns.shape[0])

    @property
    def n_qubits(self) -> int:
        return num_qubits(self.dim)

    @property
    def purity_weight(self) -> float:
        return 1.0 - self.noise * self.dim

    def with_columns(self, columns: np.ndarray) -> "StateBatch":
        return StateBatch(columns=columns, owners=self.owners, count=self.count, noise=self.noise)

    def sum_by_owner(self, per_column: np.ndarray) -> np.ndarray:
        """Sum a (C, ...) array over the columns of each state."""
        out = np.zeros((self.count,) + per_column.shape[1:], dtype=per_column.dtype)
        np.add.at(out, self.owners, per_column)
        return out

    def density(self, i: int) -> np.ndarray:
        cols = self.columns[:, self.owners == i]
        rho = self.purity_weight * (cols @ cols.conj().T)
        if self.noise:
            rho = rho + self.noise * np.eye(self.dim)
        return rho

    def densities(self) -> np.ndarray:
        return np.stack([self.density(i) for i in range(self.count)])

    def select(self, indices: np.ndarray) -> "StateBatch":
        """Sub-batch of the given states, renumbered 0..len(indices)-1."""
        indices = np.asarray(indices, dtype=int)
        remap = -np.ones(self.count, dtype=int)
        remap[indices] = np.arange(indices.size)
        keep = np.isin(self.owners, indices)
        return StateBatch(
            columns=self.columns[:, keep],
            owners=remap[self.owners[keep]],
            count=int(indices.size),
            noise=self.noise,
        )


def pure_batch(columns: np.ndarray, noise: float = 0.0) -> StateBatch:
    count = int(columns.shape[1])
    return StateBatch(columns=columns, owners=np.arange(count), count=count, noise=noise)


def merge_batches(batches: List[StateBatch]) -> StateBatch:
    """Concatenate batches that share `noise` and dimension."""
    if not batches:
        raise DomainError("cannot merge an empty list of state batches")
    noise = batches[0].noise
    offset = 0
    cols, owners = [], []
    for b in batches:
        if b.noise != noise or b.dim != batches[0].dim:
            raise DomainError("state batches differ in noise level or dimension")
        cols.append(b.columns)
        owners.append(b.owners + offset)
        offset += b.count
    return StateBatch(
        columns=np.concatenate(cols, axis=1),
        owners=np.concatenate(owners),
        count=offset,
        noise=noise,
    )


def density_batch(rhos: Iterable[np.ndarray]) -> StateBatch:
    """Batch of arbitrary density matrices, each stored through its PSD factor."""
    cols, owners = [], []
    for i, rho in enumerate(rhos):
        b = psd_factor(rho)
        cols.append(b)
        owners.append(np.full(b.shape[1], i))
    if not cols:
        raise DomainError("no density matrices given")
    return StateBatch(
        columns=np.concatenate(cols, axis=1),
        owners=np.concatenate(owners),
        count=len(cols),
    )

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qadvlab.errors import DomainError
from qadvlab.qmath import kron_all, random_density
from qadvlab.simulator import (
    apply_1q,
    apply_circuit,
    apply_cnot,
    circuit_unitary,
    density_batch,
    merge_batches,
    num_qubits,
    pure_batch,
    rot_matrices,
    ry_matrices,
    rz_matrices,
    z_diagonal,
)


def test_rot_is_rz_ry_rz(rng):
    angles = rng.uniform(0, 2 * np.pi, size=3)
    want = rz_matrices(angles[0]) @ ry_matrices(angles[1]) @ rz_matrices(angles[2])
    assert_allclose(rot_matrices(angles), want, atol=1e-12)


def test_single_qubit_gate_acts_on_msb_first(rng):
    n = 3
    mat = rot_matrices(rng.uniform(size=3))
    states = rng.normal(size=(8, 2)) + 1j * rng.normal(size=(8, 2))
    for q in range(n):
        factors = [np.eye(2)] * n
        factors[q] = mat
        assert_allclose(apply_1q(states, mat, q, n), kron_all(factors) @ states, atol=1e-12)


def test_per_column_gates(rng):
    thetas = rng.uniform(size=4)
    states = np.zeros((2, 4), dtype=complex)
    states[0] = 1.0
    out = apply_1q(states, ry_matrices(thetas), 0, 1)
    assert_allclose(out[1].real, np.sin(thetas / 2), atol=1e-12)


def test_cnot_flips_target_when_control_set():
    states = np.eye(4, dtype=complex)
    out = apply_cnot(states, 0, 1, 2)
    # |10> -> |11>, |11> -> |10>
    assert_allclose(out, np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]), atol=0)


def test_circuit_unitary_is_unitary(rng):
    u = circuit_unitary(rng.uniform(0, 2 * np.pi, size=(3, 3, 3)))
    assert_allclose(u.conj().T @ u, np.eye(8), atol=1e-12)


def test_per_column_angles_match_shared(rng):
    angles = rng.uniform(size=(2, 2, 3))
    states = rng.normal(size=(4, 3)) + 0j
    shared = apply_circuit(states, angles)
    per_column = apply_circuit(states, np.repeat(angles[None], 3, axis=0))
    assert_allclose(shared, per_column, atol=1e-12)


def test_z_diagonal():
    assert_allclose(z_diagonal(2, 0), [1, 1, -1, -1])
    assert_allclose(z_diagonal(2, 1), [1, -1, 1, -1])


def test_num_qubits_rejects_non_powers():
    assert num_qubits(8) == 3
    with pytest.raises(DomainError):
        num_qubits(6)


def test_density_batch_reconstructs_states(rng):
    rhos = [random_density(rng, 4), random_density(rng, 4, rank=1)]
    batch = density_batch(rhos)
    assert batch.count == 2
    for i, rho in enumerate(rhos):
        assert_allclose(batch.density(i), rho, atol=1e-12)


def test_noisy_pure_batch_density():
    batch = pure_batch(np.array([[1.0], [0.0]], dtype=complex), noise=0.1)
    assert_allclose(batch.density(0), np.diag([0.9, 0.1]), atol=1e-12)


def test_select_and_merge(rng):
    batch = density_batch([random_density(rng, 2) for _ in range(3)])
    sub = batch.select(np.array([2, 0]))
    assert sub.count == 2
    assert_allclose(sub.density(0), batch.density(2), atol=1e-12)
    merged = merge_batches([sub, batch])
    assert merged.count == 5
    assert_allclose(merged.density(3), batch.density(1), atol=1e-12)
    with pytest.raises(DomainError):
        merge_batches([batch, pure_batch(np.eye(2, dtype=complex), noise=0.1)])

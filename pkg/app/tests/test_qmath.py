import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from qadvlab.errors import (
    DimensionCapExceeded,
    DomainError,
    HermiticityViolation,
    NegativeSpectrumError,
    PsdViolation,
    TraceViolation,
    UnsupportedOrder,
)
from qadvlab.qmath import (
    INF,
    PAULI_X,
    PAULI_Z,
    dual_order,
    eigh,
    holder_extremizer,
    kron,
    parse_order,
    psd_factor,
    psd_sqrt,
    pure_density,
    random_density,
    random_hermitian,
    random_unitary,
    schatten_norm,
    trace_product,
    validate_density,
)


@pytest.mark.parametrize("r", [1.0, 1.5, 2.0, 3.0, INF])
def test_schatten_norm_matches_eigenvalue_formula(rng, r):
    for _ in range(20):
        m = random_hermitian(rng, int(rng.integers(1, 9)))
        lam = np.abs(np.linalg.eigvalsh(m))
        want = lam.max() if math.isinf(r) else np.sum(lam**r) ** (1.0 / r)
        assert schatten_norm(m, r) == pytest.approx(want, rel=1e-10)


def test_schatten_norms_are_monotone_in_order(rng):
    m = random_hermitian(rng, 6)
    values = [schatten_norm(m, r) for r in (1.0, 1.5, 2.0, 4.0, INF)]
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))


def test_schatten_two_is_frobenius(rng):
    m = random_hermitian(rng, 5)
    assert schatten_norm(m, 2) == pytest.approx(np.linalg.norm(m), rel=1e-12)


def test_parse_order_accepts_infinity_spellings():
    for text in ("inf", "Infinity", "∞", " INF "):
        assert parse_order(text) == INF
    assert parse_order(2) == 2.0
    with pytest.raises(UnsupportedOrder):
        parse_order(0.5)
    with pytest.raises(UnsupportedOrder):
        parse_order("abc")


def test_dual_order():
    assert dual_order(1) == INF
    assert dual_order("inf") == 1.0
    assert dual_order(2) == 2.0
    assert dual_order(3) == pytest.approx(1.5)


@pytest.mark.parametrize("r", [1.0, 2.0, 3.0, INF])
def test_holder_extremizer_attains_dual_norm(rng, r):
    for _ in range(10):
        m = random_hermitian(rng, 4)
        b = float(rng.uniform(0.5, 2.0))
        a = holder_extremizer(m, r, b)
        assert schatten_norm(a, r) == pytest.approx(b, rel=1e-9)
        assert trace_product(a, m).real == pytest.approx(b * schatten_norm(m, dual_order(r)), rel=1e-9)


def test_holder_extremizer_splits_ties_at_order_one():
    a = holder_extremizer(np.diag([1.0, -1.0]), 1.0, 1.0)
    assert_allclose(a, np.diag([0.5, -0.5]), atol=1e-12)


def test_holder_extremizer_rejects_zero_matrix():
    with pytest.raises(DomainError):
        holder_extremizer(np.zeros((2, 2)), 2.0, 1.0)


def test_validate_density_reports_first_failure():
    with pytest.raises(HermiticityViolation):
        validate_density(np.array([[0.5, 1.0], [0.0, 0.5]]))
    with pytest.raises(TraceViolation):
        validate_density(np.eye(2))
    with pytest.raises(PsdViolation) as info:
        validate_density(np.diag([1.5, -0.5]))
    assert info.value.magnitude == pytest.approx(0.5)


def test_validate_density_accepts_random_states(rng):
    for dim in (2, 3, 8):
        validate_density(random_density(rng, dim))
        validate_density(random_density(rng, dim, rank=1))


def test_eigh_rejects_non_hermitian():
    with pytest.raises(HermiticityViolation):
        eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_psd_sqrt_squares_back(rng):
    rho = random_density(rng, 5)
    root = psd_sqrt(rho)
    assert_allclose(root @ root, rho, atol=1e-12)


def test_psd_sqrt_refuses_negative_spectrum():
    with pytest.raises(NegativeSpectrumError):
        psd_sqrt(np.diag([1.0, -1e-3]))


def test_psd_factor_of_pure_state_has_one_column():
    psi = np.array([1.0, 1j]) / math.sqrt(2)
    b = psd_factor(pure_density(psi))
    assert b.shape == (2, 1)
    assert_allclose(b @ b.conj().T, pure_density(psi), atol=1e-12)


def test_kron_ordering_and_cap():
    assert_allclose(kron(PAULI_Z, np.eye(2)), np.diag([1, 1, -1, -1]))
    assert_allclose(kron(PAULI_X, PAULI_Z), np.kron(PAULI_X, PAULI_Z))
    with pytest.raises(DimensionCapExceeded):
        kron(np.eye(64), np.eye(32))


def test_random_unitary_is_unitary_and_reproducible():
    u1 = random_unitary(np.random.default_rng(5), 4)
    u2 = random_unitary(np.random.default_rng(5), 4)
    assert_allclose(u1.conj().T @ u1, np.eye(4), atol=1e-12)
    assert np.array_equal(u1, u2)

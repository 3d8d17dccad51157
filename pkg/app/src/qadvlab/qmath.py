# src/qadvlab/qmath.py
"""
Dense complex-Hermitian linear algebra shared by every other module:
Schatten norms, Hölder extremizers, density-matrix validation and the
Kronecker assembly used by the embeddings.

Matrices are plain `numpy.ndarray` of dtype complex128. Nothing here mutates
its inputs.
"""
from __future__ import annotations

import math
from typing import Annotated, Any, Tuple, Union

import numpy as np
from pydantic import BeforeValidator, PlainSerializer

from .errors import (
    DimensionCapExceeded,
    DomainError,
    HermiticityViolation,
    NegativeSpectrumError,
    PsdViolation,
    TraceViolation,
    UnsupportedOrder,
)
from .settings import TOL

INF = math.inf

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


# ---------------------------------------------------------------------
# Schatten orders
# ---------------------------------------------------------------------


def parse_order(value: Any) -> float:
    """
    Accept 1.5, 2, "inf", "Infinity", "∞" and return a float >= 1
    (math.inf for the infinite order).
    """
    if isinstance(value, str):
        text = value.strip().lower()
        if text in {"inf", "infinity", "∞", "+inf"}:
            return INF
        try:
            value = float(text)
        except ValueError as e:
            raise UnsupportedOrder(f"not a norm order: {value!r}") from e
    order = float(value)
    if math.isnan(order) or order < 1.0:
        raise UnsupportedOrder(f"norm order must be >= 1, got {value!r}")
    return order


def _order_out(value: float) -> Union[float, str]:
    return "inf" if math.isinf(value) else value


# Config-facing Schatten / l_p order: numbers or "inf" in JSON.
SchattenOrder = Annotated[float, BeforeValidator(parse_order), PlainSerializer(_order_out)]


def inverse_order(r: float) -> float:
    """1/r with 1/inf = 0."""
    return 0.0 if math.isinf(r) else 1.0 / r


def dual_order(r: float) -> float:
    """Hölder conjugate r/(r-1); 1 <-> inf."""
    r = parse_order(r)
    if r == 1.0:
        return INF
    if math.isinf(r):
        return 1.0
    return r / (r - 1.0)


# ---------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------


def as_matrix(values: Any) -> np.ndarray:
    """Square, finite complex matrix or DomainError."""
    m = np.asarray(values, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DomainError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DomainError("matrix has NaN or infinite entries")
    return m


def hermiticity_error(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - m.conj().T)))


def require_hermitian(m: Any, tol: float | None = None) -> np.ndarray:
    """Return `m` as a complex matrix if it is Hermitian within `tol`."""
    m = as_matrix(m)
    tol = TOL.hermitian if tol is None else tol
    err = hermiticity_error(m)
    if err > tol:
        raise HermiticityViolation(err, "symmetrize explicitly before calling")
    return m


def symmetrize(m: Any) -> np.ndarray:
    m = as_matrix(m)
    return 0.5 * (m + m.conj().T)


def validate_density(m: Any, tol: float | None = None) -> np.ndarray:
    """
    Check the three density-matrix invariants in order (Hermitian, unit
    trace, PSD) and return the matrix. The first failure is raised with its
    violation magnitude.
    """
    m = as_matrix(m)
    herm_tol = TOL.hermitian if tol is None else tol
    trace_tol = TOL.trace if tol is None else tol
    psd_tol = TOL.psd if tol is None else tol

    herm_err = hermiticity_error(m)
    if herm_err > herm_tol:
        raise HermiticityViolation(herm_err)

    trace_err = abs(np.trace(m) - 1.0)
    if trace_err > trace_tol:
        raise TraceViolation(trace_err)

    lam_min = float(np.linalg.eigvalsh(symmetrize(m))[0])
    if lam_min < -psd_tol:
        raise PsdViolation(-lam_min)
    return m


# ---------------------------------------------------------------------
# Spectra and norms
# ---------------------------------------------------------------------


def eigh(m: Any) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a Hermitian matrix: (ascending eigenvalues,
    unitary eigenvector columns). Non-Hermitian input is rejected, never
    silently symmetrized.
    """
    m = require_hermitian(m)
    vals, vecs = np.linalg.eigh(m)
    return vals, vecs


def eigvalsh(m: Any) -> np.ndarray:
    return np.linalg.eigvalsh(require_hermitian(m))


def schatten_norm(m: Any, r: float) -> float:
    """(sum |λ_i|^r)^(1/r) for Hermitian `m`; max |λ_i| at r = inf."""
    r = parse_order(r)
    mags = np.abs(eigvalsh(m))
    return _schatten_from_magnitudes(mags, r)


def _schatten_from_magnitudes(mags: np.ndarray, r: float) -> float:
    if mags.size == 0:
        return 0.0
    if math.isinf(r):
        return float(np.max(mags))
    if r == 1.0:
        return float(math.fsum(mags))
    top = float(np.max(mags))
    if top == 0.0:
        return 0.0
    # scale first so |λ|^r does not overflow for large r
    scaled = mags / top
    return top * float(math.fsum(scaled**r)) ** (1.0 / r)


def trace_product(a: np.ndarray, b: np.ndarray) -> complex:
    """Tr(A B) without forming the product."""
    return complex(np.sum(a * b.T))


def holder_extremizer(m: Any, r: float, b: float) -> np.ndarray:
    """
    Hermitian A with ||A||_r = b attaining Tr(A M) = b ||M||_{r/(r-1)}.

    A shares M's eigenbasis. At r = 1 the weight is spread uniformly over
    the eigenspace of the largest |λ|.
    """
    r = parse_order(r)
    if b <= 0:
        raise DomainError(f"norm budget b must be positive, got {b}")
    m = require_hermitian(m)
    if np.linalg.norm(m) < TOL.zero_matrix:
        raise DomainError("Hölder extremizer of a numerically zero matrix is undefined")

    vals, vecs = np.linalg.eigh(m)
    mags = np.abs(vals)
    signs = np.sign(vals)

    if math.isinf(r):
        weights = b * signs
    elif r == 1.0:
        top = float(np.max(mags))
        tied = mags >= top * (1.0 - 1e-12)
        weights = np.where(tied, signs * b / int(np.count_nonzero(tied)), 0.0)
    else:
        raw = mags ** (1.0 / (r - 1.0))
        norm = _schatten_from_magnitudes(raw, r)
        weights = signs * raw * (b / norm)

    return (vecs * weights) @ vecs.conj().T


# ---------------------------------------------------------------------
# PSD helpers
# ---------------------------------------------------------------------


def _clamped_spectrum(m: Any) -> Tuple[np.ndarray, np.ndarray]:
    vals, vecs = eigh(m)
    if vals.size and vals[0] < -TOL.sqrt_clamp:
        raise NegativeSpectrumError(
            f"PSD matrix has eigenvalue {vals[0]:.3e} below -{TOL.sqrt_clamp:g}"
        )
    return np.clip(vals, 0.0, None), vecs


def psd_sqrt(m: Any) -> np.ndarray:
    """Principal square root of a PSD matrix; tiny negative drift clamped to 0."""
    vals, vecs = _clamped_spectrum(m)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def psd_factor(rho: Any, cutoff: float = 1e-14) -> np.ndarray:
    """
    Columns B with rho = B B^dagger, keeping only eigenvalues above `cutoff`.
    Pure states give a single column.
    """
    vals, vecs = _clamped_spectrum(rho)
    keep = vals > cutoff
    if not np.any(keep):
        keep = vals >= vals.max()
    return vecs[:, keep] * np.sqrt(vals[keep])


# ---------------------------------------------------------------------
# Construction helpers
# ---------------------------------------------------------------------


def kron(a: Any, b: Any, cap: int | None = None) -> np.ndarray:
    """Kronecker product, refusing outputs beyond the desk-scale cap."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    cap = TOL.dimension_cap if cap is None else cap
    out_dim = a.shape[0] * b.shape[0]
    if out_dim > cap:
        raise DimensionCapExceeded(f"kron output dimension {out_dim} exceeds cap {cap}")
    return np.kron(a, b)


def kron_all(factors, cap: int | None = None) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for f in factors:
        out = kron(out, f, cap=cap)
    return out


def random_hermitian(rng: np.random.Generator, dim: int, scale: float = 1.0) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * 0.5 * (g + g.conj().T)


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    """
    Orthonormalised complex Ginibre matrix. Each column is rotated so its
    first nonzero entry is real and positive, which makes the result a
    deterministic function of the generator state.
    """
    g = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, _ = np.linalg.qr(g)
    for j in range(dim):
        col = q[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-15)
        if nz.size:
            pivot = col[nz[0]]
            q[:, j] = col * (abs(pivot) / pivot)
    return q


def random_density(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def pure_density(psi: Any) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(psi, psi.conj())

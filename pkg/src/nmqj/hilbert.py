"""Dense complex linear algebra used by every other module.

States, operators and density matrices are plain numpy arrays: a state is a
1-d complex array of length ``dim``, operators and density matrices are
``(dim, dim)`` complex arrays. Basis vector 0 is the excited state |e>,
basis vector 1 the ground state |g> for two-level models.
"""
from __future__ import annotations

import numpy as np

MAX_DIM = 64


class DimensionError(ValueError):
    pass


def as_state(v, normalized: bool = False) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1:
        raise DimensionError(f"state must be 1-d, got shape {v.shape}")
    if not 2 <= v.size <= MAX_DIM:
        raise DimensionError(f"state dimension {v.size} outside [2, {MAX_DIM}]")
    if not np.all(np.isfinite(v)):
        raise ValueError("state has non-finite amplitudes")
    if normalized and abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError(f"state is not normalized (norm={np.linalg.norm(v)!r})")
    return v


def as_operator(a, dim: int | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"operator must be square, got shape {a.shape}")
    if dim is not None and a.shape[0] != dim:
        raise DimensionError(f"operator dimension {a.shape[0]} != {dim}")
    if not np.all(np.isfinite(a)):
        raise ValueError("operator has non-finite entries")
    return a


def basis(dim: int, k: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[k] = 1.0
    return v


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def apply(op: np.ndarray, v: np.ndarray) -> np.ndarray:
    if op.shape[1] != v.shape[0]:
        raise DimensionError(f"dimension mismatch: {op.shape} @ {v.shape}")
    return op @ v


def expect(op: np.ndarray, v: np.ndarray) -> float:
    """Real part of <v|op|v> (callers pass Hermitian ``op``)."""
    return float(np.vdot(v, op @ v).real)


def projector(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def is_hermitian(m: np.ndarray, atol: float = 1e-10) -> bool:
    return bool(np.allclose(m, m.conj().T, rtol=0.0, atol=atol))


def hermitian_eigen_min(m: np.ndarray) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue of the Hermitian part of ``m`` and a unit eigenvector.

    For a degenerate lowest eigenvalue any vector of the eigenspace may come back.
    """
    m = np.asarray(m, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    w, v = np.linalg.eigh(hermitize(m))
    return float(w[0]), v[:, 0]


def trace_distance(rho1: np.ndarray, rho2: np.ndarray) -> float:
    if rho1.shape != rho2.shape:
        raise DimensionError(f"dimension mismatch: {rho1.shape} vs {rho2.shape}")
    w = np.linalg.eigvalsh(hermitize(rho1 - rho2))
    return 0.5 * float(np.sum(np.abs(w)))


# Two-level operators in the (|e>, |g>) basis.
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

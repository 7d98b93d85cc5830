"""Small dense complex linear algebra.

Matrices are plain ``numpy`` arrays of complex dtype. Everything here is a pure
function; inputs are never modified.
"""
from typing import NamedTuple

import numpy as np

HERMITIAN_TOL = 1e-12
ANTISYM_TOL = 1e-10
DENSITY_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


class NotHermitianError(ValueError):
    pass


class EigenDecomposition(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray  # columns are eigenvectors


def _scale(a):
    m = np.max(np.abs(a)) if a.size else 0.0
    return m if m > 0 else 1.0


def hermitian_violation(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def check_hermitian(a, tol=HERMITIAN_TOL):
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    v = hermitian_violation(a)
    if v > tol * _scale(a):
        raise NotHermitianError(f"matrix is not Hermitian: max|A - A^H| = {v:.3e}")
    return a


def _fix_phase(vec):
    k = int(np.argmax(np.abs(vec)))
    c = vec[k]
    return vec * (abs(c) / c), k


def hermitian_eigen(a) -> EigenDecomposition:
    """Eigendecomposition with ascending eigenvalues and reproducible vectors.

    Each eigenvector is phase-fixed so its largest-magnitude component is real
    and positive. Within a degenerate cluster the vectors are ordered by the
    index of that component (then by its magnitude, descending).
    """
    a = check_hermitian(a)
    a = 0.5 * (a + a.conj().T)
    w, v = np.linalg.eigh(a)
    cols, keys = [], []
    for j in range(v.shape[1]):
        vec, k = _fix_phase(v[:, j])
        cols.append(vec)
        keys.append((k, -abs(vec[k])))
    tol = 1e-10 * _scale(a)
    order = list(range(len(w)))
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[stop] - w[stop - 1] <= tol:
            stop += 1
        if stop - start > 1:
            order[start:stop] = sorted(order[start:stop], key=lambda j: keys[j])
        start = stop
    return EigenDecomposition(w[order], np.column_stack([cols[j] for j in order]))


def expm_unitary(h, t: float):
    """Propagator ``exp(-2j*pi*H*t)`` for Hermitian ``H`` (frequency units)."""
    w, v = hermitian_eigen(h)
    return (v * np.exp(-2j * np.pi * w * t)) @ v.conj().T


def kron(*mats):
    out = np.array([[1.0 + 0j]])
    for m in mats:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def check_density_matrix(rho, tol=DENSITY_TOL):
    rho = check_hermitian(rho, tol)
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        raise ValueError(f"density matrix trace is {tr.real:.12g}, expected 1")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < -tol:
        raise ValueError(f"density matrix is not positive semidefinite (min eigenvalue {lo:.3e})")
    return rho


def partial_trace_spin(rho, keep="tau"):
    """Reduce a 4x4 density matrix on sigma (x) tau to one 2x2 sector.

    ``keep="tau"`` traces out the spin sector and returns the particle-hole
    state; ``keep="sigma"`` does the opposite.
    """
    rho = check_density_matrix(rho)
    r = rho.reshape(2, 2, 2, 2)  # (s, t, s', t')
    if keep == "tau":
        return np.einsum("abad->bd", r)
    if keep == "sigma":
        return np.einsum("abcb->ac", r)
    raise ValueError(f"keep must be 'tau' or 'sigma', got {keep!r}")


def bloch_vector(rho2):
    """(x, y, z) with rho = (I + r.sigma)/2."""
    rho2 = np.asarray(rho2)
    return np.array([
        2 * rho2[0, 1].real,
        -2 * rho2[0, 1].imag,
        (rho2[0, 0] - rho2[1, 1]).real,
    ])


def pfaffian4(a):
    """Pfaffian of a 4x4 antisymmetric matrix."""
    a = np.asarray(a)
    if a.shape != (4, 4):
        raise ValueError(f"pfaffian4 needs a 4x4 matrix, got {a.shape}")
    v = float(np.max(np.abs(a + a.T)))
    if v > ANTISYM_TOL * _scale(a):
        raise ValueError(f"matrix is not antisymmetric: max|A + A^T| = {v:.3e}")
    return a[0, 1] * a[2, 3] - a[0, 2] * a[1, 3] + a[0, 3] * a[1, 2]

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, strategies as st

from nvtopo.linalg import (
    HADAMARD, SX, SY, SZ, NotHermitianError, bloch_vector, check_density_matrix, check_hermitian,
    expm_unitary, hermitian_eigen, kron, partial_trace_spin, pfaffian4,
)
from conftest import random_hermitian, random_state

seeds = st.integers(0, 2**32 - 1)


def test_pauli_algebra():
    assert np.allclose(SX @ SY, 1j * SZ)
    assert np.allclose(HADAMARD @ SZ @ HADAMARD, SX)


def test_check_hermitian_rejects():
    with pytest.raises(NotHermitianError):
        check_hermitian(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError):
        check_hermitian(np.zeros((2, 3)))


@given(seeds, st.integers(1, 6))
def test_eigen_reconstructs(seed, n):
    rng = np.random.default_rng(seed)
    h = random_hermitian(rng, n)
    w, v = hermitian_eigen(h)
    assert np.all(np.diff(w) >= 0)
    assert np.allclose(h @ v, v * w, atol=1e-10)
    assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-10)
    k = np.argmax(np.abs(v), axis=0)
    lead = v[k, np.arange(n)]
    assert np.allclose(lead.imag, 0, atol=1e-12) and np.all(lead.real > 0)


def test_eigen_degenerate_order_is_canonical():
    w, v = hermitian_eigen(np.eye(3))
    assert np.allclose(v, np.eye(3))
    h = np.diag([1.0, 0.0, 1.0, 0.0]).astype(complex)
    w, v = hermitian_eigen(h)
    assert np.allclose(w, [0, 0, 1, 1])
    assert [int(np.argmax(abs(c))) for c in v.T] == [1, 3, 0, 2]


@given(seeds, st.floats(-3, 3))
def test_expm_matches_scipy(seed, t):
    h = random_hermitian(np.random.default_rng(seed), 4)
    ref = scipy.linalg.expm(-2j * np.pi * h * t)
    assert np.allclose(expm_unitary(h, t), ref, atol=1e-9)


@given(seeds, st.floats(-2, 2), st.floats(-2, 2))
def test_expm_group_property(seed, t1, t2):
    h = random_hermitian(np.random.default_rng(seed), 4)
    u = expm_unitary(h, t1) @ expm_unitary(h, t2)
    assert np.allclose(u, expm_unitary(h, t1 + t2), atol=1e-10)
    assert np.allclose(u.conj().T @ u, np.eye(4), atol=1e-10)


def test_kron_order():
    a, b, c = SX, SZ, HADAMARD
    assert np.allclose(kron(a, b, c), np.kron(np.kron(a, b), c))
    assert kron().shape == (1, 1)


@given(seeds)
def test_partial_trace_of_product(seed):
    rng = np.random.default_rng(seed)
    s, t = random_state(rng, 2), random_state(rng, 2)
    rho = np.outer(np.kron(s, t), np.kron(s, t).conj())
    assert np.allclose(partial_trace_spin(rho, "tau"), np.outer(t, t.conj()))
    assert np.allclose(partial_trace_spin(rho, "sigma"), np.outer(s, s.conj()))


def test_partial_trace_entangled_and_errors():
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    rho = np.outer(bell, bell)
    assert np.allclose(partial_trace_spin(rho), np.eye(2) / 2)
    with pytest.raises(ValueError):
        partial_trace_spin(rho, keep="both")
    with pytest.raises(ValueError):
        partial_trace_spin(2 * rho)


def test_density_checks():
    with pytest.raises(ValueError):
        check_density_matrix(np.diag([1.5, -0.5]))
    check_density_matrix(np.eye(2) / 2)


@pytest.mark.parametrize("vec, expect", [
    ([1, 0], [0, 0, 1]), ([0, 1], [0, 0, -1]),
    ([1, 1], [1, 0, 0]), ([1, 1j], [0, 1, 0]),
])
def test_bloch_vector_axes(vec, expect):
    v = np.array(vec, dtype=complex) / np.linalg.norm(vec)
    assert np.allclose(bloch_vector(np.outer(v, v.conj())), expect)


@given(seeds)
def test_bloch_vector_reproduces_state(seed):
    v = random_state(np.random.default_rng(seed), 2)
    rho = np.outer(v, v.conj())
    r = bloch_vector(rho)
    assert np.isclose(np.linalg.norm(r), 1)
    assert np.allclose((np.eye(2) + r[0] * SX + r[1] * SY + r[2] * SZ) / 2, rho)


def _antisym(rng):
    a = rng.normal(size=(4, 4))
    return a - a.T


@given(seeds)
def test_pfaffian_squares_to_determinant(seed):
    a = _antisym(np.random.default_rng(seed))
    assert np.isclose(pfaffian4(a) ** 2, np.linalg.det(a), rtol=1e-9, atol=1e-9)


@given(seeds)
def test_pfaffian_congruence(seed):
    rng = np.random.default_rng(seed)
    a, b = _antisym(rng), rng.normal(size=(4, 4))
    assert np.isclose(pfaffian4(b.T @ a @ b), np.linalg.det(b) * pfaffian4(a), rtol=1e-8, atol=1e-8)


def test_pfaffian_standard_form_and_errors():
    j = np.zeros((4, 4))
    j[0, 1], j[2, 3] = 1, 1
    assert pfaffian4(j - j.T) == 1
    with pytest.raises(ValueError):
        pfaffian4(np.eye(4))
    with pytest.raises(ValueError):
        pfaffian4(np.zeros((2, 2)))

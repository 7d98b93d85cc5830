import numpy as np
import pytest
from hypothesis import given, strategies as st

from nvtopo.nv import (
    DEFAULT_SCALE, HD_I, NvConstants, NvDriveConfig, build_hnv_lab, build_hrot, hadamard_conjugate,
    level_energies, nv_basis_map, nv_to_qw, qw_to_nv, swap_frame, transition_frequency,
)
from nvtopo.wire import QwParams, build_hqw

mus = st.floats(-2.0, -0.05)
deltas = st.floats(0.0, 0.6)
bxs = st.floats(0.0, 2.5)
moms = st.floats(-3.0, 3.0)
scales = st.floats(0.01, 1.0)


def test_level_map():
    lm = nv_basis_map()
    assert lm.quantum_numbers[4] == (0, 1) and lm.quantum_numbers[8] == (-1, 0)
    assert lm.subspace == (4, 5, 7, 8) and lm.reference == 6
    assert lm.qw_state[7] == ("<-", "p")
    assert lm.transitions["mw1"] == (4, 7) and lm.transitions["rf2"] == (7, 8)


def test_transition_frequencies_by_hand():
    # 50 mT: electron Zeeman 1401.5 MHz, nuclear Zeeman 0.15385 MHz
    assert transition_frequency(4, 7) == pytest.approx(2870 - 1401.5 + 2.16, abs=1e-9)
    assert transition_frequency(5, 8) == pytest.approx(2870 - 1401.5, abs=1e-9)
    assert transition_frequency(4, 5) == pytest.approx(4.945 + 0.15385, abs=1e-9)
    assert transition_frequency(7, 8) == pytest.approx(4.945 + 0.15385 - 2.16, abs=1e-9)
    assert transition_frequency(4, 1) == pytest.approx(2870 + 1401.5 - 2.16, abs=1e-9)


def test_lab_hamiltonian_diagonal():
    h = build_hnv_lab()
    assert np.allclose(np.diag(level_energies()), h)
    e = level_energies(NvConstants(b0=0.0, a_hf=0.0, q_quad=0.0))
    assert np.allclose(e, [2870] * 3 + [0] * 3 + [2870] * 3)


@given(mus, deltas, bxs, moms, scales)
def test_mapping_theorem(mu, delta, bx, p, scale):
    par = QwParams(mu, delta, bx)
    got = hadamard_conjugate(build_hrot(qw_to_nv(par, p, scale)))
    assert np.max(np.abs(got - scale * build_hqw(par, p))) <= 1e-12


@given(mus, deltas, bxs, moms)
def test_reversed_mw_flips_bx(mu, delta, bx, p):
    par = QwParams(mu, delta, bx)
    cfg = qw_to_nv(par, p).reversed_mw()
    h = build_hqw(par, p) - 2 * bx * np.kron([[0, 1], [1, 0]], np.eye(2))
    assert np.allclose(hadamard_conjugate(build_hrot(cfg)), DEFAULT_SCALE * h, atol=1e-12)


@given(mus, deltas, bxs, st.floats(0.0, 3.0), scales)
def test_round_trip(mu, delta, bx, p, scale):
    cfg = qw_to_nv(QwParams(mu, delta, bx), p, scale)
    assert cfg.qw_mode
    back, p2 = nv_to_qw(cfg)
    assert back.mu == pytest.approx(mu, abs=1e-9) and back.delta == pytest.approx(delta, abs=1e-12)
    assert back.bx == pytest.approx(bx, abs=1e-12) and p2 == pytest.approx(p, abs=1e-12)


def test_default_mapping_values():
    cfg = qw_to_nv(QwParams(-1.6, 0.165, 1.3), 0.5)
    s = 1 / 11
    assert cfg.omega_mw1 == pytest.approx(1.0 * s) and cfg.omega_mw2 == pytest.approx(-1.0 * s)
    assert cfg.omega_rf == pytest.approx(0.33 * s)
    assert cfg.delta_mw == pytest.approx(-2.6 * s)
    assert cfg.delta_rf == pytest.approx(-2 * (0.25 + 1.6) * s)


def test_config_validation():
    with pytest.raises(ValueError):
        NvDriveConfig(0, 0, 0, 0, 0, tau=0)
    with pytest.raises(ValueError):
        qw_to_nv(QwParams(-1, 0.1, 0.1), 0.0, scale=0)
    with pytest.raises(ValueError):
        nv_to_qw(NvDriveConfig(1.0, 1.0, 0, 0, 0))


def test_swap_frame_is_involution():
    v = np.array([1, 2j, -0.5, 0.3])
    assert np.allclose(swap_frame(swap_frame(v)), v)
    assert np.allclose(HD_I @ HD_I, np.eye(4))
    # |7> = (sigma=1, tau=0) in NV order is |<-, p> in the QW frame
    assert np.allclose(swap_frame(np.eye(4)[2]), np.kron([1, -1], [1, 0]) / np.sqrt(2))

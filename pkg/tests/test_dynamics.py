import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nvtopo import dynamics
from nvtopo.dynamics import (
    ConvergenceError, Drive, NoiseModel, PulseSchedule, ReadoutModel, Rotation, apply_rotations,
    electron_noise_diag, evolve_ideal_qw, evolve_lab_nv, evolve_rot_nv, init_pulses, lab_states,
    mean_pl, readback_pulses, readout_level, sigma_from_t2star, simulate_pl,
)
from nvtopo.nv import HD_I, LEVELS, WORK_LEVELS, NvDriveConfig, qw_to_nv
from nvtopo.spectroscopy import initial_superposition
from nvtopo.wire import QwParams
from conftest import random_state

FIG = dict(delta=0.165, bx=1.3)


def embed9(psi5):
    out = np.zeros(9, dtype=complex)
    for lab, a in zip(WORK_LEVELS, psi5):
        out[lab - 1] = a
    return out


def ket(label, levels=WORK_LEVELS):
    v = np.zeros(len(levels), dtype=complex)
    v[levels.index(label)] = 1
    return v


def test_sigma_from_t2star_defines_1_over_e():
    s = sigma_from_t2star(3.0)
    assert math.exp(-2 * math.pi**2 * s**2 * 3.0**2) == pytest.approx(math.exp(-1))
    with pytest.raises(ValueError):
        sigma_from_t2star(0)


def test_noise_model():
    nz = NoiseModel.from_t2star(3.0, n_realizations=500, seed=7)
    assert nz.enabled
    assert np.array_equal(nz.offsets(), NoiseModel.from_t2star(3.0, n_realizations=500, seed=7).offsets())
    assert not np.array_equal(nz.offsets(), NoiseModel.from_t2star(3.0, n_realizations=500, seed=8).offsets())
    assert np.std(nz.offsets()) == pytest.approx(nz.sigma_b, rel=0.15)
    assert np.array_equal(NoiseModel().offsets(), [0.0])
    with pytest.raises(ValueError):
        NoiseModel(sigma_b=-1)
    with pytest.raises(ValueError):
        NoiseModel(n_realizations=0)


def test_noise_diag():
    assert np.allclose(electron_noise_diag(WORK_LEVELS), [0.5, 0.5, 0.0, -0.5, -0.5])
    assert np.allclose(electron_noise_diag(WORK_LEVELS, True), [0.5, 0.5, 0.5, -0.5, -0.5])
    assert np.allclose(electron_noise_diag(LEVELS)[:3], 1.5)


def test_readout_model_validation():
    pl = dict(ReadoutModel().pl)
    with pytest.raises(ValueError):
        ReadoutModel(pl={**pl, 4: 0.9})
    with pytest.raises(ValueError):
        ReadoutModel(pl={**pl, 6: 0.8})
    with pytest.raises(ValueError):
        ReadoutModel(shots=0)


@given(st.integers(4, 8).filter(lambda x: x != 6), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_rotation_unitary(b, angle, phase):
    u = Rotation(6, b, angle, phase).unitary()
    assert np.allclose(u.conj().T @ u, np.eye(5))


def test_pi_rotation_transfers_population():
    rho = apply_rotations(np.outer(ket(4), ket(4)), (Rotation(4, 5, math.pi, 0.3),))
    assert rho[1, 1].real == pytest.approx(1.0)


@pytest.mark.parametrize("label", [4, 5])
def test_init_pulses_prepare_superposition(label):
    psi = apply_rotations(ket(4), init_pulses(label))
    target = initial_superposition(label)
    assert abs(np.vdot(target, psi)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        init_pulses(7)


@given(st.floats(0, 1), st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
def test_readback_population_formula(r, phi, theta):
    # after readback the psi population carries (1 + Re(a e^{-i theta}))/2
    a = r * np.exp(1j * phi)
    for label in (4, 5):
        c = np.zeros(5, dtype=complex)
        c[2] = 1 / np.sqrt(2)
        c[WORK_LEVELS.index(label)] = a / np.sqrt(2)
        c /= np.linalg.norm(c)
        norm2 = 2 / (1 + r * r)
        psi = apply_rotations(c, readback_pulses(label, theta))
        pop = abs(psi[WORK_LEVELS.index(readout_level(label))]) ** 2
        expect = (1 + r * r + 2 * (a * np.exp(-1j * theta)).real) / 4 * norm2
        assert pop == pytest.approx(expect, abs=1e-12)


def test_pulse_schedule():
    cfg = NvDriveConfig(0.1, -0.1, 0.02, 0.1, 0.2, tau=2.0)
    sched = PulseSchedule.protocol(5, cfg, 3, 0.0)
    assert len(sched.drives) == 1 and sched.drives[0].duration == pytest.approx(6.0)
    with pytest.raises(ValueError):
        PulseSchedule.protocol(5, cfg, -1, 0.0)
    with pytest.raises(TypeError):
        PulseSchedule(("pulse",))
    with pytest.raises(ValueError):
        Drive(cfg, -1.0)


def test_rabi_inversion_rot_and_lab():
    om = 0.5
    cfg = NvDriveConfig(om, 0.0, 0.0, 0.0, 0.0, tau=1 / (2 * om))
    rho = evolve_rot_nv(cfg, ket(4), cfg.tau)
    assert rho[WORK_LEVELS.index(7), WORK_LEVELS.index(7)].real == pytest.approx(1.0, abs=1e-4)
    lab = lab_states(cfg, embed9(ket(4)), 2)[-1]
    assert lab[6, 6].real == pytest.approx(1.0, abs=1e-4)


def test_rot_tier_matches_ideal(rng):
    for _ in range(20):
        par = QwParams(rng.uniform(-2, -0.1), rng.uniform(0, 0.5), rng.uniform(0, 2))
        p, t_qw = rng.uniform(-2, 2), rng.uniform(0, 3)
        psi_qw = random_state(rng, 4)
        cfg = qw_to_nv(par, p)
        rho = evolve_rot_nv(cfg, HD_I @ psi_qw, t_qw / cfg.scale)
        ideal = HD_I @ evolve_ideal_qw(par, p, psi_qw, t_qw)
        assert np.vdot(ideal, rho @ ideal).real >= 1 - 1e-8


def test_rot_tier_stack_and_state_checks():
    cfg = qw_to_nv(QwParams(-1.0, 0.2, 0.5), 0.2)
    stack = evolve_rot_nv(cfg, initial_superposition(5), [0.0, 1.0, 2.0])
    assert stack.shape == (3, 5, 5)
    assert np.allclose(np.trace(stack, axis1=1, axis2=2), 1)
    with pytest.raises(ValueError):
        evolve_rot_nv(cfg, np.ones(3) / np.sqrt(3), 1.0)
    with pytest.raises(ValueError):
        evolve_rot_nv(cfg, np.ones(4), 1.0)


def test_coherence_decay_law():
    nz = NoiseModel.from_t2star(3.0, n_realizations=20000, seed=3)
    cfg = NvDriveConfig(0, 0, 0, 0, 0)
    psi = (ket(4) + ket(7)) / np.sqrt(2)
    t = np.linspace(0, 6, 13)
    rho = evolve_rot_nv(cfg, psi, t, nz)
    coh = 2 * np.abs(rho[:, 0, 3])
    assert np.allclose(coh, np.exp(-2 * np.pi**2 * nz.sigma_b**2 * t**2), atol=0.02)


def test_reference_convention_changes_probe_dephasing():
    nz = NoiseModel.from_t2star(3.0, n_realizations=4000, seed=1)
    psi = initial_superposition(4)
    cfg = NvDriveConfig(0, 0, 0, 0, 0)
    free = evolve_rot_nv(cfg, psi, 3.0, nz)
    tracked = evolve_rot_nv(cfg, psi, 3.0, NoiseModel(nz.sigma_b, nz.n_realizations, 1,
                                                      reference_tracks_electron=True))
    assert abs(tracked[0, 2]) == pytest.approx(0.5)
    assert abs(free[0, 2]) < 0.45


def test_secular_lab_tier_equals_rot_tier():
    par = QwParams(-1.14, **FIG)
    cfg = qw_to_nv(par, 0.3, tau=2.5)
    psi5 = initial_superposition(5)
    lab = lab_states(cfg, embed9(psi5), 6, cutoff=0.0)
    idx = [lab_ - 1 for lab_ in WORK_LEVELS]
    rot = evolve_rot_nv(cfg, psi5, np.arange(6) * cfg.tau)
    assert np.max(np.abs(lab[:, idx][:, :, idx] - rot)) < 1e-9


def test_crosstalk_is_present_and_shrinks_with_scale():
    par = QwParams(-1.14, **FIG)
    psi5 = initial_superposition(5)
    idx = [lab_ - 1 for lab_ in WORK_LEVELS]
    dev = {}
    for s in (1 / 11, 1 / 44):
        cfg = qw_to_nv(par, 0.3, s, tau=0.25 / s)
        lab = lab_states(cfg, embed9(psi5), 9)
        rot = evolve_rot_nv(cfg, psi5, np.arange(9) * cfg.tau)
        dev[s] = np.max(np.abs(lab[:, idx][:, :, idx] - rot))
    assert dev[1 / 11] > 1e-3
    assert dev[1 / 44] < dev[1 / 11]


def test_lab_tier_step_checks(monkeypatch):
    cfg = NvDriveConfig(0.1, -0.1, 0.02, 0.1, 0.2, tau=1.0)
    with pytest.raises(ValueError):
        lab_states(cfg, embed9(ket(4)), 3, dt_max=1.0)
    monkeypatch.setattr(dynamics, "CONVERGENCE_TOL", -1.0)
    with pytest.raises(ConvergenceError):
        lab_states(cfg, embed9(ket(4)), 3)


def test_evolve_lab_schedule_matches_rotating_frame():
    par = QwParams(-1.6, **FIG)
    cfg = qw_to_nv(par, 0.2, tau=3.0)
    sched = PulseSchedule.protocol(5, cfg, 2, 0.7)
    rho9 = evolve_lab_nv(sched, embed9(ket(4)), cutoff=0.0)
    psi = apply_rotations(ket(4), init_pulses(5))
    rho = evolve_rot_nv(cfg, psi, 2 * cfg.tau)
    rho = apply_rotations(rho, readback_pulses(5, 0.7))
    idx = [lab_ - 1 for lab_ in WORK_LEVELS]
    assert np.allclose(rho9[np.ix_(idx, idx)], rho, atol=1e-9)


def test_pl_emulation():
    ro = ReadoutModel()
    rho = np.diag([0.5, 0, 0.5, 0, 0]).astype(complex)
    assert mean_pl(rho, ro) == pytest.approx(0.985)
    assert simulate_pl(rho, ro) == pytest.approx(0.985 * ro.shots)
    noisy = ReadoutModel(shot_noise=True, shots=10000)
    a, b = simulate_pl(rho, noisy, 5), simulate_pl(rho, noisy, 5)
    assert a == b and a == int(a)
    draws = [simulate_pl(rho, noisy, s) for s in range(200)]
    assert np.mean(draws) == pytest.approx(9850, rel=0.002)
    assert simulate_pl(ket(4), ro) == pytest.approx(ro.shots)

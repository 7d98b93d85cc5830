"""State propagation in three tiers plus photoluminescence readout.

* ideal QW evolution under ``H_QW`` (dimensionless time),
* rotating-frame NV evolution under the drive Hamiltonian with quasi-static
  electron dephasing, averaged over a seeded ensemble,
* lab-frame 9-level evolution with explicitly oscillating MW/RF tones, which
  brings in crosstalk from imperfectly selective pulses.

Propagators are ``exp(-2j*pi*H*t)``; NV frequencies in MHz, times in us.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .linalg import expm_unitary
from .nv import (
    LEVELS, REFERENCE, SUBSPACE, WORK_LEVELS, NvConstants, NvDriveConfig, build_hrot,
    level_energies, nv_basis_map, spin1_ops,
)
from .wire import QwParams, build_hqw

DEFAULT_T2STAR = 3.0  # us
DEFAULT_CUTOFF = 100.0  # MHz; faster interaction-frame terms are averaged out
CONVERGENCE_TOL = 1e-6


class ConvergenceError(RuntimeError):
    pass


def sigma_from_t2star(t2star: float) -> float:
    """Detuning spread giving coherence exp(-(t/T2*)^2)."""
    if not t2star > 0:
        raise ValueError(f"T2* must be positive, got {t2star}")
    return 1.0 / (math.sqrt(2) * math.pi * t2star)


@dataclass(frozen=True)
class NoiseModel:
    """Quasi-static Gaussian electron detuning, redrawn per realization.

    ``reference_tracks_electron`` selects whether the interferometric reference
    level |6> (m_e = 0) picks up the same shift as the m_e = 0 simulation
    levels. By default it does not: the offset is treated as a symmetric
    fluctuation of the MW detuning about the rotating frame.
    """
    sigma_b: float = 0.0
    n_realizations: int = 1
    seed: int = 0
    crosstalk: bool = False
    reference_tracks_electron: bool = False

    def __post_init__(self):
        if self.sigma_b < 0:
            raise ValueError("sigma_b must be non-negative")
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be positive")

    @classmethod
    def from_t2star(cls, t2star: float = DEFAULT_T2STAR, **kwargs) -> "NoiseModel":
        return cls(sigma_b=sigma_from_t2star(t2star), **kwargs)

    @property
    def enabled(self) -> bool:
        return self.sigma_b > 0

    def offsets(self):
        if not self.enabled:
            return np.zeros(1)
        rng = np.random.default_rng(np.random.SeedSequence(self.seed))
        return rng.normal(0.0, self.sigma_b, self.n_realizations)


def _default_pl():
    return {1: 0.70, 2: 0.70, 3: 0.70, 4: 1.00, 5: 0.97, 6: 0.97, 7: 0.70, 8: 0.70, 9: 0.70}


@dataclass(frozen=True)
class ReadoutModel:
    pl: dict = field(default_factory=_default_pl)
    shots: int = 100_000
    shot_noise: bool = False

    def __post_init__(self):
        pl = self.pl
        if not pl[4] > pl[5]:
            raise ValueError("readout needs PL4 > PL5")
        if abs(pl[5] - pl[6]) > 0.02 * pl[5]:
            raise ValueError("readout needs PL5 ~ PL6 (within 2%)")
        if self.shots < 1:
            raise ValueError("shots must be positive")


def electron_noise_diag(levels, reference_tracks_electron=False):
    """Diagonal of the unit-offset noise operator over ``levels``.

    m_e = 0 levels shift by +1/2 and m_e = -1 by -1/2 (the 1/2 sigma_z form on
    the pseudo-spin), m_e = +1 by +3/2.
    """
    qn = nv_basis_map().quantum_numbers
    d = np.array([0.5 + qn[lab][0] for lab in levels])
    if not reference_tracks_electron and REFERENCE in levels:
        d[levels.index(REFERENCE)] = 0.0
    return d


# -- pulse schedule ----------------------------------------------------------

@dataclass(frozen=True)
class Rotation:
    """Ideal instantaneous rotation between levels ``a`` and ``b``.

    ``exp(-i angle/2 (cos(phase) X + sin(phase) Y))`` with X, Y acting on
    (|a>, |b>).
    """
    a: int
    b: int
    angle: float
    phase: float = 0.0

    def unitary(self, levels=WORK_LEVELS):
        u = np.eye(len(levels), dtype=complex)
        i, j = levels.index(self.a), levels.index(self.b)
        c, s = math.cos(self.angle / 2), math.sin(self.angle / 2)
        u[i, i] = u[j, j] = c
        u[i, j] = -1j * np.exp(-1j * self.phase) * s
        u[j, i] = -1j * np.exp(1j * self.phase) * s
        return u


@dataclass(frozen=True)
class Drive:
    """Simultaneous MW + RF simulation pulses for ``duration`` us."""
    config: NvDriveConfig
    duration: float

    def __post_init__(self):
        if self.duration < 0:
            raise ValueError("duration must be non-negative")


def init_pulses(psi_label: int):
    """RF pulses taking |4> to (|6> + |psi>)/sqrt(2)."""
    if psi_label == 5:
        return (Rotation(4, 5, math.pi, math.pi / 2), Rotation(5, 6, math.pi / 2, math.pi / 2))
    if psi_label == 4:
        return (Rotation(4, 5, math.pi / 2, math.pi / 2), Rotation(5, 6, math.pi, math.pi / 2))
    raise ValueError(f"no pulse-level initialization for |{psi_label}>")


def readback_pulses(psi_label: int, theta: float):
    """pi/2 between |6> and |psi> with phase theta, plus a pi on 4<->5 for |psi> = |5>."""
    out = (Rotation(REFERENCE, psi_label, math.pi / 2, theta + math.pi / 2),)
    if psi_label == 5:
        out += (Rotation(4, 5, math.pi, math.pi / 2),)
    return out


def readout_level(psi_label: int) -> int:
    """Level whose PL carries the |psi> population after readback."""
    return 4 if psi_label == 5 else psi_label


@dataclass(frozen=True)
class PulseSchedule:
    segments: tuple

    def __post_init__(self):
        for seg in self.segments:
            if not isinstance(seg, (Rotation, Drive)):
                raise TypeError(f"unknown segment {seg!r}")

    @classmethod
    def protocol(cls, psi_label: int, config: NvDriveConfig, m: int, theta: float) -> "PulseSchedule":
        if m < 0 or int(m) != m:
            raise ValueError("m must be a non-negative integer")
        return cls(init_pulses(psi_label) + (Drive(config, m * config.tau),)
                   + readback_pulses(psi_label, theta))

    @property
    def drives(self):
        return [s for s in self.segments if isinstance(s, Drive)]


def apply_rotations(rho, rotations, levels=WORK_LEVELS):
    rho = np.asarray(rho)
    for rot in rotations:
        u = rot.unitary(levels)
        rho = u @ rho @ u.conj().T if rho.ndim == 2 else u @ rho
    return rho


# -- ideal and rotating-frame tiers -------------------------------------------

def _check_state(psi0):
    psi0 = np.asarray(psi0, dtype=complex)
    n = np.linalg.norm(psi0)
    if abs(n - 1) > 1e-10:
        raise ValueError(f"initial state must be normalized (norm {n:.12g})")
    return psi0


def evolve_ideal_qw(params: QwParams, p: float, psi0, t: float):
    psi0 = _check_state(psi0)
    return expm_unitary(build_hqw(params, p), t) @ psi0


def rot_hamiltonian(config: NvDriveConfig, levels):
    """``build_hrot`` embedded in a working space that may include |6>."""
    h4 = build_hrot(config)
    if tuple(levels) == SUBSPACE:
        return h4
    h = np.zeros((len(levels), len(levels)), dtype=complex)
    idx = [levels.index(lab) for lab in SUBSPACE]
    h[np.ix_(idx, idx)] = h4
    return h


def evolve_rot_nv(config: NvDriveConfig, psi0, t, noise: NoiseModel = NoiseModel()):
    """Ensemble-averaged density matrix after rotating-frame evolution.

    ``psi0`` lives on (|4>, |5>, |7>, |8>) or, with 5 components, on the
    working space (|4>, |5>, |6>, |7>, |8>) where |6> is undriven. ``t`` may
    be an array, in which case a stack of density matrices is returned.
    """
    psi0 = _check_state(psi0)
    levels = {4: SUBSPACE, 5: WORK_LEVELS}.get(len(psi0))
    if levels is None:
        raise ValueError(f"state must have 4 or 5 components, got {len(psi0)}")
    h = rot_hamiltonian(config, levels)
    eps = noise.offsets()
    nd = electron_noise_diag(levels, noise.reference_tracks_electron)
    hs = h[None, :, :] + eps[:, None, None] * np.diag(nd)[None, :, :]
    w, v = np.linalg.eigh(hs)
    c = np.einsum("kji,j->ki", v.conj(), psi0)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty((len(times), len(levels), len(levels)), dtype=complex)
    for i, tt in enumerate(times):
        psi = np.einsum("kij,kj->ki", v, c * np.exp(-2j * np.pi * w * tt))
        out[i] = psi.T @ psi.conj() / len(eps)
    return out[0] if np.ndim(t) == 0 else out


# -- lab-frame tier -----------------------------------------------------------

def _couplings():
    sx, _ = spin1_ops()
    i3 = np.eye(3)
    # labels 1..9 are m_e = +1, 0, -1 (outer) x m_n = +1, 0, -1 (inner)
    electron = np.sqrt(2) * np.kron(sx, i3)
    nuclear = np.sqrt(2) * np.kron(i3, sx)
    return electron, nuclear


@dataclass(frozen=True)
class LabFrameModel:
    """Interaction-picture Hamiltonian of the 9 levels under four tones.

    The frame rotates level ``l`` at ``F_l``: bare energy for spectators,
    bare energy minus the rotating-frame diagonal for the simulation levels.
    Coupling terms oscillate at ``F_j - F_k +- f_tone``; those faster than
    ``cutoff`` MHz are dropped (``cutoff=None`` keeps everything).
    """
    static: np.ndarray
    amplitudes: np.ndarray  # (n_terms, 9, 9)
    frequencies: np.ndarray  # (n_terms, 9, 9)
    tones: dict

    @property
    def max_frequency(self) -> float:
        live = np.abs(self.amplitudes) > 0
        return float(np.max(np.abs(self.frequencies[live]), initial=0.0))

    def hamiltonians(self, times):
        ph = np.exp(2j * np.pi * self.frequencies[None] * np.asarray(times)[:, None, None, None])
        return self.static[None] + np.einsum("nkij,kij->nij", ph, self.amplitudes)


def lab_frame_model(config: NvDriveConfig, constants: NvConstants = NvConstants(),
                    cutoff=DEFAULT_CUTOFF) -> LabFrameModel:
    e = level_energies(constants)
    f = e.copy()
    hdiag = np.diag(build_hrot(config)).real
    for lab, hv in zip(SUBSPACE, hdiag):
        f[lab - 1] = e[lab - 1] - hv
    electron, nuclear = _couplings()

    def gap(a, b):
        return e[b - 1] - e[a - 1]

    # detuning = resonance - drive frequency
    tones = {
        "mw1": (config.omega_mw1, gap(4, 7) - config.delta_mw, electron),
        "mw2": (config.omega_mw2, gap(5, 8) - config.delta_mw, electron),
        "rf1": (config.omega_rf, gap(4, 5) - config.delta_rf, nuclear),
        "rf2": (config.omega_rf, gap(7, 8) - config.delta_rf, nuclear),
    }
    dframe = f[:, None] - f[None, :]
    amps, freqs = [], []
    for amp, freq, coup in tones.values():
        for sign in (+1, -1):
            nu = dframe + sign * freq
            nu[np.abs(nu) < 1e-6] = 0.0
            keep = np.abs(nu) <= (np.inf if cutoff is None else cutoff)
            amps.append(np.where(keep, 0.5 * amp * coup, 0.0))
            freqs.append(nu)
    amps, freqs = np.array(amps, dtype=complex), np.array(freqs)
    resonant = freqs == 0
    static = np.diag(e - f).astype(complex) + np.sum(np.where(resonant, amps, 0), axis=0)
    amps = np.where(resonant, 0, amps)
    return LabFrameModel(static, amps, freqs, {k: v[1] for k, v in tones.items()})


def _propagate(model: LabFrameModel, psi0, t_end, n_steps, record_every, offset_diag):
    dt = t_end / n_steps
    mids = (np.arange(n_steps) + 0.5) * dt
    psi = psi0.copy()
    out = [psi.copy()]
    chunk = 2048
    for start in range(0, n_steps, chunk):
        hs = model.hamiltonians(mids[start:start + chunk]) + np.diag(offset_diag)[None]
        w, v = np.linalg.eigh(hs)
        u = np.einsum("nij,nj,nkj->nik", v, np.exp(-2j * np.pi * w * dt), v.conj())
        for k in range(len(u)):
            psi = u[k] @ psi
            if (start + k + 1) % record_every == 0:
                out.append(psi.copy())
    return np.array(out)


def lab_states(config: NvDriveConfig, psi0, n_samples: int, constants: NvConstants = NvConstants(),
               dt_max=None, noise: NoiseModel = NoiseModel(), cutoff=DEFAULT_CUTOFF,
               check_convergence: bool = True):
    """Ensemble density matrices at ``m * config.tau`` for m = 0..n_samples-1.

    ``psi0`` is a 9-component state on labels 1..9. Raises
    :class:`ConvergenceError` when halving the step changes any final state
    by more than ``CONVERGENCE_TOL`` in infidelity.
    """
    psi0 = _check_state(psi0)
    if len(psi0) != 9:
        raise ValueError("lab-frame states have 9 components")
    model = lab_frame_model(config, constants, cutoff)
    fmax = max(model.max_frequency, 1e-12)
    if dt_max is None:
        dt_max = 0.05 / fmax
    if fmax * dt_max > 0.05 + 1e-12:
        raise ValueError(f"dt_max={dt_max} too coarse for the fastest term ({fmax:.4g} MHz)")
    per = max(1, math.ceil(config.tau / dt_max))
    n_steps = per * (n_samples - 1)
    nd = electron_noise_diag(LEVELS, noise.reference_tracks_electron)
    rhos = np.zeros((n_samples, 9, 9), dtype=complex)
    eps = noise.offsets()
    for k, e in enumerate(eps):
        if n_steps == 0:
            states = psi0[None]
        else:
            states = _propagate(model, psi0, config.tau * (n_samples - 1), n_steps, per, e * nd)
            if check_convergence and k == 0:
                fine = _propagate(model, psi0, config.tau * (n_samples - 1), 2 * n_steps, 2 * per, e * nd)
                infid = 1 - np.abs(np.einsum("ni,ni->n", states.conj(), fine)) ** 2
                if np.max(infid) > CONVERGENCE_TOL:
                    raise ConvergenceError(
                        f"step halving changed the state by {np.max(infid):.2e}; reduce dt_max below {dt_max:.3g} us")
        rhos += np.einsum("ni,nj->nij", states, states.conj())
    return rhos / len(eps)


def evolve_lab_nv(schedule: PulseSchedule, psi0, constants: NvConstants = NvConstants(), dt_max=None,
                  noise: NoiseModel = NoiseModel(), cutoff=DEFAULT_CUTOFF):
    """Run a pulse schedule on the 9-level system; returns the 9x9 density matrix.

    Rotations are applied ideally; drive segments are integrated with
    piecewise-constant steps and an exact exponential per step.
    """
    psi0 = _check_state(psi0)
    rho = np.outer(psi0, psi0.conj())
    for seg in schedule.segments:
        if isinstance(seg, Rotation):
            rho = apply_rotations(rho, (seg,), LEVELS)
            continue
        if seg.duration == 0:
            continue
        cfg = NvDriveConfig(seg.config.omega_mw1, seg.config.omega_mw2, seg.config.omega_rf,
                            seg.config.delta_mw, seg.config.delta_rf, seg.config.scale, seg.duration)
        # evolve each eigencomponent of rho as a pure state
        w, v = np.linalg.eigh(rho)
        new = np.zeros_like(rho)
        for weight, vec in zip(w, v.T):
            if weight < 1e-14:
                continue
            new += weight * lab_states(cfg, vec, 2, constants, dt_max, noise, cutoff)[-1]
        rho = new
    return rho


# -- readout ------------------------------------------------------------------

def mean_pl(rho, readout: ReadoutModel, levels=WORK_LEVELS) -> float:
    pops = np.real(np.diagonal(rho))
    return float(sum(p * readout.pl[lab] for p, lab in zip(pops, levels)))


def simulate_pl(rho, readout: ReadoutModel, rng_seed=None, levels=WORK_LEVELS) -> float:
    """Total PL counts over ``readout.shots`` shots (Poisson if shot noise is on)."""
    rho = np.asarray(rho)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    mean = mean_pl(rho, readout, levels) * readout.shots
    if not readout.shot_noise:
        return mean
    rng = np.random.default_rng(rng_seed)
    return float(rng.poisson(mean))

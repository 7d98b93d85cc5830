"""NV-center level structure, rotating-frame drive Hamiltonian, QW <-> NV mapping.

Units: frequencies in MHz, times in microseconds, so that a phase is
``2*pi*f*t``. QW quantities are dimensionless and become MHz through a single
``scale`` factor.

Pseudo-spin encoding of the simulation subspace {|4>, |5>, |7>, |8>}:
sigma index 0/1 <-> m_e = 0/-1 and tau index 0/1 <-> m_n = +1/0, so the
4-dim ordering (sigma outer) is exactly (|4>, |5>, |7>, |8>).
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .linalg import HADAMARD, I2, SX, SZ, kron
from .wire import QwParams

DEFAULT_SCALE = 1.0 / 11.0

LEVELS = tuple(range(1, 10))
SUBSPACE = (4, 5, 7, 8)
REFERENCE = 6
WORK_LEVELS = (4, 5, 6, 7, 8)

SX_TZ = kron(SX, SZ)
I_TZ = kron(I2, SZ)
SX_I = kron(SX, I2)
I_TX = kron(I2, SX)
SZ_I = kron(SZ, I2)
HD_I = kron(HADAMARD, I2)


@dataclass(frozen=True)
class NvConstants:
    """Static spin Hamiltonian constants, all as frequencies (value / 2pi).

    gamma_e and gamma_n are in MHz/T (-28.03 GHz/T and 3.077 MHz/T), the
    splittings in MHz and the field ``b0`` in tesla.
    """
    gamma_e: float = -28.03e3
    gamma_n: float = 3.077
    d_zfs: float = 2.87e3
    q_quad: float = -4.945
    a_hf: float = -2.16
    b0: float = 0.05


@dataclass(frozen=True)
class NvDriveConfig:
    omega_mw1: float
    omega_mw2: float
    omega_rf: float
    delta_mw: float
    delta_rf: float
    scale: float = DEFAULT_SCALE
    tau: float = 1.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def qw_mode(self) -> bool:
        return self.omega_mw1 == -self.omega_mw2

    def reversed_mw(self) -> "NvDriveConfig":
        """Same drive with the MW detuning sign flipped."""
        return replace(self, delta_mw=-self.delta_mw)


@dataclass(frozen=True)
class LevelMap:
    quantum_numbers: dict = field(default_factory=lambda: {
        1: (1, 1), 2: (1, 0), 3: (1, -1),
        4: (0, 1), 5: (0, 0), 6: (0, -1),
        7: (-1, 1), 8: (-1, 0), 9: (-1, -1),
    })
    subspace: tuple = SUBSPACE
    reference: int = REFERENCE
    # QW basis state (spin along x, particle/hole) seen after the Hadamard
    qw_state: dict = field(default_factory=lambda: {
        4: ("->", "p"), 5: ("->", "h"), 7: ("<-", "p"), 8: ("<-", "h"),
    })
    transitions: dict = field(default_factory=lambda: {
        "mw1": (4, 7), "mw2": (5, 8), "rf1": (4, 5), "rf2": (7, 8),
        "alpha": (4, 5), "beta": (5, 6),
    })

    def index(self, label: int, levels=LEVELS) -> int:
        return levels.index(label)


def nv_basis_map() -> LevelMap:
    return LevelMap()


def spin1_ops():
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    sx = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / np.sqrt(2)
    return sx, sz


def level_energies(constants: NvConstants = NvConstants()):
    """Bare level frequencies (MHz) for labels 1..9."""
    c = constants
    qn = nv_basis_map().quantum_numbers
    out = []
    for lab in LEVELS:
        me, mn = qn[lab]
        out.append(-c.gamma_e * c.b0 * me - c.gamma_n * c.b0 * mn
                   + c.d_zfs * me**2 + c.q_quad * mn**2 + c.a_hf * me * mn)
    return np.array(out)


def build_hnv_lab(constants: NvConstants = NvConstants()):
    """Static 9x9 NV Hamiltonian in the |m_e, m_n> product basis (labels 1..9)."""
    return np.diag(level_energies(constants)).astype(complex)


def transition_frequency(a: int, b: int, constants: NvConstants = NvConstants()) -> float:
    """|E_b - E_a| in MHz."""
    e = level_energies(constants)
    return float(abs(e[b - 1] - e[a - 1]))


def build_hrot(config: NvDriveConfig):
    """Rotating-frame Hamiltonian on (|4>, |5>, |7>, |8>) in MHz."""
    c = config
    return ((c.omega_mw1 - c.omega_mw2) / 4 * SX_TZ
            - 0.5 * c.delta_rf * I_TZ
            + (c.omega_mw1 + c.omega_mw2) / 4 * SX_I
            + 0.5 * c.omega_rf * I_TX
            - 0.5 * c.delta_mw * SZ_I)


def hadamard_conjugate(h):
    return HD_I @ np.asarray(h) @ HD_I


def qw_to_nv(params: QwParams, p: float, scale: float = DEFAULT_SCALE, tau: float = 1.0) -> NvDriveConfig:
    """Drive settings whose rotating-frame Hamiltonian is scale * H_QW (after the Hadamard)."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    omega_mw = 2 * p * scale
    return NvDriveConfig(
        omega_mw1=omega_mw,
        omega_mw2=-omega_mw,
        omega_rf=2 * params.delta * scale,
        delta_mw=-2 * params.bx * scale,
        delta_rf=-2 * (p * p - params.mu) * scale,
        scale=scale,
        tau=tau,
    )


def nv_to_qw(config: NvDriveConfig):
    """Inverse of :func:`qw_to_nv`; returns ``(QwParams, p)``."""
    if not config.qw_mode:
        raise ValueError("QW simulation mode needs omega_mw1 == -omega_mw2")
    s = config.scale
    p = config.omega_mw1 / (2 * s)
    xi = -config.delta_rf / (2 * s)
    params = QwParams(mu=p * p - xi, delta=config.omega_rf / (2 * s), bx=-config.delta_mw / (2 * s))
    return params, p


def swap_frame(vec):
    """Move a 4-vector between the NV pseudo-spin and QW bases (self-inverse)."""
    return HD_I @ np.asarray(vec)

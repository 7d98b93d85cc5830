"""Quantum-wire BdG model: Hamiltonian, bands, Pfaffian invariant, Bloch picture.

Basis ordering is sigma (spin) outer, tau (particle/hole) inner, i.e. index
``2*s + t`` with ``s = 0`` spin up and ``t = 0`` particle.
"""
import enum
from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    I2, SX, SY, SZ, bloch_vector, hermitian_eigen, kron, partial_trace_spin, pfaffian4,
)

DEFAULT_P_INF = 50.0
DEFAULT_EPS_C = 1e-9
PF_CRITICAL = 1e-9

SZ_TZ = kron(SZ, SZ)
I_TZ = kron(I2, SZ)
I_TX = kron(I2, SX)
SX_I = kron(SX, I2)


class CriticalPointError(ArithmeticError):
    """Raised when a quantity is ill-defined at the phase boundary."""


class Phase(enum.Enum):
    SC = "SC"
    TP = "TP"
    CRITICAL = "CRITICAL"


@dataclass(frozen=True)
class QwParams:
    mu: float
    delta: float
    bx: float

    def __post_init__(self):
        if not self.mu < 0:
            raise ValueError(f"mu must be negative, got {self.mu}")
        if self.delta < 0:
            raise ValueError(f"delta must be non-negative, got {self.delta}")
        if self.bx < 0:
            raise ValueError(f"bx must be non-negative, got {self.bx}")

    @property
    def gap_scale(self) -> float:
        """sqrt(mu^2 + delta^2); the SC/TP boundary sits at bx equal to this."""
        return float(np.hypot(self.mu, self.delta))

    @property
    def scale(self) -> float:
        return max(abs(self.mu), self.delta, self.bx)


def build_hqw(params: QwParams, p: float):
    xi = p * p - params.mu
    return p * SZ_TZ + xi * I_TZ + params.delta * I_TX + params.bx * SX_I


def dispersion(params: QwParams, p_grid):
    """Band table of shape (len(p_grid), 4), bands ascending (1..4 bottom to top)."""
    p_grid = np.atleast_1d(np.asarray(p_grid, dtype=float))
    return np.array([np.linalg.eigvalsh(build_hqw(params, p)) for p in p_grid])


def classify_phase(params: QwParams, eps_c: float = DEFAULT_EPS_C) -> Phase:
    r = params.gap_scale
    if params.bx < r - eps_c:
        return Phase.SC
    if params.bx > r + eps_c:
        return Phase.TP
    return Phase.CRITICAL


# Nambu -> Majorana map. The particle-hole operator is sy(x)ty followed by
# complex conjugation; with that real symmetric unitary written as V V^T, the
# rows of W = V^H turn every particle-hole odd H into i * (real antisymmetric).
def _majorana_map():
    u = kron(SY, SY).real
    d, o = np.linalg.eigh(u)
    w = (o * np.sqrt(d.astype(complex))).conj().T
    probe = QwParams(mu=-1.0, delta=0.3, bx=0.7)
    a = -1j * (w @ build_hqw(probe, 0.0) @ w.conj().T)
    if np.max(np.abs(a.imag)) > 1e-9 or np.max(np.abs(a.real + a.real.T)) > 1e-9:
        raise RuntimeError("Majorana map failed to antisymmetrize the BdG Hamiltonian")
    # orientation: Pf(H(0)) must come out as mu^2 + delta^2 - bx^2
    if pfaffian4(a.real) < 0:
        w[0] *= -1
    return w


MAJORANA = _majorana_map()
PH_OPERATOR = kron(SY, SY)


def majorana_form(h):
    """Real antisymmetric ``-i W H W^H`` for a particle-hole odd ``H``."""
    a = -1j * (MAJORANA @ h @ MAJORANA.conj().T)
    if np.max(np.abs(a.imag)) > 1e-9 * max(np.max(np.abs(a)), 1.0):
        raise ValueError("Hamiltonian is not particle-hole antisymmetric at this momentum")
    return a.real


def ph_symmetric_part(h):
    """Projection of ``H`` onto its particle-hole odd component.

    At finite momentum the ``p sz tz`` term is particle-hole even; it drops out
    here, which is exact at the invariant points p = 0 and p -> infinity.
    """
    c = PH_OPERATOR
    return 0.5 * (h - c @ h.conj() @ c.conj().T)


def pfaffian_qw(params: QwParams, p: float) -> float:
    return float(pfaffian4(majorana_form(ph_symmetric_part(build_hqw(params, p)))))


def topological_number(params: QwParams, p_inf: float = DEFAULT_P_INF) -> int:
    """+1 in the SC phase, -1 in the TP phase, from the two Pfaffian signs."""
    if p_inf**2 < 100 * params.scale:
        raise ValueError(f"p_inf={p_inf} too small for parameter scale {params.scale}")
    pf0 = pfaffian_qw(params, 0.0)
    if abs(pf0) < PF_CRITICAL:
        raise CriticalPointError(f"Pf(H(0)) = {pf0:.3e}: invariant ill-defined at the phase boundary")
    pf_inf = pfaffian_qw(params, p_inf)
    return int(np.sign(pf0) * np.sign(pf_inf))


def up_angle(params: QwParams, p: float) -> float:
    return 0.5 * float(np.arctan(params.delta / (p * p - params.mu)))


def up_rotation(params: QwParams, p: float):
    """U_p = exp(i theta_p ty) on the tau sector, extended to sigma (x) tau."""
    th = up_angle(params, p)
    u_tau = np.cos(th) * I2 + 1j * np.sin(th) * SY
    return kron(I2, u_tau)


def transform_up(params: QwParams, p: float):
    u = up_rotation(params, p)
    return u @ build_hqw(params, p) @ u.conj().T


@dataclass(frozen=True)
class BlochTrajectory:
    momenta: np.ndarray
    vectors: np.ndarray  # (n, 3) unit vectors
    raw_length: np.ndarray = field(repr=False)

    @property
    def start(self):
        return self.vectors[0]

    @property
    def end(self):
        return self.vectors[-1]


def bloch_trajectory(params: QwParams, p_grid, eps_c: float = DEFAULT_EPS_C,
                     gap_tol: float = 1e-9) -> BlochTrajectory:
    p_grid = np.asarray(p_grid, dtype=float)
    if p_grid.ndim != 1 or p_grid.size < 2 or p_grid[0] != 0 or np.any(np.diff(p_grid) <= 0):
        raise ValueError("p_grid must be ascending and start at 0")
    if p_grid[-1] ** 2 < 100 * params.scale:
        raise ValueError(f"p_max={p_grid[-1]} too small for parameter scale {params.scale}")
    if classify_phase(params, eps_c) is Phase.CRITICAL:
        raise CriticalPointError(f"critical parameters {params}: 3rd band is not isolated")
    vecs, lens = [], []
    for p in p_grid:
        w, v = hermitian_eigen(transform_up(params, p))
        if w[2] - w[1] < gap_tol:
            raise CriticalPointError(f"bands 2 and 3 touch at p={p} (gap {w[2] - w[1]:.3e})")
        psi = v[:, 2]
        rho_tau = partial_trace_spin(np.outer(psi, psi.conj()), keep="tau")
        r = bloch_vector(rho_tau)
        n = np.linalg.norm(r)
        vecs.append(r / n)
        lens.append(n)
    return BlochTrajectory(p_grid, np.array(vecs), np.array(lens))


def angle_between(u, v) -> float:
    return float(np.arccos(np.clip(np.dot(u, v), -1.0, 1.0)))


def classify_trajectory(traj: BlochTrajectory, tol: float = 0.1) -> str:
    """'closed' if both ends meet, 'open' if they sit on opposite poles."""
    if angle_between(traj.start, traj.end) <= tol:
        return "closed"
    z = np.array([0.0, 0.0, 1.0])
    ends = sorted([angle_between(traj.start, z), angle_between(traj.end, z)])
    if ends[0] <= tol and ends[1] >= np.pi - tol:
        return "open"
    return "undetermined"


def phi_state(params: QwParams):
    """|<-> (x) (alpha|p> + beta|h>), the p = 0 eigenstate with energy -bx + sqrt(mu^2+delta^2)."""
    # eigenvector of -mu tz + delta tx with eigenvalue +r
    half = 0.5 * np.arctan2(params.delta, -params.mu)
    phi_tau = np.array([np.cos(half), np.sin(half)], dtype=complex)
    left = np.array([1, -1], dtype=complex) / np.sqrt(2)
    return np.kron(left, phi_tau)


def phi_energy(params: QwParams) -> float:
    return -params.bx + params.gap_scale

"""Eigenvalue-finding protocol: a(psi, m) series, spectrum, peak fits, sign estimator.

Probe labels refer to NV levels. In the QW frame the probes are
|4> = |->, p>, |5> = |->, h>, |7> = |<-, p>, |8> = |<-, h>; ``reverse_mw``
flips the MW detuning (B_x -> -B_x in QW language), which lets |4> stand in
for |7>.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import optimize, signal, special

from .dynamics import (
    NoiseModel, ReadoutModel, apply_rotations, evolve_rot_nv, lab_states, readback_pulses,
    readout_level, simulate_pl,
)
from .linalg import I2, SX, hermitian_eigen, kron
from .nv import DEFAULT_SCALE, HD_I, LEVELS, SUBSPACE, WORK_LEVELS, NvConstants, qw_to_nv
from .wire import QwParams, build_hqw

PROBES = SUBSPACE
EXPERIMENT_PROBES = (4, 5)
DEFAULT_M_MAX = 64
DEFAULT_ZERO_PAD = 8
DEFAULT_THETA = tuple(2 * np.pi * np.arange(8) / 8)
TAU_FACTOR = 8


class NoPeakError(ValueError):
    pass


class AliasingError(ValueError):
    pass


@dataclass
class TimeSeries:
    tau: float  # QW time units
    values: np.ndarray
    psi_label: int
    mode: str = "ideal"
    reverse_mw: bool = False
    low_confidence: np.ndarray = None
    pl_curves: np.ndarray = None  # (m, theta) emulated PL counts
    theta: np.ndarray = None

    @property
    def m(self):
        return np.arange(len(self.values))


@dataclass
class Peak:
    center: float
    sigma: float
    height: float
    center_error: float
    baseline: float = 0.0


@dataclass
class EnergySpectrum:
    energies: np.ndarray
    amplitude: np.ndarray  # |S(E)| / sum(window): a unit-weight line peaks at 1
    values: np.ndarray  # raw DFT on the fftshifted grid
    tau: float
    n_samples: int
    window: str = "rect"
    peaks: list = field(default_factory=list)

    @property
    def n_fft(self) -> int:
        return len(self.energies)

    @property
    def bin_width(self) -> float:
        return 1.0 / (self.n_fft * self.tau)

    @property
    def resolution(self) -> float:
        """Native (unpadded) bin width."""
        return 1.0 / (self.n_samples * self.tau)

    def power(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) / self.n_fft)


@dataclass
class CosineFit:
    y0: float
    amplitude: float
    theta0: float
    rms: float
    indeterminate: bool = False
    stderr: np.ndarray = None

    def __call__(self, theta):
        return self.y0 + self.amplitude * np.cos(np.asarray(theta) - self.theta0)


# -- state preparation & ideal series ----------------------------------------

def initial_superposition(psi_label: int):
    """(|6> + |psi>)/sqrt(2) on the working levels (4, 5, 6, 7, 8)."""
    if psi_label not in PROBES:
        raise ValueError(f"probe must be one of {PROBES}, got {psi_label}")
    v = np.zeros(len(WORK_LEVELS), dtype=complex)
    v[WORK_LEVELS.index(6)] = v[WORK_LEVELS.index(psi_label)] = 1 / math.sqrt(2)
    return v


def probe_qw_state(psi_label: int):
    """NV basis level mapped into the QW basis (Hadamard on the spin)."""
    e = np.zeros(4, dtype=complex)
    e[SUBSPACE.index(psi_label)] = 1
    return HD_I @ e


def qw_hamiltonian(params: QwParams, p: float, reverse_mw: bool = False):
    h = build_hqw(params, p)
    if reverse_mw:
        h = h - 2 * params.bx * kron(SX, I2)
    return h


def default_tau(params: QwParams, p: float, reverse_mw: bool = False) -> float:
    e = np.linalg.eigvalsh(qw_hamiltonian(params, p, reverse_mw))
    return 1.0 / (TAU_FACTOR * np.max(np.abs(e)))


def probe_weights(params: QwParams, p: float, psi_label: int, reverse_mw: bool = False):
    """Eigenvalues E_j and weights |c_{psi,j}|^2 of the probe state."""
    w, v = hermitian_eigen(qw_hamiltonian(params, p, reverse_mw))
    c = v.conj().T @ probe_qw_state(psi_label)
    return w, np.abs(c) ** 2


def sample_series_ideal(params: QwParams, p: float, psi_label: int, m_max: int = DEFAULT_M_MAX,
                        tau=None, reverse_mw: bool = False) -> TimeSeries:
    """a(psi, m) = <psi| exp(-2 pi i H_QW m tau) |psi> for m = 0..m_max."""
    if tau is None:
        tau = default_tau(params, p, reverse_mw)
    energies, weights = probe_weights(params, p, psi_label, reverse_mw)
    nyq = 1 / (2 * tau)
    bad = energies[np.abs(energies) >= nyq]
    if bad.size:
        raise AliasingError(f"eigenvalue {bad[0]:.6g} outside the Nyquist window +-{nyq:.6g}")
    m = np.arange(m_max + 1)
    a = np.exp(-2j * np.pi * np.outer(m * tau, energies)) @ weights
    return TimeSeries(tau, a, psi_label, "ideal", reverse_mw)


# -- readout fit --------------------------------------------------------------

def fit_cosine(theta, y) -> CosineFit:
    """Least-squares y0 + A cos(theta - theta0) via the linear B cos + C sin form."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if theta.size < 4:
        raise ValueError("need at least 4 points for a cosine fit")
    x = np.column_stack([np.ones_like(theta), np.cos(theta), np.sin(theta)])
    if np.linalg.matrix_rank(x) < 3:
        raise ValueError("degenerate phase grid: all phases coincide modulo pi")
    coef, *_ = np.linalg.lstsq(x, y, rcond=None)
    y0, b, c = coef
    resid = y - x @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    amp = float(math.hypot(b, c))
    dof = theta.size - 3
    s2 = float(resid @ resid / dof) if dof > 0 else 0.0
    stderr = np.sqrt(np.diag(s2 * np.linalg.inv(x.T @ x)))
    scale = max(abs(y0), np.max(np.abs(y)), 1e-300)
    if amp <= 1e-14 * scale:
        return CosineFit(float(y0), 0.0, 0.0, rms, True, stderr)
    return CosineFit(float(y0), amp, float(math.atan2(c, b)), rms, False, stderr)


def reconstruct_amplitude(fit: CosineFit, pl_psi: float, pl_ref: float) -> complex:
    """a = 2A (cos theta0 + i sin theta0) / (PL_psi - PL_6)."""
    return 2 * fit.amplitude * complex(math.cos(fit.theta0), math.sin(fit.theta0)) / (pl_psi - pl_ref)


# -- emulated series ----------------------------------------------------------

def sample_series_emulated(params: QwParams, p: float, psi_label: int, m_max: int = DEFAULT_M_MAX,
                           tau=None, noise: NoiseModel = NoiseModel(), readout: ReadoutModel = ReadoutModel(),
                           theta_grid=DEFAULT_THETA, reverse_mw: bool = False, scale: float = DEFAULT_SCALE,
                           constants: NvConstants = NvConstants(), dt_max=None,
                           residual_threshold: float = 5.0) -> TimeSeries:
    """Pulse-level emulation of the a(psi, m) measurement.

    Each sample runs init -> drive for m*tau -> readback with phase theta for
    every theta in ``theta_grid``, emulates PL, fits the cosine and inverts
    the readout formula. Samples whose fit residual exceeds
    ``residual_threshold`` times the expected shot-noise scale (or 1e-6 of
    the signal without shot noise) are flagged in ``low_confidence``.
    """
    theta_grid = np.asarray(theta_grid, dtype=float)
    if len(np.unique(np.mod(theta_grid, 2 * np.pi))) < 4:
        raise ValueError("theta grid needs at least 4 distinct phases")
    span = np.ptp(np.unwrap(np.sort(np.mod(theta_grid, 2 * np.pi))))
    if span < 1.5 * np.pi - 1e-12:
        raise ValueError("theta grid must span at least 3/4 of a turn")
    if tau is None:
        tau = default_tau(params, p, reverse_mw)
    config = qw_to_nv(params, p, scale, tau / scale)
    if reverse_mw:
        config = config.reversed_mw()
    psi5 = initial_superposition(psi_label)
    times = np.arange(m_max + 1) * config.tau
    if noise.crosstalk:
        psi9 = np.zeros(9, dtype=complex)
        for lab, amp in zip(WORK_LEVELS, psi5):
            psi9[lab - 1] = amp
        rhos = lab_states(config, psi9, m_max + 1, constants, dt_max, noise)
        levels = LEVELS
    else:
        rhos = evolve_rot_nv(config, psi5, times, noise)
        levels = WORK_LEVELS
    pl_psi = readout.pl[readout_level(psi_label)]
    pl_ref = readout.pl[6]
    seeds = np.random.SeedSequence([noise.seed, 0xA11CE])
    children = seeds.spawn((m_max + 1) * len(theta_grid))
    curves = np.empty((m_max + 1, len(theta_grid)))
    a = np.empty(m_max + 1, dtype=complex)
    flags = np.zeros(m_max + 1, dtype=bool)
    for m, rho in enumerate(rhos):
        for k, th in enumerate(theta_grid):
            rho_k = apply_rotations(rho, readback_pulses(psi_label, th), levels)
            seed = children[m * len(theta_grid) + k] if readout.shot_noise else None
            curves[m, k] = simulate_pl(rho_k, readout, seed, levels) / readout.shots
        fit = fit_cosine(theta_grid, curves[m])
        a[m] = reconstruct_amplitude(fit, pl_psi, pl_ref)
        if readout.shot_noise:
            floor = math.sqrt(np.mean(curves[m]) / readout.shots)
        else:
            floor = 1e-6 * abs(pl_psi - pl_ref)
        flags[m] = fit.rms > residual_threshold * floor
    return TimeSeries(tau, a, psi_label, "emulated", reverse_mw, flags, curves, theta_grid)


# -- spectrum and peaks -------------------------------------------------------

def _window(name: str, n: int):
    if name == "rect":
        return np.ones(n)
    if name == "hann":
        return signal.windows.hann(n, sym=False) if n > 1 else np.ones(n)
    raise ValueError(f"unknown window {name!r}")


def spectrum(series: TimeSeries, window: str = "rect", zero_pad: int = DEFAULT_ZERO_PAD) -> EnergySpectrum:
    """DFT of a(psi, m) with e^{-2 pi i E t} mapped to +E on the energy axis."""
    a = np.asarray(series.values)
    if len(a) < 9:
        raise ValueError("need m_max >= 8")
    if zero_pad < 1:
        raise ValueError("zero_pad must be >= 1")
    w = _window(window, len(a))
    n_fft = int(zero_pad) * len(a)
    raw = np.fft.fftshift(np.fft.ifft(a * w, n_fft) * n_fft)
    energies = np.fft.fftshift(np.fft.fftfreq(n_fft, series.tau))
    return EnergySpectrum(energies, np.abs(raw) / np.sum(w), raw, series.tau, len(a), window)


def combine_spectra(*specs) -> EnergySpectrum:
    """Incoherent sum of spectra on a common grid (amplitudes add, raw DFTs add)."""
    if not specs:
        raise ValueError("nothing to combine")
    first = specs[0]
    for s in specs[1:]:
        if s.n_fft != first.n_fft or not np.allclose(s.energies, first.energies, rtol=0, atol=1e-12):
            raise ValueError("spectra must share the same energy grid")
    return EnergySpectrum(first.energies.copy(), sum(s.amplitude for s in specs),
                          sum(s.values for s in specs), first.tau, first.n_samples, first.window)


def _gauss(x, amp, center, sigma, base):
    return amp * np.exp(-0.5 * ((x - center) / sigma) ** 2) + base


def fit_peak(spec: EnergySpectrum, search_window, threshold=None) -> Peak:
    """Gaussian + baseline least-squares fit over ``search_window`` = (lo, hi).

    Starts from the argmax bin, one bin of width and the window median as
    baseline; Levenberg-Marquardt to a relative step of 1e-10.
    """
    lo, hi = search_window
    sel = np.flatnonzero((spec.energies >= lo) & (spec.energies <= hi))
    if sel.size < 5:
        raise NoPeakError(f"window [{lo:.4g}, {hi:.4g}] holds fewer than 5 bins")
    x, y = spec.energies[sel], spec.amplitude[sel]
    if threshold is None:
        threshold = 3 * float(np.median(spec.amplitude))
    k = int(np.argmax(y))
    if y[k] <= threshold or k in (0, len(y) - 1):
        raise NoPeakError(f"no peak found in [{lo:.4g}, {hi:.4g}]")
    base0 = float(np.median(y))
    p0 = [y[k] - base0, x[k], spec.bin_width, base0]
    res = optimize.least_squares(lambda q: _gauss(x, *q) - y, p0, method="lm",
                                 xtol=1e-10, ftol=1e-12, max_nfev=200 * (len(p0) + 1))
    amp, center, sigma, base = res.x
    dof = max(len(x) - 4, 1)
    s2 = float(res.fun @ res.fun) / dof
    try:
        cov = s2 * np.linalg.inv(res.jac.T @ res.jac)
        cerr = float(np.sqrt(max(cov[1, 1], 0.0)))
    except np.linalg.LinAlgError:
        cerr = float("inf")
    return Peak(float(center), float(abs(sigma)), float(amp + base), cerr, float(base))


def main_lobe(spec: EnergySpectrum) -> float:
    """Half-width of the window's main lobe (first null), in energy units."""
    return spec.resolution * (2.0 if spec.window == "hann" else 1.0)


def _default_rel_height(spec: EnergySpectrum) -> float:
    return 0.3 if spec.window == "rect" else 0.05


def find_peaks(spec: EnergySpectrum, rel_height: float = None, half_width=None):
    """Local maxima above ``rel_height`` times the global maximum, each fitted.

    The default threshold sits above the window's highest sidelobe (0.22 for
    rectangular, 0.03 for Hann). Each fit uses ``half_width`` energy units
    around its maximum (default: half the main lobe).
    """
    if rel_height is None:
        rel_height = _default_rel_height(spec)
    if half_width is None:
        half_width = 0.5 * main_lobe(spec)
    amp = spec.amplitude
    idx, _ = signal.find_peaks(np.concatenate([[0.0], amp, [0.0]]), height=rel_height * amp.max())
    peaks = []
    for i in idx - 1:
        e = spec.energies[i]
        peaks.append(fit_peak(spec, (e - half_width, e + half_width), threshold=0.0))
    spec.peaks = peaks
    return peaks


def resolved_peaks(spec: EnergySpectrum, energy_window, min_dip: float = 0.2, rel_height: float = None):
    """Fitted peaks inside ``energy_window`` that are resolved from each other.

    A local maximum counts as its own line only if the amplitude dips by at
    least ``min_dip`` of its height before reaching a higher one (a Rayleigh
    style test; sinc^2 lines at the Rayleigh limit dip by about 0.19). Lines
    closer than that come back as a single peak fitted over the whole bump.
    Maxima below ``rel_height`` of the window maximum are ignored (default:
    above the window's highest sidelobe, as in :func:`find_peaks`).
    """
    if rel_height is None:
        rel_height = _default_rel_height(spec)
    lo, hi = energy_window
    x, amp = spec.energies, spec.amplitude
    inside = (x >= lo) & (x <= hi)
    if np.count_nonzero(inside) < 5:
        raise NoPeakError(f"window [{lo:.4g}, {hi:.4g}] holds fewer than 5 bins")
    # prominence is measured on the whole spectrum so that a line broader
    # than the window still counts as one line
    idx, props = signal.find_peaks(amp, prominence=0.0)
    keep = (inside[idx] & (props["prominences"] >= min_dip * amp[idx])
            & (amp[idx] >= rel_height * amp[inside].max()))
    idx = idx[keep]
    if idx.size == 0:
        raise NoPeakError(f"no peak found in [{lo:.4g}, {hi:.4g}]")
    left = np.concatenate([[0], idx[:-1]])
    right = np.concatenate([idx[1:], [len(amp) - 1]])
    peaks = []
    for i, a, b in zip(idx, left, right):
        # fit between the lowest points on either side of this maximum
        i0 = a + int(np.argmin(amp[a:i + 1]))
        i1 = i + int(np.argmin(amp[i:b + 1]))
        i0, i1 = min(i0, max(i - 2, 0)), max(i1, min(i + 2, len(amp) - 1))
        try:
            pk = fit_peak(spec, (x[i0], x[i1]), threshold=0.0)
        except NoPeakError:
            continue  # another kept maximum dominates this stretch
        # a ramp, not a line: the Gaussian wandered off or outgrew its window
        if x[i0] <= pk.center <= x[i1] and pk.sigma <= x[i1] - x[i0]:
            peaks.append(pk)
    if not peaks:
        raise NoPeakError(f"no peak found in [{lo:.4g}, {hi:.4g}]")
    return peaks


def match_peaks(peaks, exact, gate):
    """Pair each fitted peak with the nearest exact eigenvalue within ``gate``.

    Returns (matches, unmatched) where matches is a list of (peak, index).
    """
    exact = np.asarray(exact)
    matches, unmatched = [], []
    for pk in peaks:
        j = int(np.argmin(np.abs(exact - pk.center)))
        if abs(exact[j] - pk.center) <= gate:
            matches.append((pk, j))
        else:
            unmatched.append(pk)
    return matches, unmatched


# -- topological number ------------------------------------------------------

def sign_average(e_c: float, sigma: float) -> float:
    """Mean of sgn(E) under a Gaussian N(e_c, sigma^2): erf(e_c / (sigma sqrt 2))."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return float(special.erf(e_c / (sigma * math.sqrt(2))))


@dataclass(frozen=True)
class ProtocolConfig:
    mode: str = "ideal"  # ideal | emulated
    m_max: int = DEFAULT_M_MAX
    tau: float = None
    window: str = "rect"
    zero_pad: int = DEFAULT_ZERO_PAD
    scale: float = DEFAULT_SCALE
    theta_grid: tuple = DEFAULT_THETA
    noise: NoiseModel = NoiseModel()
    readout: ReadoutModel = ReadoutModel()
    dt_max: float = None

    def __post_init__(self):
        if self.mode not in ("ideal", "emulated"):
            raise ValueError(f"mode must be 'ideal' or 'emulated', got {self.mode!r}")


def sample_series(params: QwParams, p: float, psi_label: int, cfg: ProtocolConfig,
                  reverse_mw: bool = False, noise: NoiseModel = None) -> TimeSeries:
    if cfg.mode == "ideal":
        return sample_series_ideal(params, p, psi_label, cfg.m_max, cfg.tau, reverse_mw)
    return sample_series_emulated(params, p, psi_label, cfg.m_max, cfg.tau, noise or cfg.noise, cfg.readout,
                                  cfg.theta_grid, reverse_mw, cfg.scale, dt_max=cfg.dt_max)


def dominant_peak(spec: EnergySpectrum) -> Peak:
    k = int(np.argmax(spec.amplitude))
    e = spec.energies[k]
    # widen the fit window for lines broader than the main lobe
    half = spec.amplitude[k] / 2
    lo = k
    while lo > 0 and spec.amplitude[lo] > half:
        lo -= 1
    hi = k
    while hi < len(spec.amplitude) - 1 and spec.amplitude[hi] > half:
        hi += 1
    width = max(0.5 * main_lobe(spec), 1.5 * (spec.energies[hi] - spec.energies[lo]) / 2)
    return fit_peak(spec, (e - width, e + width), threshold=0.0)


def measure_topological_number(params: QwParams, cfg: ProtocolConfig = ProtocolConfig(), noise=None):
    """nu_bar from the p = 0 line seen by |4> with the MW detuning reversed.

    Returns ``(nu_bar, metadata)``; ``sign(nu_bar)`` estimates the invariant.
    """
    series = sample_series(params, 0.0, 4, cfg, reverse_mw=True, noise=noise)
    spec = spectrum(series, cfg.window, cfg.zero_pad)
    pk = dominant_peak(spec)
    sigma = pk.center_error if pk.center_error > 0 else np.finfo(float).tiny
    meta = {"E_c": pk.center, "sigma": sigma, "width": pk.sigma, "height": pk.height,
            "tau": series.tau, "bin_width": spec.bin_width, "series": series, "spectrum": spec}
    return sign_average(pk.center, sigma), meta

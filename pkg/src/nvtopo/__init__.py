"""Simulated NV-center quantum simulation of a topological superconducting wire."""
from .linalg import (
    EigenDecomposition, NotHermitianError, bloch_vector, check_density_matrix, check_hermitian,
    expm_unitary, hermitian_eigen, kron, partial_trace_spin, pfaffian4,
)
from .wire import (
    BlochTrajectory, CriticalPointError, Phase, QwParams, bloch_trajectory, build_hqw, classify_phase,
    classify_trajectory, dispersion, pfaffian_qw, phi_energy, phi_state, topological_number, transform_up,
)
from .nv import (
    LevelMap, NvConstants, NvDriveConfig, build_hnv_lab, build_hrot, hadamard_conjugate, nv_basis_map,
    nv_to_qw, qw_to_nv,
)
from .dynamics import (
    ConvergenceError, NoiseModel, PulseSchedule, ReadoutModel, evolve_ideal_qw, evolve_lab_nv,
    evolve_rot_nv, simulate_pl,
)
from .spectroscopy import (
    EnergySpectrum, NoPeakError, Peak, ProtocolConfig, TimeSeries, combine_spectra, find_peaks, fit_peak,
    measure_topological_number, resolved_peaks, sample_series_emulated, sample_series_ideal, sign_average,
    spectrum,
)

__version__ = "0.1.0"

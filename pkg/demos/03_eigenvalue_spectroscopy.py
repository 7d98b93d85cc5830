"""
Finding eigenvalues from a time series
======================================

The probe |5> is put in superposition with the reference |6>, evolved under
the mapped drive for m * tau and read back. The complex overlap a(5, m) is
Fourier transformed; peaks sit on the eigenvalues with heights |c_j|^2.
"""
import numpy as np

from nvtopo import QwParams, find_peaks, sample_series_emulated, sample_series_ideal, spectrum
from nvtopo.dynamics import ReadoutModel
from nvtopo.spectroscopy import probe_weights
from _plotting import figure, save

par, p = QwParams(-1.44, 0.165, 1.3), 0.5
energies, weights = probe_weights(par, p, 5)
print("exact eigenvalues:", np.round(energies, 4))
print("weights |c_5j|^2: ", np.round(weights, 4))

# %%
# Ideal series and its spectrum. Rectangular window by default; Hann keeps
# weak lines clear of their neighbours' sidelobes.
series = sample_series_ideal(par, p, 5, m_max=64)
for window in ("rect", "hann"):
    spec = spectrum(series, window)
    peaks = find_peaks(spec)
    print(f"{window}: native bin {spec.resolution:.3f}")
    for pk in peaks:
        print(f"   E_c={pk.center:+.4f} +- {pk.center_error:.1e}   height={pk.height:.3f}")

# %%
# The same measurement emulated at pulse level: for every m the readback
# phase theta is stepped, PL(theta) is fitted by a cosine and a is rebuilt.
emu = sample_series_emulated(par, p, 5, m_max=64, readout=ReadoutModel(shot_noise=True, shots=10**6))
print("max |a_emulated - a_ideal| with shot noise:", f"{np.max(np.abs(emu.values - series.values)):.3f}")

fig = figure(1, 2, figsize=(11, 3.5))
if fig:
    plt, f, (ax1, ax2) = fig
    ax1.plot(emu.theta, emu.pl_curves[5], "o")
    ax1.set_xlabel("theta")
    ax1.set_ylabel("PL per shot (m = 5)")
    spec = spectrum(emu)
    ax2.plot(spec.energies, spec.amplitude)
    ax2.vlines(energies, 0, weights, color="tab:red", lw=1)
    ax2.set_xlabel("E")
    save(f, "03_spectroscopy.png")

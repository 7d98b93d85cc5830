"""
Dephasing hides the small topological gap
=========================================

At mu = -1.14 the p = 0 doublet is split by 2|bx - sqrt(mu^2 + delta^2)|,
about 0.3. Electron dephasing broadens both lines past that; ten times
longer T2* separates them again.
"""
import numpy as np

from nvtopo import NoiseModel, QwParams, combine_spectra, resolved_peaks, sample_series_emulated, spectrum
from _plotting import figure, save

par = QwParams(-1.14, 0.165, 1.3)
print(f"doublet splitting: {2 * abs(par.bx - par.gap_scale):.3f}")

specs = {}
for t2 in (3.0, 30.0):
    nz = NoiseModel.from_t2star(t2, n_realizations=10_000, seed=1)
    s5 = sample_series_emulated(par, 0.0, 5, m_max=256, noise=nz)
    s4 = sample_series_emulated(par, 0.0, 4, m_max=256, noise=nz, reverse_mw=True)
    specs[t2] = combine_spectra(spectrum(s5), spectrum(s4))
    peaks = resolved_peaks(specs[t2], (-0.5, 0.5))
    print(f"T2* = {t2:4.1f} us: " + ", ".join(f"E_c={pk.center:+.3f} (sigma {pk.sigma:.3f})" for pk in peaks))

fig = figure()
if fig:
    plt, f, ax = fig
    for t2, spec in specs.items():
        sel = np.abs(spec.energies) < 1.2
        ax.plot(spec.energies[sel], spec.amplitude[sel] / spec.amplitude[sel].max(), label=f"T2* = {t2} us")
    ax.set_xlabel("E")
    ax.legend()
    save(f, "05_gap.png")

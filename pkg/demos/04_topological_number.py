"""
Measuring the topological number
================================

At p = 0 the probe |4> with the MW detuning reversed stands in for |7>,
whose dominant line sits at -bx + sqrt(mu^2 + delta^2). Its sign is the
invariant; nu_bar = erf(E_c / (sigma sqrt 2)) folds in the fit error.
"""
import numpy as np

from nvtopo import NoiseModel, ProtocolConfig, QwParams, measure_topological_number
from _plotting import figure, save

mus = np.round(np.arange(-1.6, -0.98 + 1e-9, 0.02), 2)
ideal = np.array([measure_topological_number(QwParams(mu, 0.165, 1.3))[0] for mu in mus])
flip = np.flatnonzero(np.diff(np.sign(ideal)))[0]
print(f"ideal: sign change between mu={mus[flip]} and {mus[flip + 1]}")

# %%
# Emulated with quasi-static dephasing (T2* = 3 us). Lines broaden, the fit
# error grows and nu_bar softens near the transition.
cfg = ProtocolConfig(mode="emulated")
noisy = []
for i, mu in enumerate(mus):
    nz = NoiseModel.from_t2star(3.0, n_realizations=2000, seed=i)
    nu, meta = measure_topological_number(QwParams(mu, 0.165, 1.3), cfg, nz)
    noisy.append(nu)
    print(f"mu={mu:+.2f}  nu_bar={nu:+.3f}  E_c={meta['E_c']:+.4f}  sigma={meta['sigma']:.1e}")

fig = figure()
if fig:
    plt, f, ax = fig
    ax.plot(mus, ideal, "k--", label="ideal")
    ax.plot(mus, noisy, "o", label="dephased")
    ax.axvline(-np.sqrt(1.3**2 - 0.165**2), color="0.7")
    ax.set_xlabel("mu")
    ax.set_ylabel("nu_bar")
    ax.legend()
    save(f, "04_nu.png")

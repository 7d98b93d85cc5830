"""
Wire bands and the Pfaffian invariant
=====================================

Four BdG bands for five chemical potentials at delta = 0.165, bx = 1.3, and
the Z2 number read off from the two Pfaffian signs.
"""
import numpy as np

from nvtopo import QwParams, classify_phase, dispersion, pfaffian_qw, topological_number
from _plotting import figure, save

MUS = (-1.6, -1.44, -1.29, -1.14, -0.98)
p = np.linspace(-2, 2, 201)

# %%
# The gap between bands 2 and 3 at p = 0 is 2|bx - sqrt(mu^2 + delta^2)|.
# It closes near mu = -1.29 and reopens on the other side with the
# invariant flipped.
for mu in MUS:
    par = QwParams(mu, 0.165, 1.3)
    bands = dispersion(par, [0.0])[0]
    gap = bands[2] - bands[1]
    try:
        nu = topological_number(par)
    except ArithmeticError:
        nu = 0
    print(f"mu={mu:+.2f}  phase={classify_phase(par).value:8s}  gap(p=0)={gap:.4f}  "
          f"Pf(0)={pfaffian_qw(par, 0.0):+.4f}  nu={nu:+d}")

# %%
fig = figure(1, len(MUS), figsize=(15, 3), sharey=True)
if fig:
    plt, f, axes = fig
    for ax, mu in zip(axes, MUS):
        ax.plot(p, dispersion(QwParams(mu, 0.165, 1.3), p), color="tab:cyan")
        ax.set_title(f"mu = {mu}")
        ax.set_xlabel("p")
    axes[0].set_ylabel("E")
    save(f, "01_bands.png")

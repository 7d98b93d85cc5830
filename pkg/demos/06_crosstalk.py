"""
Crosstalk from non-selective pulses
===================================

The lab-frame tier drives all nine levels with all four tones; nothing is
selective except through detuning. Keeping only resonant terms recovers the
rotating-frame model exactly. Weaker drives (smaller scale) shrink the error.
"""
import numpy as np

from nvtopo import QwParams, evolve_rot_nv, qw_to_nv
from nvtopo.dynamics import lab_states
from nvtopo.nv import WORK_LEVELS
from nvtopo.spectroscopy import initial_superposition

par = QwParams(-1.14, 0.165, 1.3)
psi5 = initial_superposition(5)
psi9 = np.zeros(9, dtype=complex)
for lab, a in zip(WORK_LEVELS, psi5):
    psi9[lab - 1] = a
idx = [lab - 1 for lab in WORK_LEVELS]

for scale in (1 / 11, 1 / 22, 1 / 44):
    # same QW time (8 samples of 0.25) at every scale
    cfg = qw_to_nv(par, 0.3, scale, tau=0.25 / scale)
    rot = evolve_rot_nv(cfg, psi5, np.arange(9) * cfg.tau)
    full = lab_states(cfg, psi9, 9)
    secular = lab_states(cfg, psi9, 9, cutoff=0.0)
    dev = np.max(np.abs(full[:, idx][:, :, idx] - rot))
    dev0 = np.max(np.abs(secular[:, idx][:, :, idx] - rot))
    leak = np.max(1 - np.einsum("nii->n", full[:, idx][:, :, idx]).real)
    print(f"scale 1/{round(1 / scale):2d}: max|rho_lab - rho_rot| = {dev:.4f}  "
          f"(secular {dev0:.1e}), leakage out of |4..8> = {leak:.1e}")

"""
Geometry of the third band
==========================

After the U_p rotation the third-band state's particle-hole part traces a
curve on the Bloch sphere as p runs from 0 to large momentum. The curve
closes in the trivial phase and runs pole to pole in the topological one.
"""
import numpy as np

from nvtopo import QwParams, bloch_trajectory, classify_trajectory
from _plotting import figure, save

grid = np.linspace(0, 20, 2001)
trajs = {}
for mu in (-1.6, -1.14):
    t = bloch_trajectory(QwParams(mu, 0.165, 1.3), grid)
    trajs[mu] = t
    print(f"mu={mu:+.2f}: start={np.round(t.start, 3)} end={np.round(t.end, 3)} -> {classify_trajectory(t)}")

# %%
fig = figure(subplot_kw={"aspect": "equal"})
if fig:
    plt, f, ax = fig
    circle = np.linspace(0, 2 * np.pi, 200)
    ax.plot(np.cos(circle), np.sin(circle), color="0.8")
    for mu, t in trajs.items():
        ax.plot(t.vectors[:, 0], t.vectors[:, 2], label=f"mu = {mu}")
    ax.set_xlabel("x")
    ax.set_ylabel("z")
    ax.legend()
    save(f, "02_bloch.png")

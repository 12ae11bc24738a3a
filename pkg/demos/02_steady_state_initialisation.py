"""CW initialisation with a cavity: trace distance to |2> versus coupling.

A weak laser pumps |1> -> |4>. The cavity resonant with |2>-|4> speeds up
the decay into |2> at moderate coupling; at very strong coupling the
polaritons it forms also drain |2>, and the ground state approaches the
mixed state (T -> 0.5) in the single-mode cavity.
"""
# %%
import numpy as np

from qdcavity import SweepGrid, run_steady_state_initialisation

g_over_kappa = tuple(np.geomspace(0.01, 10, 7))
for config in ("single", "bimodal"):
    for kappa in (1.0, 20.0):
        grid = SweepGrid({"kappa_ghz": (kappa,), "g_over_kappa": g_over_kappa}, config)
        rows = run_steady_state_initialisation(grid)
        vals = "  ".join(f"{r.value:.3f}" for r in rows)
        print(f"{config:8s} kappa/2pi = {kappa:5.1f} GHz   T: {vals}")
print("g/kappa grid:", "  ".join(f"{g:.3g}" for g in g_over_kappa))

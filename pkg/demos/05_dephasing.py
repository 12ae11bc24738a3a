"""Trion pure dephasing: how initialisation and readout degrade with Gamma."""
# %%
from qdcavity import SweepGrid, run_pulsed_initialisation, run_readout

grid = {"kappa_ghz": (20.0,), "purcell": (10.0,), "duration_ns": (3.0,),
        "dephasing_over_gamma": (0.0, 0.1, 1.0, 10.0)}
for r in run_pulsed_initialisation(SweepGrid(grid), "square"):
    print(f"Gamma = {r.point['dephasing_over_gamma']:4.1f} gamma: T = {r.value:.3e}")

# %%
for gamma in (0.0, 10.0):
    r = run_readout(SweepGrid({"kappa_ghz": (20.0,), "purcell": (19.0,),
                               "dephasing_over_gamma": (gamma,)}))[0]
    print(f"single-mode readout, Gamma = {gamma:4.1f} gamma: R = {r.value:.4f}")

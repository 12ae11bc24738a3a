"""Pulsed initialisation: one optical pulse, free relaxation, trace distance to |2>.

The objective is minimised over the pulse strength (Rabi frequency for square
pulses, area for Gaussian ones) with a coarse scan plus golden-section refinement.
"""
# %%
import numpy as np

from qdcavity import OptimizationSpec, Setup, SweepGrid, run_pulsed_initialisation
from qdcavity.experiments import PulsedInitialisation

point = {"kappa_ghz": 20.0, "purcell": 10.0}

# %% The objective landscape for a 3 ns square pulse
f = PulsedInitialisation(Setup(), "single", point, "square", 3.0)
for omega in np.linspace(0, 10, 11):
    print(f"Omega = {omega:4.1f} gamma   T = {f(omega):.3e}")

# %% Optimised values for both cavity types
grid = {**{k: (v,) for k, v in point.items()}, "duration_ns": (1.0, 3.0)}
for config in ("single", "bimodal"):
    for r in run_pulsed_initialisation(SweepGrid(grid, config), "square"):
        d = r.diagnostics
        print(f"{config:8s} {r.point['duration_ns']:.0f} ns: T = {r.value:.3e} at "
              f"Omega = {r.argopt:.3f} gamma (Fock cutoffs {d['n_max']}, converged "
              f"{d['fock_converged']})")

# %% A short Gaussian pulse, optimised over its area (units of pi)
opt = OptimizationSpec("area", 0.01, 5.0, coarse_points=60, refine=1e-3)
g = run_pulsed_initialisation(SweepGrid({"kappa_ghz": (40.0,), "purcell": (40.0,),
                                         "duration_ns": (0.03,)}), "gaussian", opt)[0]
print(f"30 ps Gaussian: T = {g.value:.3e} at area = {g.argopt:.3f} pi")

"""Building blocks: the four-level emitter, a cavity mode and the Lindblad generator.

Run with ``python demos/01_master_equation_basics.py``.
"""
# %%
import math

import numpy as np

from qdcavity import (
    CavityQDModel,
    DriveSpec,
    PulseEnvelope,
    SystemParams,
    evolve,
    excited_population,
    steady_state,
    vacuum_state,
)
from qdcavity.core import basis_projector
from qdcavity.dynamics import IntegratorConfig

# %% [markdown]
# Default parameters: electron and hole Zeeman splittings of 35 and 20 GHz
# (stored as angular frequencies) and a 1 ns radiative lifetime per
# polarisation.

# %%
p = SystemParams()
print(f"Delta_e/2pi = {p.delta_e / 2 / math.pi:.1f} GHz, Delta_h/2pi = {p.delta_h / 2 / math.pi:.1f} GHz")

# %% [markdown]
# A trion in |4> decays through both polarisation channels, so its population
# falls as exp(-2 gamma t) and ends up shared equally between the two grounds.

# %%
model = CavityQDModel(p, (), DriveSpec())
rho0 = vacuum_state(basis_projector(4, 4), model.space)
t = np.linspace(0, 3, 7)
traj = evolve(rho0, model, IntegratorConfig(horizon=3.0, sample_times=t))
for tk, rho in zip(t, traj.states):
    print(f"t = {tk:.1f} ns  rho44 = {rho[3, 3].real:.6f}  exp(-2t) = {math.exp(-2 * tk):.6f}"
          f"  rho11 = {rho[0, 0].real:.6f}")
print("excited population after 5 ns:",
      excited_population(evolve(rho0, model, IntegratorConfig(5.0, sample_times=[5.0])).final))

# %% [markdown]
# A CW laser on the vertical |1>-|4> transition optically pumps the spin into
# |2>. The steady state is found from the null space of the Liouvillian.

# %%
drive = DriveSpec(p.vertical_14, qd_pulses={"X": PulseEnvelope.cw(2.0)})
rho = steady_state(CavityQDModel(p, (), drive)).matrix
print("steady-state populations:", np.round(np.diag(rho).real, 6))

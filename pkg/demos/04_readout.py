"""Readout: probe the Y cavity mode for 35 ns and count transmitted photons.

Starting in |1> the cavity transmits (N1 photons); starting in |2> the
emitter blocks it (N2 photons). A Poisson threshold decides between the two.
"""
# %%
from qdcavity import SweepGrid, optimal_threshold, readout_fidelity, run_readout

print("threshold for N1 = 10, N2 = 1:", optimal_threshold(10, 1),
      " fidelity:", round(readout_fidelity(10, 1), 4))

# %%
for config in ("single", "bimodal"):
    rows = run_readout(SweepGrid({"kappa_ghz": (9.4, 20.0), "purcell": (7.0, 19.0)}, config))
    for r in rows:
        e = r.extras
        print(f"{config:8s} kappa/2pi = {r.point['kappa_ghz']:4.1f} GHz  F_P = "
              f"{r.point['purcell']:4.1f}:  N1 = {e['n1']:7.3f}  N2 = {e['n2']:6.3f}  "
              f"M = {e['threshold']}  R = {r.value:.4f}")

# %% Collection efficiency scales both photon numbers
for eta in (1.0, 0.5, 0.1):
    r = run_readout(SweepGrid({"kappa_ghz": (20.0,), "purcell": (19.0,)}), eta=eta)[0]
    print(f"eta = {eta:.1f}: N1 = {r.extras['n1']:.3f}, R = {r.value:.4f}")

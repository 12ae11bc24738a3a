"""Self-checks against closed-form results, run by ``qdcavity verify``.

Each check returns (name, passed, detail). All are fast (well under a minute
in total) and deterministic.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .core import (
    DensityMatrix,
    HilbertSpace,
    Operator,
    annihilation,
    basis_projector,
    embed,
    liouvillian,
    lindblad_rhs,
    trace_functional,
    unvec,
    vacuum_state,
    vec,
)
from .dynamics import IntegratorConfig, evolve, propagate, solve_stationary
from .metrics import (
    brute_force_fidelity,
    emitted_photons,
    optimal_threshold,
    readout_fidelity,
    trace_distance,
)
from .model import (
    CavityMode,
    CavityQDModel,
    DriveSpec,
    PulseEnvelope,
    SystemParams,
    coupling_from_purcell,
    purcell_factor,
)

Check = tuple[str, bool, str]
CHECKS: list[Callable[[], Check]] = []


def check(fn):
    CHECKS.append(fn)
    return fn


def random_state(rng, d: int, rank: int | None = None) -> np.ndarray:
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng, d: int) -> np.ndarray:
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (a + a.conj().T)


@check
def liouvillian_matches_direct_assembly() -> Check:
    rng = np.random.default_rng(1)
    space = HilbertSpace((4,))
    h = random_hermitian(rng, 4)
    chans = [(0.7, rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))),
             (1.9, rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))]
    lsup = liouvillian(Operator(space, h, hermitian=True),
                       [(r, Operator(space, o)) for r, o in chans])
    rho = random_state(rng, 4)
    direct = lindblad_rhs(h, chans, rho)
    err = np.max(np.abs(lsup.apply(rho) - direct)) / np.max(np.abs(direct))
    return "liouvillian vs direct assembly", err < 1e-10, f"relative error {err:.2e}"


@check
def liouvillian_preserves_trace_and_hermiticity() -> Check:
    rng = np.random.default_rng(2)
    space = HilbertSpace((4, 3))
    a = embed(annihilation(2), 1, space)
    h = Operator(space, random_hermitian(rng, 12), hermitian=True)
    lsup = liouvillian(h, [(2.0, a), (1.0, embed(basis_projector(1, 4), 0, space))])
    tr = np.max(np.abs(trace_functional(12) @ lsup.matrix))
    drho = lsup.apply(random_state(rng, 12))
    herm = np.max(np.abs(drho - drho.conj().T))
    ok = tr < 1e-10 and herm < 1e-10
    return "trace and Hermiticity preservation", ok, f"trace row {tr:.1e}, anti-Hermitian part {herm:.1e}"


@check
def truncated_ladder_commutator() -> Check:
    a = annihilation(2)
    comm = a @ a.conj().T - a.conj().T @ a
    expected = np.eye(3) - 3 * np.diag([0, 0, 1])
    err = np.max(np.abs(comm - expected))
    return "[a, a+] on a truncated space", err < 1e-14, f"max deviation {err:.1e}"


@check
def free_trion_decay() -> Check:
    model = CavityQDModel(SystemParams(), (), DriveSpec())
    rho0 = vacuum_state(basis_projector(4, 4), model.space)
    traj = evolve(rho0, model, IntegratorConfig(horizon=1.0, sample_times=[0.0, 1.0]))
    r = traj.final.matrix
    err4 = abs(r[3, 3].real - math.exp(-2.0))
    sym = abs(r[0, 0] - r[1, 1])
    ok = err4 < 1e-6 and sym < 1e-8
    return "free decay of |4>", ok, f"|rho44 - e^-2| = {err4:.1e}, |rho11 - rho22| = {sym:.1e}"


@check
def single_channel_decay() -> Check:
    space = HilbertSpace((4,))
    gamma, t = 1.3, 0.8
    lsup = liouvillian(Operator(space, np.zeros((4, 4)), hermitian=True),
                       [(gamma, Operator(space, basis_projector(1, 4)))])
    rho0 = 0.5 * (basis_projector(1, 1) + basis_projector(4, 4)
                  + basis_projector(1, 4) + basis_projector(4, 1))
    rho = unvec(propagate(lsup.matrix, vec(rho0), t), 4)
    e_pop = abs(rho[3, 3] - 0.5 * math.exp(-gamma * t))
    e_coh = abs(rho[0, 3] - 0.5 * math.exp(-gamma * t / 2))
    ok = e_pop < 1e-10 and e_coh < 1e-10
    return "two-level damping rates", ok, f"population error {e_pop:.1e}, coherence error {e_coh:.1e}"


@check
def rk_matches_matrix_exponential() -> Check:
    rng = np.random.default_rng(3)
    params = SystemParams()
    mode = CavityMode("Y", params.diagonal_24, 2 * math.pi * 5, 2 * math.pi * 2, n_max=1)
    drive = DriveSpec(params.vertical_14, qd_pulses={"X": PulseEnvelope.cw(3.0)})
    model = CavityQDModel(params, (mode,), drive)
    rho0 = DensityMatrix(model.space, random_state(rng, model.space.dim))
    times = [0.1, 1.0, 5.0]
    # ~1000 optical cycles: global error is a few hundred times the local tolerance
    cfg = IntegratorConfig(horizon=5.0, sample_times=times, rel_tol=1e-10, abs_tol=1e-12)
    traj = evolve(rho0, model, cfg)
    lmat = model.cw_liouvillian().matrix
    err = max(np.max(np.abs(traj.states[i] - unvec(propagate(lmat, rho0.vec, t), 8)))
              for i, t in enumerate(times))
    return "adaptive RK vs matrix exponential", err < 1e-8, f"max deviation {err:.1e}"


@check
def optical_bloch_steady_state() -> Check:
    space = HilbertSpace((4,))
    omega, gamma = 1.7, 1.0
    h = -0.5 * omega * (basis_projector(1, 4) + basis_projector(4, 1))
    # levels 2 and 3 are emptied into |1> so the |1>-|4> pair is the whole story
    chans = [(gamma, basis_projector(1, 4)), (5.0, basis_projector(1, 2)),
             (5.0, basis_projector(1, 3))]
    lsup = liouvillian(Operator(space, h, hermitian=True),
                       [(r, Operator(space, o)) for r, o in chans])
    rho = solve_stationary(lsup).matrix
    expected = omega ** 2 / (gamma ** 2 + 2 * omega ** 2)
    err = abs(rho[3, 3].real - expected)
    return "optical Bloch steady state", err < 1e-10, f"rho44 = {rho[3, 3].real:.10f}, expected {expected:.10f}"


@check
def driven_empty_cavity_photons() -> Check:
    params = SystemParams()
    kappa, eps, tau = 2 * math.pi * 3, 0.8, 4.0
    mode = CavityMode("Y", 0.0, kappa, 0.0, n_max=4)
    drive = DriveSpec(0.0, cavity_pulses={"Y": PulseEnvelope.square(eps, tau)})
    model = CavityQDModel(params, (mode,), drive)
    rho0 = vacuum_state(basis_projector(1, 1), model.space)
    cfg = IntegratorConfig(horizon=tau, sample_times=np.linspace(0, tau, 4001))
    traj = evolve(rho0, model, cfg, method="expm", expect={"a_Y": model.a("Y")},
                  store_states=False)
    n = emitted_photons(traj, "Y", 1.0)
    exact = 4 * eps ** 2 / kappa * (tau - 4 / kappa * (1 - math.exp(-kappa * tau / 2))
                                    + (1 - math.exp(-kappa * tau)) / kappa)
    err = abs(n - exact) / exact
    return "coherent photon number of a driven empty cavity", err < 1e-5, f"relative error {err:.1e}"


@check
def gaussian_area() -> Check:
    env = PulseEnvelope.gaussian(math.pi, 0.03)
    lo, hi = env.support()
    t = np.linspace(lo, hi, 20001)
    area = np.trapezoid(env(t), t)
    err = abs(area - math.pi) / math.pi
    return "Gaussian pulse area", err < 1e-7, f"relative error {err:.1e}"


@check
def purcell_round_trip() -> Check:
    g = coupling_from_purcell(19.0, 2 * math.pi * 9.4, 1.0)
    err = abs(purcell_factor(g, 2 * math.pi * 9.4, 1.0) - 19.0)
    return "Purcell factor round trip", err < 1e-12, f"error {err:.1e}"


@check
def trace_distance_axioms() -> Check:
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        a, b, c = (random_state(rng, 4, rank=int(rng.integers(1, 5))) for _ in range(3))
        u, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
        dab, dba, dac, dbc = (trace_distance(a, b), trace_distance(b, a),
                              trace_distance(a, c), trace_distance(b, c))
        viol = max(abs(dab - dba), dab - dac - dbc, -dab, dab - 1,
                   abs(trace_distance(u @ a @ u.conj().T, u @ b @ u.conj().T) - dab),
                   trace_distance(a, a))
        worst = max(worst, viol)
    return "trace distance axioms (100 random triples)", worst < 1e-12, f"worst violation {worst:.1e}"


@check
def threshold_formula_vs_brute_force() -> Check:
    pairs = [(10.0, 1.0), (25.7, 2.9), (13.0, 5.2), (3.0, 0.01), (50.0, 40.0), (7.0, 0.0)]
    worst = 0.0
    for n1, n2 in pairs:
        worst = max(worst, abs(readout_fidelity(n1, n2) - brute_force_fidelity(n1, n2)[0]))
    m = optimal_threshold(10.0, 1.0)
    ok = worst < 1e-12 and m == 3
    return "readout threshold formula vs brute force", ok, f"M(10, 1) = {m}, worst gap {worst:.1e}"


def run_checks() -> list[Check]:
    results = []
    for fn in CHECKS:
        try:
            results.append(fn())
        except Exception as exc:  # a crashing check is a failed check
            results.append((fn.__name__, False, f"{type(exc).__name__}: {exc}"))
    return results

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_state
from qdcavity.core import basis_projector, vacuum_state
from qdcavity.dynamics import IntegratorConfig, evolve
from qdcavity.metrics import (
    CoarseGridWarning,
    brute_force_fidelity,
    emitted_photons,
    intensity_flux,
    optimal_threshold,
    poisson_cdf,
    readout_fidelity,
    readout_stats,
    trace_distance,
)
from qdcavity.model import CavityMode, CavityQDModel, DriveSpec, PulseEnvelope, SystemParams


def poisson_sum(k, mean):
    """P(X <= k) by explicit summation of the mass function."""
    return sum(math.exp(-mean) * mean**j / math.factorial(j) for j in range(k + 1))


class TestTraceDistance:
    def test_examples(self):
        s11, s22 = basis_projector(1, 1), basis_projector(2, 2)
        assert trace_distance(s22, s22) == 0
        assert trace_distance(s11, s22) == pytest.approx(1)
        assert trace_distance(0.5 * (s11 + s22), s22) == pytest.approx(0.5)

    def test_pure_state_formula(self, rng):
        """For pure states T = sqrt(1 - |<psi|phi>|^2)."""
        for _ in range(20):
            psi, phi = (rng.normal(size=4) + 1j * rng.normal(size=4) for _ in range(2))
            psi, phi = psi / np.linalg.norm(psi), phi / np.linalg.norm(phi)
            want = math.sqrt(1 - abs(np.vdot(psi, phi)) ** 2)
            got = trace_distance(np.outer(psi, psi.conj()), np.outer(phi, phi.conj()))
            assert got == pytest.approx(want, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            trace_distance(np.eye(4) / 4, np.eye(8) / 8)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_trace_distance_axioms(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_state(rng, 4, rank=int(rng.integers(1, 5))) for _ in range(3))
    u, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    dab = trace_distance(a, b)
    assert 0 <= dab <= 1
    assert dab == pytest.approx(trace_distance(b, a), abs=1e-12)
    assert dab <= trace_distance(a, c) + trace_distance(c, b) + 1e-12
    assert trace_distance(u @ a @ u.conj().T, u @ b @ u.conj().T) == pytest.approx(dab, abs=1e-12)


def driven_cavity(eps, kappa, tau, n_max=5):
    mode = CavityMode("Y", 0.0, kappa, 0.0, n_max=n_max)
    drive = DriveSpec(0.0, cavity_pulses={"Y": PulseEnvelope.square(eps, tau)})
    return CavityQDModel(SystemParams(), (mode,), drive)


def cavity_trajectory(model, tau, points=4001):
    rho0 = vacuum_state(basis_projector(1, 1), model.space)
    cfg = IntegratorConfig(horizon=tau, sample_times=np.linspace(0, tau, points))
    return evolve(rho0, model, cfg, method="expm", expect={"a_Y": model.a("Y")},
                  store_states=False)


class TestEmittedPhotons:
    def test_undriven_cavity_emits_nothing(self):
        mode = CavityMode("Y", 0.0, 3.0, 0.0, n_max=2)
        model = CavityQDModel(SystemParams(), (mode,), DriveSpec())
        assert emitted_photons(cavity_trajectory(model, 2.0, 401), "Y", 1.0) == 0

    def test_driven_empty_cavity(self):
        """<a>(t) = (2 eps / kappa)(1 - exp(-kappa t / 2)) times a phase; integrate the flux."""
        eps, kappa, tau = 0.6, 8.0, 5.0
        n = emitted_photons(cavity_trajectory(driven_cavity(eps, kappa, tau), tau), "Y", 1.0)
        t = np.linspace(0, tau, 200001)
        amp = 2 * eps / kappa * (1 - np.exp(-kappa * t / 2))
        assert n == pytest.approx(np.trapezoid(kappa * amp**2, t), rel=1e-6)
        # long-time limit: 4 eps^2 tau / kappa up to the transient
        assert n == pytest.approx(4 * eps**2 * tau / kappa, rel=0.15)

    def test_eta_linearity(self):
        eps, kappa, tau = 0.6, 8.0, 3.0
        traj = cavity_trajectory(driven_cavity(eps, kappa, tau), tau)
        full = emitted_photons(traj, "Y", 1.0)
        assert emitted_photons(traj, "Y", 0.0) == 0
        for eta in (0.1, 0.37, 0.8):
            assert emitted_photons(traj, "Y", eta) == pytest.approx(eta * full, rel=1e-14)
        with pytest.raises(ValueError):
            emitted_photons(traj, "Y", 1.5)

    def test_coherent_flux_below_intensity_flux(self):
        """|<a>|^2 <= <a^dag a>, equal for a coherent state."""
        model = driven_cavity(0.6, 8.0, 3.0)
        rho0 = vacuum_state(basis_projector(1, 1), model.space)
        cfg = IntegratorConfig(horizon=3.0, sample_times=np.linspace(0, 3, 301))
        traj = evolve(rho0, model, cfg, method="expm")
        coh = emitted_photons(traj, "Y", 1.0)
        inten = emitted_photons(traj, "Y", 1.0, flux="intensity")
        assert coh <= inten
        assert coh == pytest.approx(inten, rel=1e-4)
        assert np.all(intensity_flux(traj, "Y") >= 0)

    def test_coarse_grid_warns(self):
        model = driven_cavity(0.6, 40.0, 3.0)
        with pytest.warns(CoarseGridWarning):
            emitted_photons(cavity_trajectory(model, 3.0, 9), "Y", 1.0)


class TestThreshold:
    def test_examples(self):
        assert optimal_threshold(10, 1) == 3
        assert optimal_threshold(1, 10) == 3
        assert optimal_threshold(2, 2 + 1e-12) == 2
        with pytest.raises(ValueError):
            optimal_threshold(2, 2)
        with pytest.raises(ValueError):
            optimal_threshold(-1, 2)

    def test_fidelity_examples(self):
        assert readout_fidelity(4, 4) == 0.5
        want = 0.5 - 0.5 * (poisson_sum(3, 10) - poisson_sum(3, 1))
        assert readout_fidelity(10, 1) == pytest.approx(want, abs=1e-14)
        assert readout_fidelity(10, 1) == pytest.approx(0.9853, abs=1e-4)
        assert readout_fidelity(10, 0) == pytest.approx(1 - math.exp(-10) / 2, abs=1e-14)

    def test_poisson_cdf(self):
        for k, m in [(0, 0.3), (3, 10.0), (12, 7.5)]:
            assert poisson_cdf(k, m) == pytest.approx(poisson_sum(k, m), rel=1e-12)
        assert poisson_cdf(0, 0.0) == 1.0

    def test_stats_orientation(self):
        s = readout_stats(1.0, 10.0, 1.0, 35.0)
        assert s.swapped and s.threshold == 3
        assert s.fidelity == pytest.approx(readout_fidelity(10, 1))
        assert not readout_stats(10.0, 1.0, 1.0, 35.0).swapped


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 60), st.floats(0.0, 1.0))
def test_threshold_formula_matches_brute_force(n_hi, frac):
    n_lo = n_hi * frac
    if n_hi == n_lo:
        return
    best, _ = brute_force_fidelity(n_hi, n_lo)
    assert readout_fidelity(n_hi, n_lo) == pytest.approx(best, abs=1e-12)

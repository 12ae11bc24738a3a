"""Parameter sweeps for steady-state and pulsed initialisation, readout and dephasing.

Every grid point is an independent, deterministic job; results come back in
grid order whatever the worker count.
"""
from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .core import Operator, basis_projector, embed, ptrace_emitter, unvec, vacuum_state
from .dynamics import (
    DENSE_EXPM_LIMIT,
    IntegratorConfig,
    Relaxation,
    evolve,
    propagate,
    steady_state,
)
from .metrics import GRID_RTOL, brute_force_fidelity, coherent_flux, integrate_flux, readout_stats, trace_distance
from .model import (
    BIMODAL,
    SINGLE,
    CavityQDModel,
    DriveSpec,
    PulseEnvelope,
    SystemParams,
    cavity_modes,
    coupling_from_purcell,
    ghz,
    readout_drive_strength,
)
from .optimize import OptimizationSpec, golden_section, minimize_scan

FOCK_RTOL = 1e-4
COUPLING_AXES = ("purcell", "g_over_kappa", "g_ghz")
KNOWN_AXES = ("kappa_ghz", *COUPLING_AXES, "duration_ns", "dephasing_over_gamma")

TARGET = basis_projector(2, 2)
MIXED_GROUND = 0.5 * (basis_projector(1, 1) + basis_projector(2, 2))


@dataclass(frozen=True)
class SweepGrid:
    """Named axes; points are the Cartesian product in axis order."""

    axes: dict[str, tuple[float, ...]]
    cavity_config: str = SINGLE

    def __post_init__(self):
        axes = {k: tuple(float(v) for v in vals) for k, vals in self.axes.items()}
        object.__setattr__(self, "axes", axes)
        if self.cavity_config not in (SINGLE, BIMODAL):
            raise ValueError(f"unknown cavity configuration {self.cavity_config!r}")
        for k, vals in axes.items():
            if k not in KNOWN_AXES:
                raise ValueError(f"unknown sweep axis {k!r}")
            if not vals:
                raise ValueError(f"sweep axis {k!r} is empty")
            if any(not math.isfinite(v) or v < 0 for v in vals):
                raise ValueError(f"sweep axis {k!r} needs finite non-negative values")
        if "kappa_ghz" not in axes or any(v <= 0 for v in axes["kappa_ghz"]):
            raise ValueError("kappa_ghz axis with positive values is required")
        given = [k for k in COUPLING_AXES if k in axes]
        if len(given) != 1:
            raise ValueError(f"give exactly one coupling axis out of {COUPLING_AXES}, got {given}")

    def points(self) -> list[dict[str, float]]:
        names = list(self.axes)
        return [dict(zip(names, combo)) for combo in itertools.product(*self.axes.values())]

    def __len__(self):
        return int(np.prod([len(v) for v in self.axes.values()]))


FOCK_CHECKS = ("auto", "rerun", "tail", "off")


@dataclass(frozen=True)
class Setup:
    """Physics and numerics shared by every point of a sweep.

    Cutoffs: the probed Y mode during readout starts at ``n_max_driven``
    photons; otherwise modes start at ``n_max_idle`` (``n_max_idle_readout``
    for the X mode during readout, where it is only fed by weak trion
    emission). Cutoffs are raised, up to ``max_escalations`` times, while the
    truncation test fails.

    ``fock_check`` selects the truncation test: ``"rerun"`` repeats the
    computation with every cutoff raised by 2 and requires a relative change
    below 1e-4; ``"tail"`` requires the top Fock level population to stay
    below ``tail_tol`` along the trajectory; ``"auto"`` reruns unless the
    enlarged readout model is too large for dense propagation.
    """

    params: SystemParams = SystemParams()
    nu_x: float = 0.0
    nu_y: float | None = None
    bimodal_phase: complex = 1j
    n_max_driven: int = 3
    n_max_idle: int = 1
    n_max_idle_readout: int = 1
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    fock_check: str = "auto"
    tail_tol: float = 1e-6
    max_escalations: int = 3

    def __post_init__(self):
        if self.fock_check not in FOCK_CHECKS:
            raise ValueError(f"fock_check must be one of {FOCK_CHECKS}, got {self.fock_check!r}")
        if min(self.n_max_driven, self.n_max_idle, self.n_max_idle_readout) < 1:
            raise ValueError("Fock cutoffs must be >= 1")

    def coupling(self, point: dict[str, float]) -> float:
        kappa = ghz(point["kappa_ghz"])
        if "purcell" in point:
            return coupling_from_purcell(point["purcell"], kappa, self.params.gamma_y)
        if "g_over_kappa" in point:
            return point["g_over_kappa"] * kappa
        return ghz(point["g_ghz"])

    def modes(self, config: str, point: dict[str, float], readout: bool = False,
              extra: int | tuple[int, int] = 0):
        """Cavity modes for one point; ``extra`` raises the cutoffs, either
        uniformly or per mode as (X, Y)."""
        ex, ey = (extra, extra) if isinstance(extra, int) else extra
        n_y = self.n_max_driven if readout else self.n_max_idle
        n_x = self.n_max_idle_readout if readout else self.n_max_idle
        return cavity_modes(config, ghz(point["kappa_ghz"]), self.coupling(point), self.params,
                            n_max_y=n_y + ey, n_max_x=n_x + ex, nu_x=self.nu_x,
                            nu_y=self.nu_y, bimodal_phase=self.bimodal_phase)

    @property
    def rerun_check(self) -> bool:
        return self.fock_check in ("auto", "rerun")

    def for_point(self, point: dict[str, float]) -> "Setup":
        if "dephasing_over_gamma" in point:
            rate = point["dephasing_over_gamma"] * self.params.gamma
            return replace(self, params=self.params.with_dephasing(rate))
        return self


@dataclass
class ExperimentResult:
    point: dict[str, float]
    metric: str
    value: float
    argopt: float | None = None
    extras: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    wall_time: float = 0.0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def fock_converged(self):
        return self.diagnostics.get("fock_converged")


def run_jobs(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Map ``fn`` over ``items`` on a process pool, preserving input order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _guarded(job: Callable[[dict], ExperimentResult], metric: str, point: dict) -> ExperimentResult:
    t0 = time.perf_counter()
    try:
        res = job(point)
    except Exception as exc:  # reported per point, the sweep carries on
        res = ExperimentResult(dict(point), metric, math.nan,
                               error=f"{type(exc).__name__}: {exc}")
    res.wall_time = time.perf_counter() - t0
    return res


def _relative_change(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


# --- steady-state initialisation ---------------------------------------------------

STEADY_RABI_GHZ = 1e-3


def steady_state_distance(setup: Setup, config: str, point: dict, rabi: float, extra: int = 0):
    modes = setup.modes(config, point, extra=extra)
    drive = DriveSpec(setup.params.vertical_14, qd_pulses={"X": PulseEnvelope.cw(rabi)})
    model = CavityQDModel(setup.params, modes, drive)
    rho = steady_state(model)
    return trace_distance(ptrace_emitter(rho.matrix, model.space), TARGET), rho


def _steady_job(setup: Setup, config: str, rabi: float, point: dict) -> ExperimentResult:
    s = setup.for_point(point)
    t, rho = steady_state_distance(s, config, point, rabi)
    diag = {"min_eigenvalue": float(np.linalg.eigvalsh(rho.matrix)[0])}
    if s.rerun_check:
        t2, _ = steady_state_distance(s, config, point, rabi, extra=2)
        diag["fock_change"] = _relative_change(t, t2)
        diag["fock_converged"] = diag["fock_change"] < FOCK_RTOL
    return ExperimentResult(dict(point), "trace_distance", t, diagnostics=diag)


def run_steady_state_initialisation(grid: SweepGrid, setup: Setup = Setup(), *,
                                    rabi_ghz: float = STEADY_RABI_GHZ,
                                    workers: int = 1) -> list[ExperimentResult]:
    """Trace distance between the CW steady state (emitter part) and |2><2|."""
    job = partial(_guarded, partial(_steady_job, setup, grid.cavity_config, ghz(rabi_ghz)),
                  "trace_distance")
    return run_jobs(job, grid.points(), workers)


# --- pulsed initialisation ------------------------------------------------------------


class PulsedInitialisation:
    """Trace distance to |2> after one X-polarised pulse and free relaxation,
    as a function of the pulse strength (Rabi frequency / gamma for square
    pulses, area / pi for Gaussian ones)."""

    def __init__(self, setup: Setup, config: str, point: dict, kind: str, duration: float,
                 extra: int = 0, rel_tol: float | None = None, abs_tol: float | None = None):
        if kind not in ("square", "gaussian"):
            raise ValueError(f"pulse kind must be 'square' or 'gaussian', got {kind!r}")
        self.setup, self.kind, self.duration = setup, kind, duration
        self.rel_tol = rel_tol or setup.rel_tol
        self.abs_tol = abs_tol or setup.abs_tol
        modes = setup.modes(config, point, extra=extra)
        self.model = CavityQDModel(setup.params, modes, DriveSpec(setup.params.vertical_14))
        self.rho0 = vacuum_state(MIXED_GROUND, self.model.space)
        self.x0 = self.rho0.vec
        self.relax = Relaxation(self.model)
        self.last_relax_time = 0.0

    def drive(self, strength: float) -> DriveSpec:
        if self.kind == "square":
            env = PulseEnvelope.square(strength * self.setup.params.gamma, self.duration)
        else:
            env = PulseEnvelope.gaussian(strength * math.pi, self.duration)
        return DriveSpec(self.setup.params.vertical_14, qd_pulses={"X": env})

    def final_state(self, strength: float) -> np.ndarray:
        if self.duration == 0 or strength == 0:
            x = self.x0
        elif self.kind == "square":
            model = self.model.with_drive(self.drive(strength))
            x = propagate(model.liouvillian_at(0.5 * self.duration).matrix, self.x0, self.duration)
        else:
            model = self.model.with_drive(self.drive(strength))
            end = model.drive.breakpoints()[-1]
            cfg = IntegratorConfig(horizon=end, rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                                   sample_times=[end])
            traj = evolve(self.rho0, model, cfg, diagnostics=False)
            x = traj.final.vec
        x, self.last_relax_time = self.relax(x)
        return unvec(x, self.model.space.dim)

    def __call__(self, strength: float) -> float:
        rho = self.final_state(strength)
        return trace_distance(ptrace_emitter(rho, self.model.space), TARGET)


def default_optimization(kind: str) -> OptimizationSpec:
    if kind == "square":
        return OptimizationSpec("rabi", 0.0, 10.0)
    return OptimizationSpec("area", 0.01, 5.0)


def _pulsed_job(setup: Setup, config: str, kind: str, opt: OptimizationSpec,
                point: dict) -> ExperimentResult:
    s = setup.for_point(point)
    duration = point["duration_ns"]
    objective = PulsedInitialisation(s, config, point, kind, duration)
    if duration == 0:
        t = objective(0.0)
        return ExperimentResult(dict(point), "trace_distance", t, None,
                                diagnostics={"fock_converged": None, "at_boundary": False})
    res = minimize_scan(objective, opt.lo, opt.hi, coarse_points=opt.coarse_points,
                        refine=opt.refine)
    x, fun = res.x, res.fun
    diag = {"at_boundary": res.at_boundary, "evaluations": res.evaluations}
    # raise all cutoffs until a +2 rerun agrees; the argmin is re-refined
    # locally at every larger cutoff (the coarse scan is kept from the first)
    extra, step = 0, (opt.hi - opt.lo) / (opt.coarse_points - 1)
    while s.rerun_check:
        bigger = PulsedInitialisation(s, config, point, kind, duration, extra=extra + 2)
        diag["fock_change"] = _relative_change(fun, bigger(x))
        diag["fock_converged"] = diag["fock_change"] < FOCK_RTOL
        if diag["fock_converged"] or extra == s.max_escalations:
            break
        extra += 1
        objective = PulsedInitialisation(s, config, point, kind, duration, extra=extra)
        a, b = max(opt.lo, x - 2 * step), min(opt.hi, x + 2 * step)
        x, fun = golden_section(objective, a, b, opt.refine * max(abs(x), step))
    diag["cutoff_escalations"] = extra
    diag["n_max"] = "/".join(str(m.n_max) for m in objective.model.modes)
    diag["determinism_change"] = abs(objective(x) - fun)
    rho = objective.final_state(x)
    r4 = ptrace_emitter(rho, objective.model.space)
    diag["excited_after_relax"] = float(np.real(r4[2, 2] + r4[3, 3]))
    diag["relax_time_ns"] = objective.last_relax_time
    diag["min_eigenvalue"] = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    diag["trace_error"] = float(abs(np.trace(rho) - 1))
    diag["hermiticity_error"] = float(np.max(np.abs(rho - rho.conj().T)))
    if kind == "gaussian":
        tight = PulsedInitialisation(s, config, point, kind, duration, extra=extra,
                                     rel_tol=s.rel_tol / 2, abs_tol=s.abs_tol / 2)
        diag["tolerance_change"] = _relative_change(fun, tight(x))
    extras = {"population_1": float(np.real(r4[0, 0])), "coherence_12": float(abs(r4[0, 1]))}
    return ExperimentResult(dict(point), "trace_distance", fun, x, extras, diag)


def run_pulsed_initialisation(grid: SweepGrid, pulse_kind: str = "square",
                              opt: OptimizationSpec | None = None, setup: Setup = Setup(), *,
                              workers: int = 1) -> list[ExperimentResult]:
    """Minimise the post-pulse trace distance to |2> over the pulse strength
    for every (duration, cavity) point. ``argopt`` is Omega/gamma (square) or
    Theta/pi (Gaussian)."""
    if "duration_ns" not in grid.axes:
        raise ValueError("pulsed initialisation needs a duration_ns axis")
    opt = opt or default_optimization(pulse_kind)
    expected = "rabi" if pulse_kind == "square" else "area"
    if opt.variable != expected:
        raise ValueError(f"{pulse_kind} pulses are optimised over {expected!r}")
    job = partial(_guarded, partial(_pulsed_job, setup, grid.cavity_config, pulse_kind, opt),
                  "trace_distance")
    return run_jobs(job, grid.points(), workers)


# --- readout ------------------------------------------------------------------------

READOUT_TAU = 35.0
READOUT_DT = 0.01


def readout_model(setup: Setup, config: str, point: dict, tau: float,
                  drive_fraction: float = 0.01,
                  extra: int | tuple[int, int] = 0) -> CavityQDModel:
    modes = setup.modes(config, point, readout=True, extra=extra)
    y = [m for m in modes if m.polarization == "Y"][0]
    eps = readout_drive_strength(y.coupling, drive_fraction)
    drive = DriveSpec(y.detuning, cavity_pulses={"Y": PulseEnvelope.square(eps, tau)})
    return CavityQDModel(setup.params, modes, drive)


def top_level_projectors(model: CavityQDModel) -> dict[str, Operator]:
    """Projectors onto the two highest retained Fock levels of each mode."""
    out = {}
    for k, m in enumerate(model.modes, start=1):
        for name, level in (("top", m.n_max), ("below", m.n_max - 1)):
            p = np.zeros((m.n_max + 1,) * 2)
            p[level, level] = 1.0
            out[f"{name}_{m.polarization}"] = embed(p, k, model.space)
    return out


def fock_tails(expect: dict[str, np.ndarray]) -> dict[str, float]:
    """Per mode, the population expected just beyond the cutoff, extrapolated
    geometrically from the two highest retained levels: max_t P(n_max)^2 / P(n_max - 1)."""
    tails = {}
    for key in expect:
        if key.startswith("top_"):
            pol = key[4:]
            top = np.real(expect[key])
            below = np.maximum(np.real(expect["below_" + pol]), 1e-300)
            tails[pol] = float(np.max(top ** 2 / below))
    return tails


def photon_numbers(model: CavityQDModel, tau: float, eta: float, dt: float = READOUT_DT):
    """(N1, N2, quadrature change, diagnostics) for starts in |1> and |2>."""
    steps = 2 * int(math.ceil(tau / dt / 2))
    cfg = IntegratorConfig(horizon=tau, sample_times=np.linspace(0.0, tau, steps + 1))
    expect = {"a_Y": model.a("Y"), **top_level_projectors(model)}
    out, changes, drift, min_eig, herm = [], [], 0.0, 0.0, 0.0
    tails = {m.polarization: 0.0 for m in model.modes}
    for level in (1, 2):
        rho0 = vacuum_state(basis_projector(level, level), model.space)
        traj = evolve(rho0, model, cfg, method="expm", expect=expect,
                      store_states=False, diagnostics=True)
        n, change = integrate_flux(traj.times, coherent_flux(traj, "Y"))
        out.append(eta * n)
        changes.append(change)
        drift = max(drift, traj.max_trace_error())
        min_eig = min(min_eig, float(np.min(traj.min_eigenvalues)))
        herm = max(herm, float(np.max(traj.hermiticity_errors)))
        for pol, t in fock_tails(traj.expect).items():
            tails[pol] = max(tails[pol], t)
    diag = {"trace_drift": drift, "min_eigenvalue": min_eig, "hermiticity_error": herm,
            "fock_tails": tails}
    return out[0], out[1], max(changes), diag


def _readout_point(s: Setup, config: str, point: dict, tau: float, eta: float,
                   drive_fraction: float, extra: tuple[int, int], dt: float):
    model = readout_model(s, config, point, tau, drive_fraction, extra)
    for _ in range(3):
        n1, n2, change, diag = photon_numbers(model, tau, eta, dt)
        if change < GRID_RTOL:
            break
        dt /= 2
    diag.update(quadrature_change=change, dt_ns=dt)
    return model, n1, n2, diag


def _readout_job(setup: Setup, config: str, tau: float, eta: float, drive_fraction: float,
                 point: dict) -> ExperimentResult:
    s = setup.for_point(point)
    extra, escalations = (0, 0), 0
    dt = READOUT_DT
    while True:
        model, n1, n2, diag = _readout_point(s, config, point, tau, eta, drive_fraction,
                                             extra, dt)
        dt = diag["dt_ns"]
        stats = readout_stats(n1, n2, eta, tau)
        tails = diag.pop("fock_tails")
        diag["fock_tail"] = max(tails.values())
        big = readout_model(s, config, point, tau, drive_fraction, (extra[0] + 2, extra[1] + 2))
        rerun = s.fock_check == "rerun" or (
            s.fock_check == "auto" and big.space.dim ** 2 <= DENSE_EXPM_LIMIT)
        if s.fock_check == "off":
            break
        if rerun:
            _, m1, m2, _ = _readout_point(s, config, point, tau, eta, drive_fraction,
                                          (extra[0] + 2, extra[1] + 2), dt)
            diag["fock_method"] = "rerun"
            diag["fock_change"] = _relative_change(stats.fidelity,
                                                   readout_stats(m1, m2, eta, tau).fidelity)
            diag["fock_change_photons"] = max(_relative_change(n1, m1), _relative_change(n2, m2))
            diag["fock_converged"] = diag["fock_change"] < FOCK_RTOL
            failing = [m.polarization for m in model.modes]
        else:
            diag["fock_method"] = "tail"
            failing = [pol for pol, t in tails.items() if t >= s.tail_tol]
            diag["fock_converged"] = not failing
        if diag["fock_converged"] or escalations == s.max_escalations:
            break
        escalations += 1
        extra = (extra[0] + ("X" in failing), extra[1] + ("Y" in failing))
    diag["orientation_swapped"] = stats.swapped
    diag["cutoff_escalations"] = escalations
    diag["n_max"] = "/".join(str(m.n_max) for m in model.modes)
    bf, k = brute_force_fidelity(n1, n2)
    diag["brute_force_fidelity"] = bf
    diag["brute_force_threshold"] = k
    diag["brute_force_agrees"] = abs(bf - stats.fidelity) < 1e-12
    extras = {"n1": n1, "n2": n2, "threshold": stats.threshold}
    return ExperimentResult(dict(point), "fidelity", stats.fidelity, None, extras, diag)


def run_readout(grid: SweepGrid, tau: float = READOUT_TAU, eta: float = 1.0,
                setup: Setup = Setup(), *, drive_fraction: float = 0.01,
                workers: int = 1) -> list[ExperimentResult]:
    """Threshold readout fidelity from the coherent cavity output over a square
    cavity probe of length ``tau`` resonant with the Y mode."""
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    job = partial(_guarded, partial(_readout_job, setup, grid.cavity_config, tau, eta,
                                    drive_fraction), "fidelity")
    return run_jobs(job, grid.points(), workers)


# --- dephasing ------------------------------------------------------------------------

# cavity points minimising the trace distance without dephasing, per configuration/pulse
DEPHASING_INIT_POINTS = {
    (SINGLE, "square"): {"kappa_ghz": 20.0, "purcell": 10.0},
    (SINGLE, "gaussian"): {"kappa_ghz": 40.0, "purcell": 40.0},
    (BIMODAL, "square"): {"kappa_ghz": 20.0, "purcell": 10.0},
    (BIMODAL, "gaussian"): {"kappa_ghz": 20.0, "purcell": 40.0},
}
DEPHASING_RATES = (0.0, 0.1, 1.0, 10.0)


def run_dephasing_study(durations: dict[str, Sequence[float]],
                        readout_axes: dict[str, Sequence[float]] | None = None,
                        dephasing_over_gamma: Sequence[float] = DEPHASING_RATES,
                        readout_dephasing: Sequence[float] = (1.0, 10.0),
                        configs: Sequence[str] = (SINGLE, BIMODAL),
                        setup: Setup = Setup(), *, opt: dict | None = None,
                        tau: float = READOUT_TAU, eta: float = 1.0,
                        workers: int = 1) -> dict[str, list[ExperimentResult]]:
    """Pulsed initialisation at the dephasing-free optimal cavity points and
    readout maps, each repeated for several trion pure-dephasing rates.

    ``durations`` maps pulse kind to pulse durations (ns). Returns one result
    list per (study, configuration, pulse kind) key such as ``"init/single/square"``.
    """
    opt = opt or {}
    out: dict[str, list[ExperimentResult]] = {}
    for config in configs:
        for kind, durs in durations.items():
            axes = {k: (v,) for k, v in DEPHASING_INIT_POINTS[(config, kind)].items()}
            axes["dephasing_over_gamma"] = tuple(dephasing_over_gamma)
            axes["duration_ns"] = tuple(durs)
            out[f"init/{config}/{kind}"] = run_pulsed_initialisation(
                SweepGrid(axes, config), kind, opt.get(kind), setup, workers=workers)
        if readout_axes:
            axes = {**{k: tuple(v) for k, v in readout_axes.items()},
                    "dephasing_over_gamma": tuple(readout_dephasing)}
            out[f"readout/{config}"] = run_readout(SweepGrid(axes, config), tau, eta, setup,
                                                   workers=workers)
    return out

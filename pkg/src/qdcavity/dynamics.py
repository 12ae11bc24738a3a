"""Master-equation time evolution and steady states."""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .core import (
    POSITIVITY_ATOL,
    DensityMatrix,
    HilbertSpace,
    Operator,
    Superoperator,
    hermiticity_error,
    ptrace_emitter,
    trace_functional,
    unvec,
    vec,
)
from .model import CavityQDModel

log = logging.getLogger(__name__)

# reused propagators are formed densely up to this Liouville-space dimension;
# single actions switch to the sparse exp(L t) x algorithm above ONE_SHOT_DENSE_LIMIT
DENSE_EXPM_LIMIT = 1300
ONE_SHOT_DENSE_LIMIT = 400
RELAX_THRESHOLD = 1e-10
RELAX_LIFETIMES = 10.0
RELAX_CHUNK = 0.25
# residual bound on ||L vec(rho)||, relative to ||L||_1 when that exceeds 1
STEADY_RESIDUAL = 1e-10


class IntegrationError(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g} ns)")
        self.time = time


class SteadyStateError(RuntimeError):
    pass


class PositivityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    horizon: float
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf
    sample_times: Sequence[float] | None = None
    start: float = 0.0

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not 0 < v <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2], got {v}")
        if not self.horizon > self.start:
            raise ValueError(f"horizon must exceed start time, got {self.horizon}")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")

    def times(self, default_points: int = 201) -> np.ndarray:
        if self.sample_times is None:
            return np.linspace(self.start, self.horizon, default_points)
        t = np.asarray(self.sample_times, dtype=float)
        if t.ndim != 1 or t.size == 0 or np.any(np.diff(t) <= 0):
            raise ValueError("sample_times must be a non-empty strictly increasing sequence")
        if t[0] < self.start or t[-1] > self.horizon:
            raise ValueError("sample_times must lie within [start, horizon]")
        return t


@dataclass
class Trajectory:
    """Sampled solution. ``states`` may be omitted when only expectations were kept."""

    space: HilbertSpace
    times: np.ndarray
    states: np.ndarray | None
    expect: dict[str, np.ndarray] = field(default_factory=dict)
    trace_errors: np.ndarray | None = None
    min_eigenvalues: np.ndarray | None = None
    hermiticity_errors: np.ndarray | None = None
    model: CavityQDModel | None = field(default=None, repr=False)

    def state(self, i: int, check: bool = False) -> DensityMatrix:
        if self.states is None:
            raise ValueError("trajectory was run without storing states")
        return DensityMatrix(self.space, self.states[i], check=check)

    @property
    def final(self) -> DensityMatrix:
        return self.state(-1)

    @property
    def positivity_ok(self) -> bool:
        return self.min_eigenvalues is None or bool(np.all(self.min_eigenvalues >= -POSITIVITY_ATOL))

    def max_trace_error(self) -> float:
        return float(np.max(self.trace_errors)) if self.trace_errors is not None else 0.0


class _Recorder:
    """Collects samples and per-sample diagnostics."""

    def __init__(self, space, expect, store_states, diagnostics):
        self.space = space
        self.d = space.dim
        self.expect_ops = {k: (v.matrix if isinstance(v, Operator) else v) for k, v in expect.items()}
        # Tr(A rho) = sum_ij A_ji rho_ij = w . vec(rho) with w = vec(A.T)
        self.weights = {k: vec(m.T) for k, m in self.expect_ops.items()}
        self.store_states = store_states
        self.diagnostics = diagnostics
        self.times, self.states = [], []
        self.expect = {k: [] for k in expect}
        self.trace_err, self.min_eig, self.herm_err = [], [], []
        self.trace_row = trace_functional(self.d)

    def add(self, t, x):
        self.times.append(t)
        for k, w in self.weights.items():
            self.expect[k].append(w @ x)
        self.trace_err.append(abs(self.trace_row @ x - 1.0))
        if self.store_states or self.diagnostics:
            rho = unvec(x, self.d)
            if self.store_states:
                self.states.append(rho.copy())
            if self.diagnostics:
                self.herm_err.append(hermiticity_error(rho))
                self.min_eig.append(float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]))

    def finish(self, model) -> Trajectory:
        traj = Trajectory(
            space=self.space,
            times=np.asarray(self.times),
            states=np.asarray(self.states) if self.store_states else None,
            expect={k: np.asarray(v) for k, v in self.expect.items()},
            trace_errors=np.asarray(self.trace_err),
            min_eigenvalues=np.asarray(self.min_eig) if self.diagnostics else None,
            hermiticity_errors=np.asarray(self.herm_err) if self.diagnostics else None,
            model=model,
        )
        if not traj.positivity_ok:
            i = int(np.argmin(traj.min_eigenvalues))
            warnings.warn(
                f"state lost positivity: min eigenvalue {traj.min_eigenvalues[i]:.3g} "
                f"at t = {traj.times[i]:.6g} ns", PositivityWarning, stacklevel=3)
        return traj


def _segments(model: CavityQDModel, start: float, stop: float) -> list[tuple[float, float]]:
    cuts = [t for t in model.drive.breakpoints() if start < t < stop]
    edges = [start, *cuts, stop]
    return list(zip(edges[:-1], edges[1:]))


def evolve(initial: DensityMatrix, model: CavityQDModel, cfg: IntegratorConfig, *,
           method: str = "rk", expect: Mapping[str, Operator] | None = None,
           store_states: bool = True, diagnostics: bool = True) -> Trajectory:
    """Integrate the master equation and sample it on ``cfg``'s grid.

    ``method="rk"`` uses an adaptive 8(5,3) Dormand-Prince scheme on vec(rho),
    restarted at every envelope switching time. ``method="expm"`` propagates
    exactly with matrix exponentials and requires every envelope to be
    piecewise constant (CW or square).
    """
    if initial.space != model.space:
        raise ValueError("initial state and model live on different spaces")
    times = cfg.times()
    rec = _Recorder(model.space, expect or {}, store_states, diagnostics)
    x = initial.vec.astype(complex)
    t = cfg.start
    if times[0] == t:
        rec.add(t, x)
        times = times[1:]
    if method == "rk":
        _evolve_rk(model, cfg, x, times, rec)
    elif method == "expm":
        if any(env.kind == "gaussian" for env in model.drive.envelopes()):
            raise ValueError("exact propagation needs piecewise-constant envelopes")
        _evolve_expm(model, cfg, x, times, rec)
    else:
        raise ValueError(f"unknown method {method!r}")
    traj = rec.finish(model)
    drift = traj.max_trace_error()
    if drift > 1e-8:
        log.warning("trace drift %.3g exceeds 1e-8 over the horizon", drift)
    return traj


def _evolve_rk(model, cfg, x, times, rec):
    l0 = model.undriven_liouvillian.matrix
    terms = [(env, s.matrix) for env, s in model.drive_terms]
    for a, b in _segments(model, cfg.start, cfg.horizon):
        mid = 0.5 * (a + b)
        # envelopes that are piecewise constant are frozen over the segment
        const = l0.copy()
        smooth = []
        for env, m in terms:
            if env.kind == "gaussian":
                smooth.append((env, m))
            elif env(mid):
                const = const + env(mid) * m
        const = sp.csr_matrix(const)

        if smooth:
            def rhs(t, y, const=const, smooth=smooth):
                out = const @ y
                for env, m in smooth:
                    f = env(t)
                    if f:
                        out += f * (m @ y)
                return out
        else:
            def rhs(t, y, const=const):
                return const @ y

        seg_times = times[(times > a) & (times <= b)]
        t_eval = seg_times if seg_times.size and seg_times[-1] == b else np.append(seg_times, b)
        sol = solve_ivp(rhs, (a, b), x, method="DOP853", t_eval=t_eval,
                        rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step)
        if sol.status != 0:
            t_fail = float(sol.t[-1]) if sol.t.size else a
            raise IntegrationError(f"integration failed: {sol.message}", t_fail)
        for k in range(seg_times.size):
            rec.add(float(sol.t[k]), sol.y[:, k])
        x = sol.y[:, -1]
    return x


class Propagator:
    """exp(L dt) applied to vectors; dense for small spaces, Krylov-free
    truncated Taylor (scipy ``expm_multiply``) otherwise."""

    def __init__(self, lmat: sp.spmatrix, dt: float):
        self.lmat = sp.csr_matrix(lmat)
        self.dt = dt
        self.dense = None
        if self.lmat.shape[0] <= DENSE_EXPM_LIMIT:
            self.dense = sla.expm(self.lmat.toarray() * dt)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.dense is not None:
            return self.dense @ x
        return spla.expm_multiply(self.lmat * self.dt, x)


def propagate(lmat: sp.spmatrix, x: np.ndarray, t: float) -> np.ndarray:
    """exp(L t) x for a constant generator."""
    if t == 0:
        return np.array(x, dtype=complex)
    if lmat.shape[0] <= ONE_SHOT_DENSE_LIMIT:
        return sla.expm(sp.csr_matrix(lmat).toarray() * t) @ x
    return spla.expm_multiply(sp.csr_matrix(lmat) * t, x)


def _evolve_expm(model, cfg, x, times, rec):
    for a, b in _segments(model, cfg.start, cfg.horizon):
        lmat = model.liouvillian_at(0.5 * (a + b)).matrix
        seg_times = times[(times > a) & (times <= b)]
        pts = np.concatenate([[a], seg_times])
        steps = np.diff(pts)
        cache: dict[float, Propagator] = {}
        for tk, dt in zip(seg_times, steps):
            key = round(dt, 12)
            if key not in cache:
                cache[key] = Propagator(lmat, dt)
            x = cache[key](x)
            rec.add(float(tk), x)
        if pts[-1] < b:
            x = propagate(lmat, x, b - pts[-1])
    return x


class Relaxation:
    """Free decay after a pulse: run the undriven generator until the trion
    population drops below ``threshold`` or ``max_time`` elapses."""

    def __init__(self, model: CavityQDModel, max_time: float | None = None,
                 threshold: float = RELAX_THRESHOLD, chunk: float = RELAX_CHUNK):
        self.space = model.space
        self.max_time = RELAX_LIFETIMES / model.params.gamma if max_time is None else max_time
        self.threshold = threshold
        self.n_chunks = max(1, int(math.ceil(self.max_time / chunk - 1e-9)))
        self.chunk = self.max_time / self.n_chunks
        self.step = Propagator(model.undriven_liouvillian.matrix, self.chunk)
        excited = model.projector(3).matrix + model.projector(4).matrix
        self.weight = vec(excited.T)

    def excited(self, x: np.ndarray) -> float:
        return float(np.real(self.weight @ x))

    def __call__(self, x: np.ndarray) -> tuple[np.ndarray, float]:
        elapsed = 0.0
        for _ in range(self.n_chunks):
            if self.excited(x) < self.threshold:
                break
            x = self.step(x)
            elapsed += self.chunk
        return x, elapsed


def excited_population(rho: DensityMatrix) -> float:
    """Tr[rho (sigma_33 + sigma_44)]."""
    r4 = ptrace_emitter(rho.matrix, rho.space)
    return float(np.real(r4[2, 2] + r4[3, 3]))


def _nullity(lmat: sp.csr_matrix) -> tuple[int, np.ndarray]:
    """Number of numerically zero eigenvalues of L, with the slowest eigenvalues.

    An eigenvalue counts as zero below eps ||L||_1 (numerical-rank floor)
    or within 10x of the computed zero eigenvalue (solver noise).
    Weak CW drives create genuinely slow modes just above that floor.
    """
    n = lmat.shape[0]
    if n <= 64:
        ev = np.linalg.eigvals(lmat.toarray())
    else:
        # eigenvalues nearest a small negative shift, i.e. the slowest modes
        ev = spla.eigs(lmat.tocsc(), k=4, sigma=-1e-6, which="LM",
                       return_eigenvectors=False, tol=1e-14)
    ev = ev[np.argsort(np.abs(ev))]
    tol = max(10 * abs(ev[0]), np.finfo(float).eps * spla.norm(lmat, 1))
    return int(np.sum(np.abs(ev) <= tol)), ev


def steady_state(model: CavityQDModel, check_nullspace: bool = True) -> DensityMatrix:
    """Stationary state of a CW-driven model.

    Solves L vec(rho) = 0 with the first row replaced by the trace functional.
    A stationary subspace of dimension above one raises ``SteadyStateError``.
    """
    return solve_stationary(model.cw_liouvillian(), check_nullspace)


def solve_stationary(superop: Superoperator, check_nullspace: bool = True) -> DensityMatrix:
    """Unique unit-trace null vector of a Liouvillian (see ``steady_state``)."""
    lmat = superop.matrix
    d = superop.space.dim
    if check_nullspace:
        nullity, ev = _nullity(lmat)
        if nullity != 1:
            raise SteadyStateError(
                f"stationary subspace has dimension {nullity}; slowest eigenvalues "
                f"{np.array2string(ev[:3], precision=3)} (is the system driven?)")
    a = sp.lil_matrix(lmat)
    a[0, :] = trace_functional(d)
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1.0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            x = spla.spsolve(a.tocsc(), b)
    except (RuntimeError, spla.MatrixRankWarning) as exc:
        raise SteadyStateError(f"singular steady-state system: {exc}") from exc
    rho = unvec(x, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    residual = float(np.linalg.norm(lmat @ vec(rho)))
    if not np.isfinite(residual) or residual > STEADY_RESIDUAL * max(1.0, spla.norm(lmat, 1)):
        raise SteadyStateError(f"steady-state residual too large: {residual:.3g}")
    return DensityMatrix(superop.space, rho, check=False)


def steady_state_residual(model: CavityQDModel, rho: DensityMatrix) -> float:
    return float(np.linalg.norm(model.cw_liouvillian().matrix @ rho.vec))

"""Rotating-frame model of a charged quantum dot coupled to one or two cavity modes.

Level labels follow the in-plane field basis: |1>, |2> are the electron spin
ground states, |3>, |4> the trion states. All energies are detunings from the
bare trion frequency omega_0 in rad/ns; times are in ns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
from scipy.constants import physical_constants

from .core import (
    Channel,
    HilbertSpace,
    Operator,
    Superoperator,
    annihilation,
    basis_projector,
    commutator_superop,
    embed,
    liouvillian,
)

TWO_PI = 2.0 * math.pi
POLARIZATIONS = ("X", "Y")
# mu_B / h in GHz per tesla
BOHR_GHZ_PER_T = physical_constants["Bohr magneton in Hz/T"][0] * 1e-9
GAUSSIAN_CUTOFF = 6.0


def ghz(f: float) -> float:
    """Ordinary frequency in GHz -> angular frequency in rad/ns."""
    return TWO_PI * f


@dataclass(frozen=True)
class SystemParams:
    """Emitter constants; splittings in rad/ns, rates in 1/ns."""

    delta_e: float = ghz(35.0)
    delta_h: float = ghz(20.0)
    gamma_x: float = 1.0
    gamma_y: float = 1.0
    pure_dephasing: float = 0.0
    b_field: float | None = None
    g_e: float | None = None
    g_h: float | None = None

    def __post_init__(self):
        for name in ("delta_e", "delta_h", "gamma_x", "gamma_y", "pure_dephasing"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    @classmethod
    def from_field(cls, b_field: float, g_e: float, g_h: float, *,
                   delta_e: float | None = None, delta_h: float | None = None,
                   **rates) -> "SystemParams":
        """Derive splittings from g * mu_B * B unless given explicitly."""
        if delta_e is None:
            delta_e = ghz(abs(g_e) * BOHR_GHZ_PER_T * b_field)
        if delta_h is None:
            delta_h = ghz(abs(g_h) * BOHR_GHZ_PER_T * b_field)
        return cls(delta_e=delta_e, delta_h=delta_h, b_field=b_field, g_e=g_e, g_h=g_h, **rates)

    @property
    def gamma(self) -> float:
        """Slowest spontaneous rate, used for relaxation horizons."""
        return min(self.gamma_x, self.gamma_y)

    def with_dephasing(self, rate: float) -> "SystemParams":
        return SystemParams(self.delta_e, self.delta_h, self.gamma_x, self.gamma_y,
                            rate, self.b_field, self.g_e, self.g_h)

    # transition frequencies, as detunings from omega_0
    @property
    def vertical_14(self) -> float:
        return 0.5 * (self.delta_e + self.delta_h)

    @property
    def diagonal_24(self) -> float:
        return 0.5 * (self.delta_h - self.delta_e)


@dataclass(frozen=True)
class CavityMode:
    polarization: str
    detuning: float  # nu - omega_0, rad/ns
    linewidth: float  # kappa, 1/ns
    coupling: complex  # g, rad/ns
    n_max: int = 3

    def __post_init__(self):
        if self.polarization not in POLARIZATIONS:
            raise ValueError(f"polarization must be X or Y, got {self.polarization!r}")
        if not self.linewidth > 0:
            raise ValueError(f"cavity linewidth must be > 0, got {self.linewidth}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max}")
        object.__setattr__(self, "coupling", complex(self.coupling))

    def with_cutoff(self, n_max: int) -> "CavityMode":
        return CavityMode(self.polarization, self.detuning, self.linewidth, self.coupling, n_max)


@dataclass(frozen=True)
class PulseEnvelope:
    """Real drive envelope.

    ``amplitude`` is the Rabi frequency (CW, square) or the pulse area
    (Gaussian). ``duration`` is the width of a square pulse or the intensity
    FWHM of a Gaussian one.
    """

    kind: str
    amplitude: float
    center: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        if self.kind not in ("cw", "square", "gaussian"):
            raise ValueError(f"unknown envelope kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError(f"envelope amplitude/area must be >= 0, got {self.amplitude}")
        if self.kind != "cw" and not self.duration > 0:
            raise ValueError(f"{self.kind} pulse needs a positive duration")

    @classmethod
    def cw(cls, amplitude: float) -> "PulseEnvelope":
        return cls("cw", amplitude)

    @classmethod
    def square(cls, amplitude: float, duration: float, center: float | None = None):
        return cls("square", amplitude, duration / 2 if center is None else center, duration)

    @classmethod
    def gaussian(cls, area: float, fwhm: float, center: float | None = None):
        w = fwhm / (2 * math.sqrt(math.log(2)))
        return cls("gaussian", area, GAUSSIAN_CUTOFF * w if center is None else center, fwhm)

    @property
    def width(self) -> float:
        """Gaussian standard width w = FWHM / (2 sqrt(ln 2))."""
        return self.duration / (2 * math.sqrt(math.log(2)))

    def support(self) -> tuple[float, float] | None:
        if self.kind == "cw":
            return None
        half = self.duration / 2 if self.kind == "square" else GAUSSIAN_CUTOFF * self.width
        return self.center - half, self.center + half

    def __call__(self, t):
        return evaluate_envelope(self, t)


def evaluate_envelope(p: PulseEnvelope, t):
    t = np.asarray(t, dtype=float)
    if p.kind == "cw":
        out = np.full_like(t, p.amplitude)
    elif p.kind == "square":
        lo, hi = p.support()
        out = np.where((t >= lo) & (t < hi), p.amplitude, 0.0)
    else:
        w = p.width
        x = t - p.center
        out = p.amplitude / math.sqrt(2 * math.pi * w * w) * np.exp(-x * x / (2 * w * w))
        out = np.where(np.abs(x) <= GAUSSIAN_CUTOFF * w, out, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DriveSpec:
    laser_detuning: float = 0.0  # omega_l - omega_0
    qd_pulses: Mapping[str, PulseEnvelope] = field(default_factory=dict)
    cavity_pulses: Mapping[str, PulseEnvelope] = field(default_factory=dict)

    def __post_init__(self):
        for pol in (*self.qd_pulses, *self.cavity_pulses):
            if pol not in POLARIZATIONS:
                raise ValueError(f"drive polarization must be X or Y, got {pol!r}")

    def envelopes(self):
        return list(self.qd_pulses.values()) + list(self.cavity_pulses.values())

    @property
    def is_cw(self) -> bool:
        return all(p.kind == "cw" for p in self.envelopes())

    def breakpoints(self) -> list[float]:
        """Times where an envelope switches on or off."""
        pts = set()
        for p in self.envelopes():
            s = p.support()
            if s is not None:
                pts.update(s)
        return sorted(pts)


def purcell_factor(g: complex, kappa: float, gamma: float) -> float:
    if kappa <= 0 or gamma <= 0:
        raise ValueError("kappa and gamma must be positive")
    return 4 * abs(g) ** 2 / (kappa * gamma)


def coupling_from_purcell(purcell: float, kappa: float, gamma: float) -> float:
    """|g| giving Purcell factor ``purcell`` for linewidth kappa and rate gamma."""
    if kappa <= 0 or gamma <= 0:
        raise ValueError("kappa and gamma must be positive")
    if purcell < 0:
        raise ValueError("Purcell factor must be >= 0")
    return math.sqrt(purcell * kappa * gamma / 4)


# --- operators on the composite space ----------------------------------------


def collective_lowering(pol: str) -> np.ndarray:
    """Polarisation-resolved 4x4 lowering operator (X: vertical, Y: diagonal)."""
    if pol == "X":
        return basis_projector(1, 4) + basis_projector(2, 3)
    if pol == "Y":
        return basis_projector(2, 4) + basis_projector(1, 3)
    raise ValueError(f"polarization must be X or Y, got {pol!r}")


def _check_modes(modes: Sequence[CavityMode]) -> tuple[CavityMode, ...]:
    if len(modes) > 2:
        raise ValueError("at most two cavity modes are supported")
    pols = [m.polarization for m in modes]
    if len(set(pols)) != len(pols):
        raise ValueError(f"duplicate cavity polarization in {pols}")
    return tuple(sorted(modes, key=lambda m: m.polarization))


def space_for(modes: Sequence[CavityMode]) -> HilbertSpace:
    modes = _check_modes(modes)
    return HilbertSpace((4, *(m.n_max + 1 for m in modes)))


def _mode_index(modes, pol):
    for k, m in enumerate(_check_modes(modes)):
        if m.polarization == pol:
            return k + 1
    raise KeyError(f"no {pol}-polarised cavity mode in this model")


def mode_operator(modes: Sequence[CavityMode], pol: str) -> Operator:
    k = _mode_index(modes, pol)
    space = space_for(modes)
    return embed(annihilation(space.factors[k] - 1), k, space)


def emitter_operator(m4: np.ndarray, space: HilbertSpace) -> Operator:
    return embed(m4, 0, space)


def build_static_hamiltonian(params: SystemParams, modes: Sequence[CavityMode],
                             laser_detuning: float) -> Operator:
    """Bare plus Jaynes-Cummings Hamiltonian in the frame rotating at the laser."""
    modes = _check_modes(modes)
    space = space_for(modes)
    dl = laser_detuning
    h4 = (0.5 * params.delta_e * (basis_projector(2, 2) - basis_projector(1, 1))
          + (-0.5 * params.delta_h - dl) * basis_projector(3, 3)
          + (0.5 * params.delta_h - dl) * basis_projector(4, 4))
    h = embed(h4, 0, space).matrix
    for m in modes:
        a = mode_operator(modes, m.polarization).matrix
        s = emitter_operator(collective_lowering(m.polarization), space).matrix
        h = h + (m.detuning - dl) * (a.conj().T @ a)
        h = h + m.coupling * (a.conj().T @ s) + np.conj(m.coupling) * (a @ s.conj().T)
    return Operator(space, h, hermitian=True)


def drive_generators(drive: DriveSpec, modes: Sequence[CavityMode]):
    """List of (envelope, Hermitian generator) with H_D(t) = sum f(t) G."""
    modes = _check_modes(modes)
    space = space_for(modes)
    out = []
    for pol, env in drive.qd_pulses.items():
        s = emitter_operator(collective_lowering(pol), space).matrix
        out.append((env, Operator(space, -0.5 * (s + s.conj().T), hermitian=True)))
    for pol, env in drive.cavity_pulses.items():
        a = mode_operator(modes, pol).matrix
        out.append((env, Operator(space, -(a + a.conj().T), hermitian=True)))
    return out


def build_drive_hamiltonian(drive: DriveSpec, t: float,
                            modes: Sequence[CavityMode] = ()) -> Operator:
    space = space_for(modes)
    h = np.zeros((space.dim, space.dim), dtype=complex)
    for env, gen in drive_generators(drive, modes):
        h = h + env(t) * gen.matrix
    return Operator(space, h, hermitian=True)


def collapse_channels(params: SystemParams, modes: Sequence[CavityMode]) -> list[Channel]:
    """Cavity leakage, polarised spontaneous emission and trion pure dephasing."""
    modes = _check_modes(modes)
    space = space_for(modes)
    out: list[Channel] = [(m.linewidth, mode_operator(modes, m.polarization)) for m in modes]
    out.append((params.gamma_x, emitter_operator(collective_lowering("X"), space)))
    out.append((params.gamma_y, emitter_operator(collective_lowering("Y"), space)))
    if params.pure_dephasing > 0:
        for j in (3, 4):
            out.append((params.pure_dephasing,
                        emitter_operator(basis_projector(j, j), space)))
    return out


@dataclass(frozen=True)
class CavityQDModel:
    """Hamiltonian, drives and dissipators assembled for one parameter point."""

    params: SystemParams
    modes: tuple[CavityMode, ...]
    drive: DriveSpec

    def __post_init__(self):
        object.__setattr__(self, "modes", _check_modes(self.modes))
        for pol in self.drive.cavity_pulses:
            _mode_index(self.modes, pol)

    @cached_property
    def space(self) -> HilbertSpace:
        return space_for(self.modes)

    @cached_property
    def hamiltonian(self) -> Operator:
        return build_static_hamiltonian(self.params, self.modes, self.drive.laser_detuning)

    @cached_property
    def channels(self) -> list[Channel]:
        return collapse_channels(self.params, self.modes)

    @cached_property
    def generators(self):
        return drive_generators(self.drive, self.modes)

    @cached_property
    def undriven_liouvillian(self) -> Superoperator:
        return liouvillian(self.hamiltonian, self.channels)

    @cached_property
    def drive_terms(self) -> list[tuple[PulseEnvelope, Superoperator]]:
        return [(env, Superoperator(self.space, commutator_superop(g.matrix)))
                for env, g in self.generators]

    @property
    def is_time_independent(self) -> bool:
        return self.drive.is_cw

    def hamiltonian_at(self, t: float) -> Operator:
        h = self.hamiltonian.matrix.copy()
        for env, g in self.generators:
            h += env(t) * g.matrix
        return Operator(self.space, h, hermitian=True)

    def liouvillian_at(self, t: float) -> Superoperator:
        mat = self.undriven_liouvillian.matrix
        for env, term in self.drive_terms:
            f = env(t)
            if f:
                mat = mat + f * term.matrix
        return Superoperator(self.space, mat)

    def cw_liouvillian(self) -> Superoperator:
        if not self.is_time_independent:
            raise ValueError("model has pulsed envelopes; no single time-independent generator")
        return self.liouvillian_at(0.0)

    def a(self, pol: str) -> Operator:
        return mode_operator(self.modes, pol)

    def mode(self, pol: str) -> CavityMode:
        return self.modes[_mode_index(self.modes, pol) - 1]

    def projector(self, i: int) -> Operator:
        return emitter_operator(basis_projector(i, i), self.space)

    def excitation_number(self) -> Operator:
        n = self.projector(3).matrix + self.projector(4).matrix
        for m in self.modes:
            a = self.a(m.polarization).matrix
            n = n + a.conj().T @ a
        return Operator(self.space, n, hermitian=True)

    def with_drive(self, drive: DriveSpec) -> "CavityQDModel":
        return CavityQDModel(self.params, self.modes, drive)

    def with_cutoff_increment(self, step: int) -> "CavityQDModel":
        return CavityQDModel(self.params, tuple(m.with_cutoff(m.n_max + step) for m in self.modes),
                             self.drive)


# --- the paper's cavity configurations ----------------------------------------

SINGLE = "single"
BIMODAL = "bimodal"


def cavity_modes(config: str, kappa: float, g: float, params: SystemParams | None = None, *,
                 n_max_y: int = 3, n_max_x: int = 1, nu_x: float = 0.0,
                 nu_y: float | None = None, bimodal_phase: complex = 1j) -> tuple[CavityMode, ...]:
    """Single Y mode resonant with |2>-|4>, or that mode plus an X mode at omega_0.

    In the bi-modal case the couplings are g_X = g and g_Y = bimodal_phase * g.
    """
    params = params or SystemParams()
    if nu_y is None:
        nu_y = params.diagonal_24
    if config == SINGLE:
        return (CavityMode("Y", nu_y, kappa, g, n_max_y),)
    if config == BIMODAL:
        return (CavityMode("X", nu_x, kappa, g, n_max_x),
                CavityMode("Y", nu_y, kappa, bimodal_phase * g, n_max_y))
    raise ValueError(f"cavity configuration must be {SINGLE!r} or {BIMODAL!r}, got {config!r}")


def readout_drive_strength(g: complex, fraction: float = 0.01) -> float:
    """Weak cavity drive epsilon = sqrt(fraction * 2 |g|^2)."""
    return math.sqrt(fraction * 2 * abs(g) ** 2)

"""Command-line front end: a config file in, CSV tables and a JSON manifest out.

Config files are TOML or JSON. Frequencies are ordinary frequencies in GHz,
rates in 1/ns and times in ns; the physics defaults are the B = 5 T values
used throughout the package.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import hashlib
import io
import json
import logging
import math
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .experiments import (
    DEPHASING_INIT_POINTS,
    KNOWN_AXES,
    ExperimentResult,
    Setup,
    SweepGrid,
    run_pulsed_initialisation,
    run_readout,
    run_steady_state_initialisation,
)
from .model import BIMODAL, SINGLE, SystemParams, ghz
from .optimize import OptimizationSpec

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger("qdcavity")

SCHEMA_VERSION = 1
OUTDIR_ENV = "QDCAVITY_OUTDIR"
EXPERIMENTS = ("steady-init", "pulse-init", "readout", "dephasing")
EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# --- schema -------------------------------------------------------------------------


@dataclass(frozen=True)
class PhysicsConfig:
    delta_e_ghz: float | None = None
    delta_h_ghz: float | None = None
    b_field_t: float | None = None
    g_e: float | None = None
    g_h: float | None = None
    gamma_x_per_ns: float = 1.0
    gamma_y_per_ns: float = 1.0
    dephasing_per_ns: float = 0.0
    nu_x_ghz: float = 0.0
    nu_y_ghz: float | None = None
    bimodal_phase_deg: float = 90.0


@dataclass(frozen=True)
class PulseConfig:
    kind: str = "square"
    durations: tuple[float, ...] = ()  # ns


@dataclass(frozen=True)
class OptimizerConfig:
    lo: float | None = None
    hi: float | None = None
    coarse_points: int = 201
    refine: float = 1e-4


@dataclass(frozen=True)
class ReadoutConfig:
    tau_ns: float = 35.0
    eta: float = 1.0
    drive_fraction: float = 0.01


@dataclass(frozen=True)
class SteadyConfig:
    rabi_ghz: float = 1e-3


@dataclass(frozen=True)
class DephasingConfig:
    init_rates_over_gamma: tuple[float, ...] = (0.0, 0.1, 1.0, 10.0)
    readout_rates_over_gamma: tuple[float, ...] = (1.0, 10.0)
    square_durations: tuple[float, ...] = (0.5, 1.0, 2.0, 3.0)
    gaussian_durations: tuple[float, ...] = (0.01, 0.02, 0.03, 0.045, 0.06)


@dataclass(frozen=True)
class NumericsConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    n_max_driven: int = 3
    n_max_idle: int = 1
    n_max_idle_readout: int = 1
    fock_check: str = "auto"
    tail_tol: float = 1e-6
    max_escalations: int = 3


SECTIONS = {
    "physics": PhysicsConfig,
    "pulse": PulseConfig,
    "optimizer": OptimizerConfig,
    "readout": ReadoutConfig,
    "steady": SteadyConfig,
    "dephasing": DephasingConfig,
    "numerics": NumericsConfig,
}


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    cavity: str = SINGLE
    sweep: dict = field(default_factory=dict)
    physics: PhysicsConfig = PhysicsConfig()
    pulse: PulseConfig = PulseConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    readout: ReadoutConfig = ReadoutConfig()
    steady: SteadyConfig = SteadyConfig()
    dephasing: DephasingConfig = DephasingConfig()
    numerics: NumericsConfig = NumericsConfig()
    out: str = "results"
    workers: int = 1
    seed: int = 0  # reserved, the pipeline is deterministic
    note: str = ""

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["sweep"] = {k: list(v) for k, v in self.sweep.items()}
        for name in SECTIONS:
            d[name] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in d[name].items()}
        return d

    def system_params(self) -> SystemParams:
        p = self.physics
        rates = dict(gamma_x=p.gamma_x_per_ns, gamma_y=p.gamma_y_per_ns,
                     pure_dephasing=p.dephasing_per_ns)
        return SystemParams.from_field(p.b_field_t, p.g_e, p.g_h, delta_e=ghz(p.delta_e_ghz),
                                       delta_h=ghz(p.delta_h_ghz), **rates)

    def setup(self) -> Setup:
        p, n = self.physics, self.numerics
        return Setup(
            params=self.system_params(), nu_x=ghz(p.nu_x_ghz), nu_y=ghz(p.nu_y_ghz),
            bimodal_phase=complex(np.exp(1j * math.radians(p.bimodal_phase_deg))),
            n_max_driven=n.n_max_driven, n_max_idle=n.n_max_idle,
            n_max_idle_readout=n.n_max_idle_readout, rel_tol=n.rel_tol, abs_tol=n.abs_tol,
            fock_check=n.fock_check, tail_tol=n.tail_tol, max_escalations=n.max_escalations)

    def optimization(self) -> OptimizationSpec:
        o = self.optimizer
        variable = "rabi" if self.pulse.kind == "square" else "area"
        return OptimizationSpec(variable, o.lo, o.hi, o.coarse_points, o.refine)


# --- parsing ------------------------------------------------------------------------

_UNITS = {"ps": 1e-3, "ns": 1.0, "us": 1e3, "": 1.0}
_NUMBER = re.compile(r"^\s*([-+0-9.eE]+)\s*([a-z]*)\s*$")


def _scalar(text, path: str, time_units: bool = False) -> float:
    if isinstance(text, bool):
        raise ConfigError(path, f"expected a number, got {text!r}")
    if isinstance(text, (int, float)):
        return float(text)
    if isinstance(text, str):
        m = _NUMBER.match(text)
        if m and (m.group(2) == "" or (time_units and m.group(2) in _UNITS)):
            try:
                return float(m.group(1)) * _UNITS[m.group(2)]
            except ValueError:
                pass
    raise ConfigError(path, f"expected a number{' with ps/ns unit' if time_units else ''}, "
                      f"got {text!r}")


def parse_values(spec, path: str, time_units: bool = False) -> tuple[float, ...]:
    """A number, a list of numbers, ``"start:stop:count"`` (linear, inclusive)
    or ``"log:start:stop:count"`` (geometric). Times may carry ps/ns units."""
    if isinstance(spec, (list, tuple)):
        vals = [_scalar(v, f"{path}[{i}]", time_units) for i, v in enumerate(spec)]
    elif isinstance(spec, str) and ":" in spec:
        parts = spec.split(":")
        geometric = parts[0].strip() == "log"
        if geometric:
            parts = parts[1:]
        if len(parts) != 3:
            raise ConfigError(path, f"range must be 'start:stop:count', got {spec!r}")
        a = _scalar(parts[0], path, time_units)
        b = _scalar(parts[1], path, time_units)
        try:
            count = int(parts[2])
        except ValueError:
            raise ConfigError(path, f"range count must be an integer, got {parts[2]!r}") from None
        if count < 1:
            raise ConfigError(path, "range count must be >= 1")
        if geometric:
            if a <= 0 or b <= 0:
                raise ConfigError(path, "logarithmic range needs positive end points")
            vals = np.geomspace(a, b, count)
        else:
            vals = np.linspace(a, b, count)
        # trim representation noise so grids print cleanly (e.g. 0.03, not 0.030000000000000002)
        vals = [float(f"{v:.12g}") for v in vals]
    else:
        vals = [_scalar(spec, path, time_units)]
    if not vals:
        raise ConfigError(path, "empty list")
    if any(not math.isfinite(v) for v in vals):
        raise ConfigError(path, "values must be finite")
    return tuple(vals)


def _build_section(cls, raw, path: str):
    if not isinstance(raw, dict):
        raise ConfigError(path, f"expected a table, got {type(raw).__name__}")
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{path}.{key}", f"unknown key (allowed: {', '.join(known)})")
    kwargs = {}
    for key, value in raw.items():
        f, p = known[key], f"{path}.{key}"
        default = f.default
        if value is None:
            kwargs[key] = None
        elif isinstance(default, tuple):
            kwargs[key] = () if value == [] else parse_values(
                value, p, time_units=key.endswith("durations"))
        elif isinstance(default, bool) or f.type == "bool":
            if not isinstance(value, bool):
                raise ConfigError(p, f"expected true/false, got {value!r}")
            kwargs[key] = value
        elif isinstance(default, int) and not isinstance(default, bool):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(p, f"expected an integer, got {value!r}")
            kwargs[key] = value
        elif isinstance(default, str):
            if not isinstance(value, str):
                raise ConfigError(p, f"expected a string, got {value!r}")
            kwargs[key] = value
        else:
            kwargs[key] = _scalar(value, p)
    return cls(**kwargs)


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigError(path, message)


def resolve(raw: dict) -> RunConfig:
    """Validate a raw mapping and fill defaults; raises ``ConfigError``."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a table")
    top = {f.name for f in dataclasses.fields(RunConfig)}
    for key in raw:
        if key not in top:
            raise ConfigError(key, f"unknown key (allowed: {', '.join(sorted(top))})")
    if "experiment" not in raw:
        raise ConfigError("experiment", f"missing; one of {', '.join(EXPERIMENTS)}")
    exp = raw["experiment"]
    _require(exp in EXPERIMENTS, "experiment", f"must be one of {EXPERIMENTS}, got {exp!r}")
    cavity = raw.get("cavity", SINGLE)
    _require(cavity in (SINGLE, BIMODAL), "cavity", f"must be {SINGLE!r} or {BIMODAL!r}, "
             f"got {cavity!r}")

    sections = {name: _build_section(cls, raw.get(name, {}), name) for name, cls in SECTIONS.items()}

    sweep_raw = raw.get("sweep", {})
    _require(isinstance(sweep_raw, dict), "sweep", "expected a table of axes")
    sweep = {}
    for key, spec in sweep_raw.items():
        _require(key in KNOWN_AXES, f"sweep.{key}", f"unknown axis (allowed: {', '.join(KNOWN_AXES)})")
        sweep[key] = parse_values(spec, f"sweep.{key}", time_units=key == "duration_ns")

    # physics
    ph = sections["physics"]
    if ph.b_field_t is not None or ph.g_e is not None or ph.g_h is not None:
        _require(None not in (ph.b_field_t, ph.g_e, ph.g_h), "physics.b_field_t",
                 "b_field_t, g_e and g_h must be given together")
    for name in ("delta_e_ghz", "delta_h_ghz", "b_field_t"):
        v = getattr(ph, name)
        _require(v is None or v >= 0, f"physics.{name}", f"must be >= 0, got {v}")
    for name in ("gamma_x_per_ns", "gamma_y_per_ns"):
        _require(getattr(ph, name) > 0, f"physics.{name}", f"decay rates must be > 0, got {getattr(ph, name)}")
    _require(ph.dephasing_per_ns >= 0, "physics.dephasing_per_ns",
             f"must be >= 0, got {ph.dephasing_per_ns}")
    explicit = {k: getattr(ph, k) for k in ("delta_e_ghz", "delta_h_ghz")}
    derived = {}
    if ph.b_field_t is not None:
        from .model import BOHR_GHZ_PER_T
        derived = {"delta_e_ghz": abs(ph.g_e) * BOHR_GHZ_PER_T * ph.b_field_t,
                   "delta_h_ghz": abs(ph.g_h) * BOHR_GHZ_PER_T * ph.b_field_t}
    fill = {"delta_e_ghz": 35.0, "delta_h_ghz": 20.0}
    delta = {k: (explicit[k] if explicit[k] is not None else derived.get(k, fill[k])) for k in fill}
    nu_y = ph.nu_y_ghz if ph.nu_y_ghz is not None else (delta["delta_h_ghz"] - delta["delta_e_ghz"]) / 2
    ph = dataclasses.replace(ph, nu_y_ghz=nu_y, **delta)
    sections["physics"] = ph

    # experiment-specific checks
    pulse = sections["pulse"]
    _require(pulse.kind in ("square", "gaussian"), "pulse.kind",
             f"must be 'square' or 'gaussian', got {pulse.kind!r}")
    if exp == "dephasing":
        sweep.setdefault("kappa_ghz", (1.0, 5.0, 20.0, 110.0))
        sweep.setdefault("purcell", (10.0, 25.0, 40.0))
    if exp == "pulse-init":
        if pulse.durations:
            _require("duration_ns" not in sweep, "pulse.durations",
                     "give durations either here or as sweep.duration_ns, not both")
            sweep["duration_ns"] = pulse.durations
            sections["pulse"] = pulse = dataclasses.replace(pulse, durations=())
        _require("duration_ns" in sweep, "sweep.duration_ns", "pulse-init needs pulse durations")
    elif "duration_ns" in sweep:
        raise ConfigError("sweep.duration_ns", f"not used by {exp}")
    _require("kappa_ghz" in sweep, "sweep.kappa_ghz", "missing; cavity linewidths are required")
    couplings = [k for k in ("purcell", "g_over_kappa", "g_ghz") if k in sweep]
    _require(len(couplings) == 1, "sweep", "give the cavity coupling exactly once, as one of "
             f"purcell, g_over_kappa or g_ghz (got {couplings or 'none'})")
    for key, vals in sweep.items():
        positive = key in ("kappa_ghz",)
        for v in vals:
            if positive:
                _require(v > 0, f"sweep.{key}", f"linewidth must be > 0, got {v:g}")
            else:
                _require(v >= 0, f"sweep.{key}", f"must be >= 0, got {v:g}")

    opt = sections["optimizer"]
    lo_default, hi_default = (0.0, 10.0) if pulse.kind == "square" else (0.01, 5.0)
    opt = dataclasses.replace(opt, lo=lo_default if opt.lo is None else opt.lo,
                              hi=hi_default if opt.hi is None else opt.hi)
    _require(opt.lo < opt.hi, "optimizer.lo", f"must be below optimizer.hi ({opt.lo} >= {opt.hi})")
    _require(opt.lo >= 0, "optimizer.lo", "must be >= 0")
    _require(opt.coarse_points >= 50, "optimizer.coarse_points", "must be >= 50")
    _require(opt.refine > 0, "optimizer.refine", "must be > 0")
    sections["optimizer"] = opt

    ro = sections["readout"]
    _require(ro.tau_ns > 0, "readout.tau_ns", f"must be > 0, got {ro.tau_ns}")
    _require(0 <= ro.eta <= 1, "readout.eta", f"collection efficiency must lie in [0, 1], got {ro.eta}")
    _require(ro.drive_fraction > 0, "readout.drive_fraction", "must be > 0")
    _require(sections["steady"].rabi_ghz > 0, "steady.rabi_ghz", "must be > 0")
    deph = sections["dephasing"]
    for name in ("init_rates_over_gamma", "readout_rates_over_gamma"):
        _require(all(v >= 0 for v in getattr(deph, name)), f"dephasing.{name}", "must be >= 0")
    for name in ("square_durations", "gaussian_durations"):
        _require(all(v >= 0 for v in getattr(deph, name)), f"dephasing.{name}", "must be >= 0")

    num = sections["numerics"]
    for name in ("rel_tol", "abs_tol"):
        v = getattr(num, name)
        _require(0 < v <= 1e-2, f"numerics.{name}", f"must lie in (0, 1e-2], got {v}")
    for name in ("n_max_driven", "n_max_idle", "n_max_idle_readout"):
        _require(getattr(num, name) >= 1, f"numerics.{name}", "Fock cutoffs must be >= 1")
    _require(num.fock_check in ("auto", "rerun", "tail", "off"), "numerics.fock_check",
             f"must be auto, rerun, tail or off, got {num.fock_check!r}")
    _require(num.max_escalations >= 0, "numerics.max_escalations", "must be >= 0")

    workers = raw.get("workers", 1)
    _require(isinstance(workers, int) and not isinstance(workers, bool) and workers >= 1,
             "workers", f"must be a positive integer, got {workers!r}")
    seed = raw.get("seed", 0)
    _require(isinstance(seed, int) and not isinstance(seed, bool), "seed", "must be an integer")
    out = raw.get("out", "results")
    _require(isinstance(out, str) and out != "", "out", "must be a non-empty path")
    note = raw.get("note", "")
    _require(isinstance(note, str), "note", "must be a string")
    return RunConfig(experiment=exp, cavity=cavity, sweep=sweep, out=out, workers=workers,
                     seed=seed, note=note, **sections)


def load_raw(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(str(path), "config file not found")
    text = p.read_bytes()
    try:
        if p.suffix.lower() == ".json":
            return json.loads(text)
        return tomllib.loads(text.decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(str(path), f"cannot parse: {exc}") from None


def parse_config(path) -> RunConfig:
    """Read a TOML (or ``.json``) config and return the validated RunConfig."""
    return resolve(load_raw(path))


# --- running ------------------------------------------------------------------------


def run_config(cfg: RunConfig) -> dict[str, list[ExperimentResult]]:
    """Execute the experiment; returns one result list per output table."""
    setup = cfg.setup()
    grid = SweepGrid(cfg.sweep, cfg.cavity)
    if cfg.experiment == "steady-init":
        return {"steady_init": run_steady_state_initialisation(
            grid, setup, rabi_ghz=cfg.steady.rabi_ghz, workers=cfg.workers)}
    if cfg.experiment == "pulse-init":
        return {f"pulse_init_{cfg.pulse.kind}": run_pulsed_initialisation(
            grid, cfg.pulse.kind, cfg.optimization(), setup, workers=cfg.workers)}
    if cfg.experiment == "readout":
        r = cfg.readout
        return {"readout": run_readout(grid, r.tau_ns, r.eta, setup,
                                       drive_fraction=r.drive_fraction, workers=cfg.workers)}
    return _run_dephasing(cfg, setup)


def _run_dephasing(cfg: RunConfig, setup: Setup) -> dict[str, list[ExperimentResult]]:
    d, out = cfg.dephasing, {}
    for kind, durations in (("square", d.square_durations), ("gaussian", d.gaussian_durations)):
        if not durations:
            continue
        axes = {k: (v,) for k, v in DEPHASING_INIT_POINTS[(cfg.cavity, kind)].items()}
        axes["dephasing_over_gamma"] = d.init_rates_over_gamma
        axes["duration_ns"] = durations
        opt = dataclasses.replace(cfg, pulse=PulseConfig(kind),
                                  optimizer=_default_optimizer(cfg.optimizer, kind)).optimization()
        out[f"dephasing_init_{kind}"] = run_pulsed_initialisation(
            SweepGrid(axes, cfg.cavity), kind, opt, setup, workers=cfg.workers)
    if d.readout_rates_over_gamma:
        axes = {**cfg.sweep, "dephasing_over_gamma": d.readout_rates_over_gamma}
        r = cfg.readout
        out["dephasing_readout"] = run_readout(SweepGrid(axes, cfg.cavity), r.tau_ns, r.eta, setup,
                                               drive_fraction=r.drive_fraction,
                                               workers=cfg.workers)
    return out


def _default_optimizer(o: OptimizerConfig, kind: str) -> OptimizerConfig:
    lo, hi = (0.0, 10.0) if kind == "square" else (0.01, 5.0)
    return dataclasses.replace(o, lo=lo, hi=hi)


# --- output -------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.9g" % v
    return str(v)


def table_columns(results: list[ExperimentResult]) -> list[str]:
    cols: list[str] = []

    def add(keys):
        for k in keys:
            if k not in cols:
                cols.append(k)

    ok = [r for r in results if r.ok]
    for r in ok:
        add(r.point)
    if ok:
        add([ok[0].metric])
        if any(r.argopt is not None for r in ok):
            add(["argopt"])
    for r in ok:
        add(r.extras)
    add(["fock_converged"])
    for r in ok:
        add(r.diagnostics)
    return cols


def format_table(results: list[ExperimentResult]) -> str:
    """CSV text: successful points only, in grid order, 9 significant digits."""
    cols = table_columns(results)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in results:
        if not r.ok:
            continue
        row = {**r.point, r.metric: r.value, "argopt": r.argopt, **r.extras, **r.diagnostics}
        w.writerow([_fmt(row.get(c)) for c in cols])
    return buf.getvalue()


def summarize(results: list[ExperimentResult]) -> dict:
    ok = [r for r in results if r.ok]
    diags = [r.diagnostics for r in ok]

    def collect(key):
        return [d[key] for d in diags if d.get(key) is not None]

    summary = {
        "points": len(results),
        "succeeded": len(ok),
        "errors": [{"point": r.point, "error": r.error} for r in results if not r.ok],
        "fock_not_converged": [r.point for r in ok if r.diagnostics.get("fock_converged") is False],
        "fock_unchecked": sum(1 for r in ok if r.diagnostics.get("fock_converged") is None),
        "at_boundary": [r.point for r in ok if r.diagnostics.get("at_boundary")],
        "brute_force_disagreements": [r.point for r in ok
                                      if r.diagnostics.get("brute_force_agrees") is False],
        "orientation_swapped": [r.point for r in ok if r.diagnostics.get("orientation_swapped")],
        "wall_time_s": float(sum(r.wall_time for r in results)),
    }
    mins = collect("min_eigenvalue")
    if mins:
        summary["min_eigenvalue"] = float(min(mins))
    for key in ("trace_drift", "trace_error", "hermiticity_error", "fock_change", "tolerance_change",
                "quadrature_change", "determinism_change"):
        vals = collect(key)
        if vals:
            summary[f"max_{key}"] = float(max(vals))
    return summary


def emit_results(tables: dict[str, list[ExperimentResult]], manifest: dict, outdir) -> dict:
    """Write one CSV per table plus manifest.json; returns the completed manifest."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, results in tables.items():
        text = format_table(results)
        (out / f"{name}.csv").write_text(text)
        files[name] = {"file": f"{name}.csv",
                       "sha256": hashlib.sha256(text.encode()).hexdigest(),
                       "summary": summarize(results)}
    manifest = {**manifest, "tables": files}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default) + "\n")
    return manifest


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    return str(o)


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def execute(cfg: RunConfig, command: str, notes: list[str] | None = None) -> int:
    """Run, write outputs, return the exit code."""
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {out} is not writable: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    started = _now()
    tables = run_config(cfg)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool": "qdcavity",
        "version": __version__,
        "command": command,
        "config": cfg.to_dict(),
        "notes": list(notes or []) + ([cfg.note] if cfg.note else []),
        "started": started,
        "finished": _now(),
    }
    manifest = emit_results(tables, manifest, out)
    failed = sum(len(t["summary"]["errors"]) for t in manifest["tables"].values())
    for name, t in manifest["tables"].items():
        s = t["summary"]
        print(f"{name}: {s['succeeded']}/{s['points']} points -> {out / t['file']}")
        for e in s["errors"]:
            print(f"  error at {e['point']}: {e['error']}", file=sys.stderr)
        if s["fock_not_converged"]:
            print(f"  warning: Fock cutoff not converged at {len(s['fock_not_converged'])} point(s)",
                  file=sys.stderr)
    return EXIT_PARTIAL if failed else EXIT_OK


# --- figure presets -----------------------------------------------------------------

FIGURE_CONFIGS = {"single_mode": SINGLE, "single": SINGLE, "bimodal": BIMODAL, "bi-modal": BIMODAL}
READOUT_KAPPAS = [1.0, 2.0, 5.0, 9.4, 20.0, 40.0, 70.0, 110.0]
READOUT_PURCELLS = [1.0, 4.0, 7.0, 10.0, 19.0, 25.0, 33.0, 40.0]


def figure_configs(number: int, cavity: str) -> list[tuple[dict, list[str]]]:
    """Desk-scale raw configs (with manifest notes) approximating each figure."""
    if number == 2:
        return [({"experiment": "steady-init", "cavity": cavity,
                  "sweep": {"kappa_ghz": [1.0, 5.0, 20.0, 110.0],
                            "g_over_kappa": "log:0.01:10:10"}}, [])]
    if number == 3:
        base = {"kappa_ghz": [1.0, 20.0, 40.0], "purcell": [10.0, 40.0]}
        return [({"experiment": "pulse-init", "cavity": cavity, "sweep": base,
                  "pulse": {"kind": "square", "durations": "0.25ns:3ns:12"}}, []),
                ({"experiment": "pulse-init", "cavity": cavity, "sweep": base,
                  "pulse": {"kind": "gaussian", "durations": "5ps:60ps:12"}}, [])]
    if number == 4:
        notes = ["grid includes the quoted comparison points kappa/2pi = 9.4 and 20 GHz "
                 "with F_P = 7, 10 and 19"]
        return [({"experiment": "readout", "cavity": cavity,
                  "sweep": {"kappa_ghz": READOUT_KAPPAS, "purcell": READOUT_PURCELLS}}, notes)]
    if number == 5:
        return [({"experiment": "dephasing", "cavity": cavity,
                  "sweep": {"kappa_ghz": [20.0], "purcell": [10.0]},
                  "dephasing": {"square_durations": "0.25ns:3ns:12",
                                "gaussian_durations": "5ps:60ps:12",
                                "readout_rates_over_gamma": []}}, [])]
    if number == 6:
        return [({"experiment": "dephasing", "cavity": cavity,
                  "sweep": {"kappa_ghz": [1.0, 5.0, 9.4, 20.0, 40.0, 110.0],
                            "purcell": [7.0, 10.0, 19.0, 25.0, 40.0]},
                  "dephasing": {"square_durations": [], "gaussian_durations": [],
                                "readout_rates_over_gamma": [1.0, 10.0]}}, [])]
    raise ConfigError("figure", f"no preset for figure {number}; choose 2, 3, 4, 5 or 6")


# --- verify -------------------------------------------------------------------------


def run_verify() -> int:
    from .verify import run_checks

    failures = 0
    for name, ok, detail in run_checks():
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failures += not ok
    print(f"{failures} failure(s)")
    return EXIT_OK if failures == 0 else EXIT_PARTIAL


# --- argument parsing ---------------------------------------------------------------


def _axis_override(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUES, got {text!r}")
    name, spec = text.split("=", 1)
    return name.strip(), spec.strip()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdcavity", description="Spin initialisation and readout sweeps for a "
        "cavity-coupled quantum-dot spin.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_config=True):
        if with_config:
            p.add_argument("--config", help="TOML or JSON run configuration")
            p.add_argument("--cavity", choices=[SINGLE, BIMODAL])
            p.add_argument("--axis", action="append", default=[], type=_axis_override,
                           metavar="NAME=VALUES",
                           help="sweep axis, e.g. kappa_ghz=1,20 or g_over_kappa=log:0.01:10:10")
        p.add_argument("--workers", type=int)
        p.add_argument("--out", help=f"output directory (overrides ${OUTDIR_ENV})")

    common(sub.add_parser("steady-init", help="CW steady-state initialisation sweep"))
    p = sub.add_parser("pulse-init", help="pulsed initialisation with per-point optimisation")
    common(p)
    p.add_argument("--pulse", choices=["square", "gaussian"])
    p.add_argument("--durations", help="e.g. 5ps:60ps:12 or 0.5,1,3")
    p = sub.add_parser("readout", help="readout fidelity map")
    common(p)
    p.add_argument("--tau", type=float, help="probe duration (ns)")
    p.add_argument("--eta", type=float, help="collection efficiency")
    common(sub.add_parser("dephasing", help="pure-dephasing robustness study"))
    sub.add_parser("verify", help="run the analytic oracle checks")
    p = sub.add_parser("figure", help="desk-scale preset for a figure")
    p.add_argument("number", type=int, choices=[2, 3, 4, 5, 6])
    p.add_argument("--config", dest="preset", required=True, choices=sorted(FIGURE_CONFIGS),
                   help="cavity configuration")
    common(p, with_config=False)
    return parser


def _values_arg(text: str):
    return text.split(",") if "," in text else text


def raw_from_args(args) -> dict:
    raw = load_raw(args.config) if getattr(args, "config", None) else {}
    raw = json.loads(json.dumps(raw))  # detach nested tables
    raw.setdefault("experiment", args.command)
    if raw["experiment"] != args.command:
        raise ConfigError("experiment", f"config is for {raw['experiment']!r}, not {args.command!r}")
    if args.cavity:
        raw["cavity"] = args.cavity
    for name, spec in args.axis:
        raw.setdefault("sweep", {})[name] = _values_arg(spec)
    if getattr(args, "pulse", None):
        raw.setdefault("pulse", {})["kind"] = args.pulse
    if getattr(args, "durations", None):
        raw.setdefault("pulse", {})["durations"] = _values_arg(args.durations)
        raw.get("sweep", {}).pop("duration_ns", None)
    for flag, key in (("tau", "tau_ns"), ("eta", "eta")):
        if getattr(args, flag, None) is not None:
            raw.setdefault("readout", {})[key] = getattr(args, flag)
    if args.command == "readout" or args.command == "dephasing":
        s = raw.setdefault("sweep", {})
        if args.command == "readout" and not s:
            s.update(kappa_ghz=[20.0], purcell=[10.0])
    if args.command == "steady-init" and not raw.get("sweep"):
        raw["sweep"] = {"kappa_ghz": [20.0], "g_over_kappa": "log:0.01:10:10"}
    if args.command == "pulse-init":
        s = raw.setdefault("sweep", {})
        if "kappa_ghz" not in s:
            s.update(kappa_ghz=[20.0], purcell=[10.0])
    return raw


def _apply_common(raw: dict, args) -> dict:
    if os.environ.get(OUTDIR_ENV):
        raw["out"] = os.environ[OUTDIR_ENV]
    if args.out:
        raw["out"] = args.out
    if args.workers is not None:
        raw["workers"] = args.workers
    return raw


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    command = " ".join(["qdcavity", *(argv if argv is not None else sys.argv[1:])])
    if args.command == "verify":
        return run_verify()
    try:
        if args.command == "figure":
            cavity = FIGURE_CONFIGS[args.preset]
            runs = []
            for raw, notes in figure_configs(args.number, cavity):
                raw = _apply_common(raw, args)
                raw.setdefault("out", "results")
                if len(figure_configs(args.number, cavity)) > 1:
                    raw["out"] = str(Path(raw["out"]) / raw["pulse"]["kind"])
                runs.append((resolve(raw), notes))
        else:
            runs = [(resolve(_apply_common(raw_from_args(args), args)), [])]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code = EXIT_OK
    for cfg, notes in runs:
        code = max(code, execute(cfg, command, notes))
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

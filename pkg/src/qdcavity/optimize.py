"""Bounded 1-D minimisation: dense coarse scan, then golden-section refinement."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class OptimizationSpec:
    variable: str  # "rabi" (square pulses, units of gamma) or "area" (Gaussian, units of pi)
    lo: float
    hi: float
    coarse_points: int = 201
    refine: float = 1e-4

    def __post_init__(self):
        if self.variable not in ("rabi", "area"):
            raise ValueError(f"optimisation variable must be 'rabi' or 'area', got {self.variable!r}")
        if not self.lo < self.hi:
            raise ValueError(f"empty range [{self.lo}, {self.hi}]")
        if self.coarse_points < 50:
            raise ValueError("coarse_points must be >= 50")
        if not self.refine > 0:
            raise ValueError("refine tolerance must be positive")


@dataclass
class MinimumResult:
    x: float
    fun: float
    evaluations: int
    at_boundary: bool
    coarse_x: np.ndarray = field(repr=False)
    coarse_f: np.ndarray = field(repr=False)


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float,
                   cache: dict | None = None) -> tuple[float, float]:
    """Minimise a unimodal ``f`` on [a, b] until the bracket is narrower than ``tol``."""
    cache = {} if cache is None else cache

    def fc(x):
        if x not in cache:
            cache[x] = f(x)
        return cache[x]

    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc_, fd = fc(c), fc(d)
    while b - a > tol:
        if fc_ < fd:
            b, d, fd = d, c, fc_
            c = b - INV_PHI * (b - a)
            fc_ = fc(c)
        else:
            a, c, fc_ = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = fc(d)
    return (c, fc_) if fc_ < fd else (d, fd)


def minimize_scan(f: Callable[[float], float], lo: float, hi: float, *,
                  coarse_points: int = 201, refine: float = 1e-4) -> MinimumResult:
    """Scan ``coarse_points`` evenly spaced values, then refine around the best one.

    Refinement stops at a bracket of ``refine`` times the magnitude of the
    current best point (or of the range, for a minimum at zero). The returned
    value is never worse than the best coarse sample.
    """
    xs = np.linspace(lo, hi, coarse_points)
    fs = np.array([f(float(x)) for x in xs])
    i = int(np.argmin(fs))
    best_x, best_f = float(xs[i]), float(fs[i])
    a = float(xs[max(i - 1, 0)])
    b = float(xs[min(i + 1, coarse_points - 1)])
    scale = abs(best_x) if best_x else (hi - lo)
    cache: dict[float, float] = {float(x): float(v) for x, v in zip(xs, fs)}
    x, fx = golden_section(f, a, b, refine * scale, cache)
    evals = len(cache)
    if fx < best_f:
        best_x, best_f = x, fx
    return MinimumResult(best_x, best_f, evals, i in (0, coarse_points - 1), xs, fs)

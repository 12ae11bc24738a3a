import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdcavity.optimize import OptimizationSpec, golden_section, minimize_scan


def test_golden_section_parabola():
    x, fx = golden_section(lambda x: (x - 0.3) ** 2, 0.0, 1.0, 1e-8)
    assert x == pytest.approx(0.3, abs=1e-8)
    assert fx < 1e-15


def test_scan_finds_global_minimum_of_multimodal_function():
    f = lambda x: math.cos(3 * x) + 0.1 * x
    res = minimize_scan(f, 0.0, 10.0)
    grid = np.linspace(0, 10, 200001)
    assert res.fun <= np.min([f(x) for x in grid]) + 1e-8
    assert not res.at_boundary


def test_boundary_minimum_is_flagged():
    res = minimize_scan(lambda x: x, 0.0, 1.0)
    assert res.x == 0.0 and res.at_boundary


def test_evaluations_counted_once():
    calls = []
    res = minimize_scan(lambda x: calls.append(x) or (x - 2.0) ** 2, 0.0, 5.0, coarse_points=60)
    assert res.evaluations == len(set(calls))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 10.0), st.integers(50, 120))
def test_never_worse_than_coarse_and_more_points_no_worse(center, n):
    f = lambda x: abs(x - center) ** 1.5 + 0.2 * math.sin(5 * x)
    small = minimize_scan(f, 0.0, 10.0, coarse_points=n)
    assert small.fun <= float(np.min(small.coarse_f))
    # a finer scan that contains the coarse grid can only do better
    large = minimize_scan(f, 0.0, 10.0, coarse_points=2 * n - 1)
    assert large.fun <= float(np.min(small.coarse_f)) + 1e-15


@pytest.mark.parametrize("kw", [dict(variable="x", lo=0, hi=1), dict(variable="rabi", lo=1, hi=1),
                                dict(variable="rabi", lo=0, hi=1, coarse_points=10),
                                dict(variable="area", lo=0, hi=1, refine=0)])
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        OptimizationSpec(**kw)

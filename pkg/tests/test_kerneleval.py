from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracphi3.kerneleval import (
    FitError,
    Mollifier,
    a0_fourier,
    a0_value,
    abar0_estimate,
    abar0_quadrature,
    default_mollifier,
    geometric_grid,
    green_mollified_at_zero,
    green_mollified_real,
    green_scaling,
    parse_grid,
    riesz_constant,
    riesz_constant_numeric,
    scaling_fit,
)


def test_riesz_examples():
    assert riesz_constant(3, 2) == pytest.approx(1 / (4 * math.pi), abs=1e-12)
    assert riesz_constant(3, 1) == pytest.approx(1 / (2 * math.pi ** 2), abs=1e-12)
    assert riesz_constant(2, 1) == pytest.approx(1 / (2 * math.pi), abs=1e-12)


@given(d=st.integers(1, 5), frac=st.floats(0.05, 0.95))
@settings(max_examples=25, deadline=None)
def test_riesz_numeric_oracle(d, frac):
    rho = frac * min(d, 2)
    closed = riesz_constant(d, rho)
    assert riesz_constant_numeric(d, rho) == pytest.approx(closed, rel=1e-8)
    if d - rho >= 0.5:
        assert riesz_constant_numeric(d, rho, method="gauss_legendre") == pytest.approx(closed, rel=1e-8)


def test_mollifier_normalized():
    for d in (1, 2, 3):
        m = default_mollifier(d)
        assert m.mass() == pytest.approx(1, abs=1e-10)
        assert m.fourier(0.0) == pytest.approx(1, abs=1e-10)
    with pytest.raises(ValueError):
        Mollifier(3, spatial="nope")


def test_a0_dual_routes():
    m = default_mollifier(3)
    a = a0_value(m, 1.2)
    assert a < 0
    assert a0_value(m, 1.2, method="gauss_legendre") == pytest.approx(a, rel=1e-9)
    assert a0_fourier(m, 1.2) == pytest.approx(a, rel=1e-6)


def test_green_homogeneity():
    m = default_mollifier(3)
    vals = [green_mollified_at_zero(e, 1.2, m) * e ** (3 - 1.2) for e in (1, 0.5, 0.25)]
    assert max(vals) - min(vals) < 1e-8 * abs(vals[0])
    assert vals[0] == pytest.approx(green_mollified_real(1.0, 1.2, m), rel=1e-6)
    assert vals[0] == pytest.approx(-2 * a0_value(m, 1.2), rel=1e-2)


@pytest.mark.parametrize("d,rho", [(3, 1.2), (2, 0.8)])
def test_green_scaling_fit(d, rho):
    rows, fit = green_scaling(geometric_grid(1e-1, 1e-4, 8), rho, default_mollifier(d))
    assert fit.exponent == pytest.approx(-(d - rho), rel=0.02)
    assert fit.r2 > 0.999
    assert len(rows) == 8


def test_fit_errors():
    with pytest.raises(FitError):
        scaling_fit(np.array([0.1, 0.01, 0.001]), np.array([1, 2, 3]))
    with pytest.raises(FitError):
        scaling_fit(np.array([0.5, 0.4, 0.1, 0.05, 0.01]), np.ones(5))
    with pytest.raises(ValueError):
        parse_grid("1e-1:1e-3")
    assert len(parse_grid("1e-1:1e-3:5")) == 5


def test_abar0():
    m = default_mollifier(3)
    exact = abar0_quadrature(m, 1.2)
    est = abar0_estimate(0.1, 1.2, m)
    assert exact < 0 and est.value < 0
    assert est.stderr / abs(est.value) < 0.1 and est.reliable
    assert abs(est.value - exact) < 4 * est.stderr


def test_abar0_scaling():
    m = default_mollifier(3)
    grid = geometric_grid(1e-1, 1e-3, 5)
    vals = [abar0_estimate(float(e), 1.2, m, samples=20_000, normalized=False).value for e in grid]
    fit = scaling_fit(grid, np.array(vals))
    assert fit.exponent == pytest.approx(-(3 - 2 * 1.2), rel=0.05)

from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracphi3.asymptotics import (
    BoundConfig,
    ParameterRangeError,
    Regime,
    TreeFamily,
    H,
    H_closed_form,
    alpha_k,
    bound_C0,
    bound_C1,
    combinatorial_weight,
    counterterm_profile,
    delta_ratio,
    dominant_regime,
    envelope_F,
    envelope_terms,
    eps_bar_c,
    eps_c,
    eps_threshold,
    fit_r_constant,
    geom_sum,
    geom_sum_bound,
    k_bar_max,
    k_max,
    log_eps_c,
    parameter_prefactor,
    r,
    regime_map,
    scaling_self_test,
)
from fracphi3.trees import ModelParams

P31 = ModelParams(d=3, rho=1.1)

rhos = st.floats(1.02, 1.45)
epss = st.floats(1e-12, 0.9)


def test_k_max_examples():
    assert k_max(P31) == pytest.approx(19 / 3)
    p = ModelParams(d=3, rho=1.5)
    assert k_max(p) == pytest.approx(1) and k_bar_max(p) == pytest.approx(0)
    near = ModelParams(d=3, rho=1 + 1e-7)
    assert k_bar_max(near) / k_max(near) == pytest.approx(0.5, rel=1e-5)


def test_alpha_k_examples():
    assert alpha_k(0, P31) == pytest.approx(-(3 - 1.1))
    assert alpha_k(k_max(P31), P31) == pytest.approx(0, abs=1e-12)
    assert alpha_k(3, P31) == pytest.approx(-1.0)


def test_eps_c_k1():
    pm = ModelParams(d=3, rho=1.5)
    assert eps_threshold(1, pm) == pytest.approx(math.exp(math.log(2) / 2 / 0.5))
    with pytest.raises(ParameterRangeError):
        eps_threshold(0, pm)


def test_superexponential_law():
    vals = []
    for s in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
        pm = ModelParams(d=3, rho=1 + s)
        vals.append(-s * log_eps_c(pm) - math.log(1 / s))
    assert max(vals) - min(vals) < 2.0


@given(rho=rhos, eps=epss)
@settings(max_examples=60, deadline=None)
def test_envelope_endpoints(rho, eps):
    pm = ModelParams(d=3, rho=rho)
    lhs0 = 3 * envelope_F(0, eps, pm)
    assert lhs0 == pytest.approx(-(3 - rho) * math.log(eps), rel=1e-10, abs=1e-10)
    lhs1 = 3 * envelope_F(k_max(pm), eps, pm)
    assert lhs1 == pytest.approx(-(3 - rho) * math.log(eps_c(pm)), rel=1e-10, abs=1e-10)


@given(rho=rhos, eps=epss)
@settings(max_examples=60, deadline=None)
def test_h_closed_form(rho, eps):
    pm = ModelParams(d=3, rho=rho)
    assert H(eps, pm) == pytest.approx(H_closed_form(eps, pm), rel=1e-9, abs=1e-9)


def test_h_sign_flip():
    ec = eps_c(P31)
    assert H(ec * 1.001, P31) > 0 > H(ec / 1.001, P31)


@given(rho=rhos, eps=epss, t=st.floats(0.01, 0.99))
@settings(max_examples=60, deadline=None)
def test_envelope_convex(rho, eps, t):
    pm = ModelParams(d=3, rho=rho)
    km = k_max(pm)
    a, b = 0.1 * km, 0.9 * km
    mid = envelope_F(t * a + (1 - t) * b, eps, pm)
    assert mid <= t * envelope_F(a, eps, pm) + (1 - t) * envelope_F(b, eps, pm) + 1e-9


def test_r_examples():
    assert r(2, 3) == Fraction(1, 5)
    assert r(2, 4) is None
    m = fit_r_constant(7)
    assert float(r(7, 7)) <= m * 2.0 ** -7 + 1e-15


@given(beta=st.floats(-5, 5).filter(lambda b: abs(b) > 1e-6), n=st.integers(1, 60), k0=st.integers(0, 30))
@settings(max_examples=100, deadline=None)
def test_geometric_sum_bound(beta, n, k0):
    N = k0 + n
    assert geom_sum(beta, N, k0) <= geom_sum_bound(beta, N, k0) * (1 + 1e-12)


def test_combinatorial_weight():
    w0 = combinatorial_weight(0)
    assert (w0.pairings, w0.hepp_bound, w0.forest_bound, w0.tree_sum, w0.wedderburn_etherington) == (1, None, 1, 1, 1)
    w1 = combinatorial_weight(1)
    assert (w1.pairings, w1.tree_sum, w1.wedderburn_etherington) == (3, 5, 2)


def test_bound_single_tree():
    pm = ModelParams(d=3, rho=1.6)
    eps = 1e-3
    b = bound_C0(eps, pm)
    assert b.regime is Regime.POWER_LAW
    assert b.value == pytest.approx(eps ** -(3 - 1.6))
    assert bound_C1(eps, pm).regime is Regime.ABSENT


def test_bound_regimes_around_eps_c():
    ec = eps_c(P31)
    assert bound_C0(ec * 1.01, P31).regime is Regime.LOGARITHMIC
    prev = math.inf
    for f in (1e-3, 1e-5, 1e-7, 1e-9):
        b = bound_C0(ec * f, P31)
        assert b.regime is Regime.POWER_LAW
        assert b.value * (ec * f) ** (3 - 1.1) == pytest.approx(1 + b.relative_error, rel=1e-12)
        assert b.relative_error < prev
        prev = b.relative_error


def test_envelope_terms_cross_near_eps_c():
    grid = [eps_c(P31) * 10 ** (j / 20) for j in range(-20, 21)]
    flips = []
    for lo, hi in zip(grid, grid[1:]):
        if dominant_regime(lo, P31) != dominant_regime(hi, P31):
            flips.append((lo, hi))
    assert len(flips) == 1
    lo, hi = flips[0]
    assert lo <= eps_c(P31) <= hi
    terms = dict(envelope_terms(hi, P31))
    assert 6 in terms and 0 in terms


def test_threshold_order_observed():
    # the almost-full threshold lies above the full one throughout this grid
    for rho in (1.05, 1.1, 1.2, 1.3):
        pm = ModelParams(d=3, rho=rho)
        assert eps_bar_c(pm) > eps_c(pm)


@given(k=st.integers(0, 8), alpha=st.floats(-3, 3), beta=st.floats(-3, 3), lam=st.sampled_from([0.5, 2.0]))
@settings(max_examples=80, deadline=None)
def test_scaling_identity(k, alpha, beta, lam):
    pm = ModelParams(d=3, rho=1.2)
    for family in TreeFamily:
        assert scaling_self_test(k, alpha, beta, lam, pm, family) < 1e-12


def test_prefactor_degenerate_and_ratio():
    for k in range(8):
        for family in TreeFamily:
            assert parameter_prefactor(k, 1, 1, 1, family) == 1
    gm, g, s = 1.3, 0.7, 1.9
    for k in range(5):
        ratio = parameter_prefactor(k + 1, gm, g, s) / parameter_prefactor(k, gm, g, s)
        assert ratio == pytest.approx(delta_ratio(gm, g, s))


def test_profile_and_regime_map():
    prof = counterterm_profile(1e-4, P31)
    data = json.loads(prof.to_json())
    assert data["regime"] in {r.value for r in Regime}
    assert [t["weight"] for t in data["terms"][:4]] == [1, 5, 42, 429]
    text = regime_map(3, [1.1, 1.2], [1e-2, 1e-6], BoundConfig())
    rows = list(csv.reader(io.StringIO(text)))
    assert len(rows) == 5
    assert regime_map(3, [1.1, 1.2], [1e-2, 1e-6], BoundConfig()) == text


def test_eps_range_error():
    with pytest.raises(ParameterRangeError):
        bound_C0(2.0, P31)

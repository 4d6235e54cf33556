"""One test per acceptance criterion, at the stated tolerances.

Criteria whose literal statement does not hold for the implemented objects keep
the literal test (which fails) next to a companion test pinning what is observed.
"""

from __future__ import annotations

import math
import random
import time
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from common import (
    COMB6,
    COMB6_BOTH,
    COMB6_FACTOR,
    COMB6_HALF,
    HEPP_DEGENERATE,
    HEPP_TABLE,
    REGULAR4,
    REPRESENTATIVE_PARAMS,
    TABLE_ORDER,
    TABLE_ROWS,
    distinct_diagrams,
    gamma2_pieces,
    near_critical,
    paired_diagrams,
    trees_up_to,
)
from fracphi3.antipode import twisted_antipode
from fracphi3.asymptotics import (
    H,
    TreeFamily,
    envelope_F,
    eps_c,
    fit_r_constant,
    k_max,
    parameter_prefactor,
    r,
    scaling_self_test,
)
from fracphi3.diagrams import (
    check_forest_property,
    diagram_degree_form,
    diagram_of,
    divergent_subdiagrams,
    edge_subset_degree,
    is_one_connected,
    pairings,
)
from fracphi3.forests import antipode_diagrams, cross_check_tree_vs_diagram, zimmermann
from fracphi3.hepp import (
    SectorContext,
    Units,
    bound_recursion,
    check_eta_lemma,
    eta_geq,
    parse_hepp,
    sweep_eta_lemma,
    zeta,
)
from fracphi3.kerneleval import (
    a0_fourier,
    a0_value,
    default_mollifier,
    geometric_grid,
    green_scaling,
    riesz_constant,
)
from fracphi3.trees import (
    ModelParams,
    degree_form,
    enumerate_full,
    in_kernel_of_E,
    parse_tree,
    wedderburn_etherington,
)

HALF = Fraction(-1, 2)
FOREST_GRID = ((3, 1.05), (3, 1.01), (3, 1.2), (4, 1.4), (5, 1.7), (5, 2), (2, 0.7))
ZETA_GRID = ((3, 1.05), (3, 1.2), (4, 1.6), (5, 1.7), (5, 2), (2, 0.8))
ETA_GRID = ((3, 1.05), (5, 2))


def double_factorial(n: int) -> int:
    return 1 if n <= 0 else n * double_factorial(n - 2)


# 1
def test_c01_antipode_golden():
    start = time.perf_counter()
    tau = parse_tree(COMB6)
    terms = twisted_antipode(tau, ModelParams(d=3, rho=1.05))
    elapsed = time.perf_counter() - start
    f, half, both = (parse_tree(x) for x in (COMB6_FACTOR, COMB6_HALF, COMB6_BOTH))
    got = {(tuple(x.key for x in t.factors), t.contracted.key): t.coefficient for t in terms}
    assert got == {((), tau.key): -1, ((f.key,), half.key): 4, ((f.key, f.key), both.key): -4}
    assert elapsed < 1.0


# 2
def test_c02_degree_identity():
    start = time.perf_counter()
    checked = 0
    thirds = near_critical()
    for pd in paired_diagrams(3):
        form = degree_form(pd.tree).without_kappa()
        assert diagram_degree_form(pd.reduced) == form
        # exact in d/3 units at the near-critical point as well
        assert diagram_degree_form(pd.reduced).at(thirds) * 3 / thirds.d == form.at(thirds) * 3 / thirds.d
        checked += 1
    assert checked == sum(double_factorial(t.p - 1) for t in trees_up_to(3) if not in_kernel_of_E(t))
    assert time.perf_counter() - start < 120


# 3
def test_c03_reduction_counts_literal():
    bad = [(pd.tree.key, pd.pairing, len(pd.reduced.vertices), pd.prefactor) for pd in paired_diagrams(3)
           if len(pd.reduced.vertices) != pd.tree.q - pd.tree.p
           or pd.prefactor != HALF ** (1 + pd.tree.p // 2)]
    assert not bad, f"{len(bad)} of {len(paired_diagrams(3))} pairings differ, e.g. {bad[:2]}"


def test_c03_reduction_counts_observed():
    stats = Counter()
    for pd in paired_diagrams(3):
        p, q = pd.tree.p, pd.tree.q
        if p == 2 and pd.full:
            assert len(pd.reduced.vertices) == 1
        else:
            assert len(pd.reduced.vertices) == q - p
        assert pd.prefactor in (HALF ** (1 + p // 2), HALF ** (p // 2))
        stats[pd.prefactor == HALF ** (1 + p // 2)] += 1
    assert stats[True] > 0 and stats[False] > 0
    reg = parse_tree(REGULAR4)
    total = sum(c for g, c in (diagram_of(reg, P) for P in pairings(reg)) if not is_one_connected(g))
    assert total == Fraction(-1, 4)


# 4
def test_c04_forest_property():
    for d, rho in FOREST_GRID:
        pm = ModelParams(d=d, rho=rho)
        floor = Fraction(-d, 3)
        for g, _ in distinct_diagrams(3):
            assert check_forest_property(g, pm)
            for s in divergent_subdiagrams(g, pm):
                assert edge_subset_degree(g, s.edges).at(pm) > floor


# 5
def test_c05_dual_routes():
    start = time.perf_counter()
    trees = [t for t in trees_up_to(2) if not in_kernel_of_E(t)]
    for d, rho in REPRESENTATIVE_PARAMS:
        pm = ModelParams(d=d, rho=rho)
        for t in trees:
            if degree_form(t).at(pm) > 0:
                continue
            assert cross_check_tree_vs_diagram(t, pm)
            for P in pairings(t):
                g, _ = diagram_of(t, P)
                if len(g.vertices) > 1 and is_one_connected(g):
                    continue
                assert zimmermann(g, pm) == antipode_diagrams(g, pm)
    assert time.perf_counter() - start < 300


# 6
def test_c06_table_reproduction():
    g, g1, g2 = gamma2_pieces()
    ctx = SectorContext(g, frozenset([g1, g2]), parse_hepp(HEPP_TABLE), near_critical(), Units.THIRDS_OF_D)
    profile = bound_recursion(ctx)
    by_name = {row.name: row for row in profile.rows.values()}
    entries = 0
    for name in TABLE_ORDER:
        row = by_name[name]
        got = (row.eta_circ, row.eta_eps, row.eta, row.eta_geq, row.lam, row.alpha, row.beta, row.gamma,
               row.alpha_bar, row.beta_bar)
        assert got == TABLE_ROWS[name]
        entries += len(got)
    assert entries == 50
    assert by_name["a"].alpha == 2 and profile.eps_exponent == -2


# 7
@pytest.mark.slow
def test_c07_eta_lemma_suite():
    diagrams = [g for g, _ in distinct_diagrams(3, 6)]
    for d, rho in ETA_GRID:
        sweep = sweep_eta_lemma(diagrams, ModelParams(d=d, rho=rho))
        assert sweep.contexts > 0
        assert sweep.ok, (d, rho, sweep.failures, sweep.examples)
    g, _, g2 = gamma2_pieces()
    h = parse_hepp(HEPP_DEGENERATE)
    ctx = SectorContext(g, frozenset([g2]), h, ModelParams(d=5, rho=2))
    values = {h.name(u): eta_geq(ctx, u) for u in h.inner}
    assert values["a"] == values["b"] == 0 and min(values[n] for n in "cde") > 0
    assert check_eta_lemma(ctx, hatted=True).ok


# 8
def test_c08_zeta_bounds():
    for d, rho in ZETA_GRID:
        pm = ModelParams(d=d, rho=rho)
        for g, full in distinct_diagrams(3):
            if diagram_degree_form(g).at(pm) > 0:
                continue
            z = zeta(g, pm)
            assert z <= (1 if full else 0), (d, rho, str(g), z)
    assert zeta(gamma2_pieces()[0], ModelParams(d=5, rho=2)) == 1


# 9
LISTED_COUNTS = (1, 2, 6, 23, 98, 451, 2386)


def test_c09_enumeration_counts_literal():
    assert tuple(len(enumerate_full(k)) for k in range(7)) == LISTED_COUNTS


def test_c09_enumeration_counts_oracle():
    counts = tuple(len(enumerate_full(k)) for k in range(7))
    assert counts == tuple(wedderburn_etherington(2 * k + 2) for k in range(7))
    assert counts == (1, 2, 6, 23, 98, 451, 2179)
    for t in trees_up_to(3):
        assert len(pairings(t)) == double_factorial(t.p - 1)


# 10
def test_c10_envelope_identities():
    for d, rho in ((3, 1.05), (3, 1.1), (3, 1.3), (5, 1.8)):
        pm = ModelParams(d=d, rho=rho)
        km = k_max(pm)
        ec = eps_c(pm)
        for eps in (1e-1, 1e-3, 1e-6):
            assert math.exp(3 * envelope_F(0, eps, pm)) == pytest.approx(eps ** -(d - rho), rel=1e-10)
            assert math.exp(3 * envelope_F(km, eps, pm)) == pytest.approx(ec ** -(d - rho), rel=1e-10)
        assert H(ec * (1 + 1e-9), pm) > 0 > H(ec * (1 - 1e-9), pm)
        ks = np.linspace(0, km, 100)
        for eps in (1e-2, ec, ec * 1e-3):
            vals = np.array([envelope_F(k, eps, pm) for k in ks])
            assert np.all(np.diff(vals, 2) >= -1e-9)
    fits = {km: fit_r_constant(km) for km in range(3, 32, 2)}
    m = max(fits.values())
    assert m < 1 / math.sqrt(2)
    assert max(fits.values()) - min(fits.values()) < 0.05
    assert all(b >= a for a, b in zip(list(fits.values()), list(fits.values())[1:]))
    for km in fits:
        for k in range((km + 1) // 2, km + 1):
            assert float(r(k, km)) <= m * 2.0 ** -(2 * k - km) * (1 + 1e-12)


# 11
def test_c11_parameter_extension():
    rng = random.Random(0)
    pm = ModelParams(d=3, rho=1.2)
    for _ in range(200):
        alpha, beta = rng.uniform(-3, 3), rng.uniform(-3, 3)
        lam = rng.choice([0.5, 2.0, rng.uniform(0.3, 3)])
        k = rng.randrange(0, 8)
        for family in TreeFamily:
            assert scaling_self_test(k, alpha, beta, lam, pm, family) < 1e-12
    for k in range(10):
        for family in TreeFamily:
            assert parameter_prefactor(k, 1.0, 1.0, 1.0, family) == 1.0


# 12
def test_c12_numerics():
    start = time.perf_counter()
    assert riesz_constant(3, 2) == pytest.approx(1 / (4 * math.pi), abs=1e-10)
    m3 = default_mollifier(3)
    assert a0_value(m3, 1.2) == pytest.approx(a0_value(m3, 1.2, method="gauss_legendre"), abs=1e-6)
    assert a0_fourier(m3, 1.2) == pytest.approx(a0_value(m3, 1.2), abs=1e-6)
    for d, rho in ((2, 0.8), (3, 1.2)):
        _, fit = green_scaling(geometric_grid(1e-1, 1e-4, 8), rho, default_mollifier(d))
        assert abs(fit.exponent + (d - rho)) <= 0.02 * (d - rho)
    assert time.perf_counter() - start < 120

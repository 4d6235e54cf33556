from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from common import CHERRY, COMB6, GAMMA1, GAMMA2, GAMMA2_RHO, gamma2_pieces, trees_up_to
from fracphi3.diagrams import diagram_degree_form, divergent_subdiagrams, parse_diagram, subdiagram
from fracphi3.forests import (
    PruneLog,
    all_forests,
    antipode_diagrams,
    cross_check_tree_vs_diagram,
    degree_additive,
    extract_contract,
    forest_term,
    taylor_order,
    tree_side_combination,
    zimmermann,
)
from fracphi3.trees import ModelParams, degree_form, parse_tree

BUBBLE = "root=1; 2>1:K 1-2:GKeps"
PM = ModelParams(d=3, rho=GAMMA2_RHO)


def test_forest_counts():
    assert len(all_forests(parse_diagram(GAMMA1), PM)) == 8
    assert len(all_forests(parse_diagram(GAMMA2), PM)) == 4
    assert all_forests(parse_diagram(BUBBLE), PM) == [frozenset()]


def test_taylor_order():
    assert taylor_order(Fraction(-1, 2)) == 1
    assert taylor_order(Fraction(-6, 5)) == 2
    assert taylor_order(Fraction(0)) == 1


def test_extract_contract_inner_bubble():
    g, inner, _ = gamma2_pieces()
    combo = extract_contract(g, inner, PM)
    assert len(combo) == 1
    ((pieces, residual, c),) = list(combo.items())
    assert c == 1 and len(pieces) == 1
    assert len(residual.vertices) == len(g.vertices) - 1
    assert diagram_degree_form(pieces[0]) + diagram_degree_form(residual) == diagram_degree_form(g)


def test_extract_whole_diagram_leaves_point():
    g = parse_diagram(BUBBLE)
    combo = extract_contract(g, subdiagram(g, [0, 1]), PM)
    ((_, residual, _),) = list(combo.items())
    assert len(residual.vertices) == 1 and residual.edges == ()


def test_taylor_companions_pruned_in_d4():
    g = parse_diagram(GAMMA1)
    pm = ModelParams(d=4, rho=1.4)
    log = PruneLog()
    for gamma in divergent_subdiagrams(g, pm):
        combo = extract_contract(g, gamma, pm, log)
        assert len(combo) == 1
    assert log.generated > 0 and log.pruned == log.generated


def test_zimmermann_gamma2():
    g = parse_diagram(GAMMA2)
    combo = zimmermann(g, PM)
    assert sorted(c for *_, c in combo.items()) == [-1, -1, 1, 1]
    assert combo == antipode_diagrams(g, PM)


def test_zimmermann_bubble():
    g = parse_diagram(BUBBLE)
    ((pieces, residual, c),) = list(zimmermann(g, PM).items())
    assert (pieces, c) == ((), -1)


def test_forest_terms_are_degree_additive():
    g = parse_diagram(GAMMA1)
    for forest in all_forests(g, PM):
        pieces, residual = forest_term(g, forest)
        assert degree_additive(g, pieces, residual)


@pytest.mark.parametrize("text", [CHERRY, COMB6])
def test_cross_check_examples(text):
    assert cross_check_tree_vs_diagram(parse_tree(text), ModelParams(d=3, rho=1.05))


def test_comb6_three_term_structure():
    combo = tree_side_combination(parse_tree(COMB6), ModelParams(d=3, rho=1.05))
    signs = {}
    for pieces, residual, c in combo.items():
        assert all(len(p.vertices) == 2 and len(p.edges) == 2 for p in pieces)
        signs.setdefault(len(pieces), set()).add(c > 0)
        if len(pieces) == 2:
            assert len(residual.vertices) == 2
    assert signs == {0: {False}, 1: {True}, 2: {False}}


@given(idx=st.integers(0, 10**4), num=st.integers(1, 60))
@settings(max_examples=25, deadline=None)
def test_dual_routes_agree(idx, num):
    trees = [t for t in trees_up_to(2)]
    tau = trees[idx % len(trees)]
    pm = ModelParams(d=3, rho=1 + Fraction(num, 100))
    if degree_form(tau).at(pm) > 0:
        return
    assert cross_check_tree_vs_diagram(tau, pm)

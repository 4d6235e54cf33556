from __future__ import annotations

import json
import random
from fractions import Fraction
from itertools import permutations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from common import CHERRY, COMB6, GAMMA1, GAMMA2, GAMMA2_INNER, GAMMA2_OUTER, GAMMA2_RHO, REGULAR4, paired_diagrams
from fracphi3.diagrams import (
    Connectivity,
    EdgeKind,
    build_diagram,
    canonical_key,
    check_forest_property,
    connectivity,
    diagram_degree,
    diagram_degree_form,
    diagram_of,
    divergent_subdiagrams,
    is_one_connected,
    pairings,
    parse_diagram,
    reduce,
    relabel,
)
from fracphi3.trees import ModelParams, degree_form, enumerate_almost_full, enumerate_full, parse_tree

BUBBLE = "root=1; 2>1:K 1-2:GKeps"


def double_factorial(n: int) -> int:
    return 1 if n <= 0 else n * double_factorial(n - 2)


@pytest.mark.parametrize("k", range(4))
def test_pairing_counts(k):
    for t in enumerate_full(k)[:4] + enumerate_almost_full(k)[:4]:
        assert len(pairings(t)) == double_factorial(t.p - 1)


def test_cherry_diagram():
    t = parse_tree(CHERRY)
    (P,) = pairings(t)
    built = build_diagram(t, P)
    assert len(built.vertices) == 2
    assert [e.kind for e in built.edges] == [EdgeKind.KEPS, EdgeKind.KEPS]
    reduced, pref = reduce(built)
    assert len(reduced.vertices) == 1
    assert [e.kind for e in reduced.edges] == [EdgeKind.GKEPS]


def test_regular4_pairings():
    t = parse_tree(REGULAR4)
    results = [diagram_of(t, P) for P in pairings(t)]
    vanishing = [g for g, _ in results if is_one_connected(g)]
    surviving = [(g, c) for g, c in results if not is_one_connected(g)]
    assert len(vanishing) == 1 and len(surviving) == 2
    for g, c in surviving:
        assert len(g.vertices) == 2 and c == Fraction(-1, 8)
        assert sorted(e.kind.value for e in g.edges) == ["GK", "GKeps", "GKeps"]
    assert sum(c for _, c in surviving) == Fraction(-1, 4)


def test_comb6_reduction_prefactor():
    t = parse_tree(COMB6)
    prefs = {diagram_of(t, P)[1] for P in pairings(t)}
    assert prefs == {Fraction(1, 16)}


def test_p6_unreduced_vertex_count():
    for t in enumerate_full(2) + enumerate_almost_full(2):
        for P in pairings(t):
            assert len(build_diagram(t, P).vertices) == t.q + 1 - t.p // 2


def test_bubble_degree():
    pm = ModelParams(d=3, rho=1.2)
    assert diagram_degree(parse_diagram(BUBBLE), pm) == pytest.approx(2 * 1.2 - 3)
    assert diagram_degree(parse_diagram("root=1; order=1;"), pm) == 0


def test_connectivity():
    assert connectivity(parse_diagram(BUBBLE)) is Connectivity.TWO_CONNECTED_OR_MORE
    assert connectivity(parse_diagram(GAMMA1)) is Connectivity.TWO_CONNECTED_OR_MORE
    with pytest.raises(ValueError):
        connectivity(parse_diagram("root=1; order=1,2,3,4; 1>2:K 1-2:GKeps 3>4:K 3-4:GKeps"))


def test_divergent_subdiagrams_examples():
    g1 = parse_diagram(GAMMA1)
    subs = divergent_subdiagrams(g1, ModelParams(d=3, rho=1.15))
    assert sorted(sorted(s.edges) for s in subs) == [[0, 1], [3, 4], [6, 7]]
    g2 = parse_diagram(GAMMA2)
    subs = divergent_subdiagrams(g2, ModelParams(d=3, rho=GAMMA2_RHO))
    assert sorted(tuple(sorted(s.edges)) for s in subs) == [GAMMA2_INNER, GAMMA2_OUTER]
    assert divergent_subdiagrams(parse_diagram(BUBBLE), ModelParams(d=3, rho=1.2)) == []


def test_forest_property_examples():
    pm = ModelParams(d=3, rho=1.15)
    assert check_forest_property(parse_diagram(GAMMA1), pm)
    assert check_forest_property(parse_diagram(GAMMA2), pm)
    # two bubbles sharing an edge pair: overlapping, not produced by any pairing
    overlap = parse_diagram("root=1; order=1,2,3; 2>1:K 1-2:GKeps 3>2:K 2-3:GKeps 1-3:GKeps 1-2:GKeps")
    assert not check_forest_property(overlap, ModelParams(d=3, rho=1.05))


def test_reduction_conserves_degree_exhaustive_p6():
    for pd in paired_diagrams(2):
        form = degree_form(pd.tree).without_kappa()
        assert diagram_degree_form(pd.built) == form
        assert diagram_degree_form(pd.reduced) == form


def test_reduction_is_confluent_on_relabelings():
    t = parse_tree(COMB6)
    for P in pairings(t)[:5]:
        built = build_diagram(t, P)
        ref = canonical_key(reduce(built)[0])
        for perm in list(permutations(built.vertices))[:24]:
            mapping = dict(zip(built.vertices, perm))
            assert canonical_key(reduce(relabel(built, mapping))[0]) == ref


def test_text_round_trip_and_json():
    g = parse_diagram(GAMMA2)
    assert parse_diagram(str(g)) == g
    data = json.loads(json.dumps(g.to_json()))
    assert data["root"] == 1 and len(data["edges"]) == len(g.edges)
    assert g.to_dot().startswith("digraph")


@given(seed=st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_canonical_key_ignores_labels(seed):

    g = parse_diagram(GAMMA1)
    perm = list(g.vertices)
    random.Random(seed).shuffle(perm)
    h = relabel(g, dict(zip(g.vertices, perm)))
    assert canonical_key(h) == canonical_key(g)

"""Diagram corpora shared by the experiment scripts."""

from __future__ import annotations

from fracphi3.diagrams import FeynmanDiagram, canonical_key, diagram_of, is_one_connected, pairings, parse_diagram, subdiagram
from fracphi3.trees import DecoratedTree, TreeClass, classify, enumerate_almost_full, enumerate_full, in_kernel_of_E

# bubble nested inside a triangle
GAMMA2 = ("root=1; order=1,2,3,4,5,6; 4>5:K 4-5:GKeps 5>6:K 6>1:K 1>2:KGK 2>3:K 3>4:K "
          "1-2:GKeps 6-3:GKeps")
GAMMA2_INNER = (0, 1)
GAMMA2_OUTER = (0, 1, 2, 6, 8)


def gamma2_pieces():
    g = parse_diagram(GAMMA2)
    return g, subdiagram(g, GAMMA2_INNER), subdiagram(g, GAMMA2_OUTER)


def trees_up_to(k_max: int) -> list[DecoratedTree]:
    out = []
    for k in range(k_max + 1):
        out.extend(enumerate_full(k))
        out.extend(enumerate_almost_full(k))
    return out


def paired(k_max: int):
    """Yield (tree, pairing, reduced diagram, prefactor) outside the kernel of the expectation."""
    for t in trees_up_to(k_max):
        if in_kernel_of_E(t):
            continue
        for P in pairings(t):
            g, pref = diagram_of(t, P)
            yield t, P, g, pref


def distinct_diagrams(k_max: int, max_vertices: int | None = None) -> list[tuple[FeynmanDiagram, bool]]:
    """Distinct 2-connected reduced diagrams with the full-family flag of their origin."""
    seen: dict[tuple, tuple[FeynmanDiagram, bool]] = {}
    for t, _, g, _ in paired(k_max):
        if len(g.vertices) < 2 or is_one_connected(g):
            continue
        if max_vertices is not None and len(g.vertices) > max_vertices:
            continue
        full = classify(t) is TreeClass.FULL
        seen.setdefault((canonical_key(g, anchored=False), full), (g, full))
    return list(seen.values())

"""Shared fixtures and exhaustive corpora for the test suite."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from fracphi3.diagrams import (
    FeynmanDiagram,
    build_diagram,
    canonical_key,
    diagram_of,
    is_one_connected,
    pairings,
    parse_diagram,
    subdiagram,
)
from fracphi3.trees import (
    DecoratedTree,
    ModelParams,
    TreeClass,
    classify,
    enumerate_almost_full,
    enumerate_full,
    in_kernel_of_E,
    parse_tree,
)

# three identical bubbles hanging off a cycle
GAMMA1 = ("root=3; order=1,2,3,4,5,6; 6>1:K 6-1:GKeps 1>2:K 2>3:K 2-3:GKeps 3>4:KGK "
          "4>5:K 4-5:GKeps 5>6:K")
# bubble nested inside a triangle
GAMMA2 = ("root=1; order=1,2,3,4,5,6; 4>5:K 4-5:GKeps 5>6:K 6>1:K 1>2:KGK 2>3:K 3>4:K "
          "1-2:GKeps 6-3:GKeps")
GAMMA2_INNER = (0, 1)
GAMMA2_OUTER = (0, 1, 2, 6, 8)
GAMMA2_RHO = 1.15

HEPP_TABLE = "((((1 2)#d 3)#c (4 6)#e)#b 5)#a"
HEPP_UNSAFE = "((((4 5)#d (1 2)#e)#c 6)#b 3)#a"
HEPP_DEGENERATE = "(((1 2)#c 3)#b ((4 6)#e 5)#d)#a"
# the d/3-unit limit rho -> d/3 is reached by an exact rational just above it
NEAR_CRITICAL_RHO = "1.0000001"
TABLE_ORDER = ("e", "d", "c", "b", "a")
TABLE_COLUMNS = ("eta_circ", "eta_eps", "eta", "eta_geq", "lambda", "alpha", "beta", "gamma",
                 "alpha_bar", "beta_bar")
TABLE_ROWS = {
    "e": (1, 0, 1, 1, 1, 0, 1, 0, 0, 1),
    "d": (4, -3, 1, 1, 1, 0, 1, 0, 3, 4),
    "c": (-2, 0, -2, -1, -1, 1, 0, 0, 3, 2),
    "b": (1, -2, -1, -1, 0, 1, 0, 1, 5, 4),
    "a": (1, -2, -1, -2, -1, 2, 0, 0, 7, 5),
}

COMB6 = "(* (I (* (I (* (I Xi) (I Xi))) (I Xi))) (I (* (I (* (I Xi) (I Xi))) (I Xi))))"
COMB6_FACTOR = "(* (I (I Xi)) (I Xi))"
COMB6_HALF = "(* (I (* (I (* (I Xi) (I Xi))) (I Xi))) (I (I Xi)))"
COMB6_BOTH = "(* (I (I Xi)) (I (I Xi)))"
REGULAR4 = "(* (I (* (I Xi) (I Xi))) (I (* (I Xi) (I Xi))))"
CHERRY = "(* (I Xi) (I Xi))"

REPRESENTATIVE_PARAMS = ((3, 1.05), (3, 1.2), (5, 1.7), (5, 1.95))


def gamma2_pieces() -> tuple[FeynmanDiagram, object, object]:
    g = parse_diagram(GAMMA2)
    return g, subdiagram(g, GAMMA2_INNER), subdiagram(g, GAMMA2_OUTER)


def near_critical(d: int = 3) -> ModelParams:
    return ModelParams(d=d, rho=Fraction(NEAR_CRITICAL_RHO) * d / 3)


@dataclass(frozen=True)
class PairedDiagram:
    tree: DecoratedTree
    pairing: tuple
    built: FeynmanDiagram
    reduced: FeynmanDiagram
    prefactor: Fraction

    @property
    def full(self) -> bool:
        return classify(self.tree) is TreeClass.FULL


def trees_up_to(k_max: int) -> list[DecoratedTree]:
    out = []
    for k in range(k_max + 1):
        out.extend(enumerate_full(k))
        out.extend(enumerate_almost_full(k))
    return out


@lru_cache(maxsize=None)
def paired_diagrams(k_max: int = 3) -> tuple[PairedDiagram, ...]:
    """Every (tree, pairing) with at most 2k_max+2 leaves outside the kernel of the expectation."""
    out = []
    for t in trees_up_to(k_max):
        if in_kernel_of_E(t):
            continue
        for P in pairings(t):
            built = build_diagram(t, P)
            reduced, pref = diagram_of(t, P)
            out.append(PairedDiagram(t, P, built, reduced, pref))
    return tuple(out)


@lru_cache(maxsize=None)
def distinct_diagrams(k_max: int = 3, max_vertices: int | None = None) -> tuple[tuple[FeynmanDiagram, bool], ...]:
    """Distinct 2-connected reduced diagrams, each flagged by the tree family it came from."""
    seen: dict[tuple, tuple[FeynmanDiagram, bool]] = {}
    for pd in paired_diagrams(k_max):
        g = pd.reduced
        if len(g.vertices) < 2 or is_one_connected(g):
            continue
        if max_vertices is not None and len(g.vertices) > max_vertices:
            continue
        seen.setdefault((canonical_key(g, anchored=False), pd.full), (g, pd.full))
    return tuple(seen.values())


def comb6() -> DecoratedTree:
    return parse_tree(COMB6)

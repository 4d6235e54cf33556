"""Forests of subdivergences, extraction-contraction and the diagram antipode.

Two independent routes compute the twisted antipode of a diagram: Zimmermann's
sum over forests of the master diagram, and the direct recursion over families
of vertex-disjoint subdivergences of each extracted piece.  Both are compared
against the tree-level antipode pushed through the pairing map.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import floor
from typing import Iterable, Iterator

from .antipode import twisted_antipode
from .diagrams import (
    DEdge,
    FeynmanDiagram,
    Subdiagram,
    add_node_decoration,
    canonical_key,
    diagram_degree_form,
    divergent_subdiagrams,
    edge_subset_degree,
    is_one_connected,
    nested_or_disjoint,
    pairings,
    reduce,
    build_diagram,
)
from .trees import DecoratedTree, ModelParams, Multi, multi_add, scaled_size

log = logging.getLogger(__name__)

Forest = frozenset[Subdiagram]


@dataclass(frozen=True)
class ForestInterval:
    """All forests F with lower <= F <= upper."""

    lower: Forest
    upper: Forest

    def __post_init__(self) -> None:
        if not self.lower <= self.upper:
            raise ValueError("lower forest must be contained in the upper one")

    @property
    def delta(self) -> Forest:
        return self.upper - self.lower

    def members(self) -> list[Forest]:
        extra = sorted(self.delta, key=Subdiagram.sort_key)
        out = []
        for mask in range(1 << len(extra)):
            out.append(self.lower | frozenset(g for i, g in enumerate(extra) if mask >> i & 1))
        return out


TermKey = tuple[tuple[tuple, ...], tuple]


@dataclass
class DiagramCombination:
    """Rational combination of (multiset of extracted diagrams, residual) terms."""

    terms: dict[TermKey, Fraction] = field(default_factory=dict)
    examples: dict[TermKey, tuple[tuple[FeynmanDiagram, ...], FeynmanDiagram]] = field(default_factory=dict)

    def add(self, pieces: Iterable[FeynmanDiagram], residual: FeynmanDiagram, coeff: Fraction | int) -> None:
        pieces = tuple(pieces)
        keyed = sorted(((canonical_key(p, anchored=False), p) for p in pieces), key=lambda kp: kp[0])
        key = (tuple(k for k, _ in keyed), canonical_key(residual, anchored=False))
        self.terms[key] = self.terms.get(key, Fraction(0)) + Fraction(coeff)
        self.examples.setdefault(key, (tuple(p for _, p in keyed), residual))
        if self.terms[key] == 0:
            del self.terms[key]

    def merge(self, other: DiagramCombination, scale: Fraction | int = 1) -> None:
        for key, c in other.terms.items():
            pieces, residual = other.examples[key]
            self.add(pieces, residual, c * scale)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, DiagramCombination) and self.terms == other.terms

    def __len__(self) -> int:
        return len(self.terms)

    def items(self) -> Iterator[tuple[tuple[FeynmanDiagram, ...], FeynmanDiagram, Fraction]]:
        for key in sorted(self.terms):
            pieces, residual = self.examples[key]
            yield pieces, residual, self.terms[key]

    def to_json(self) -> list[dict]:
        return [{"extracted": [p.to_json() for p in pieces], "residual": residual.to_json(),
                 "coeff": str(c)} for pieces, residual, c in self.items()]


# ---------------------------------------------------------------- forests


def all_forests(diagram: FeynmanDiagram, params: ModelParams, include_marginal: bool = False) -> list[Forest]:
    """Every subset of the proper subdivergences that is pairwise nested or vertex-disjoint."""
    subs = divergent_subdiagrams(diagram, params, include_marginal)
    out: list[Forest] = []

    def rec(i: int, chosen: list[Subdiagram]) -> None:
        if i == len(subs):
            out.append(frozenset(chosen))
            return
        rec(i + 1, chosen)
        if all(nested_or_disjoint(subs[i], g) for g in chosen):
            chosen.append(subs[i])
            rec(i + 1, chosen)
            chosen.pop()

    rec(0, [])
    return sorted(out, key=lambda f: (len(f), sorted(g.sort_key() for g in f)))


def children_in(forest: Iterable[Subdiagram], gamma: Subdiagram | None) -> list[Subdiagram]:
    """Maximal members strictly inside ``gamma`` (the roots when ``gamma`` is None)."""
    inside = [g for g in forest if gamma is None or g < gamma]
    return [g for g in inside if not any(g < h for h in inside)]


def first_vertex(diagram: FeynmanDiagram, vertices: Iterable[int]) -> int:
    vs = set(vertices)
    return next(v for v in diagram.vertices if v in vs)


def restrict(diagram: FeynmanDiagram, sub: Subdiagram) -> FeynmanDiagram:
    """The subdiagram as a diagram of its own, anchored at its first vertex."""
    verts = tuple(v for v in diagram.vertices if v in sub.vertices)
    root = diagram.root if diagram.root in sub.vertices else verts[0]
    edges = tuple(diagram.edges[i] for i in sorted(sub.edges))
    deco = tuple((v, m) for v, m in diagram.node_decoration if v in sub.vertices)
    return FeynmanDiagram(verts, root, edges, deco)


def contract_subdiagrams(diagram: FeynmanDiagram, subs: Iterable[Subdiagram]) -> FeynmanDiagram:
    """Remove the edges of each (vertex-disjoint) subdiagram and merge its vertices."""
    subs = list(subs)
    target: dict[int, int] = {}
    dropped: set[int] = set()
    for g in subs:
        rep = diagram.root if diagram.root in g.vertices else first_vertex(diagram, g.vertices)
        for v in g.vertices:
            if v in target:
                raise ValueError("contracted subdiagrams must be vertex-disjoint")
            target[v] = rep
        dropped |= g.edges
    verts = tuple(v for v in diagram.vertices if target.get(v, v) == v)
    edges = tuple(DEdge(target.get(e.tail, e.tail), target.get(e.head, e.head), e.kind, e.depth, e.derivative)
                  for i, e in enumerate(diagram.edges) if i not in dropped)
    deco: dict[int, Multi] = {}
    for v, m in diagram.node_decoration:
        w = target.get(v, v)
        deco[w] = multi_add(deco.get(w, ()), m)
    return FeynmanDiagram(verts, diagram.root, edges, tuple(sorted(deco.items())))


def _lift(outer: Subdiagram, inner: Subdiagram) -> Subdiagram:
    """Re-express ``inner`` (a subdiagram of the master) inside ``restrict(master, outer)``."""
    pos = {i: k for k, i in enumerate(sorted(outer.edges))}
    return Subdiagram(frozenset(pos[i] for i in inner.edges), inner.vertices)


def forest_term(diagram: FeynmanDiagram, forest: Forest) -> tuple[list[FeynmanDiagram], FeynmanDiagram]:
    """The pieces gamma/children(gamma) for every member and the residual Gamma/roots."""
    pieces = []
    for g in forest:
        piece = restrict(diagram, g)
        kids = [_lift(g, c) for c in children_in(forest, g)]
        pieces.append(contract_subdiagrams(piece, kids))
    residual = contract_subdiagrams(diagram, children_in(forest, None))
    return pieces, residual


# ---------------------------------------------------------------- Taylor companions


def taylor_order(degree: Fraction) -> int:
    """N = 1 + floor(-deg)."""
    return 1 + floor(-degree)


@dataclass(frozen=True)
class Companion:
    """A decorated extraction term generated by the Taylor expansion of a subdivergence."""

    piece: FeynmanDiagram
    residual: FeynmanDiagram
    coefficient: Fraction
    pruned: bool
    reason: str


def taylor_companions(diagram: FeynmanDiagram, gamma: Subdiagram, params: ModelParams) -> list[Companion]:
    """First-order companions of extracting ``gamma``.

    One unit derivative in spatial direction i on an edge with exactly one end in
    gamma is paired with the monomial X^{e_i} at that end inside the extracted
    piece; outgoing derivatives carry a sign.  A companion is pruned when the
    monomial sits at the anchor vertex or the piece is odd in a spatial
    coordinate.
    """
    deg = edge_subset_degree(diagram, gamma.edges).at(params)
    if taylor_order(deg) < 2:
        return []
    if deg + 2 < 0:
        raise ValueError("second-order Taylor terms are not supported")
    out = []
    piece = restrict(diagram, gamma)
    anchor = first_vertex(diagram, gamma.vertices)
    for idx, e in enumerate(diagram.edges):
        if idx in gamma.edges:
            continue
        inside = [v for v in (e.tail, e.head) if v in gamma.vertices]
        if len(inside) != 1:
            continue
        end = inside[0]
        outgoing = e.tail == end
        for i in range(1, params.d + 1):
            unit: Multi = ((i, 1),)
            if not deg + scaled_size(unit).at(params) < 0:
                continue
            decorated = add_node_decoration(piece, end, unit)
            edges = list(diagram.edges)
            edges[idx] = DEdge(e.tail, e.head, e.kind, e.depth, multi_add(e.derivative, unit))
            lifted = FeynmanDiagram(diagram.vertices, diagram.root, tuple(edges), diagram.node_decoration)
            residual = contract_subdiagrams(lifted, [gamma])
            coeff = Fraction(-1 if outgoing else 1)
            if end == anchor:
                pruned, reason = True, f"monomial at anchor vertex {end}"
            elif _odd_coordinate(decorated) is not None:
                pruned, reason = True, f"odd in x_{_odd_coordinate(decorated)}"
            else:
                pruned, reason = False, ""
            out.append(Companion(decorated, residual, coeff, pruned, reason))
            log.debug("companion of %s on edge %d direction %d: %s", sorted(gamma.edges), idx, i,
                      reason or "kept")
    return out


def _odd_coordinate(diagram: FeynmanDiagram) -> int | None:
    """A spatial coordinate in which the undecorated-kernel integrand is odd, if any."""
    total: Multi = ()
    for _, m in diagram.node_decoration:
        total = multi_add(total, m)
    for e in diagram.edges:
        total = multi_add(total, e.derivative)
    for i, v in total:
        if i >= 1 and v % 2:
            return i
    return None


@dataclass
class PruneLog:
    generated: int = 0
    pruned: int = 0
    reasons: list[str] = field(default_factory=list)

    def record(self, companions: list[Companion]) -> None:
        for c in companions:
            self.generated += 1
            if c.pruned:
                self.pruned += 1
                self.reasons.append(c.reason)


def extract_contract(diagram: FeynmanDiagram, gamma: Subdiagram, params: ModelParams,
                     prune_log: PruneLog | None = None) -> DiagramCombination:
    """(gamma, Gamma/gamma) with coefficient 1, plus surviving Taylor companions."""
    if not gamma.edges <= frozenset(range(len(diagram.edges))):
        raise ValueError("gamma is not a subdiagram of the diagram")
    combo = DiagramCombination()
    combo.add([restrict(diagram, gamma)], contract_subdiagrams(diagram, [gamma]), 1)
    companions = taylor_companions(diagram, gamma, params)
    if prune_log is not None:
        prune_log.record(companions)
    for c in companions:
        if not c.pruned:
            combo.add([c.piece], c.residual, c.coefficient)
    return combo


# ---------------------------------------------------------------- the two antipodes


def _surviving_companions(diagram: FeynmanDiagram, forest: Forest, params: ModelParams,
                          prune_log: PruneLog | None) -> None:
    for g in forest:
        companions = taylor_companions(diagram, g, params)
        if prune_log is not None:
            prune_log.record(companions)
        if any(not c.pruned for c in companions):
            raise NotImplementedError("a Taylor companion survived parity pruning")


def zimmermann(diagram: FeynmanDiagram, params: ModelParams,
               prune_log: PruneLog | None = None) -> DiagramCombination:
    """-sum over forests F of (-1)^|F| C_F Gamma."""
    subs = divergent_subdiagrams(diagram, params)
    if not all(nested_or_disjoint(a, b) for i, a in enumerate(subs) for b in subs[i + 1:]):
        raise ValueError("subdivergences overlap; the forest formula is not applicable")
    combo = DiagramCombination()
    for forest in all_forests(diagram, params):
        _surviving_companions(diagram, forest, params, prune_log)
        pieces, residual = forest_term(diagram, forest)
        combo.add(pieces, residual, -(-1) ** len(forest))
    return combo


def _disjoint_families(subs: list[Subdiagram]) -> Iterator[list[Subdiagram]]:
    def rec(start: int, chosen: list[Subdiagram]) -> Iterator[list[Subdiagram]]:
        for i in range(start, len(subs)):
            if all(subs[i].vertices.isdisjoint(g.vertices) for g in chosen):
                chosen.append(subs[i])
                yield list(chosen)
                yield from rec(i + 1, chosen)
                chosen.pop()

    yield from rec(0, [])


_ANTIPODE_CACHE: dict[tuple, DiagramCombination] = {}


def antipode_diagrams(diagram: FeynmanDiagram, params: ModelParams) -> DiagramCombination:
    """A(Gamma) = -Gamma - sum over disjoint families S of prod A(gamma) * Gamma/S."""
    key = (canonical_key(diagram, anchored=False), params)
    if key in _ANTIPODE_CACHE:
        return _ANTIPODE_CACHE[key]
    combo = DiagramCombination()
    combo.add([], diagram, -1)
    subs = divergent_subdiagrams(diagram, params)
    for family in _disjoint_families(subs):
        residual = contract_subdiagrams(diagram, family)
        expansions = [list(antipode_diagrams(restrict(diagram, g), params).items()) for g in family]
        for choice in product(*expansions):
            coeff = Fraction(-1)
            pieces: list[FeynmanDiagram] = []
            for sub_pieces, sub_residual, c in choice:
                coeff *= c
                pieces.extend(sub_pieces)
                pieces.append(sub_residual)
            combo.add(pieces, residual, coeff)
    _ANTIPODE_CACHE[key] = combo
    return combo


# ---------------------------------------------------------------- tree versus diagram


def tree_side_combination(tree: DecoratedTree, params: ModelParams) -> DiagramCombination:
    """Push every term of the tree antipode through all compatible pairings."""
    combo = DiagramCombination()
    for term in twisted_antipode(tree, params):
        factor_options = []
        for f in term.factors:
            opts = []
            for P in pairings(f):
                g, pref = reduce(build_diagram(f, P), root_rules=False)
                opts.append((g, pref))
            factor_options.append(opts)
        residual_options = []
        for P in pairings(term.contracted):
            g, pref = reduce(build_diagram(term.contracted, P))
            residual_options.append((g, pref))
        for choice in product(*factor_options, residual_options):
            diagrams = [g for g, _ in choice]
            if any(_one_connected_or_trivial(g) for g in diagrams):
                continue
            coeff = Fraction(term.coefficient)
            for _, pref in choice:
                coeff *= pref
            combo.add(diagrams[:-1], diagrams[-1], coeff)
    return combo


def diagram_side_combination(tree: DecoratedTree, params: ModelParams) -> DiagramCombination:
    """Sum over pairings of prefactor times the diagram antipode of the reduced diagram."""
    combo = DiagramCombination()
    for P in pairings(tree):
        g, pref = reduce(build_diagram(tree, P))
        if _one_connected_or_trivial(g):
            continue
        combo.merge(antipode_diagrams(g, params), pref)
    return combo


def _one_connected_or_trivial(g: FeynmanDiagram) -> bool:
    return len(g.vertices) > 1 and is_one_connected(g)


def cross_check_tree_vs_diagram(tree: DecoratedTree, params: ModelParams) -> bool:
    return tree_side_combination(tree, params) == diagram_side_combination(tree, params)


def degree_additive(diagram: FeynmanDiagram, pieces: Iterable[FeynmanDiagram], residual: FeynmanDiagram) -> bool:
    total = diagram_degree_form(residual)
    for p in pieces:
        total = total + diagram_degree_form(p)
    return total == diagram_degree_form(diagram)

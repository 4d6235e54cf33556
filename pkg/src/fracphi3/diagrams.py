"""Wick pairings, Feynman diagrams and their kernel reductions.

A diagram is an oriented multigraph whose edges are typed kernels.  Edges of
``Gamma(tau, P)`` point from child to parent, so ``tail`` is the child end.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import permutations, product
from math import lcm
from typing import Iterable, Iterator, Sequence

from .trees import DecoratedTree, LinearDegree, ModelParams, Multi, multi_add, scaled_size

Pairing = tuple[tuple[int, int], ...]

VERTEX_DEGREE = LinearDegree(rho=Fraction(1), d=Fraction(1))


class EdgeKind(enum.Enum):
    K = "K"
    KEPS = "Keps"
    GK = "GK"
    GKEPS = "GKeps"
    KGK = "KGK"

    @property
    def mollified(self) -> bool:
        return self in (EdgeKind.KEPS, EdgeKind.GKEPS, EdgeKind.KGK)

    @property
    def symmetric(self) -> bool:
        return self in (EdgeKind.GK, EdgeKind.GKEPS)

    @property
    def degree(self) -> LinearDegree:
        rho = {EdgeKind.K: 0, EdgeKind.KEPS: 0, EdgeKind.GK: 1, EdgeKind.GKEPS: 1, EdgeKind.KGK: 2}[self]
        return LinearDegree(rho=Fraction(rho), d=Fraction(-1))


@dataclass(frozen=True)
class DEdge:
    tail: int
    head: int
    kind: EdgeKind
    depth: int = 0
    derivative: Multi = ()

    @property
    def is_loop(self) -> bool:
        return self.tail == self.head

    def ends(self) -> tuple[int, int]:
        return (self.tail, self.head)

    def other(self, v: int) -> int:
        return self.head if self.tail == v else self.tail

    def degree(self) -> LinearDegree:
        return self.kind.degree - scaled_size(self.derivative)


@dataclass(frozen=True)
class FeynmanDiagram:
    """Typed multigraph with a root vertex; ``vertices`` lists the vertex order."""

    vertices: tuple[int, ...]
    root: int
    edges: tuple[DEdge, ...]
    node_decoration: tuple[tuple[int, Multi], ...] = ()
    modulo_bounded: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        vs = set(self.vertices)
        if self.root not in vs:
            raise ValueError("root must be a vertex")
        for e in self.edges:
            if e.tail not in vs or e.head not in vs:
                raise ValueError(f"edge {e} has an endpoint outside the vertex set")

    @property
    def decorated(self) -> bool:
        return bool(self.node_decoration) or any(e.derivative for e in self.edges)

    def incident(self, v: int) -> list[int]:
        return [i for i, e in enumerate(self.edges) if v in (e.tail, e.head)]

    def decoration_of(self, v: int) -> Multi:
        return dict(self.node_decoration).get(v, ())

    def to_json(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "root": self.root,
            "edges": [{"from": e.tail, "to": e.head, "type": e.kind.value, "depth": e.depth,
                       "decoration": dict(e.derivative)} for e in self.edges],
            "node_decoration": {str(v): dict(m) for v, m in self.node_decoration},
        }

    def to_dot(self) -> str:
        style = {EdgeKind.K: "solid", EdgeKind.KEPS: "dashed", EdgeKind.GK: "bold",
                 EdgeKind.GKEPS: "dotted", EdgeKind.KGK: "tapered"}
        lines = ["digraph G {"]
        for v in self.vertices:
            shape = "doublecircle" if v == self.root else "circle"
            lines.append(f'  v{v} [label="{v}", shape={shape}];')
        for e in self.edges:
            arrow = "none" if e.kind.symmetric else "normal"
            label = e.kind.value + (f"/{e.depth}" if e.depth else "")
            lines.append(f'  v{e.tail} -> v{e.head} [style={style[e.kind]}, arrowhead={arrow}, label="{label}"];')
        lines.append("}")
        return "\n".join(lines)

    def __str__(self) -> str:
        parts = []
        for e in self.edges:
            sep = "-" if e.kind.symmetric else ">"
            s = f"{e.tail}{sep}{e.head}:{e.kind.value}"
            if e.depth:
                s += f"@{e.depth}"
            parts.append(s)
        order = ",".join(str(v) for v in self.vertices)
        return f"root={self.root}; order={order}; " + " ".join(parts)


# ---------------------------------------------------------------- text format

_KINDS = {k.value.lower(): k for k in EdgeKind}


def parse_diagram(text: str) -> FeynmanDiagram:
    """Parse ``"root=1; 4>5:K 4-5:GKeps 1>2:KGK@1"``.

    ``a>b`` is an edge from ``a`` to ``b``; ``a-b`` marks a symmetric kernel
    (the order is still stored).  An optional ``order=3 1 2`` statement fixes
    the vertex order, which otherwise is ascending.
    """
    root = None
    order: list[int] | None = None
    edges: list[DEdge] = []
    for stmt in text.replace("\n", ";").split(";"):
        stmt = stmt.strip()
        if not stmt:
            continue
        if stmt.startswith("root=") and " " not in stmt:
            root = int(stmt[5:])
            continue
        if stmt.startswith("order="):
            order = [int(x) for x in stmt[6:].replace(",", " ").split()]
            continue
        for tok in stmt.replace(",", " ").split():
            if tok.startswith("root="):
                root = int(tok[5:])
                continue
            ends, _, rest = tok.partition(":")
            kind_txt, _, depth_txt = rest.partition("@")
            sep = ">" if ">" in ends else "-"
            a, b = ends.split(sep)
            kind = _KINDS.get(kind_txt.lower())
            if kind is None:
                raise ValueError(f"unknown edge type {kind_txt!r}")
            edges.append(DEdge(int(a), int(b), kind, int(depth_txt) if depth_txt else 0))
    verts = order if order is not None else sorted({v for e in edges for v in e.ends()} | ({root} if root is not None else set()))
    if root is None:
        root = verts[0]
    return FeynmanDiagram(tuple(verts), root, tuple(edges))


def relabel(diagram: FeynmanDiagram, mapping: dict[int, int], order: Sequence[int] | None = None) -> FeynmanDiagram:
    """Rename vertices; the new vertex order is ascending unless given."""
    verts = tuple(order) if order is not None else tuple(sorted(mapping[v] for v in diagram.vertices))
    edges = tuple(replace(e, tail=mapping[e.tail], head=mapping[e.head]) for e in diagram.edges)
    deco = tuple(sorted((mapping[v], m) for v, m in diagram.node_decoration))
    return FeynmanDiagram(verts, mapping[diagram.root], edges, deco, diagram.modulo_bounded)


# ---------------------------------------------------------------- pairings and construction


def pairings(tree: DecoratedTree) -> list[Pairing]:
    """All perfect matchings of the leaves, in lexicographic order."""
    leaves = list(tree.leaves)
    if len(leaves) % 2:
        raise ValueError("a pairing needs an even number of leaves")
    return list(_matchings(leaves))


def _matchings(items: list[int]) -> Iterator[Pairing]:
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for j, partner in enumerate(rest):
        for tail in _matchings(rest[:j] + rest[j + 1:]):
            yield ((first, partner),) + tail


def build_diagram(tree: DecoratedTree, pairing: Pairing) -> FeynmanDiagram:
    """Merge the leaves of each block; edges adjacent to a former leaf become Keps."""
    merged: dict[int, int] = {}
    for a, b in pairing:
        merged[a] = merged[b] = min(a, b)
    if set(merged) != set(tree.leaves):
        raise ValueError("pairing is not a perfect matching of the leaves")
    if any(tree.node_decoration(i) or tree.edge_decoration(i) for i in range(tree.n_nodes)):
        raise ValueError("diagrams are built from undecorated trees")
    edges = []
    for v in range(1, tree.n_nodes):
        u = tree.parent(v)
        if tree.is_leaf(v):
            edges.append(DEdge(merged[v], u, EdgeKind.KEPS))
        else:
            edges.append(DEdge(v, u, EdgeKind.K))
    verts = sorted(set(tree.inner) | set(merged.values()))
    return FeynmanDiagram(tuple(verts), 0, tuple(edges))


def reduce(diagram: FeynmanDiagram, root_rules: bool = True) -> tuple[FeynmanDiagram, Fraction]:
    """Rewrite kernels to normal form and return the accumulated prefactor.

    Leaf rule: a vertex with exactly two outgoing Keps edges is integrated out,
    leaving a GKeps edge between their heads (factor -1/2).  Root rules (only
    with ``root_rules``): a root fed by exactly two K edges becomes a GK edge
    between the children (factor -1/2); a root with one incoming K edge from
    ``c`` and one GKeps edge to ``w`` becomes a KGK edge ``c -> w`` (factor 1).
    Bounded remainders are dropped; the result is flagged ``modulo_bounded``.
    """
    order = {v: i for i, v in enumerate(diagram.vertices)}
    verts = list(diagram.vertices)
    edges = list(diagram.edges)
    root = diagram.root
    pref = Fraction(1)
    touched = False

    def incident(v: int) -> list[int]:
        return [i for i, e in enumerate(edges) if v in (e.tail, e.head)]

    progress = True
    while progress:
        progress = False
        for v in verts:
            if v == root:
                continue
            inc = incident(v)
            if len(inc) == 2 and all(edges[i].kind is EdgeKind.KEPS and edges[i].tail == v
                                     and edges[i].head != v for i in inc):
                u, w = sorted((edges[i].head for i in inc), key=order.__getitem__)
                edges = [e for i, e in enumerate(edges) if i not in inc] + [DEdge(u, w, EdgeKind.GKEPS)]
                verts.remove(v)
                pref *= Fraction(-1, 2)
                touched = progress = True
                break

    if root_rules:
        inc = incident(root)
        if len(inc) == 2:
            e1, e2 = (edges[i] for i in inc)
            ks = [e for e in (e1, e2) if e.kind is EdgeKind.K and e.head == root and e.tail != root]
            gs = [e for e in (e1, e2) if e.kind is EdgeKind.GKEPS and not e.is_loop]
            rest = [e for i, e in enumerate(edges) if i not in inc]
            if len(ks) == 2:
                c1, c2 = sorted((ks[0].tail, ks[1].tail), key=order.__getitem__)
                edges = rest + [DEdge(c1, c2, EdgeKind.GK)]
                verts.remove(root)
                root = c1
                pref *= Fraction(-1, 2)
                touched = True
            elif len(ks) == 1 and len(gs) == 1:
                c = ks[0].tail
                w = gs[0].other(root)
                edges = rest + [DEdge(c, w, EdgeKind.KGK)]
                verts.remove(root)
                root = c
                touched = True

    out = FeynmanDiagram(tuple(verts), root, tuple(edges), diagram.node_decoration,
                         diagram.modulo_bounded or touched)
    return out, pref


def diagram_of(tree: DecoratedTree, pairing: Pairing, root_rules: bool = True) -> tuple[FeynmanDiagram, Fraction]:
    return reduce(build_diagram(tree, pairing), root_rules)


# ---------------------------------------------------------------- degree and connectivity


def diagram_degree_form(diagram: FeynmanDiagram) -> LinearDegree:
    deg = VERTEX_DEGREE * (len(diagram.vertices) - 1)
    for e in diagram.edges:
        deg = deg + e.degree()
    for _, m in diagram.node_decoration:
        deg = deg + scaled_size(m)
    return deg


def diagram_degree(diagram: FeynmanDiagram, params: ModelParams) -> float:
    """(rho+d)(|V|-1) + sum over edges of (deg e - |derivative|) + node monomials."""
    return float(diagram_degree_form(diagram).at(params))


def edge_subset_degree(diagram: FeynmanDiagram, edge_ids: Iterable[int]) -> LinearDegree:
    ids = list(edge_ids)
    verts = {v for i in ids for v in diagram.edges[i].ends()}
    deg = VERTEX_DEGREE * (len(verts) - 1)
    for i in ids:
        deg = deg + diagram.edges[i].degree()
    return deg


class Connectivity(enum.Enum):
    ONE_CONNECTED = "one_connected"
    TWO_CONNECTED_OR_MORE = "two_connected_or_more"


def _components(vertices: Iterable[int], edges: Iterable[tuple[int, int]]) -> int:
    parent = {v: v for v in vertices}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(v) for v in parent})


def is_connected_subset(diagram: FeynmanDiagram, edge_ids: Sequence[int]) -> bool:
    verts = {v for i in edge_ids for v in diagram.edges[i].ends()}
    return _components(verts, (diagram.edges[i].ends() for i in edge_ids)) == 1


def bridges(diagram: FeynmanDiagram, edge_ids: Sequence[int] | None = None) -> list[int]:
    """Edges whose removal disconnects the (sub)graph spanned by ``edge_ids``."""
    ids = list(range(len(diagram.edges))) if edge_ids is None else list(edge_ids)
    verts = {v for i in ids for v in diagram.edges[i].ends()}
    if edge_ids is None:
        verts |= set(diagram.vertices)
    base = _components(verts, (diagram.edges[i].ends() for i in ids))
    out = []
    for j in ids:
        if diagram.edges[j].is_loop:
            continue
        rest = (diagram.edges[i].ends() for i in ids if i != j)
        if _components(verts, rest) > base:
            out.append(j)
    return out


def connectivity(diagram: FeynmanDiagram) -> Connectivity:
    """One-connected iff a single edge removal disconnects the diagram."""
    if _components(diagram.vertices, (e.ends() for e in diagram.edges)) != 1:
        raise ValueError("connectivity is defined for connected diagrams")
    return Connectivity.ONE_CONNECTED if bridges(diagram) else Connectivity.TWO_CONNECTED_OR_MORE


def is_one_connected(diagram: FeynmanDiagram) -> bool:
    return connectivity(diagram) is Connectivity.ONE_CONNECTED


# ---------------------------------------------------------------- subdivergences


@dataclass(frozen=True)
class Subdiagram:
    """Edge subset of a fixed diagram together with its endpoints."""

    edges: frozenset[int]
    vertices: frozenset[int]

    def __le__(self, other: Subdiagram) -> bool:
        return self.edges <= other.edges

    def __lt__(self, other: Subdiagram) -> bool:
        return self.edges < other.edges

    def sort_key(self) -> tuple:
        return (len(self.edges), tuple(sorted(self.edges)))


def subdiagram(diagram: FeynmanDiagram, edge_ids: Iterable[int]) -> Subdiagram:
    ids = frozenset(edge_ids)
    return Subdiagram(ids, frozenset(v for i in ids for v in diagram.edges[i].ends()))


def divergent_subdiagrams(diagram: FeynmanDiagram, params: ModelParams,
                          include_marginal: bool = False, allow_bridges: bool = False) -> list[Subdiagram]:
    """Proper connected bridgeless edge subsets of negative degree (kappa = 0).

    With ``include_marginal`` subsets of degree exactly 0 are kept as well; this
    is the convention of a small positive kappa.  ``allow_bridges`` also keeps
    connected subsets that have a bridge.
    """
    n = len(diagram.edges)
    if n > 20:
        raise ValueError("too many edges for exhaustive subdiagram search")
    index = {v: i for i, v in enumerate(diagram.vertices)}
    exact_vals = [e.degree().at(params) for e in diagram.edges]
    exact_vdeg = VERTEX_DEGREE.at(params)
    scale = lcm(exact_vdeg.denominator, *(v.denominator for v in exact_vals))
    vals = [int(v * scale) for v in exact_vals]
    vdeg = int(exact_vdeg * scale)
    ends = [(1 << index[e.tail]) | (1 << index[e.head]) for e in diagram.edges]
    total = [0] * (1 << n)
    vmask = [0] * (1 << n)
    found: list[Subdiagram] = []
    for mask in range(1, 1 << n):
        low = (mask & -mask).bit_length() - 1
        rest = mask & (mask - 1)
        total[mask] = total[rest] + vals[low]
        vmask[mask] = vmask[rest] | ends[low]
        if mask == (1 << n) - 1:
            continue
        deg = total[mask] + vdeg * (bin(vmask[mask]).count("1") - 1)
        if deg > 0 or (deg == 0 and not include_marginal):
            continue
        ids = [i for i in range(n) if mask >> i & 1]
        if not is_connected_subset(diagram, ids) or (not allow_bridges and bridges(diagram, ids)):
            continue
        found.append(subdiagram(diagram, ids))
    return sorted(found, key=Subdiagram.sort_key)


def nested_or_disjoint(a: Subdiagram, b: Subdiagram) -> bool:
    return a.edges <= b.edges or b.edges <= a.edges or a.vertices.isdisjoint(b.vertices)


def check_forest_property(diagram: FeynmanDiagram, params: ModelParams,
                          include_marginal: bool = False) -> bool:
    """True iff all subdivergences are pairwise nested or vertex-disjoint."""
    subs = divergent_subdiagrams(diagram, params, include_marginal)
    return all(nested_or_disjoint(a, b) for i, a in enumerate(subs) for b in subs[i + 1:])


# ---------------------------------------------------------------- canonical form


def _edge_view(e: DEdge, v: int) -> tuple:
    if e.is_loop:
        role = "loop"
    elif e.kind.symmetric:
        role = "sym"
    else:
        role = "out" if e.tail == v else "in"
    return (e.kind.value, e.depth, e.derivative, role)


def canonical_key(diagram: FeynmanDiagram, anchored: bool = True) -> tuple:
    """Isomorphism invariant of the typed multigraph.

    With ``anchored`` the root vertex is distinguished.  Colour refinement
    narrows the candidate labellings, which are then searched exhaustively.
    """
    verts = list(diagram.vertices)
    deco = dict(diagram.node_decoration)
    color = {v: (anchored and v == diagram.root, deco.get(v, ()),
                 tuple(sorted(_edge_view(diagram.edges[i], v) for i in diagram.incident(v))))
             for v in verts}
    color = _rank(color)
    while True:
        refined = {}
        for v in verts:
            nbrs = sorted((_edge_view(diagram.edges[i], v), color[diagram.edges[i].other(v)])
                          for i in diagram.incident(v))
            refined[v] = (color[v], tuple(nbrs))
        refined = _rank(refined)
        if len(set(refined.values())) == len(set(color.values())):
            color = refined
            break
        color = refined
    classes: dict[int, list[int]] = {}
    for v in verts:
        classes.setdefault(color[v], []).append(v)
    ordered = [classes[c] for c in sorted(classes)]
    best = None
    for perms in product(*(permutations(c) for c in ordered)):
        label = {}
        for block in perms:
            for v in block:
                label[v] = len(label)
        edges = []
        for e in diagram.edges:
            a, b = label[e.tail], label[e.head]
            if e.kind.symmetric and a > b:
                a, b = b, a
            edges.append((a, b, e.kind.value, e.depth, e.derivative))
        cand = (tuple(sorted(edges)), tuple(sorted((label[v], m) for v, m in deco.items())),
                label[diagram.root] if anchored else -1)
        if best is None or cand < best:
            best = cand
    return (len(verts),) + best


def _rank(colors: dict) -> dict:
    ranks = {c: i for i, c in enumerate(sorted(set(colors.values())))}
    return {v: ranks[c] for v, c in colors.items()}


def add_node_decoration(diagram: FeynmanDiagram, v: int, m: Multi) -> FeynmanDiagram:
    deco = dict(diagram.node_decoration)
    deco[v] = multi_add(deco.get(v, ()), m)
    return replace(diagram, node_decoration=tuple(sorted((k, x) for k, x in deco.items() if x)))

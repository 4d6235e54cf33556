"""Hepp sectors: sector contractions, safe and unsafe forests, exponent recursion.

A Hepp tree is a binary tree whose leaves are the vertices of a diagram.  The
scale of an edge is read at the last common ancestor ``e_up`` of its (possibly
reconnected) endpoints.  All exponents are exact rationals, either at the
model parameters or in units of d/3 in the limit rho -> d/3.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import combinations, permutations
from math import lcm
from typing import Iterable, Iterator, Sequence

from .diagrams import (
    VERTEX_DEGREE,
    DEdge,
    FeynmanDiagram,
    Subdiagram,
    diagram_degree_form,
    divergent_subdiagrams,
    edge_subset_degree,
    nested_or_disjoint,
)
from .forests import ForestInterval, children_in, first_vertex, taylor_order
from .trees import LinearDegree, ModelParams

Forest = frozenset[Subdiagram]


class HeppSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class DepthOrderError(ValueError):
    """Raised when a sector contraction would put an adjacent edge deeper than the subdiagram."""


class BoundNotDerivable(ArithmeticError):
    """The summability condition of the recursion fails at some node."""


# ---------------------------------------------------------------- Hepp trees


@dataclass(frozen=True)
class HeppTree:
    """Binary tree in preorder; ``vertex[i]`` is set exactly on leaves."""

    children: tuple[tuple[int, int] | None, ...]
    vertex: tuple[int | None, ...]
    labels: tuple[int | None, ...]
    names: tuple[str, ...]

    def __post_init__(self) -> None:
        for kids, v in zip(self.children, self.vertex):
            if (kids is None) == (v is None):
                raise ValueError("every node is either a leaf with a vertex or has two children")
        leaves = [v for v in self.vertex if v is not None]
        if len(set(leaves)) != len(leaves):
            raise ValueError("a vertex labels two leaves")
        for u in self.inner:
            for w in self.children[u]:
                if self.labels[u] is not None and self.labels[w] is not None and self.labels[w] < self.labels[u]:
                    raise ValueError("labels must not decrease away from the root")

    @cached_property
    def parent(self) -> tuple[int, ...]:
        par = [-1] * len(self.children)
        for u, kids in enumerate(self.children):
            if kids is not None:
                for w in kids:
                    par[w] = u
        return tuple(par)

    @cached_property
    def depth(self) -> tuple[int, ...]:
        dep = [0] * len(self.children)
        for u in range(1, len(self.children)):
            dep[u] = dep[self.parent[u]] + 1
        return tuple(dep)

    @cached_property
    def inner(self) -> tuple[int, ...]:
        return tuple(i for i, k in enumerate(self.children) if k is not None)

    @cached_property
    def leaf_of(self) -> dict[int, int]:
        return {v: i for i, v in enumerate(self.vertex) if v is not None}

    @property
    def vertices(self) -> frozenset[int]:
        return frozenset(self.leaf_of)

    @cached_property
    def postorder(self) -> tuple[int, ...]:
        return tuple(sorted(self.inner, key=lambda u: -self.depth[u]))

    def name(self, u: int) -> str:
        return self.names[u]

    def node_named(self, name: str) -> int:
        return self.names.index(name)

    @cached_property
    def size(self) -> tuple[int, ...]:
        sz = [1] * len(self.children)
        for u in sorted(range(len(self.children)), key=lambda x: -self.depth[x]):
            if u:
                sz[self.parent[u]] += sz[u]
        return tuple(sz)

    @cached_property
    def _lca_table(self) -> list[list[int]]:
        n = len(self.children)
        table = [[0] * n for _ in range(n)]
        for a in range(n):
            for b in range(a, n):
                x, y = a, b
                while self.depth[x] > self.depth[y]:
                    x = self.parent[x]
                while self.depth[y] > self.depth[x]:
                    y = self.parent[y]
                while x != y:
                    x, y = self.parent[x], self.parent[y]
                table[a][b] = table[b][a] = x
        return table

    def lca(self, a: int, b: int) -> int:
        return self._lca_table[a][b]

    def lca_many(self, nodes: Iterable[int]) -> int:
        it = iter(nodes)
        acc = next(it)
        table = self._lca_table
        for x in it:
            acc = table[acc][x]
        return acc

    def vertex_lca(self, u: int, v: int) -> int:
        return self._lca_table[self.leaf_of[u]][self.leaf_of[v]]

    def at_or_below(self, w: int, v: int) -> bool:
        """w >= v: w is v or one of its descendants (preorder intervals)."""
        return v <= w < v + self.size[v]

    def offspring(self, u: int) -> tuple[int, int]:
        kids = self.children[u]
        assert kids is not None
        return kids

    def render(self) -> str:
        def rec(u: int) -> str:
            if self.vertex[u] is not None:
                return str(self.vertex[u])
            a, b = self.children[u]
            s = f"({rec(a)} {rec(b)})"
            if self.labels[u] is not None:
                s += f"@{self.labels[u]}"
            return s + f"#{self.names[u]}"

        return rec(0)


def parse_hepp(text: str) -> HeppTree:
    """Parse ``((1 2)@2#d 3)@0#a``: leaves are vertex ids, ``@`` a scale, ``#`` a name."""
    pos = 0
    children: list[tuple[int, int] | None] = []
    vertex: list[int | None] = []
    labels: list[int | None] = []
    names: list[str | None] = []

    def skip() -> None:
        nonlocal pos
        while pos < len(text) and text[pos].isspace():
            pos += 1

    def number() -> int:
        nonlocal pos
        start = pos
        while pos < len(text) and text[pos].isdigit():
            pos += 1
        if start == pos:
            raise HeppSyntaxError("expected an integer", start)
        return int(text[start:pos])

    def node() -> int:
        nonlocal pos
        skip()
        idx = len(children)
        children.append(None)
        vertex.append(None)
        labels.append(None)
        names.append(None)
        if pos < len(text) and text[pos] == "(":
            pos += 1
            a = node()
            b = node()
            skip()
            if pos >= len(text) or text[pos] != ")":
                raise HeppSyntaxError("expected ')' (Hepp trees are binary)", pos)
            pos += 1
            children[idx] = (a, b)
            while pos < len(text) and text[pos] in "@#":
                mark = text[pos]
                pos += 1
                if mark == "@":
                    labels[idx] = number()
                else:
                    start = pos
                    while pos < len(text) and (text[pos].isalnum() or text[pos] == "_"):
                        pos += 1
                    if start == pos:
                        raise HeppSyntaxError("expected a name", start)
                    names[idx] = text[start:pos]
        else:
            vertex[idx] = number()
        return idx

    node()
    skip()
    if pos != len(text):
        raise HeppSyntaxError("trailing input", pos)
    auto = iter(f"v{i}" for i in range(len(children)))
    final = tuple(n if n is not None else next(auto) for n in names)
    return HeppTree(tuple(children), tuple(vertex), tuple(labels), final)


def enumerate_hepp_shapes(vertices: Sequence[int]) -> Iterator[HeppTree]:
    """All (2n-3)!! rooted binary trees with the given labelled leaves."""
    verts = list(vertices)
    if len(verts) < 2:
        raise ValueError("a Hepp tree needs at least two leaves")

    def shapes(items: list[int]) -> Iterator[str]:
        if len(items) == 1:
            yield str(items[0])
            return
        first, rest = items[0], items[1:]
        for r in range(0, len(rest)):
            for extra in combinations(rest, r):
                left = [first, *extra]
                right = [x for x in rest if x not in extra]
                for a in shapes(left):
                    for b in shapes(right):
                        yield f"({a} {b})"

    for s in shapes(verts):
        yield parse_hepp(s)


# ---------------------------------------------------------------- sector contraction


@dataclass(frozen=True)
class SectorDiagram:
    """The image of a diagram under all sector contractions of a forest.

    Vertices and edge indices are those of the original diagram, so the
    bijection between the two is the identity on indices.
    """

    diagram: FeynmanDiagram
    forest: Forest

    @property
    def sigma(self) -> dict[int, int]:
        return {i: i for i in range(len(self.diagram.edges))}

    @property
    def depths(self) -> tuple[int, ...]:
        return tuple(e.depth for e in self.diagram.edges)


def c_hat(diagram: FeynmanDiagram, gamma: Subdiagram) -> FeynmanDiagram:
    """Reconnect edges adjacent to gamma to its first vertex and deepen gamma's edges."""
    first = first_vertex(diagram, gamma.vertices)
    edges = []
    inside_depths = []
    adjacent_depths = []
    for i, e in enumerate(diagram.edges):
        if i in gamma.edges:
            edges.append(DEdge(e.tail, e.head, e.kind, e.depth + 1, e.derivative))
            inside_depths.append(e.depth + 1)
            continue
        tail_in, head_in = e.tail in gamma.vertices, e.head in gamma.vertices
        if tail_in and head_in and first not in (e.tail, e.head):
            raise ValueError("sector contraction needs induced subdiagrams")
        if tail_in or head_in:
            adjacent_depths.append(e.depth)
        edges.append(DEdge(first if tail_in and not head_in else e.tail,
                           first if head_in and not tail_in else e.head,
                           e.kind, e.depth, e.derivative))
    if adjacent_depths and inside_depths and max(adjacent_depths) >= min(inside_depths):
        raise DepthOrderError("an edge adjacent to the subdiagram is not shallower than it")
    return FeynmanDiagram(diagram.vertices, diagram.root, tuple(edges), diagram.node_decoration,
                          diagram.modulo_bounded)


def contract_for_forest(diagram: FeynmanDiagram, forest: Iterable[Subdiagram],
                        order: Sequence[Subdiagram] | None = None,
                        check_commutation: bool = False) -> SectorDiagram:
    """Apply every sector contraction of the forest (innermost first unless ``order`` is given).

    With ``check_commutation`` every order of the members is tried and must agree.
    """
    members = frozenset(forest)
    if check_commutation:
        results = {contract_for_forest(diagram, members, perm).diagram for perm in permutations(members)}
        if len(results) != 1:
            raise AssertionError("sector contractions do not commute")
    if order is None:
        return _contract_cached(diagram, members)
    out = diagram
    for g in order:
        out = c_hat(out, g)
    return SectorDiagram(out, members)


@lru_cache(maxsize=65536)
def _contract_cached(diagram: FeynmanDiagram, members: Forest) -> SectorDiagram:
    return contract_for_forest(diagram, members, sorted(members, key=lambda g: (len(g.edges), sorted(g.edges))))


# ---------------------------------------------------------------- forests and safety


def is_induced(diagram: FeynmanDiagram, gamma: Subdiagram) -> bool:
    return all(i in gamma.edges for i, e in enumerate(diagram.edges)
               if e.tail in gamma.vertices and e.head in gamma.vertices)


def is_full_forest(diagram: FeynmanDiagram, forest: Iterable[Subdiagram]) -> bool:
    members = list(forest)
    return (all(is_induced(diagram, g) for g in members)
            and all(nested_or_disjoint(a, b) for i, a in enumerate(members) for b in members[i + 1:]))


def parent_in(forest: Iterable[Subdiagram], gamma: Subdiagram) -> Subdiagram | None:
    above = [g for g in forest if gamma < g]
    return min(above, key=lambda g: len(g.edges)) if above else None


def own_edges(forest: Iterable[Subdiagram], gamma: Subdiagram | None, n_edges: int) -> frozenset[int]:
    """Edges of gamma (the whole diagram when None) outside its children."""
    base = frozenset(range(n_edges)) if gamma is None else gamma.edges
    for c in children_in(forest, gamma):
        base = base - c.edges
    return base


class Safety(enum.Enum):
    SAFE = "safe"
    UNSAFE = "unsafe"


class Units(enum.Enum):
    PARAMS = "params"
    THIRDS_OF_D = "d/3"


def _evaluate(form: LinearDegree, params: ModelParams, units: Units) -> Fraction:
    return form.at(params) if units is Units.PARAMS else form.units(params.d)


@dataclass(frozen=True)
class _MemberInfo:
    own: tuple[int, ...]
    boundary: tuple[int, ...]


class PreparedDiagram:
    """Shape-independent data of a diagram: subdivergences, full forests,
    contracted endpoints and integer-scaled exponents."""

    def __init__(self, diagram: FeynmanDiagram, params: ModelParams, units: Units, include_marginal: bool,
                 allow_bridges: bool = True):
        self.diagram = diagram
        self.params = params
        self.units = units
        self.n_edges = len(diagram.edges)
        self.candidates = tuple(g for g in divergent_subdiagrams(diagram, params, include_marginal, allow_bridges)
                                if is_induced(diagram, g))
        self.forests = tuple(self._full_forests())
        self.forest_set = frozenset(self.forests)
        self.param_degree = {g: edge_subset_degree(diagram, g.edges).at(params) for g in self.candidates}
        values = [_evaluate(VERTEX_DEGREE, params, units), _evaluate(diagram_degree_form(diagram), params, units)]
        values += [_evaluate(e.degree(), params, units) for e in diagram.edges]
        n_unit = Fraction(1) if units is Units.PARAMS else Fraction(3, params.d)
        values.append(n_unit)
        self.scale = lcm(*(v.denominator for v in values))
        ints = [int(v * self.scale) for v in values]
        self.vertex_value, self.degree = ints[0], ints[1]
        self.edge_values = tuple(ints[2:-1])
        self.n_unit = ints[-1]
        self.mollified = tuple(e.kind.mollified for e in diagram.edges)
        self._ends: dict[Forest, tuple[tuple[int, int], ...]] = {}
        self._info: dict[Forest, dict[Subdiagram, _MemberInfo]] = {}

    def _full_forests(self) -> list[Forest]:
        subs = self.candidates
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
        return out

    def fraction(self, x: int) -> Fraction:
        return Fraction(x, self.scale)

    def ends(self, forest: Forest) -> tuple[tuple[int, int], ...]:
        if forest not in self._ends:
            contracted = contract_for_forest(self.diagram, forest).diagram
            self._ends[forest] = tuple((e.tail, e.head) for e in contracted.edges)
        return self._ends[forest]

    def info(self, forest: Forest) -> dict[Subdiagram, _MemberInfo]:
        if forest not in self._info:
            out = {}
            for g in forest:
                parent = parent_in(forest, g)
                pool = range(self.n_edges) if parent is None else parent.edges
                boundary = tuple(i for i in pool if i not in g.edges
                                 and (self.diagram.edges[i].tail in g.vertices
                                      or self.diagram.edges[i].head in g.vertices))
                out[g] = _MemberInfo(tuple(sorted(own_edges(forest, g, self.n_edges))), boundary)
            self._info[forest] = out
        return self._info[forest]

    def e_up(self, forest: Forest, hepp: HeppTree) -> list[int]:
        return [hepp.vertex_lca(t, h) for t, h in self.ends(forest)]

    def safety(self, forest: Forest, hepp: HeppTree) -> dict[Subdiagram, Safety]:
        """ext >= int for every increasing scale assignment: a boundary edge sits at or below
        the last common ancestor of the member's own edges."""
        e_up = self.e_up(forest, hepp)
        out = {}
        for g, inf in self.info(forest).items():
            u_int = hepp.lca_many(e_up[i] for i in inf.own)
            safe = any(hepp.at_or_below(e_up[i], u_int) for i in inf.boundary)
            out[g] = Safety.SAFE if safe else Safety.UNSAFE
        return out

    def is_safe(self, forest: Forest, hepp: HeppTree) -> bool:
        return all(s is Safety.SAFE for s in self.safety(forest, hepp).values())

    def unsafe_completion(self, safe_forest: Forest, hepp: HeppTree) -> Forest:
        out = []
        for g in self.candidates:
            trial = safe_forest | {g}
            if g in safe_forest or trial not in self.forest_set:
                continue
            if self.safety(trial, hepp)[g] is Safety.UNSAFE:
                out.append(g)
        return frozenset(out)


@lru_cache(maxsize=2048)
def prepare(diagram: FeynmanDiagram, params: ModelParams, units: Units = Units.PARAMS,
            include_marginal: bool = True, allow_bridges: bool = True) -> PreparedDiagram:
    return PreparedDiagram(diagram, params, units, include_marginal, allow_bridges)


def classify_safety(diagram: FeynmanDiagram, forest: Iterable[Subdiagram], hepp: HeppTree) -> dict[Subdiagram, Safety]:
    """Safety of each member within the forest; depends only on the shape of the tree."""
    members = frozenset(forest)
    contracted = contract_for_forest(diagram, members).diagram
    e_up = [hepp.vertex_lca(e.tail, e.head) for e in contracted.edges]
    out = {}
    for g in members:
        u_int = hepp.lca_many(e_up[i] for i in own_edges(members, g, len(diagram.edges)))
        parent = parent_in(members, g)
        pool = range(len(diagram.edges)) if parent is None else parent.edges
        safe = any(i not in g.edges and (diagram.edges[i].tail in g.vertices or diagram.edges[i].head in g.vertices)
                   and hepp.at_or_below(e_up[i], u_int) for i in pool)
        out[g] = Safety.SAFE if safe else Safety.UNSAFE
    return out


def full_forests(diagram: FeynmanDiagram, params: ModelParams, include_marginal: bool = True,
                 allow_bridges: bool = True) -> list[Forest]:
    """Forests of induced connected subdivergences (degree <= 0 when ``include_marginal``)."""
    return list(prepare(diagram, params, Units.PARAMS, include_marginal, allow_bridges).forests)


def is_safe_forest(diagram: FeynmanDiagram, forest: Forest, hepp: HeppTree) -> bool:
    return all(s is Safety.SAFE for s in classify_safety(diagram, forest, hepp).values())


def unsafe_completion(diagram: FeynmanDiagram, safe_forest: Forest, hepp: HeppTree,
                      params: ModelParams, include_marginal: bool = True, allow_bridges: bool = True) -> Forest:
    """All subdivergences that are unsafe once added to the safe forest."""
    prep = prepare(diagram, params, Units.PARAMS, include_marginal, allow_bridges)
    return prep.unsafe_completion(frozenset(safe_forest), hepp)


def sector_partition(diagram: FeynmanDiagram, hepp: HeppTree, params: ModelParams,
                     include_marginal: bool = True, allow_bridges: bool = True) -> list[ForestInterval]:
    """Intervals [F_s, F_s + F_u] over all safe forests F_s."""
    prep = prepare(diagram, params, Units.PARAMS, include_marginal, allow_bridges)
    out = [ForestInterval(f, f | prep.unsafe_completion(f, hepp)) for f in prep.forests if prep.is_safe(f, hepp)]
    return sorted(out, key=lambda m: (len(m.lower), sorted(g.sort_key() for g in m.lower)))


def check_partition(diagram: FeynmanDiagram, hepp: HeppTree, params: ModelParams,
                    include_marginal: bool = True, allow_bridges: bool = True) -> bool:
    """Every full forest lies in exactly one interval of the sector partition."""
    intervals = sector_partition(diagram, hepp, params, include_marginal, allow_bridges)
    for f in full_forests(diagram, params, include_marginal, allow_bridges):
        if sum(1 for m in intervals if m.lower <= f <= m.upper) != 1:
            return False
    return True


# ---------------------------------------------------------------- exponent profiles


@dataclass(frozen=True)
class SectorContext:
    """A diagram, a safe forest and a Hepp tree over the diagram's vertices."""

    diagram: FeynmanDiagram
    safe_forest: Forest
    hepp: HeppTree
    params: ModelParams
    units: Units = Units.PARAMS
    include_marginal: bool = True
    unsafe: Forest | None = None
    allow_bridges: bool = True
    n_eps: int | None = None

    def __post_init__(self) -> None:
        if self.hepp.vertices != frozenset(self.diagram.vertices):
            raise ValueError("Hepp tree leaves must be the diagram vertices")
        object.__setattr__(self, "safe_forest", frozenset(self.safe_forest))

    @cached_property
    def prep(self) -> PreparedDiagram:
        return prepare(self.diagram, self.params, self.units, self.include_marginal, self.allow_bridges)

    def value(self, form: LinearDegree) -> Fraction:
        return _evaluate(form, self.params, self.units)

    @cached_property
    def contracted(self) -> FeynmanDiagram:
        return contract_for_forest(self.diagram, self.safe_forest).diagram

    @cached_property
    def e_up(self) -> list[int]:
        return self.prep.e_up(self.safe_forest, self.hepp)

    @cached_property
    def unsafe_forest(self) -> Forest:
        if self.unsafe is not None:
            return frozenset(self.unsafe)
        return self.prep.unsafe_completion(self.safe_forest, self.hepp)


@dataclass(frozen=True)
class UnsafeCorrection:
    gamma: Subdiagram
    n: int
    up: int
    upup: int


def unsafe_corrections(ctx: SectorContext) -> list[UnsafeCorrection]:
    """gamma_up is the last common ancestor of gamma's own vertices; gamma_upup the
    deepest e_up among parent edges adjacent to them."""
    out = []
    whole = ctx.safe_forest | ctx.unsafe_forest
    n_edges = len(ctx.diagram.edges)
    ends = ctx.prep.ends(ctx.safe_forest)
    for g in sorted(ctx.unsafe_forest, key=Subdiagram.sort_key):
        verts = {v for i in own_edges(ctx.safe_forest, g, n_edges) for v in ends[i]}
        up = ctx.hepp.lca_many(ctx.hepp.leaf_of[v] for v in verts)
        adjacent = [ctx.e_up[i] for i in own_edges(whole, parent_in(whole, g), n_edges)
                    if ends[i][0] in verts or ends[i][1] in verts]
        if not adjacent:
            raise ValueError("an unsafe subdiagram has no adjacent parent edge")
        upup = max(adjacent, key=lambda u: ctx.hepp.depth[u])
        degree = ctx.prep.param_degree.get(g)
        if degree is None:
            degree = edge_subset_degree(ctx.diagram, g.edges).at(ctx.params)
        out.append(UnsafeCorrection(g, taylor_order(degree), up, upup))
    return out


def _scaled_profiles(ctx: SectorContext, hatted: bool) -> tuple[dict[int, int], dict[int, int]]:
    prep = ctx.prep
    circ = {u: prep.vertex_value for u in ctx.hepp.inner}
    eps = {u: 0 for u in ctx.hepp.inner}
    for up, value, moll in zip(ctx.e_up, prep.edge_values, prep.mollified):
        if moll:
            eps[up] += value
        else:
            circ[up] += value
    if hatted:
        for c in unsafe_corrections(ctx):
            circ[c.up] += c.n * prep.n_unit
            circ[c.upup] -= c.n * prep.n_unit
    return circ, eps


def eta_profiles(ctx: SectorContext, hatted: bool = True) -> tuple[dict[int, Fraction], dict[int, Fraction]]:
    """Per inner node: (eta_circ, eta_eps); ``hatted`` adds the unsafe corrections to eta_circ."""
    circ, eps = _scaled_profiles(ctx, hatted)
    f = ctx.prep.fraction
    return {u: f(x) for u, x in circ.items()}, {u: f(x) for u, x in eps.items()}


@dataclass
class BoundRow:
    node: int
    name: str
    eta_circ: Fraction
    eta_eps: Fraction
    eta: Fraction
    eta_geq: Fraction
    lam: Fraction
    alpha: Fraction
    beta: Fraction
    gamma: int
    alpha_bar: Fraction
    beta_bar: Fraction


BOUND_COLUMNS = ("v", "eta_circ", "eta_eps", "eta", "eta_geq", "lambda", "alpha", "beta", "gamma",
                 "alpha_bar", "beta_bar")


@dataclass
class BoundProfile:
    rows: dict[int, BoundRow]
    root: int
    deg: Fraction
    violations: list[str] = field(default_factory=list)
    # multiplicative constants are only known to exist; carried as 1 with slack
    constant: int = 1
    constant_slack: bool = True

    @property
    def derivable(self) -> bool:
        return not self.violations

    @property
    def eps_exponent(self) -> Fraction:
        """The bound reads eps^(eps_exponent) * log(1/eps)^(log_power)."""
        return -self.rows[self.root].alpha

    @property
    def log_power(self) -> int:
        return self.rows[self.root].gamma

    def ordered(self) -> list[BoundRow]:
        return [self.rows[u] for u in sorted(self.rows, key=lambda u: -u)]

    def to_csv(self, order: Sequence[str] | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(BOUND_COLUMNS)
        by_name = {r.name: r for r in self.rows.values()}
        rows = self.ordered() if order is None else [by_name[n] for n in order]
        for r in rows:
            w.writerow([r.name, *(str(x) for x in (r.eta_circ, r.eta_eps, r.eta, r.eta_geq, r.lam, r.alpha,
                                                   r.beta, r.gamma, r.alpha_bar, r.beta_bar))])
        return buf.getvalue()


def _recursion(ctx: SectorContext) -> tuple[dict[int, tuple[int, ...]], list[int]]:
    """Integer-scaled rows (eta_circ, eta_eps, eta, eta_geq, lambda, alpha, beta, gamma, alpha_bar,
    beta_bar) and the nodes where summability fails."""
    circ, eps = _scaled_profiles(ctx, hatted=True)
    hepp = ctx.hepp
    rows: dict[int, tuple[int, ...]] = {}
    zero = (0,) * 10
    failing = []
    for u in hepp.postorder:
        kids = [rows.get(w, zero) for w in hepp.offspring(u)]
        eta = circ[u] + eps[u]
        lam = eta + sum(k[6] for k in kids)
        sa = sum(k[5] for k in kids)
        sg = sum(k[7] for k in kids)
        alpha = sa - lam if lam < 0 else sa
        beta = lam if lam > 0 else 0
        gamma = 0 if lam < 0 else (sg + 1 if lam == 0 else sg)
        alpha_bar = sum(k[8] for k in kids) - eps[u]
        beta_bar = sum(k[9] for k in kids) + circ[u]
        geq = eta + sum(k[3] for k in kids)
        if beta_bar <= 0:
            failing.append(u)
        rows[u] = (circ[u], eps[u], eta, geq, lam, alpha, beta, gamma, alpha_bar, beta_bar)
    return rows, failing


def bound_recursion(ctx: SectorContext, strict: bool = False) -> BoundProfile:
    """Leaf-initialised recursion for the exponents of the sector sum (unsafe corrections included)."""
    raw, failing = _recursion(ctx)
    f = ctx.prep.fraction
    rows = {}
    for u, r in raw.items():
        vals: list = [f(x) for x in r]
        vals[7] = r[7]
        rows[u] = BoundRow(u, ctx.hepp.name(u), *vals)
    violations = [f"summability fails at {ctx.hepp.name(u)}" for u in failing]
    if strict and violations:
        raise BoundNotDerivable("; ".join(violations))
    return BoundProfile(rows, 0, f(ctx.prep.degree), violations)


def recursion_identities(ctx: SectorContext, zeta_value: int) -> dict[str, bool]:
    """Identities of the exponent recursion on one context."""
    rows, _ = _recursion(ctx)
    root = rows[0]
    deg = ctx.prep.degree
    return {
        "alpha_minus_beta": all(r[5] - r[6] == -r[3] for r in rows.values()),
        "beta_bar_minus_alpha_bar": all(r[9] - r[8] == r[3] for r in rows.values()),
        "alpha_root": root[5] == -deg,
        "log_power": root[7] <= zeta_value + (1 if deg == 0 else 0),
    }


def _sums_below(hepp: HeppTree, values: dict[int, int]) -> dict[int, int]:
    out: dict[int, int] = {}
    for u in hepp.postorder:
        out[u] = values[u] + sum(out.get(w, 0) for w in hepp.offspring(u))
    return out


def eta_geq(ctx: SectorContext, v: int, hatted: bool = True) -> Fraction:
    circ, eps = _scaled_profiles(ctx, hatted)
    total = _sums_below(ctx.hepp, {u: circ[u] + eps[u] for u in circ})
    return ctx.prep.fraction(total[v])


@dataclass
class EtaLemmaReport:
    root_equals_degree: bool
    lower_bound: bool
    equality_needs_zero_child: bool
    offspring_positive: bool
    circ_positive: bool

    @property
    def ok(self) -> bool:
        return (self.root_equals_degree and self.lower_bound and self.equality_needs_zero_child
                and self.offspring_positive and self.circ_positive)


def check_eta_lemma(ctx: SectorContext, hatted: bool = False) -> EtaLemmaReport:
    """Check the structural properties of the summed exponents on one context.

    Only nodes whose scale carries at least one edge are examined.
    """
    circ, eps = _scaled_profiles(ctx, hatted)
    hepp = ctx.hepp
    geq = _sums_below(hepp, {u: circ[u] + eps[u] for u in circ})
    geq_circ = _sums_below(hepp, circ)
    deg = ctx.prep.degree
    nonempty = [u for u in hepp.inner if any(hepp.at_or_below(x, u) for x in ctx.e_up)]
    root_ok = geq[0] == deg
    lower_ok = all(geq[u] >= deg for u in nonempty)
    eq_ok = True
    if any(u != 0 and geq[u] == deg for u in nonempty):
        eq_ok = any(ctx.prep.param_degree[g] == 0 for g in children_in(ctx.safe_forest, None))

    def branch_positive(w: int) -> bool:
        return all(geq[x] > 0 for x in hepp.inner if hepp.at_or_below(x, w))

    off_ok = all(any(branch_positive(w) for w in hepp.offspring(u)) for u in nonempty)
    circ_ok = (not any(ctx.prep.mollified)) or all(geq_circ[u] > 0 for u in nonempty)
    return EtaLemmaReport(root_ok, lower_ok, eq_ok, off_ok, circ_ok)


@dataclass
class LemmaSweep:
    contexts: int = 0
    failures: dict[str, int] = field(default_factory=dict)
    examples: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def sweep_eta_lemma(diagrams: Iterable[FeynmanDiagram], params: ModelParams, units: Units = Units.PARAMS,
                    hatted: Sequence[bool] = (False, True), sweep: LemmaSweep | None = None,
                    allow_bridges: bool = True) -> LemmaSweep:
    """Check the lemma over every Hepp shape and every safe forest of each diagram.

    Convergent diagrams (positive degree) are skipped, and uncorrected
    exponents are checked only where the unsafe family is empty.
    """
    sweep = sweep or LemmaSweep()
    shapes: dict[tuple[int, ...], list[HeppTree]] = {}
    zetas: dict[FeynmanDiagram, int] = {}
    for g in diagrams:
        verts = tuple(g.vertices)
        if len(verts) < 2:
            continue
        if verts not in shapes:
            shapes[verts] = list(enumerate_hepp_shapes(verts))
        prep = prepare(g, params, units, True, allow_bridges)
        if prep.degree > 0:
            continue
        for hepp in shapes[verts]:
            for forest in prep.forests:
                if not prep.is_safe(forest, hepp):
                    continue
                ctx = SectorContext(g, forest, hepp, params, units, allow_bridges=allow_bridges)
                for hat in hatted:
                    if not hat and ctx.unsafe_forest:
                        # without corrections the statement only covers sectors free of unsafe subdiagrams
                        continue
                    report = check_eta_lemma(ctx, hat)
                    sweep.contexts += 1
                    checks = dict(vars(report))
                    if hat:
                        if g not in zetas:
                            zetas[g] = zeta(g, params, allow_bridges)
                        checks.update(recursion_identities(ctx, zetas[g]))
                    for name, good in checks.items():
                        if not good:
                            key = f"{name}{'_hat' if hat else ''}"
                            sweep.failures[key] = sweep.failures.get(key, 0) + 1
                            sweep.examples.setdefault(key, f"{g} | {hepp.render()} | {sorted(sorted(x.edges) for x in forest)}")
    return sweep


# ---------------------------------------------------------------- log powers


def zeta(diagram: FeynmanDiagram, params: ModelParams, allow_bridges: bool = False) -> int:
    """Number of maximal subdivergences (degree <= 0) whose degree vanishes."""
    subs = divergent_subdiagrams(diagram, params, include_marginal=True, allow_bridges=allow_bridges)
    maximal = [g for g in subs if not any(g < h for h in subs)]
    return sum(1 for g in maximal if edge_subset_degree(diagram, g.edges).at(params) == 0)

"""Decorated trees for the fractional Phi^3 model space.

A tree is built from noise leaves ``Xi``, integration edges ``I`` (optionally
carrying a derivative multi-index) and node monomials ``X^k``.  Trees are kept
in a canonical form so that equality is string equality of the encoding.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterator, NamedTuple, Sequence

# Sparse multi-index: sorted ((index, value), ...) with value > 0.
Multi = tuple[tuple[int, int], ...]

DEFAULT_ENUMERATION_CAP = 8


class ResourceLimitError(RuntimeError):
    """Raised when an enumeration would exceed the configured size cap."""


def exact(x: float | int | Fraction | str) -> Fraction:
    """Exact rational for a parameter; floats are read through their repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x))) if isinstance(x, float) else Fraction(x)


@dataclass(frozen=True)
class ModelParams:
    """Equation parameters: dimension, fractional order, degree offset."""

    d: int
    rho: float | Fraction
    kappa: float | Fraction = 0
    gamma_c: float = 1.0
    g_c: float = 1.0
    sigma_c: float = 1.0

    def __post_init__(self) -> None:
        if not (1 <= self.d <= 5):
            raise ValueError(f"dimension must be in 1..5, got {self.d}")
        if self.rho_exact <= Fraction(self.d, 3):
            raise ValueError(f"rho={self.rho} is not above the critical value d/3")
        if self.rho_exact > 2:
            raise ValueError(f"rho={self.rho} exceeds 2")
        if exact(self.kappa) < 0:
            raise ValueError("kappa must be non-negative")

    @property
    def rho_exact(self) -> Fraction:
        return exact(self.rho)

    @property
    def rho_c(self) -> Fraction:
        return Fraction(self.d, 3)


@dataclass(frozen=True)
class LinearDegree:
    """Degree as an exact linear form ``a*rho + b*d + c + k*kappa``."""

    rho: Fraction = Fraction(0)
    d: Fraction = Fraction(0)
    const: Fraction = Fraction(0)
    kappa: Fraction = Fraction(0)

    def __add__(self, other: LinearDegree) -> LinearDegree:
        return LinearDegree(self.rho + other.rho, self.d + other.d,
                            self.const + other.const, self.kappa + other.kappa)

    def __sub__(self, other: LinearDegree) -> LinearDegree:
        return self + (-other)

    def __neg__(self) -> LinearDegree:
        return LinearDegree(-self.rho, -self.d, -self.const, -self.kappa)

    def __mul__(self, n: int | Fraction) -> LinearDegree:
        return LinearDegree(self.rho * n, self.d * n, self.const * n, self.kappa * n)

    __rmul__ = __mul__

    def at(self, params: ModelParams, with_kappa: bool = False) -> Fraction:
        """Exact value at ``params`` (kappa ignored unless requested)."""
        val = self.rho * params.rho_exact + self.d * params.d + self.const
        if with_kappa:
            val += self.kappa * exact(params.kappa)
        return val

    def value(self, params: ModelParams, with_kappa: bool = True) -> float:
        return float(self.at(params, with_kappa))

    def units(self, d: int) -> Fraction:
        """Value at rho = d/3, kappa = 0, measured in units of d/3."""
        return self.rho + 3 * self.d + 3 * self.const / d

    def without_kappa(self) -> LinearDegree:
        return LinearDegree(self.rho, self.d, self.const)

    @staticmethod
    def zero() -> LinearDegree:
        return LinearDegree()


def scaled_size(m: Multi) -> LinearDegree:
    """Parabolic size rho*k0 + k1 + ... + kd."""
    time = sum(v for i, v in m if i == 0)
    space = sum(v for i, v in m if i > 0)
    return LinearDegree(rho=Fraction(time), const=Fraction(space))


def multi_add(a: Multi, b: Multi) -> Multi:
    acc: dict[int, int] = dict(a)
    for i, v in b:
        acc[i] = acc.get(i, 0) + v
    return tuple(sorted((i, v) for i, v in acc.items() if v))


def _render_dense(m: Multi, dim: int) -> str:
    dense = [0] * dim
    for i, v in m:
        dense[i] = v
    return "[" + ",".join(str(v) for v in dense) + "]"


@dataclass(frozen=True)
class Node:
    """Tree node; ``key`` is the canonical encoding and drives equality."""

    key: str
    leaf: bool = field(compare=False)
    decoration: Multi = field(compare=False)
    edges: tuple[Edge, ...] = field(compare=False)


@dataclass(frozen=True)
class Edge:
    child: Node
    decoration: Multi = ()

    @property
    def key(self) -> str:
        s = f"(I {self.child.key})"
        for i, v in self.decoration:
            for _ in range(v):
                s = f"(D {i} {s})"
        return s


LEAF = Node(key="Xi", leaf=True, decoration=(), edges=())


def make_node(edges: Sequence[Edge], decoration: Multi = (), dim: int | None = None) -> Node:
    """Build a canonical inner node from its child edges."""
    if not edges:
        raise ValueError("an inner node needs at least one child edge")
    ordered = tuple(sorted(edges, key=lambda e: e.key))
    keys = [e.key for e in ordered]
    body = keys[0] if len(keys) == 1 else "(* " + " ".join(keys) + ")"
    if decoration:
        width = dim if dim is not None else max(i for i, _ in decoration) + 1
        body = f"(X {_render_dense(decoration, width)} {body})"
    return Node(key=body, leaf=False, decoration=decoration, edges=ordered)


class _Flat(NamedTuple):
    parent: tuple[int, ...]
    children: tuple[tuple[int, ...], ...]
    nodes: tuple[Node, ...]
    edge_decoration: tuple[Multi, ...]


@dataclass(frozen=True)
class DecoratedTree:
    """A rooted decorated tree in canonical form.

    Node ids are preorder positions of the canonical layout (root = 0).
    """

    root: Node
    dim: int | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return self.root.key

    def __repr__(self) -> str:
        return f"DecoratedTree({self.root.key!r})"

    @property
    def key(self) -> str:
        return self.root.key

    @cached_property
    def _flat(self) -> _Flat:
        parent: list[int] = []
        children: list[list[int]] = []
        nodes: list[Node] = []
        edeco: list[Multi] = []

        def visit(node: Node, par: int, deco: Multi) -> int:
            me = len(nodes)
            parent.append(par)
            children.append([])
            nodes.append(node)
            edeco.append(deco)
            for e in node.edges:
                children[me].append(visit(e.child, me, e.decoration))
            return me

        visit(self.root, -1, ())
        return _Flat(tuple(parent), tuple(tuple(c) for c in children), tuple(nodes), tuple(edeco))

    @property
    def n_nodes(self) -> int:
        return len(self._flat.nodes)

    def parent(self, i: int) -> int:
        return self._flat.parent[i]

    def children(self, i: int) -> tuple[int, ...]:
        return self._flat.children[i]

    def node(self, i: int) -> Node:
        return self._flat.nodes[i]

    def is_leaf(self, i: int) -> bool:
        return self._flat.nodes[i].leaf

    def node_decoration(self, i: int) -> Multi:
        return self._flat.nodes[i].decoration

    def edge_decoration(self, i: int) -> Multi:
        """Decoration of the edge entering node ``i``."""
        return self._flat.edge_decoration[i]

    @cached_property
    def leaves(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n_nodes) if self.is_leaf(i))

    @cached_property
    def inner(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n_nodes) if not self.is_leaf(i))

    @property
    def p(self) -> int:
        return len(self.leaves)

    @property
    def q(self) -> int:
        return self.n_nodes - 1

    def to_json(self, params: ModelParams | None = None) -> dict:
        out = {
            "tree": self.key,
            "nodes": [{"id": i, "leaf": self.is_leaf(i),
                       "decoration": dict(self.node_decoration(i))} for i in range(self.n_nodes)],
            "edges": [{"from": self.parent(i), "to": i, "decoration": dict(self.edge_decoration(i))}
                      for i in range(1, self.n_nodes)],
            "class": classify(self).value,
        }
        if params is not None:
            out["degree"] = degree(self, params)
        return out


# ---------------------------------------------------------------- parsing


class TreeSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


def _tokenize(text: str) -> list[tuple[str, int]]:
    toks: list[tuple[str, int]] = []
    i = 0
    byte = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            byte += len(ch.encode())
            continue
        if ch in "()[],*":
            toks.append((ch, byte))
            i += 1
            byte += 1
            continue
        j = i
        while j < len(text) and (text[j].isalnum() or text[j] in "-_"):
            j += 1
        if j == i:
            raise TreeSyntaxError(f"unexpected character {ch!r}", byte)
        toks.append((text[i:j], byte))
        byte += len(text[i:j].encode())
        i = j
    return toks


class _Parser:
    def __init__(self, text: str, d: int | None):
        self.toks = _tokenize(text)
        self.pos = 0
        self.end = len(text.encode())
        self.dim = None if d is None else d + 1

    def peek(self) -> tuple[str, int]:
        if self.pos >= len(self.toks):
            return ("", self.end)
        return self.toks[self.pos]

    def take(self, expected: str | None = None) -> tuple[str, int]:
        tok = self.peek()
        if tok[0] == "":
            raise TreeSyntaxError("unexpected end of input", tok[1])
        if expected is not None and tok[0] != expected:
            raise TreeSyntaxError(f"expected {expected!r}, found {tok[0]!r}", tok[1])
        self.pos += 1
        return tok

    def integer(self) -> int:
        tok, off = self.take()
        try:
            val = int(tok)
        except ValueError:
            raise TreeSyntaxError(f"expected integer, found {tok!r}", off) from None
        if val < 0:
            raise TreeSyntaxError("negative index", off)
        return val

    def multiindex(self) -> Multi:
        _, start = self.take("[")
        vals = [self.integer()]
        while self.peek()[0] == ",":
            self.take(",")
            vals.append(self.integer())
        self.take("]")
        if self.dim is None:
            self.dim = len(vals)
        elif len(vals) != self.dim:
            raise TreeSyntaxError(f"multi-index has {len(vals)} entries, expected {self.dim}", start)
        return tuple((i, v) for i, v in enumerate(vals) if v)

    # A parsed term is either LEAF or (edges, decoration) of a node under construction.
    def term(self):
        tok, off = self.peek()
        if tok == "Xi":
            self.take()
            return LEAF
        self.take("(")
        head, hoff = self.take()
        if head == "I":
            sub = self.term()
            res = ([Edge(self._finish(sub), ())], ())
        elif head == "D":
            idx = self.integer()
            if self.dim is not None and idx >= self.dim:
                raise TreeSyntaxError(f"derivative index {idx} out of range", hoff)
            sub = self.term()
            if sub is LEAF or len(sub[0]) != 1:
                raise TreeSyntaxError("D must wrap a single edge", hoff)
            (e,), deco = sub
            res = ([Edge(e.child, multi_add(e.decoration, ((idx, 1),)))], deco)
        elif head == "X":
            m = self.multiindex()
            sub = self.term()
            if sub is LEAF:
                raise TreeSyntaxError("X cannot decorate a noise leaf", hoff)
            res = (list(sub[0]), multi_add(sub[1], m))
        elif head == "*":
            parts = [self.term()]
            while self.peek()[0] not in (")", ""):
                parts.append(self.term())
            edges: list[Edge] = []
            deco: Multi = ()
            for part in parts:
                if part is LEAF:
                    raise TreeSyntaxError("a noise leaf cannot be a product factor", hoff)
                edges.extend(part[0])
                deco = multi_add(deco, part[1])
            res = (edges, deco)
        else:
            raise TreeSyntaxError(f"unknown constructor {head!r}", hoff)
        self.take(")")
        return res

    def _finish(self, t) -> Node:
        if t is LEAF:
            return LEAF
        return make_node(t[0], t[1], self.dim)


def parse_tree(text: str, d: int | None = None) -> DecoratedTree:
    """Parse a tree expression such as ``"(* (I Xi) (I Xi))"``.

    When ``d`` is given, node multi-indices must have ``d+1`` entries.
    """
    parser = _Parser(text, d)
    t = parser.term()
    tok, off = parser.peek()
    if tok:
        raise TreeSyntaxError(f"trailing input {tok!r}", off)
    root = parser._finish(t)
    return DecoratedTree(root, parser.dim)


def render_tree(tree: DecoratedTree) -> str:
    return tree.key


def from_children(tree_children: dict[int, list[int]], root: int, leaves: set[int]) -> DecoratedTree:
    """Canonical undecorated tree from an explicit child map."""

    def build(v: int) -> Node:
        if v in leaves:
            return LEAF
        return make_node([Edge(build(c)) for c in tree_children.get(v, [])])

    return DecoratedTree(build(root))


# ---------------------------------------------------------------- degree and classes


def degree_form(tree: DecoratedTree) -> LinearDegree:
    """Exact degree of ``tree`` as a linear form in (rho, d, kappa)."""
    p, q = tree.p, tree.q
    deg = LinearDegree(rho=Fraction(-p, 2) + q, d=Fraction(-p, 2), kappa=Fraction(-p))
    for i in range(tree.n_nodes):
        deg = deg + scaled_size(tree.node_decoration(i)) - scaled_size(tree.edge_decoration(i))
    return deg


def degree(tree: DecoratedTree, params: ModelParams) -> float:
    """(-(rho+d)/2 - kappa) p + rho q + |k|_s - |l|_s."""
    return degree_form(tree).value(params, with_kappa=True)


def degree_exact(tree: DecoratedTree, params: ModelParams) -> Fraction:
    """Exact degree at kappa = 0."""
    return degree_form(tree).at(params)


class TreeClass(enum.Enum):
    FULL = "full"
    ALMOST_FULL = "almost_full"
    OTHER = "other"


def classify(tree: DecoratedTree) -> TreeClass:
    outdeg = [len(tree.children(i)) for i in tree.inner]
    if all(k == 2 for k in outdeg):
        return TreeClass.FULL
    if sum(1 for k in outdeg if k == 1) == 1 and all(k in (1, 2) for k in outdeg):
        return TreeClass.ALMOST_FULL
    return TreeClass.OTHER


def n_inner(tree: DecoratedTree) -> int:
    return len(tree.inner)


def n_sym(tree: DecoratedTree) -> int:
    """Inner nodes whose two child branches are identical."""
    count = 0
    for i in tree.inner:
        edges = tree.node(i).edges
        if len(edges) == 2 and edges[0].key == edges[1].key:
            count += 1
    return count


def symmetry_factor(tree: DecoratedTree) -> int:
    return 2 ** n_sym(tree)


def is_planted(tree: DecoratedTree) -> bool:
    return not tree.root.leaf and len(tree.root.edges) == 1


class UpsilonKind(enum.Enum):
    CONSTANT = "constant"
    LINEAR_IN_U = "linear_in_u"
    GRADIENT = "gradient"


@dataclass(frozen=True)
class Upsilon:
    kind: UpsilonKind
    coefficient: int
    index: int | None = None


def upsilon(tree: DecoratedTree) -> Upsilon:
    """Coefficient 2^{n_inner} and the u-dependence of the counterterm."""
    cls = classify(tree)
    if cls is TreeClass.OTHER:
        raise ValueError(f"upsilon is defined for full or almost-full trees, got {tree}")
    coeff = 2 ** n_inner(tree)
    decos = [tree.node_decoration(i) for i in tree.inner if tree.node_decoration(i)]
    if cls is TreeClass.FULL:
        if decos:
            raise ValueError("full trees carry no node decoration")
        return Upsilon(UpsilonKind.CONSTANT, coeff)
    if not decos:
        return Upsilon(UpsilonKind.LINEAR_IN_U, coeff)
    if len(decos) == 1 and len(decos[0]) == 1 and decos[0][0][1] == 1 and decos[0][0][0] >= 1:
        return Upsilon(UpsilonKind.GRADIENT, coeff, decos[0][0][0])
    raise ValueError("at most one spatial monomial X_i is allowed")


def in_kernel_of_E(tree: DecoratedTree) -> bool:
    """True when the expectation vanishes: odd leaf count, planted, or odd in a coordinate."""
    if tree.p % 2 == 1 or is_planted(tree):
        return True
    parity: dict[int, int] = {}
    for i in range(tree.n_nodes):
        for m in (tree.node_decoration(i), tree.edge_decoration(i)):
            for idx, v in m:
                if idx >= 1:
                    parity[idx] = parity.get(idx, 0) + v
    return any(v % 2 for v in parity.values())


# ---------------------------------------------------------------- enumeration


@lru_cache(maxsize=None)
def _full_nodes(n: int) -> tuple[Node, ...]:
    if n == 1:
        return (LEAF,)
    out: list[Node] = []
    for a in range(1, n // 2 + 1):
        for A in _full_nodes(a):
            for B in _full_nodes(n - a):
                if a == n - a and A.key > B.key:
                    continue
                out.append(make_node([Edge(A), Edge(B)]))
    return tuple(out)


def _check_cap(k: int, cap: int) -> None:
    if k < 0:
        raise ValueError("k must be non-negative")
    if k > cap:
        raise ResourceLimitError(f"k={k} exceeds the enumeration cap {cap}")


def enumerate_full(k: int, cap: int = DEFAULT_ENUMERATION_CAP) -> list[DecoratedTree]:
    """All full binary trees with 2k+2 leaves, in canonical order."""
    _check_cap(k, cap)
    return sorted((DecoratedTree(n) for n in _full_nodes(2 * k + 2)), key=lambda t: t.key)


def _unary_insertions(node: Node) -> Iterator[Node]:
    """Nodes obtained by subdividing exactly one edge strictly below ``node``."""
    for j, e in enumerate(node.edges):
        rest = node.edges[:j] + node.edges[j + 1:]
        yield make_node(rest + (Edge(make_node([Edge(e.child)])),))
        if not e.child.leaf:
            for sub in _unary_insertions(e.child):
                yield make_node(rest + (Edge(sub),))


def enumerate_almost_full(k: int, cap: int = DEFAULT_ENUMERATION_CAP) -> list[DecoratedTree]:
    """All almost-full trees with 2k+2 leaves (a full tree with one unary node)."""
    _check_cap(k, cap)
    seen: dict[str, Node] = {}
    for full in _full_nodes(2 * k + 2):
        planted = make_node([Edge(full)])
        seen[planted.key] = planted
        for n in _unary_insertions(full):
            seen[n.key] = n
    return [DecoratedTree(seen[key]) for key in sorted(seen)]


@lru_cache(maxsize=None)
def wedderburn_etherington(p: int) -> int:
    """Number of unordered full binary trees with p leaves."""
    if p < 1:
        raise ValueError("p must be positive")
    if p == 1:
        return 1
    total = 0
    for i in range(1, (p + 1) // 2):
        total += wedderburn_etherington(i) * wedderburn_etherington(p - i)
    if p % 2 == 0:
        a = wedderburn_etherington(p // 2)
        total += a * (a + 1) // 2
    return total


class CountertermTrees(NamedTuple):
    full: list[DecoratedTree]
    almost_full: list[DecoratedTree]
    marginal: frozenset[str]


def enumerate_counterterm_trees(params: ModelParams, cap: int = DEFAULT_ENUMERATION_CAP) -> CountertermTrees:
    """Full and almost-full trees of non-positive degree surviving the kernel filter.

    Trees of degree exactly 0 (at kappa = 0) are included and reported in ``marginal``.
    """
    full: list[DecoratedTree] = []
    almost: list[DecoratedTree] = []
    marginal: set[str] = set()
    for family, out, gen in (("full", full, enumerate_full), ("almost", almost, enumerate_almost_full)):
        k = 0
        while True:
            p = 2 * k + 2
            q = 2 * p - 2 if family == "full" else 2 * p - 1
            deg = LinearDegree(rho=Fraction(-p, 2) + q, d=Fraction(-p, 2)).at(params)
            if deg > 0:
                break
            for t in gen(k, cap):
                if in_kernel_of_E(t):
                    continue
                out.append(t)
                if deg == 0:
                    marginal.add(t.key)
            k += 1
    return CountertermTrees(full, almost, frozenset(marginal))

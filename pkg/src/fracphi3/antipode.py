"""Reduced twisted antipode on trees by extraction and contraction.

Subtrees are handled as node-id sets ("handles") of the ambient tree so that
every embedding of an isomorphic subtree is counted separately.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product
from typing import Iterable

from .trees import (
    LEAF,
    DecoratedTree,
    Edge,
    ModelParams,
    Multi,
    Node,
    degree_form,
    make_node,
    multi_add,
    parse_tree,
)

Handle = frozenset[int]


@dataclass(frozen=True)
class TreeForestTerm:
    """coefficient * (product of factors) * contracted."""

    factors: tuple[DecoratedTree, ...]
    contracted: DecoratedTree
    coefficient: int

    def to_json(self) -> dict:
        return {"factors": [f.key for f in self.factors], "contracted": self.contracted.key,
                "coeff": self.coefficient}


def _candidate_sets(tree: DecoratedTree, v: int) -> list[frozenset[int]]:
    """Connected node sets topped at ``v`` whose inner nodes keep at least one child."""
    if tree.is_leaf(v):
        return [frozenset([v])]
    kids = tree.children(v)
    out: list[frozenset[int]] = []
    for r in range(1, len(kids) + 1):
        for chosen in combinations(kids, r):
            for parts in product(*(_candidate_sets(tree, c) for c in chosen)):
                out.append(frozenset([v]).union(*parts))
    return out


def _subtree_shape(tree: DecoratedTree, nodes: frozenset[int]) -> tuple[int, int, int, int]:
    """(leaves, edges, unary nodes, boundary children) of an embedded subtree."""
    leaves = unary = boundary = 0
    for v in nodes:
        if tree.is_leaf(v):
            leaves += 1
            continue
        inside = sum(1 for c in tree.children(v) if c in nodes)
        boundary += len(tree.children(v)) - inside
        if inside == 1:
            unary += 1
    return leaves, len(nodes) - 1, unary, boundary


def subtree_tree(tree: DecoratedTree, nodes: Handle) -> DecoratedTree:
    """The embedded subtree as a canonical tree of its own."""
    top = min(nodes)

    def build(v: int) -> Node:
        if tree.is_leaf(v):
            return LEAF
        edges = [Edge(build(c), tree.edge_decoration(c)) for c in tree.children(v) if c in nodes]
        return make_node(edges, tree.node_decoration(v), tree.dim)

    return DecoratedTree(build(top), tree.dim)


def is_divergent_subtree(tree: DecoratedTree, nodes: Handle, params: ModelParams) -> bool:
    top = min(nodes)
    if top == 0 or tree.is_leaf(top):
        return False
    leaves, edges, unary, boundary = _subtree_shape(tree, nodes)
    if unary != 1 or boundary < 1 or leaves % 2:
        return False
    if sum(1 for c in tree.children(top) if c in nodes) != 2:
        return False
    return degree_form(subtree_tree(tree, nodes)).at(params) < 0


def divergent_subtrees(tree: DecoratedTree, params: ModelParams) -> list[Handle]:
    """Embedded almost-full, non-planted subtrees of negative degree avoiding the root.

    A subtree must leave at least one child of its nodes outside, otherwise its
    contraction would create a childless inner node.
    """
    found: list[Handle] = []
    for v in tree.inner:
        if v == 0:
            continue
        for s in _candidate_sets(tree, v):
            if is_divergent_subtree(tree, s, params):
                found.append(s)
    return sorted(found, key=lambda h: tuple(sorted(h)))


def _disjoint_families(items: list[Handle]) -> Iterable[tuple[Handle, ...]]:
    def rec(start: int, chosen: list[Handle], used: frozenset[int]):
        for i in range(start, len(items)):
            if used.isdisjoint(items[i]):
                chosen.append(items[i])
                yield tuple(chosen)
                yield from rec(i + 1, chosen, used | items[i])
                chosen.pop()

    yield from rec(0, [], frozenset())


def admissible_subforests(tree: DecoratedTree, params: ModelParams) -> list[tuple[Handle, ...]]:
    """Non-empty families of pairwise node-disjoint divergent subtrees."""
    return list(_disjoint_families(divergent_subtrees(tree, params)))


def contract(tree: DecoratedTree, subforest: Iterable[Handle]) -> DecoratedTree:
    """Collapse every subtree of ``subforest`` to a single node."""
    forest = list(subforest)
    owner: dict[int, int] = {}
    for k, s in enumerate(forest):
        for v in s:
            if v in owner:
                raise ValueError("subforest members overlap")
            owner[v] = k
    tops = {min(s): k for k, s in enumerate(forest)}

    def build(v: int) -> Node:
        if v in tops:
            s = forest[tops[v]]
            deco: Multi = ()
            edges = []
            for u in sorted(s):
                deco = multi_add(deco, tree.node_decoration(u))
                for c in tree.children(u):
                    if c not in s:
                        edges.append(Edge(build(c), tree.edge_decoration(c)))
            return make_node(edges, deco, tree.dim)
        if tree.is_leaf(v):
            return LEAF
        edges = [Edge(build(c), tree.edge_decoration(c)) for c in tree.children(v)]
        return make_node(edges, tree.node_decoration(v), tree.dim)

    return DecoratedTree(build(0), tree.dim)


# Term key: (sorted factor keys, contracted key).
_Key = tuple[tuple[str, ...], str]


@lru_cache(maxsize=None)
def _expand(tree_key: str, dim: int | None, params: ModelParams) -> tuple[tuple[_Key, int], ...]:
    tree = parse_tree(tree_key, None if dim is None else dim - 1)
    acc: dict[_Key, int] = {((), tree.key): -1}
    for forest in admissible_subforests(tree, params):
        residual = contract(tree, forest).key
        expansions = [_expand(subtree_tree(tree, s).key, dim, params) for s in forest]
        for combo in product(*expansions):
            coeff = -1
            factors: list[str] = []
            for (facs, res), c in combo:
                coeff *= c
                factors.extend(facs)
                factors.append(res)
            key = (tuple(sorted(factors)), residual)
            acc[key] = acc.get(key, 0) + coeff
    return tuple(sorted((k, c) for k, c in acc.items() if c))


def twisted_antipode(tree: DecoratedTree, params: ModelParams) -> list[TreeForestTerm]:
    """Recursive expansion  A(t) = -t - sum_F A(t_1)...A(t_n) * t/F  with merged terms."""
    d = None if tree.dim is None else tree.dim - 1
    terms = []
    for (facs, res), c in _expand(tree.key, tree.dim, params):
        terms.append(TreeForestTerm(tuple(parse_tree(f, d) for f in facs), parse_tree(res, d), c))
    return terms

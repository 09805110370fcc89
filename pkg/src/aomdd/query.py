"""Read-only queries over compiled diagrams."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .compile import CompileStats, diagram_size
from .core import ZERO, Aomdd, MetaNode


class QueryError(ValueError):
    pass


@dataclass(frozen=True)
class QueryResult:
    value: float
    skipped_variable_correction_applied: bool


def _full(a: Aomdd, x) -> Sequence[int]:
    n = len(a.domains)
    if isinstance(x, Mapping):
        if set(x) != set(range(n)):
            raise QueryError("assignment must cover every variable")
        x = [x[v] for v in range(n)]
    if len(x) != n:
        raise QueryError("assignment must cover every variable")
    for v, (val, k) in enumerate(zip(x, a.domains)):
        if not 0 <= val < k:
            raise QueryError(f"value {val} out of range for variable {v}")
    return x


def eval_assignment(a: Aomdd, x) -> float:
    """Root constant times the arc weights selected by ``x``."""
    x = _full(a, x)
    if a.root[0] is ZERO:
        return 0.0
    value = a.root_constant
    stack = [n for n in a.root if isinstance(n, MetaNode)]
    while stack and value != 0:
        node = stack.pop()
        j = x[node.var]
        value *= node.weights[j]
        kids = node.children[j]
        if kids[0] is ZERO:
            return 0.0
        stack.extend(c for c in kids if isinstance(c, MetaNode))
    return value


def _subtree_mass(a: Aomdd) -> list[int]:
    """Number of assignments to each pseudo-tree subtree."""
    tree = a.tree
    mass = [1] * tree.n
    for v in reversed(tree.preorder):
        m = a.domains[v]
        for c in tree.children[v]:
            m *= mass[c]
        mass[v] = m
    return mass


def partition(a: Aomdd) -> QueryResult:
    """Sum over all full assignments, correcting for variables skipped by
    redundancy elimination."""
    if a.root[0] is ZERO or a.root_constant == 0:
        return QueryResult(0.0, False)
    mass = _subtree_mass(a)
    corrected = False

    def skip(covered: int, comp: tuple) -> int:
        below = 1
        for c in comp:
            if isinstance(c, MetaNode):
                below *= mass[c.var]
        return covered // below

    # children sit deeper in preorder, so this order visits them first
    position = a.tree.position
    memo: dict[int, float] = {}
    for node in sorted(a.nodes(), key=lambda nd: position[nd.var], reverse=True):
        covered = mass[node.var] // a.domains[node.var]
        total = 0.0
        for w, kids in zip(node.weights, node.children):
            if w == 0 or kids[0] is ZERO:
                continue
            factor = skip(covered, kids)
            if factor != 1:
                corrected = True
            term = w * factor
            for c in kids:
                if isinstance(c, MetaNode):
                    term *= memo[c.uid]
            total += term
        memo[node.uid] = total

    everything = math.prod(mass[r] for r in a.tree.roots)
    factor = skip(everything, a.root)
    if factor != 1:
        corrected = True
    result = a.root_constant * factor
    for c in a.root:
        if isinstance(c, MetaNode):
            result *= memo[c.uid]
    return QueryResult(result, corrected)


def partition_function(a: Aomdd) -> float:
    return partition(a).value


def count_solutions(a: Aomdd, tol: float = 1e-6) -> int:
    z = partition_function(a)
    n = round(z)
    if abs(z - n) > tol:
        raise QueryError(f"partition value {z!r} is not an integer count")
    return int(n)


def stats(a: Aomdd) -> CompileStats:
    """Size of the diagram, merged with its compile statistics when present."""
    nodes, edges = diagram_size(a)
    base = a.compile_stats
    if isinstance(base, CompileStats):
        return CompileStats(base.cm_or_nodes, nodes, edges, base.wall_time,
                            base.induced_width, base.tree_depth, base.cm_bound, base.method)
    return CompileStats(None, nodes, edges, 0.0, a.tree.induced_width, a.tree.depth)


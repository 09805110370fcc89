"""The two compilation pipelines: bucket-scheduled APPLY and AND/OR search
with context caching, plus a harness comparing their outputs."""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass, field

from .apply import combine_bucket, factor_to_chain_aomdd
from .core import (ONE, ZERO, Aomdd, AndOrGraph, Isomorphism, NodeStore, OrNode,
                   isomorphic)
from .model import GraphicalModel
from .structure import (PseudoTree, buckets, min_fill_ordering, primal_graph,
                        pseudo_tree_from_ordering)


@dataclass
class CompileStats:
    cm_or_nodes: int | None = None
    aomdd_meta_nodes: int = 0
    aomdd_edges: int = 0
    wall_time: float = 0.0
    induced_width: int = 0
    tree_depth: int = 0
    cm_bound: int | None = None
    method: str = ""

    @property
    def ratio(self) -> float | None:
        if self.cm_or_nodes is None:
            return None
        return self.cm_or_nodes / max(self.aomdd_meta_nodes, 1)


def default_tree(model: GraphicalModel, seed: int = 0, randomize: bool = False) -> PseudoTree:
    g = primal_graph(model)
    return pseudo_tree_from_ordering(g, min_fill_ordering(g, seed, randomize))


def diagram_size(a: Aomdd) -> tuple[int, int]:
    """Nonterminal meta-node count and edge count (one per value/child pair)."""
    nodes = a.nodes()
    edges = sum(len(kids) for n in nodes for kids in n.children)
    return len(nodes), edges


def _constant_factors(model: GraphicalModel) -> float:
    c = 1.0
    for f in model.factors:
        if not f.scope:
            c *= float(f.table[0])
    return c


def _finish_stats(a: Aomdd, stats: CompileStats, tree: PseudoTree, start: float) -> None:
    stats.aomdd_meta_nodes, stats.aomdd_edges = diagram_size(a)
    stats.induced_width = tree.induced_width
    stats.tree_depth = tree.depth
    stats.wall_time = time.perf_counter() - start
    a.compile_stats = stats


def compile_ve(model: GraphicalModel, tree: PseudoTree | None = None, digits: int = 12,
               reduce_redundant: bool = True) -> Aomdd:
    """Join bucket contents with APPLY from the deepest bucket upward.

    The bucket variable is never eliminated: each bucket's combined diagram
    moves to the parent bucket, and the roots' results form the output.
    """
    start = time.perf_counter()
    if tree is None:
        tree = default_tree(model)
    _ensure_recursion(tree)
    store = NodeStore(model.domains, tree, digits, reduce_redundant)
    placed = buckets(model, tree)
    contents: list[list[Aomdd]] = [
        [factor_to_chain_aomdd(model.factors[i], tree, store) for i in idx] for idx in placed]
    finals: list[Aomdd] = []
    for var in reversed(tree.preorder):
        if not contents[var]:
            continue
        message = combine_bucket(contents[var], store)
        parent = tree.parent[var]
        if parent is None or message.root[0] is ONE or message.root[0] is ZERO:
            finals.append(message)
        else:
            contents[parent].append(message)
    result = combine_bucket(finals, store)
    const = _constant_factors(model)
    if const != 1.0:
        result = _scaled(result, const)
    _finish_stats(result, CompileStats(method="ve"), tree, start)
    return result


def _scaled(a: Aomdd, c: float) -> Aomdd:
    value = a.root_constant * c
    if value == 0:
        return Aomdd((ZERO,), 0.0, a.store, a.tree)
    return Aomdd(a.root, value, a.store, a.tree)


class _Searcher:
    """Depth-first AND/OR traversal with OR-context caching."""

    def __init__(self, model: GraphicalModel, tree: PseudoTree, store: NodeStore | None,
                 caching: bool = True):
        self.model = model
        self.tree = tree
        self.store = store
        self.caching = caching
        placed = buckets(model, tree)
        self.bucket_fns = [
            [(f.table, tuple(zip(f.scope, f.strides))) for f in (model.factors[i] for i in idx)]
            for idx in placed]
        self.cache: list[dict] = [dict() for _ in range(model.n)]
        self.or_nodes = 0
        self.assignment = [0] * model.n

    def arc_weight(self, var: int) -> float:
        x = self.assignment
        w = 1.0
        for table, pairs in self.bucket_fns[var]:
            idx = 0
            for v, stride in pairs:
                idx += x[v] * stride
            w *= table[idx]
            if w == 0:
                return 0.0
        return float(w)

    def solve(self, var: int):
        """Reduced composition and constant for the subproblem rooted at ``var``."""
        ctx = self.tree.context[var]
        key = tuple(self.assignment[c] for c in ctx)
        table = self.cache[var]
        if self.caching:
            hit = table.get(key)
            if hit is not None:
                return hit
        self.or_nodes += 1
        arcs = []
        for j in range(self.model.domains[var]):
            self.assignment[var] = j
            w = self.arc_weight(var)
            if w == 0:
                arcs.append((0.0, (ZERO,)))
                continue
            comp: list = []
            for child in self.tree.children[var]:
                sub, const = self.solve(child)
                if sub[0] is ZERO:
                    w = 0.0
                    break
                w *= const
                comp.extend(sub)
            arcs.append((w, comp) if w else (0.0, (ZERO,)))
        result = self.store.make_meta_node(var, arcs)
        if self.caching:
            table[key] = result
        return result

    def trace(self, var: int) -> OrNode:
        """Raw context-minimal graph below ``var`` (no reduction)."""
        ctx = self.tree.context[var]
        key = tuple(self.assignment[c] for c in ctx)
        table = self.cache[var]
        if self.caching:
            hit = table.get(key)
            if hit is not None:
                return hit
        self.or_nodes += 1
        weights = []
        children: list = []
        for j in range(self.model.domains[var]):
            self.assignment[var] = j
            w = self.arc_weight(var)
            weights.append(w)
            if w == 0:
                children.append(None)
            else:
                children.append([self.trace(c) for c in self.tree.children[var]])
        node = OrNode(var, weights, children)
        if self.caching:
            table[key] = node
        return node


def _ensure_recursion(tree: PseudoTree) -> None:
    need = 4 * (tree.depth + 1) + 200
    if sys.getrecursionlimit() < need:
        sys.setrecursionlimit(need)


def context_bound(model: GraphicalModel, tree: PseudoTree) -> int:
    """Number of distinct (variable, context value) pairs."""
    return sum(tree.context_sizes(model.domains))


def compile_search(model: GraphicalModel, tree: PseudoTree | None = None, digits: int = 12,
                   reduce_redundant: bool = True) -> Aomdd:
    """AND/OR search over the context-minimal graph, reducing on retraction."""
    start = time.perf_counter()
    if tree is None:
        tree = default_tree(model)
    _ensure_recursion(tree)
    store = NodeStore(model.domains, tree, digits, reduce_redundant)
    search = _Searcher(model, tree, store)
    constant = _constant_factors(model)
    root: list = []
    for r in tree.roots:
        if constant == 0:
            break
        sub, const = search.solve(r)
        if sub[0] is ZERO:
            constant = 0.0
            break
        constant *= const
        root.extend(sub)
    comp = store.canonical_children(None, root)
    if constant == 0:
        result = Aomdd((ZERO,), 0.0, store, tree)
    else:
        result = Aomdd(comp, constant, store, tree)
    stats = CompileStats(cm_or_nodes=search.or_nodes, cm_bound=context_bound(model, tree),
                         method="search")
    if stats.cm_or_nodes > stats.cm_bound:
        raise RuntimeError(
            f"explored {stats.cm_or_nodes} OR nodes, above the context bound {stats.cm_bound}")
    _finish_stats(result, stats, tree, start)
    return result


def search_trace(model: GraphicalModel, tree: PseudoTree, caching: bool = True) -> tuple[AndOrGraph, int]:
    """Unreduced AND/OR graph explored by search, and its OR node count.

    With ``caching`` off the result is the full AND/OR search tree.
    """
    _ensure_recursion(tree)
    search = _Searcher(model, tree, None, caching=caching)
    roots = [search.trace(r) for r in tree.roots]
    return AndOrGraph(roots, _constant_factors(model)), search.or_nodes


@dataclass
class PipelineReport:
    match: bool
    ve: Aomdd
    search: Aomdd
    detail: Isomorphism
    messages: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.match


def compare_pipelines(model: GraphicalModel, tree: PseudoTree | None = None,
                      digits: int = 12, reduce_redundant: bool = True) -> PipelineReport:
    """Compile with both pipelines and check the outputs coincide."""
    if tree is None:
        tree = default_tree(model)
    ve = compile_ve(model, tree, digits, reduce_redundant)
    se = compile_search(model, tree, digits, reduce_redundant)
    messages = []
    vs, ss = ve.compile_stats, se.compile_stats
    if vs.aomdd_meta_nodes != ss.aomdd_meta_nodes:
        messages.append(f"meta-node counts differ: ve {vs.aomdd_meta_nodes}, "
                        f"search {ss.aomdd_meta_nodes}")
    if vs.aomdd_edges != ss.aomdd_edges:
        messages.append(f"edge counts differ: ve {vs.aomdd_edges}, search {ss.aomdd_edges}")
    if not math.isclose(ve.root_constant, se.root_constant, rel_tol=1e-9):
        messages.append(f"root constants differ: ve {ve.root_constant!r}, "
                        f"search {se.root_constant!r}")
    iso = isomorphic(ve, se, rel_tol=None)
    if not iso.match:
        where = "" if iso.depth is None else f" (first divergent layer: depth {iso.depth})"
        messages.append(iso.message + where)
    return PipelineReport(not messages, ve, se, iso, messages)

"""Weighted AOMDD substrate.

A diagram is built from meta-nodes: one variable plus, per value, an arc
weight and a list of child meta-nodes. The product of the weights along a
solution subtree, times the diagram's root constant, is the value of the
corresponding full assignment.

Child lists ("compositions") are tuples in one of three shapes: ``(ONE,)``,
``(ZERO,)`` or a non-empty tuple of meta-nodes sorted by the preorder
position of their variables in the pseudo tree. The root of a diagram is a
composition as well, since eliminating a redundant root leaves a product of
independent subdiagrams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .structure import PseudoTree


class DiagramError(ValueError):
    pass


class Terminal:
    __slots__ = ("value", "uid")

    def __init__(self, value: int):
        self.value = value
        self.uid = value

    def __repr__(self):
        return f"<terminal {self.value}>"


ZERO = Terminal(0)
ONE = Terminal(1)


class MetaNode:
    __slots__ = ("var", "weights", "children", "key", "uid")

    def __init__(self, var: int, weights: tuple[float, ...],
                 children: tuple[tuple, ...], key: tuple, uid: int):
        self.var = var
        self.weights = weights
        self.children = children
        self.key = key
        self.uid = uid

    def __repr__(self):
        return f"<meta-node #{self.uid} var={self.var} weights={self.weights}>"


def normalize(weights: Sequence[float]) -> tuple[tuple[float, ...] | None, float]:
    """Scale nonnegative weights to sum 1; return them with the promoted sum.

    An all-zero input yields ``(None, 0.0)``.
    """
    ws = [float(w) for w in weights]
    for w in ws:
        if not math.isfinite(w) or w < 0:
            raise DiagramError(f"weights must be finite and nonnegative, got {w}")
    total = math.fsum(ws)
    if total == 0:
        return None, 0.0
    return tuple(w / total for w in ws), total


def is_terminal(composition: tuple) -> bool:
    return isinstance(composition[0], Terminal)


class NodeStore:
    """Unique table for the meta-nodes of one compilation.

    Weights enter node keys rounded to ``digits`` significant digits. A
    lookup also probes the neighbouring rounding bucket of any weight that
    sits within ``10**-(digits+1)`` relative of a rounding boundary, so that
    floating-point noise cannot split two nodes that ought to merge.
    """

    def __init__(self, domains: Sequence[int], tree: PseudoTree, digits: int = 12,
                 reduce_redundant: bool = True):
        if digits < 1:
            raise DiagramError("digits must be positive")
        self.domains = tuple(domains)
        self.tree = tree
        self.digits = digits
        self.reduce_redundant = reduce_redundant
        self._slack = 10.0 ** -(digits + 1)
        self._table: dict[tuple, MetaNode] = {}
        self.nodes: list[MetaNode] = []
        self._next_uid = 2

    def __len__(self):
        return len(self.nodes)

    # -- weights -------------------------------------------------------------

    def quantize(self, w: float) -> float:
        if w == 0:
            return 0.0
        return float(f"{w:.{self.digits - 1}e}")

    def _candidates(self, w: float) -> tuple[float, ...]:
        q = self.quantize(w)
        if w == 0:
            return (q,)
        lo = self.quantize(w * (1 - self._slack))
        hi = self.quantize(w * (1 + self._slack))
        return tuple(dict.fromkeys((q, lo, hi)))

    def weights_close(self, a: float, b: float) -> bool:
        return bool(set(self._candidates(a)) & set(self._candidates(b)))

    def key_of(self, var: int, weights: Sequence[float], children: Sequence[tuple]) -> tuple:
        return (var, tuple(self.quantize(w) for w in weights),
                tuple(tuple(c.uid for c in kids) for kids in children))

    def _probe_keys(self, var, weights, children):
        kids = tuple(tuple(c.uid for c in ch) for ch in children)
        options = [self._candidates(w) for w in weights]
        if all(len(o) == 1 for o in options):
            yield (var, tuple(o[0] for o in options), kids)
            return
        stack = [()]
        for opts in options:
            stack = [prefix + (o,) for prefix in stack for o in opts]
        for combo in stack:
            yield (var, combo, kids)

    # -- compositions ----------------------------------------------------------

    def canonical_children(self, var: int | None, children: Iterable) -> tuple:
        """Drop ONE terminals, collapse on ZERO, order nodes by the pseudo tree."""
        nodes = []
        for c in children:
            if c is ZERO:
                return (ZERO,)
            if c is ONE:
                continue
            if not isinstance(c, MetaNode):
                raise DiagramError(f"not a diagram node: {c!r}")
            nodes.append(c)
        if not nodes:
            return (ONE,)
        tree = self.tree
        nodes.sort(key=lambda c: tree.position[c.var])
        for i, c in enumerate(nodes):
            if var is not None and not tree.is_ancestor(var, c.var):
                raise DiagramError(
                    f"child variable {c.var} is not below variable {var} in the pseudo tree")
            # sorted by preorder, so an ancestor always comes first
            for prev in nodes[:i]:
                if prev.var == c.var or tree.is_ancestor(prev.var, c.var):
                    raise DiagramError("child list contains related variables")
        return tuple(nodes)

    def make_meta_node(self, var: int, arcs: Sequence[tuple[float, Iterable]]) -> tuple[tuple, float]:
        """Normalize, reduce and hash-cons one meta-node.

        ``arcs`` holds one ``(weight, children)`` pair per value. Returns the
        resulting composition and the constant promoted to the caller.
        """
        k = self.domains[var]
        if len(arcs) != k:
            raise DiagramError(f"variable {var} needs {k} arcs, got {len(arcs)}")
        raw = []
        kids = []
        for w, children in arcs:
            children = self.canonical_children(var, children)
            if w == 0 or children[0] is ZERO:
                raw.append(0.0)
                kids.append((ZERO,))
            else:
                raw.append(w)
                kids.append(children)
        weights, constant = normalize(raw)
        if weights is None:
            return (ZERO,), 0.0
        if self.reduce_redundant and self.is_redundant(weights, kids):
            return kids[0], constant / k
        for key in self._probe_keys(var, weights, kids):
            node = self._table.get(key)
            if node is not None:
                return (node,), constant
        key = self.key_of(var, weights, kids)
        node = MetaNode(var, weights, tuple(kids), key, self._next_uid)
        self._next_uid += 1
        self._table[key] = node
        self.nodes.append(node)
        return (node,), constant

    def is_redundant(self, weights: Sequence[float], children: Sequence[tuple]) -> bool:
        first = children[0]
        return (all(ch == first for ch in children[1:])
                and all(self.weights_close(w, weights[0]) for w in weights[1:]))

    def copy(self) -> "NodeStore":
        other = NodeStore(self.domains, self.tree, self.digits, self.reduce_redundant)
        other._table = dict(self._table)
        other.nodes = list(self.nodes)
        other._next_uid = self._next_uid
        return other


@dataclass(eq=False)
class Aomdd:
    root: tuple
    root_constant: float
    store: NodeStore
    tree: PseudoTree
    compile_stats: object = field(default=None)

    @property
    def domains(self) -> tuple[int, ...]:
        return self.store.domains

    def nodes(self) -> list[MetaNode]:
        """Reachable meta-nodes in depth-first order from the root."""
        seen = set()
        order = []
        stack = [c for c in reversed(self.root) if isinstance(c, MetaNode)]
        while stack:
            node = stack.pop()
            if node.uid in seen:
                continue
            seen.add(node.uid)
            order.append(node)
            for kids in reversed(node.children):
                for c in reversed(kids):
                    if isinstance(c, MetaNode) and c.uid not in seen:
                        stack.append(c)
        return order

    def copy(self) -> "Aomdd":
        return Aomdd(self.root, self.root_constant, self.store.copy(), self.tree,
                     self.compile_stats)


def constant_diagram(value: float, store: NodeStore) -> Aomdd:
    if value < 0 or not math.isfinite(value):
        raise DiagramError("constant must be finite and nonnegative")
    root = (ONE,) if value > 0 else (ZERO,)
    return Aomdd(root, float(value), store, store.tree)


def check_reduced(a: Aomdd) -> bool:
    """True when no two nodes share a key and no node is redundant.

    Both the store and the nodes reachable from the root are inspected, and
    every reachable node must be the registered representative of its key.
    """
    store = a.store
    candidates = {id(n): n for n in store.nodes}
    reachable = a.nodes()
    for n in reachable:
        candidates.setdefault(id(n), n)
    for node in candidates.values():
        if len(node.weights) != store.domains[node.var]:
            return False
        if abs(math.fsum(node.weights) - 1.0) > 1e-9:
            return False
        if store.is_redundant(node.weights, node.children):
            return False
    by_shape: dict[tuple, list[MetaNode]] = {}
    for node in candidates.values():
        shape = (node.var, tuple(tuple(c.uid for c in kids) for kids in node.children))
        peers = by_shape.setdefault(shape, [])
        for other in peers:
            if all(store.weights_close(x, y) for x, y in zip(node.weights, other.weights)):
                return False
        peers.append(node)
    table_ids = {id(n) for n in store._table.values()}
    return all(id(n) in table_ids for n in reachable)


# -- unreduced AND/OR graphs -----------------------------------------------------

@dataclass(eq=False)
class OrNode:
    """An OR node of an unreduced AND/OR graph with raw arc weights.

    ``children[j]`` is the list of child OR nodes below value ``j``; ``None``
    marks an arc into terminal 0 and an empty list an arc into terminal 1.
    """

    var: int
    weights: list[float]
    children: list[list["OrNode"] | None]


@dataclass(eq=False)
class AndOrGraph:
    roots: list[OrNode]
    constant: float = 1.0

    def or_nodes(self) -> list[OrNode]:
        seen = {}
        stack = list(self.roots)
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen[id(node)] = node
            for kids in node.children:
                if kids:
                    stack.extend(kids)
        return list(seen.values())

    def value(self, assignment: Sequence[int]) -> float:
        result = self.constant
        for r in self.roots:
            result *= _or_value(r, assignment)
        return result


def _or_value(node: OrNode, x: Sequence[int]) -> float:
    j = x[node.var]
    kids = node.children[j]
    if kids is None:
        return 0.0
    v = node.weights[j]
    for c in kids:
        if v == 0:
            break
        v *= _or_value(c, x)
    return v


def reduce(graph: AndOrGraph, tree: PseudoTree, domains: Sequence[int], digits: int = 12,
           reduce_redundant: bool = True, store: NodeStore | None = None) -> Aomdd:
    """Bottom-up normalization and reduction of an AND/OR graph.

    OR nodes are processed deepest pseudo-tree variable first; each becomes a
    meta-node through the unique table and its promoted constant is
    multiplied into the weight of every parent arc that reaches it.
    """
    if store is None:
        store = NodeStore(domains, tree, digits, reduce_redundant)
    nodes = graph.or_nodes()
    for node in nodes:
        if len(node.weights) != store.domains[node.var] or len(node.children) != len(node.weights):
            raise DiagramError(f"OR node for variable {node.var} has the wrong arity")
        for kids in node.children:
            for c in kids or ():
                if not tree.is_ancestor(node.var, c.var):
                    raise DiagramError(
                        f"graph is not layered by the pseudo tree: {c.var} below {node.var}")
    nodes.sort(key=lambda nd: tree.position[nd.var], reverse=True)
    done: dict[int, tuple[tuple, float]] = {}
    for node in nodes:
        arcs = []
        for w, kids in zip(node.weights, node.children):
            if kids is None or w == 0:
                arcs.append((0.0, (ZERO,)))
                continue
            comp: list = []
            for c in kids:
                sub, const = done[id(c)]
                w *= const
                comp.extend(sub)
            arcs.append((w, comp))
        done[id(node)] = store.make_meta_node(node.var, arcs)
    constant = graph.constant
    root: list = []
    for r in graph.roots:
        sub, const = done[id(r)]
        constant *= const
        root.extend(sub)
    root_comp = store.canonical_children(None, root)
    if root_comp[0] is ZERO or constant == 0:
        return Aomdd((ZERO,), 0.0, store, tree)
    return Aomdd(root_comp, constant, store, tree)


def to_and_or_graph(a: Aomdd) -> AndOrGraph:
    """Expand a diagram back into raw OR nodes (weights kept as stored)."""
    made: dict[int, OrNode] = {}

    def convert(node: MetaNode) -> OrNode:
        hit = made.get(node.uid)
        if hit is not None:
            return hit
        children = []
        for kids in node.children:
            if kids[0] is ZERO:
                children.append(None)
            elif kids[0] is ONE:
                children.append([])
            else:
                children.append([convert(c) for c in kids])
        out = OrNode(node.var, list(node.weights), children)
        made[node.uid] = out
        return out

    if a.root[0] is ZERO:
        return AndOrGraph([], 0.0)
    roots = [] if a.root[0] is ONE else [convert(n) for n in a.root]
    return AndOrGraph(roots, a.root_constant)


# -- comparison ----------------------------------------------------------------

@dataclass
class Isomorphism:
    match: bool
    message: str = ""
    variable: int | None = None
    depth: int | None = None

    def __bool__(self):
        return self.match


def isomorphic(a: Aomdd, b: Aomdd, rel_tol: float | None = 1e-9) -> Isomorphism:
    """Simultaneous traversal from both roots.

    Variables, child orders and weights (up to quantization) must agree and
    the node correspondence must be a bijection. Root constants are compared
    with ``rel_tol`` unless it is None.
    """
    store = a.store
    tree = a.tree
    mapping: dict[int, int] = {}
    reverse: dict[int, int] = {}

    def mismatch(msg, var=None):
        depth = None if var is None else tree.depth_of[var]
        return Isomorphism(False, msg, var, depth)

    def compare_comp(ca, cb, where):
        if len(ca) != len(cb):
            return mismatch(f"{where}: child lists differ in length",
                            ca[0].var if isinstance(ca[0], MetaNode) else None)
        for x, y in zip(ca, cb):
            if isinstance(x, Terminal) or isinstance(y, Terminal):
                if x is not y:
                    return mismatch(f"{where}: terminal mismatch")
                continue
            if x.var != y.var:
                return mismatch(f"{where}: variable {x.var} vs {y.var}", x.var)
            if x.uid in mapping or y.uid in reverse:
                if mapping.get(x.uid) != y.uid or reverse.get(y.uid) != x.uid:
                    return mismatch(f"sharing differs at variable {x.var}", x.var)
                continue
            mapping[x.uid] = y.uid
            reverse[y.uid] = x.uid
            stack.append((x, y))
        return None

    stack: list[tuple[MetaNode, MetaNode]] = []
    bad = compare_comp(a.root, b.root, "root")
    if bad:
        return bad
    while stack:
        x, y = stack.pop()
        for j, (wx, wy) in enumerate(zip(x.weights, y.weights)):
            if not store.weights_close(wx, wy):
                return mismatch(f"weight {j} of variable {x.var}: {wx!r} vs {wy!r}", x.var)
        for j, (ca, cb) in enumerate(zip(x.children, y.children)):
            bad = compare_comp(ca, cb, f"variable {x.var} value {j}")
            if bad:
                return bad
    if rel_tol is not None and not math.isclose(a.root_constant, b.root_constant,
                                                rel_tol=rel_tol, abs_tol=0.0):
        return Isomorphism(False, f"root constants differ: {a.root_constant!r} vs "
                                      f"{b.root_constant!r}")
    return Isomorphism(True)


def keys_match(k1: tuple, k2: tuple, store: NodeStore) -> bool:
    """Key equality allowing the one-bucket rounding slack of the store."""
    return (k1[0] == k2[0] and k1[2] == k2[2] and len(k1[1]) == len(k2[1])
            and all(store.weights_close(x, y) for x, y in zip(k1[1], k2[1])))

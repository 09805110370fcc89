"""Chain diagrams for single factors and the weighted APPLY product."""

from __future__ import annotations

from typing import Sequence

from .core import ONE, ZERO, Aomdd, DiagramError, MetaNode, NodeStore
from .model import Factor
from .structure import PseudoTree


def factor_to_chain_aomdd(f: Factor, tree: PseudoTree, store: NodeStore) -> Aomdd:
    """Diagram of one factor along the pseudo-tree path through its scope."""
    order = sorted(range(len(f.scope)), key=lambda i: tree.depth_of[f.scope[i]])
    chain = [f.scope[i] for i in order]
    for a, b in zip(chain, chain[1:]):
        if not tree.is_ancestor(a, b):
            raise DiagramError(f"scope {f.scope} does not lie on one pseudo-tree path")
    if not chain:
        return _constant(float(f.table[0]), store)
    strides = f.strides
    chain_strides = [strides[i] for i in order]
    dims = [f.dims[i] for i in order]

    def build(level: int, offset: int):
        var = chain[level]
        arcs = []
        for j in range(dims[level]):
            idx = offset + j * chain_strides[level]
            if level == len(chain) - 1:
                arcs.append((float(f.table[idx]), (ONE,)))
            else:
                comp, const = build(level + 1, idx)
                arcs.append((const, comp))
        return store.make_meta_node(var, arcs)

    comp, const = build(0, 0)
    return _finish(comp, const, store)


def _constant(value: float, store: NodeStore) -> Aomdd:
    return _finish((ONE,), value, store)


def _finish(comp: tuple, const: float, store: NodeStore) -> Aomdd:
    if comp[0] is ZERO or const == 0:
        return Aomdd((ZERO,), 0.0, store, store.tree)
    return Aomdd(comp, const, store, store.tree)


class ApplyCache(dict):
    """Results of ``apply`` keyed by operand identities."""


def apply(v1, ws: Sequence, store: NodeStore, cache: ApplyCache | None = None) -> tuple[tuple, float]:
    """Product of ``v1`` with the nodes ``ws``.

    ``var(v1)`` must be an ancestor of every ``var(w)``, or equal to it when
    there is a single operand; the ``ws`` must be pairwise unrelated in the
    pseudo tree. Returns a composition and a promoted constant.
    """
    if cache is None:
        cache = ApplyCache()
    if v1 is ZERO or any(w is ZERO for w in ws):
        return (ZERO,), 0.0
    ws = [w for w in ws if w is not ONE]
    if v1 is ONE:
        if not ws:
            return (ONE,), 1.0
        return multiply_all([(w,) for w in ws], store, cache)
    if not ws:
        return (v1,), 1.0
    tree = store.tree
    x = v1.var
    same = len(ws) == 1 and ws[0].var == x
    if not same:
        for w in ws:
            if not tree.is_ancestor(x, w.var):
                raise DiagramError(
                    f"operand variable {w.var} is not below variable {x} in the pseudo tree")
    key = (v1.uid, tuple(sorted(w.uid for w in ws)))
    hit = cache.get(key)
    if hit is not None:
        return hit

    arcs = []
    for j, (weight, kids) in enumerate(zip(v1.weights, v1.children)):
        if same:
            weight *= ws[0].weights[j]
            extra = ws[0].children[j]
        else:
            extra = ws
        if weight == 0 or kids[0] is ZERO or extra[0] is ZERO:
            arcs.append((0.0, (ZERO,)))
            continue
        comp, const = _product(kids, extra, store, cache)
        if comp[0] is ZERO:
            arcs.append((0.0, (ZERO,)))
        else:
            arcs.append((weight * const, comp))
    result = store.make_meta_node(x, arcs)
    cache[key] = result
    return result


def _groups(left: Sequence, right: Sequence, tree: PseudoTree):
    """Split two antichains of nodes into (root, descendants) groups.

    Each group is rooted at its shallowest member; all other members come
    from the opposite antichain and lie below (or at) the root's variable.
    """
    nodes = [n for n in left if isinstance(n, MetaNode)] + \
            [n for n in right if isinstance(n, MetaNode)]
    nodes.sort(key=lambda n: (tree.depth_of[n.var], tree.position[n.var]))
    groups: list[tuple[MetaNode, list[MetaNode]]] = []
    for n in nodes:
        for root, members in groups:
            if root.var == n.var or tree.is_ancestor(root.var, n.var):
                members.append(n)
                break
        else:
            groups.append((n, []))
    return groups


def _product(left: Sequence, right: Sequence, store: NodeStore, cache: ApplyCache):
    if left[0] is ZERO or right[0] is ZERO:
        return (ZERO,), 0.0
    constant = 1.0
    comp: list = []
    for root, members in _groups(left, right, store.tree):
        sub, const = apply(root, members, store, cache)
        if sub[0] is ZERO:
            return (ZERO,), 0.0
        constant *= const
        comp.extend(sub)
    return store.canonical_children(None, comp), constant


def multiply_all(comps: Sequence[tuple], store: NodeStore, cache: ApplyCache | None = None):
    """Left fold of the pairwise product over several compositions."""
    if cache is None:
        cache = ApplyCache()
    acc: tuple = (ONE,)
    constant = 1.0
    for comp in comps:
        acc, const = _product(acc, comp, store, cache)
        if acc[0] is ZERO:
            return (ZERO,), 0.0
        constant *= const
    return acc, constant


def _root_depth(a: Aomdd) -> int:
    if not isinstance(a.root[0], MetaNode):
        return -1
    return min(a.tree.depth_of[n.var] for n in a.root)


def combine_bucket(diagrams: Sequence[Aomdd], store: NodeStore) -> Aomdd:
    """Join all diagrams of a bucket, deepest roots first."""
    if not diagrams:
        return _constant(1.0, store)
    ordered = sorted(diagrams, key=_root_depth, reverse=True)
    constant = 1.0
    comp: tuple = (ONE,)
    for a in ordered:
        if a.store is not store:
            raise DiagramError("bucket operands must share one node store")
        constant *= a.root_constant
        cache = ApplyCache()
        comp, const = _product(comp, a.root, store, cache)
        constant *= const
        if comp[0] is ZERO or constant == 0:
            return Aomdd((ZERO,), 0.0, store, store.tree)
    return _finish(comp, constant, store)

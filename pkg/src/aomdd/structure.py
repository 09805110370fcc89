"""Primal graphs, elimination orderings, induced width, pseudo trees,
OR contexts and buckets."""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

from .model import GraphicalModel, ModelError


class PseudoTreeError(ModelError):
    pass


@dataclass(frozen=True)
class PrimalGraph:
    adjacency: tuple[frozenset[int], ...]

    @property
    def n(self) -> int:
        return len(self.adjacency)

    def edges(self) -> set[tuple[int, int]]:
        return {(u, v) for u, nbrs in enumerate(self.adjacency) for v in nbrs if u < v}

    def neighbors(self, v: int) -> frozenset[int]:
        return self.adjacency[v]

    @classmethod
    def from_edges(cls, n: int, edges) -> "PrimalGraph":
        adj = [set() for _ in range(n)]
        for u, v in edges:
            if u == v:
                continue
            adj[u].add(v)
            adj[v].add(u)
        return cls(tuple(frozenset(a) for a in adj))


def primal_graph(model: GraphicalModel) -> PrimalGraph:
    edges = []
    for f in model.factors:
        edges.extend(combinations(f.scope, 2))
    return PrimalGraph.from_edges(model.n, edges)


def _check_ordering(g: PrimalGraph, order: Sequence[int]) -> list[int]:
    order = [int(v) for v in order]
    if sorted(order) != list(range(g.n)):
        raise ModelError("ordering must be a permutation of all variables")
    return order


def _induced_earlier(g: PrimalGraph, order: Sequence[int]) -> list[set[int]]:
    """Earlier neighbours of every vertex in the induced ordered graph."""
    pos = {v: i for i, v in enumerate(order)}
    adj = [set(nbrs) for nbrs in g.adjacency]
    earlier = [set() for _ in range(g.n)]
    for v in reversed(order):
        prev = {u for u in adj[v] if pos[u] < pos[v]}
        earlier[v] = prev
        for a, b in combinations(prev, 2):
            adj[a].add(b)
            adj[b].add(a)
    return earlier


def induced_width(g: PrimalGraph, order: Sequence[int]) -> int:
    order = _check_ordering(g, order)
    return max((len(e) for e in _induced_earlier(g, order)), default=0)


def min_fill_ordering(g: PrimalGraph, seed: int = 0, randomize: bool = False) -> list[int]:
    """Greedy min-fill ordering.

    Positions are filled from last to first: at each step the remaining
    vertex whose elimination adds the fewest fill edges goes to the last open
    slot. Ties go to the lowest index unless ``randomize`` is set, in which
    case a ``seed``-driven shuffle breaks them.
    """
    rng = random.Random(seed)
    adj = [set(nbrs) for nbrs in g.adjacency]
    remaining = set(range(g.n))
    reversed_order = []
    while remaining:
        best_fill = None
        best = []
        for v in sorted(remaining):
            nbrs = adj[v]
            fill = sum(1 for a, b in combinations(nbrs, 2) if b not in adj[a])
            if best_fill is None or fill < best_fill:
                best_fill, best = fill, [v]
            elif fill == best_fill:
                best.append(v)
        v = rng.choice(best) if randomize else best[0]
        nbrs = adj[v]
        for a, b in combinations(nbrs, 2):
            adj[a].add(b)
            adj[b].add(a)
        for u in nbrs:
            adj[u].discard(v)
        remaining.remove(v)
        reversed_order.append(v)
    return reversed_order[::-1]


@dataclass(frozen=True, eq=False)
class PseudoTree:
    """A rooted forest over the variables whose arcs cover every primal edge.

    ``context[x]`` lists, root first, the ancestors of ``x`` adjacent to ``x``
    or to one of its descendants.
    """

    parent: tuple[int | None, ...]
    children: tuple[tuple[int, ...], ...]
    roots: tuple[int, ...]
    context: tuple[tuple[int, ...], ...]
    depth_of: tuple[int, ...]
    preorder: tuple[int, ...]
    position: tuple[int, ...]
    tin: tuple[int, ...]
    tout: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.parent)

    @property
    def root(self) -> int:
        if len(self.roots) != 1:
            raise PseudoTreeError("pseudo tree is a forest")
        return self.roots[0]

    @property
    def depth(self) -> int:
        return max(self.depth_of, default=0)

    @property
    def induced_width(self) -> int:
        return max((len(c) for c in self.context), default=0)

    def is_ancestor(self, a: int, b: int) -> bool:
        """True when ``a`` is a strict ancestor of ``b``."""
        return a != b and self.tin[a] <= self.tin[b] and self.tout[b] <= self.tout[a]

    def on_path(self, a: int, b: int) -> bool:
        return a == b or self.is_ancestor(a, b) or self.is_ancestor(b, a)

    def ancestors(self, v: int) -> list[int]:
        path = []
        p = self.parent[v]
        while p is not None:
            path.append(p)
            p = self.parent[p]
        return path[::-1]

    def subtree(self, v: int) -> list[int]:
        lo, hi = self.position[v], self.position[v]
        while hi + 1 < self.n and self.is_ancestor(v, self.preorder[hi + 1]):
            hi += 1
        return list(self.preorder[lo:hi + 1])

    def context_sizes(self, domains: Sequence[int]) -> list[int]:
        sizes = []
        for ctx in self.context:
            size = 1
            for y in ctx:
                size *= domains[y]
            sizes.append(size)
        return sizes

    def dump(self) -> str:
        lines = []
        for v in self.preorder:
            parent = -1 if self.parent[v] is None else self.parent[v]
            lines.append(" ".join(map(str, (v, parent, self.depth_of[v]) + self.context[v])))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_parents(cls, parents: Sequence[int | None], g: PrimalGraph,
                     child_rank: Sequence[int] | None = None) -> "PseudoTree":
        """Build a pseudo tree from a parent map and verify it covers ``g``.

        Children are ordered by ``child_rank`` (defaults to variable index).
        """
        n = len(parents)
        if n != g.n:
            raise PseudoTreeError("pseudo tree and graph disagree on the variable count")
        rank = list(child_rank) if child_rank is not None else list(range(n))
        kids: list[list[int]] = [[] for _ in range(n)]
        roots = []
        for v, p in enumerate(parents):
            if p is None:
                roots.append(v)
            elif not 0 <= p < n or p == v:
                raise PseudoTreeError(f"invalid parent {p} for variable {v}")
            else:
                kids[p].append(v)
        for lst in kids:
            lst.sort(key=lambda v: rank[v])
        roots.sort(key=lambda v: rank[v])

        depth = [0] * n
        tin = [0] * n
        tout = [0] * n
        preorder: list[int] = []
        clock = 0
        for r in roots:
            stack = [(r, 0, False)]
            while stack:
                v, d, done = stack.pop()
                if done:
                    tout[v] = clock
                    clock += 1
                    continue
                depth[v] = d
                tin[v] = clock
                clock += 1
                preorder.append(v)
                stack.append((v, d, True))
                for c in reversed(kids[v]):
                    stack.append((c, d + 1, False))
        if len(preorder) != n:
            raise PseudoTreeError("parent map contains a cycle")
        position = [0] * n
        for i, v in enumerate(preorder):
            position[v] = i

        def is_anc(a, b):
            return a != b and tin[a] <= tin[b] and tout[b] <= tout[a]

        for u, v in g.edges():
            if not (is_anc(u, v) or is_anc(v, u)):
                raise PseudoTreeError(f"primal edge ({u}, {v}) is not a back-arc")

        # context: ancestors adjacent to the subtree, collected bottom-up
        reach: list[set[int]] = [set() for _ in range(n)]
        context: list[tuple[int, ...]] = [()] * n
        for v in reversed(preorder):
            acc = set(g.adjacency[v])
            for c in kids[v]:
                acc |= reach[c]
            acc = {u for u in acc if is_anc(u, v)}
            reach[v] = acc
            context[v] = tuple(sorted(acc, key=lambda u: depth[u]))
        return cls(tuple(parents), tuple(tuple(k) for k in kids), tuple(roots),
                   tuple(context), tuple(depth), tuple(preorder), tuple(position),
                   tuple(tin), tuple(tout))


def pseudo_tree_from_ordering(g: PrimalGraph, order: Sequence[int]) -> PseudoTree:
    """Each variable hangs below its latest earlier neighbour in the induced graph."""
    order = _check_ordering(g, order)
    pos = {v: i for i, v in enumerate(order)}
    earlier = _induced_earlier(g, order)
    parents = [max(e, key=lambda u: pos[u]) if e else None for e in earlier]
    return PseudoTree.from_parents(parents, g, child_rank=[pos[v] for v in range(g.n)])


def parse_ordering(text: str, n: int) -> list[int]:
    order = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            order.append(int(line.split()[0]))
        except ValueError:
            raise ModelError(f"line {lineno}: expected a variable index") from None
    if sorted(order) != list(range(n)):
        raise ModelError("ordering file must list every variable exactly once")
    return order


def parse_pseudo_tree(text: str, g: PrimalGraph) -> PseudoTree:
    """Read a pseudo tree dump (``var parent depth context...``).

    Only the parent column is trusted; depths and contexts are recomputed and
    the back-arc property is verified.
    """
    parents: list[int | None] = [None] * g.n
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            v, p = int(parts[0]), int(parts[1])
        except (ValueError, IndexError):
            raise PseudoTreeError(f"line {lineno}: expected 'var parent ...'") from None
        if not 0 <= v < g.n or v in seen:
            raise PseudoTreeError(f"line {lineno}: bad or repeated variable {v}")
        seen.add(v)
        parents[v] = None if p < 0 else p
    if len(seen) != g.n:
        raise PseudoTreeError("pseudo tree file must list every variable")
    return PseudoTree.from_parents(parents, g)


def buckets(model: GraphicalModel, tree: PseudoTree) -> list[list[int]]:
    """Factor indices per variable: each factor goes to its deepest scope variable.

    Factors with an empty scope are constants and belong to no bucket.
    """
    result: list[list[int]] = [[] for _ in range(model.n)]
    for i, f in enumerate(model.factors):
        if not f.scope:
            continue
        deepest = max(f.scope, key=lambda v: tree.depth_of[v])
        for v in f.scope:
            if v != deepest and not tree.is_ancestor(v, deepest):
                raise PseudoTreeError(
                    f"scope of factor {i} does not lie on one root-to-leaf path")
        result[deepest].append(i)
    return result

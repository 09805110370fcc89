import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aomdd.compile import compile_search, compile_ve, search_trace
from aomdd.core import (ONE, ZERO, AndOrGraph, DiagramError, MetaNode, NodeStore, OrNode,
                        check_reduced, isomorphic, normalize, reduce, to_and_or_graph)
from aomdd.model import GraphicalModel, evaluate_assignment, make_factor
from aomdd.query import eval_assignment, partition_function
from aomdd.structure import PrimalGraph, PseudoTree, primal_graph

from randmodels import random_model


def test_normalize_examples():
    assert normalize([0.2, 0.6, 0.2]) == ((0.2, 0.6, 0.2), 1.0)
    w, c = normalize([2, 3])
    assert c == 5.0 and w == pytest.approx((0.4, 0.6))
    assert normalize([0, 0]) == (None, 0.0)


@pytest.mark.parametrize("bad", [[-1, 2], [float("inf"), 1], [float("nan"), 1]])
def test_normalize_rejects(bad):
    with pytest.raises(DiagramError):
        normalize(bad)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1e9, allow_nan=False), min_size=1, max_size=5))
def test_normalize_reconstructs(raw):
    w, c = normalize(raw)
    if w is None:
        assert all(x == 0 for x in raw)
        return
    assert math.fsum(w) == pytest.approx(1.0, abs=1e-12)
    for x, y in zip(raw, w):
        assert y * c == pytest.approx(x, rel=1e-12, abs=1e-300)


def _single_store(k=2):
    g = PrimalGraph.from_edges(1, [])
    return NodeStore((k,), PseudoTree.from_parents([None], g))


def test_make_meta_node_examples():
    store = _single_store()
    assert store.make_meta_node(0, [(0.5, [ONE]), (0.5, [ONE])]) == ((ONE,), 0.5)
    comp, c = store.make_meta_node(0, [(2, [ONE]), (3, [ONE])])
    assert c == 5.0
    assert comp[0].weights == pytest.approx((0.4, 0.6))
    again, _ = store.make_meta_node(0, [(2, [ONE]), (3, [ONE])])
    assert again[0] is comp[0]
    assert len(store) == 1
    assert store.make_meta_node(0, [(0, [ZERO]), (0, [ZERO])]) == ((ZERO,), 0.0)


def test_make_meta_node_arity_and_layering():
    store = _single_store()
    with pytest.raises(DiagramError):
        store.make_meta_node(0, [(1, [ONE])])
    g = PrimalGraph.from_edges(2, [(0, 1)])
    s2 = NodeStore((2, 2), PseudoTree.from_parents([None, 0], g))
    (low,), _ = s2.make_meta_node(1, [(1, [ONE]), (2, [ONE])])
    with pytest.raises(DiagramError):
        s2.make_meta_node(1, [(1, [low]), (1, [ONE])])


def test_near_boundary_weights_merge():
    store = _single_store()
    w = 0.1234567890125
    (a,), _ = store.make_meta_node(0, [(w, [ONE]), (1 - w, [ONE])])
    nudged = w * (1 + 1e-14)
    (b,), _ = store.make_meta_node(0, [(nudged, [ONE]), (1 - nudged, [ONE])])
    assert a is b


def _proportional_model():
    # M=0; X1=1, X2=2 below M; Y1=3, Y2=4 below M.
    domains = (2,) * 5
    rng = np.random.default_rng(7)
    f0 = rng.uniform(0.1, 1, 4)
    g0 = rng.uniform(0.1, 1, 4)
    f = np.concatenate([f0, 2 * f0])
    g = np.concatenate([g0, 0.5 * g0])
    model = GraphicalModel(domains, (make_factor([0, 1, 2], f, domains),
                                     make_factor([0, 3, 4], g, domains)))
    tree = PseudoTree.from_parents([None, 0, 1, 0, 3], primal_graph(model))
    return model, tree


def test_proportional_subtrees_below_m_merge():
    model, tree = _proportional_model()
    graph, _ = search_trace(model, tree)
    kept = reduce(graph, tree, model.domains, reduce_redundant=False)
    (m,) = kept.root
    assert m.var == 0
    assert m.children[0] == m.children[1]
    assert m.weights == pytest.approx((0.5, 0.5))
    full = reduce(graph, tree, model.domains)
    assert [n.var for n in full.root] == [1, 3]
    # the removed binary M hands up c/2; the skipped-variable factor restores it
    assert 2 * full.root_constant == pytest.approx(kept.root_constant, rel=1e-12)
    assert partition_function(full) == pytest.approx(partition_function(kept), rel=1e-12)
    assert check_reduced(full)


def test_reduce_is_idempotent(rng):
    for _ in range(20):
        model = random_model(rng, n_range=(3, 9))
        a = compile_search(model)
        b = reduce(to_and_or_graph(a), a.tree, model.domains)
        assert isomorphic(a, b)
        assert b.root_constant == pytest.approx(a.root_constant, rel=1e-12)
        assert len(b.store) == len(a.nodes())


def test_reduce_all_zero():
    g = PrimalGraph.from_edges(2, [(0, 1)])
    tree = PseudoTree.from_parents([None, 0], g)
    leaf = OrNode(1, [0.0, 0.0], [None, None])
    top = OrNode(0, [1.0, 1.0], [[leaf], [leaf]])
    a = reduce(AndOrGraph([top]), tree, (2, 2))
    assert a.root == (ZERO,) and a.root_constant == 0.0


def test_reduce_rejects_unlayered():
    g = PrimalGraph.from_edges(2, [(0, 1)])
    tree = PseudoTree.from_parents([None, 0], g)
    upper = OrNode(0, [1.0, 1.0], [[], []])
    lower = OrNode(1, [1.0, 1.0], [[upper], []])
    with pytest.raises(DiagramError):
        reduce(AndOrGraph([lower]), tree, (2, 2))


def test_reduce_preserves_values(rng):
    for _ in range(30):
        model = random_model(rng, n_range=(3, 8))
        tree = compile_search(model).tree
        graph, _ = search_trace(model, tree)
        for redundant in (True, False):
            a = reduce(graph, tree, model.domains, reduce_redundant=redundant)
            for x in itertools.product(*(range(k) for k in model.domains)):
                expect = evaluate_assignment(model, x)
                assert graph.value(x) == pytest.approx(expect, rel=1e-12)
                assert eval_assignment(a, x) == pytest.approx(expect, rel=1e-9, abs=1e-300)


def test_check_reduced_detects_injected_nodes(c1c9, c1c9_tree):
    a = compile_ve(c1c9, c1c9_tree)
    assert check_reduced(a)

    dup = a.copy()
    victim = a.nodes()[3]
    twin = MetaNode(victim.var, victim.weights, victim.children, victim.key, 10**6)
    dup.store.nodes.append(twin)
    assert not check_reduced(dup)
    assert check_reduced(a)

    red = a.copy()
    k = a.domains[7]
    uniform = MetaNode(7, (1 / k,) * k, ((ONE,),) * k, None, 10**6 + 1)
    red.store.nodes.append(uniform)
    assert not check_reduced(red)


def test_isomorphic_reports_difference(c1c9, c1c9_tree):
    a = compile_ve(c1c9, c1c9_tree)
    b = compile_search(c1c9, c1c9_tree)
    assert isomorphic(a, b)
    other = compile_search(c1c9.with_factors(c1c9.factors[:-1]), c1c9_tree)
    res = isomorphic(a, other)
    assert not res
    assert res.message


def test_scaling_keeps_keys(rng):
    for _ in range(20):
        model = random_model(rng, n_range=(3, 9))
        fs = list(model.factors)
        fs[0] = fs[0].scaled(3.0)
        tree = compile_ve(model).tree
        a = compile_ve(model, tree)
        b = compile_ve(model.with_factors(fs), tree)
        assert sorted(map(repr, (n.key for n in a.store.nodes))) == \
            sorted(map(repr, (n.key for n in b.store.nodes)))
        assert b.root_constant == pytest.approx(3 * a.root_constant, rel=1e-12)

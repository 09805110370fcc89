import time

import numpy as np
import pytest

from aomdd.apply import factor_to_chain_aomdd
from aomdd.compile import (compare_pipelines, compile_search, compile_ve, default_tree,
                           search_trace, context_bound)
from aomdd.core import ONE, ZERO, NodeStore, check_reduced, isomorphic, reduce
from aomdd.model import GraphicalModel, brute_force_partition, make_factor
from aomdd.query import partition_function
from aomdd.structure import primal_graph, pseudo_tree_from_ordering

from conftest import C1_C9_SOLUTIONS
from randmodels import random_model

A, B, C, D = range(4)


def _three_factor_model(rng):
    domains = (2,) * 4
    scopes = [(A, B), (B, C), (A, D), (A,)]
    return GraphicalModel(domains, tuple(
        make_factor(s, rng.uniform(0.1, 1.0, 2 ** len(s)), domains) for s in scopes))


def test_three_factor_context_bound(rng):
    model = _three_factor_model(rng)
    tree = pseudo_tree_from_ordering(primal_graph(model), [A, B, C, D])
    a = compile_search(model, tree)
    s = a.compile_stats
    w = tree.induced_width
    assert s.cm_or_nodes <= model.n * 2 ** w
    assert s.cm_or_nodes <= context_bound(model, tree) == s.cm_bound
    assert partition_function(a) == pytest.approx(brute_force_partition(model), rel=1e-9)


def test_zero_row_gives_terminal_zero_branch():
    domains = (2, 2)
    model = GraphicalModel(domains, (make_factor([A, B], [0, 0, 0.3, 0.7], domains),))
    tree = pseudo_tree_from_ordering(primal_graph(model), [A, B])
    for a in (compile_search(model, tree), compile_ve(model, tree)):
        (top,) = a.root
        assert top.var == A
        assert top.weights[0] == 0.0
        assert top.children[0] == (ZERO,)


def test_c1_c9_counts(c1c9, c1c9_tree):
    for compile_fn in (compile_ve, compile_search):
        a = compile_fn(c1c9, c1c9_tree)
        s = a.compile_stats
        assert (s.aomdd_meta_nodes, s.aomdd_edges) == (18, 47)
        assert partition_function(a) == pytest.approx(C1_C9_SOLUTIONS)
        assert check_reduced(a)


def test_single_factor_equals_chain(bayes5):
    model = bayes5.with_factors(bayes5.factors[:1])
    tree = default_tree(model)
    a = compile_ve(model, tree)
    chain = factor_to_chain_aomdd(model.factors[0], tree, NodeStore(model.domains, tree))
    assert isomorphic(a, chain)


def test_disconnected_unaries():
    domains = (2, 2)
    model = GraphicalModel(domains, (make_factor([0], [0.5, 0.5], domains),
                                     make_factor([1], [0.25, 0.75], domains)))
    for a in (compile_ve(model), compile_search(model)):
        (node,) = a.root
        assert node.var == 1
        assert node.weights == (0.25, 0.75)
        assert a.root_constant == 0.5
        assert partition_function(a) == pytest.approx(1.0)


def test_constant_and_empty_models():
    domains = (2, 3)
    empty = GraphicalModel(domains, ())
    for a in (compile_ve(empty), compile_search(empty)):
        assert a.root == (ONE,)
        assert partition_function(a) == 6.0
    const = GraphicalModel(domains, (make_factor([], [2.5], domains),))
    assert partition_function(compile_ve(const)) == 15.0
    assert partition_function(compile_search(const)) == 15.0
    dead = GraphicalModel(domains, (make_factor([], [0.0], domains),))
    assert compile_search(dead).root == (ZERO,)
    assert compile_ve(dead).root == (ZERO,)


def test_search_tree_bound(rng):
    for _ in range(30):
        model = random_model(rng, n_range=(3, 9))
        tree = default_tree(model)
        k = max(model.domains)
        _, count = search_trace(model, tree, caching=False)
        assert count <= model.n * k ** (tree.depth + 1)
        _, cm = search_trace(model, tree)
        assert cm <= context_bound(model, tree)


def test_pipelines_agree_on_random_models(rng):
    for _ in range(80):
        model = random_model(rng)
        report = compare_pipelines(model)
        assert report, report.messages
        z = brute_force_partition(model)
        assert partition_function(report.ve) == pytest.approx(z, rel=1e-9, abs=1e-300)


def test_pipeline_mismatch_reports_layer(c1c9, c1c9_tree, monkeypatch):
    import aomdd.compile as comp
    real = comp.compile_search

    def skewed(model, tree=None, *args, **kw):
        return real(model.with_factors(model.factors[:-1]), tree, *args, **kw)

    monkeypatch.setattr(comp, "compile_search", skewed)
    report = comp.compare_pipelines(c1c9, c1c9_tree)
    assert not report
    assert report.messages


def test_trace_then_reduce_equals_search(rng):
    for _ in range(30):
        model = random_model(rng, n_range=(3, 10))
        tree = default_tree(model)
        graph, _ = search_trace(model, tree)
        a = reduce(graph, tree, model.domains)
        b = compile_search(model, tree)
        assert isomorphic(a, b)


def test_c1_c9_runtime(c1c9, c1c9_tree):
    start = time.perf_counter()
    compare_pipelines(c1c9, c1c9_tree)
    assert time.perf_counter() - start < 1.0


def test_deep_chain_does_not_overflow_recursion():
    n = 1500
    domains = (2,) * n
    f = [make_factor([i, i + 1], np.array([1.0, 0.5, 0.5, 1.0]), domains) for i in range(n - 1)]
    model = GraphicalModel(domains, tuple(f))
    tree = pseudo_tree_from_ordering(primal_graph(model), range(n))
    a = compile_search(model, tree)
    assert a.compile_stats.cm_or_nodes <= context_bound(model, tree)
    b = compile_ve(model, tree)
    assert isomorphic(a, b)
    expected = 2 * 1.5 ** (n - 1)
    assert partition_function(a) == pytest.approx(expected, rel=1e-9)

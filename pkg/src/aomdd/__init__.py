"""Weighted AND/OR multi-valued decision diagrams for graphical models."""

from .compile import CompileStats, compare_pipelines, compile_search, compile_ve
from .core import ONE, ZERO, Aomdd, MetaNode, NodeStore, check_reduced, isomorphic
from .model import (Factor, GraphicalModel, ModelError, brute_force_partition,
                    encode_constraints_as_factors, evaluate_assignment, parse_uai, write_uai)
from .query import count_solutions, eval_assignment, partition_function, stats
from .structure import PseudoTree, min_fill_ordering, primal_graph, pseudo_tree_from_ordering

__version__ = "0.1.0"

__all__ = [
    "Aomdd", "CompileStats", "Factor", "GraphicalModel", "MetaNode", "ModelError", "NodeStore",
    "ONE", "PseudoTree", "ZERO", "brute_force_partition", "check_reduced", "compare_pipelines",
    "compile_search", "compile_ve", "count_solutions", "encode_constraints_as_factors",
    "eval_assignment", "evaluate_assignment", "isomorphic", "min_fill_ordering",
    "parse_uai", "partition_function", "primal_graph", "pseudo_tree_from_ordering", "stats",
    "write_uai",
]

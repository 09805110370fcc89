"""Command-line driver: compile models, evaluate assignments, generate grids."""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .compile import CompileStats, compile_search, compile_ve, compare_pipelines
from .core import Aomdd, MetaNode
from .model import (GraphicalModel, ModelError, apply_evidence, make_factor, parse_evidence,
                    parse_uai, write_uai)
from .query import QueryError, eval_assignment, partition_function, stats
from .structure import (min_fill_ordering, parse_ordering, primal_graph,
                        pseudo_tree_from_ordering)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISMATCH = 2

STATS_COLUMNS = ["network", "method", "n", "d", "e", "w*", "h", "zeros%", "time",
                 "#cm", "#aomdd", "edges", "ratio"]


@dataclass
class RunConfig:
    input_path: str
    evidence_path: str | None = None
    method: str = "search"
    ordering_source: str = "min-fill"
    order_file: str | None = None
    redundancy_reduction: bool = True
    epsilon_digits: int = 12
    dot_path: str | None = None
    stats_path: str | None = None
    seed: int = 0
    random_ties: bool = False


def generate_grid(rows: int, cols: int, seed: int = 0, zero_fraction: float = 0.0) -> GraphicalModel:
    """Binary grid with one pairwise factor per grid edge.

    Entries are uniform in (0, 1]; a ``zero_fraction`` share of all entries
    is then set to 0. Entries consistent with a random witness assignment
    are never zeroed, so the model keeps at least one positive assignment.
    """
    if rows < 2 or cols < 2:
        raise ModelError("grid needs at least 2 rows and 2 columns")
    if not 0.0 <= zero_fraction < 1.0:
        raise ModelError("zero fraction must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    n = rows * cols
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    witness = rng.integers(0, 2, size=n)
    tables = [1.0 - rng.random(4) for _ in edges]
    eligible = [(i, j) for i, (u, v) in enumerate(edges) for j in range(4)
                if j != 2 * witness[u] + witness[v]]
    target = min(round(zero_fraction * 4 * len(edges)), len(eligible))
    for pick in rng.choice(len(eligible), size=target, replace=False):
        i, j = eligible[pick]
        tables[i][j] = 0.0
    domains = (2,) * n
    factors = tuple(make_factor(e, t, domains) for e, t in zip(edges, tables))
    return GraphicalModel(domains, factors)


# -- DOT -----------------------------------------------------------------------

def _fmt(w: float) -> str:
    return f"{w:.6g}"


def to_dot(a: Aomdd, names=None) -> str:
    """Directed graph text: record nodes per meta-node, boxes for terminals."""
    def name(v):
        return names[v] if names else f"X{v}"

    nodes = a.nodes()
    lines = ["digraph aomdd {",
             f'  label="root constant = {a.root_constant!r}";',
             "  labelloc=t;"]
    used_terminals = set()
    roots = {n.uid for n in a.root if isinstance(n, MetaNode)}
    for node in nodes:
        ports = "|".join(f"<v{j}>{j}: {_fmt(w)}" for j, w in enumerate(node.weights))
        extra = ", peripheries=2" if node.uid in roots else ""
        lines.append(f'  n{node.uid} [shape=record, label="{{{name(node.var)}|{{{ports}}}}}"{extra}];')
    edges = []
    for node in nodes:
        for j, kids in enumerate(node.children):
            for c in kids:
                if isinstance(c, MetaNode):
                    target = f"n{c.uid}"
                else:
                    target = f"t{c.value}"
                    used_terminals.add(c.value)
                edges.append(f'  n{node.uid}:v{j} -> {target} [label="{j}"];')
    if not nodes:
        used_terminals.add(a.root[0].value)
    for t in sorted(used_terminals):
        lines.append(f'  t{t} [shape=box, label="{t}"];')
    lines.extend(edges)
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- driver --------------------------------------------------------------------

def _load(config: RunConfig):
    text = Path(config.input_path).read_text()
    model = parse_uai(text)
    evidence = {}
    if config.evidence_path:
        evidence = parse_evidence(Path(config.evidence_path).read_text())
        model = apply_evidence(model, evidence)
    return model, evidence


def _tree(model: GraphicalModel, config: RunConfig):
    g = primal_graph(model)
    if config.order_file:
        order = parse_ordering(Path(config.order_file).read_text(), model.n)
    elif config.ordering_source == "natural":
        order = list(range(model.n))
    else:
        order = min_fill_ordering(g, config.seed, config.random_ties)
    return pseudo_tree_from_ordering(g, order)


def _row(network: str, model: GraphicalModel, evidence: dict, s: CompileStats) -> dict:
    ratio = s.ratio
    return {
        "network": network,
        "method": s.method,
        "n": model.n,
        "d": max(model.domains, default=0),
        "e": len(evidence),
        "w*": s.induced_width,
        "h": s.tree_depth,
        "zeros%": f"{100 * model.zero_fraction():.2f}",
        "time": f"{s.wall_time:.3f}",
        "#cm": "" if s.cm_or_nodes is None else s.cm_or_nodes,
        "#aomdd": s.aomdd_meta_nodes,
        "edges": s.aomdd_edges,
        "ratio": "" if ratio is None else f"{ratio:.2f}",
    }


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=STATS_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _compile(model, tree, config: RunConfig):
    """Returns the compiled diagrams and whether the pipelines disagreed."""
    digits = config.epsilon_digits
    reduced = config.redundancy_reduction
    if config.method == "ve":
        return [compile_ve(model, tree, digits, reduced)], False
    if config.method == "search":
        return [compile_search(model, tree, digits, reduced)], False
    report = compare_pipelines(model, tree, digits, reduced)
    if reduced:
        for msg in report.messages:
            print(f"pipeline mismatch: {msg}", file=sys.stderr)
        return [report.ve, report.search], not report.match
    # redundant nodes survive in one pipeline only; compare values
    z_ve, z_se = partition_function(report.ve), partition_function(report.search)
    mismatch = not math.isclose(z_ve, z_se, rel_tol=1e-9)
    if mismatch:
        print(f"pipeline mismatch: partition {z_ve!r} vs {z_se!r}", file=sys.stderr)
    return [report.ve, report.search], mismatch


def cmd_compile(config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    try:
        model, evidence = _load(config)
        start = time.perf_counter()
        tree = _tree(model, config)
        results, mismatch = _compile(model, tree, config)
        elapsed = time.perf_counter() - start
    except (OSError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    network = Path(config.input_path).stem
    rows = []
    for a in results:
        s = stats(a)
        if len(results) == 1:
            s.wall_time = elapsed
        rows.append(_row(network, model, evidence, s))
    text = _csv(rows)
    out.write(text)
    try:
        if config.stats_path:
            Path(config.stats_path).write_text(text)
        if config.dot_path:
            Path(config.dot_path).write_text(to_dot(results[-1], model.names))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_MISMATCH if mismatch else EXIT_OK


def parse_assignment(text: str, n: int) -> list[int]:
    values: dict[int, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if len(parts) != 2:
            raise ModelError(f"line {lineno}: expected 'varIndex valueIndex'")
        try:
            var, val = int(parts[0]), int(parts[1])
        except ValueError:
            raise ModelError(f"line {lineno}: expected integers") from None
        if not 0 <= var < n:
            raise ModelError(f"line {lineno}: variable {var} out of range")
        values[var] = val
    missing = [v for v in range(n) if v not in values]
    if missing:
        raise ModelError(f"assignment is partial; missing variables {missing[:10]}")
    return [values[v] for v in range(n)]


def cmd_eval(config: RunConfig, assignment_path: str, out=None) -> int:
    out = out or sys.stdout
    try:
        model, _ = _load(config)
        x = parse_assignment(Path(assignment_path).read_text(), model.n)
        tree = _tree(model, config)
        results, _ = _compile(model, tree, config)
        value = eval_assignment(results[-1], x)
    except (OSError, ModelError, QueryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out.write(repr(float(value)) + "\n")
    return EXIT_OK


def cmd_grid(rows: int, cols: int, seed: int, zero_fraction: float, output: str | None,
             out=None) -> int:
    out = out or sys.stdout
    try:
        model = generate_grid(rows, cols, seed, zero_fraction)
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = write_uai(model)
    if output:
        try:
            Path(output).write_text(text)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
    else:
        out.write(text)
    return EXIT_OK


def _add_compile_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("input", help="model in UAI format")
    p.add_argument("--method", choices=("ve", "search", "both"), default="search")
    p.add_argument("--order-file", help="elimination ordering, one variable per line")
    p.add_argument("--heuristic", choices=("min-fill", "natural"), default="min-fill")
    p.add_argument("--no-redundancy-reduction", action="store_true",
                   help="keep redundant meta-nodes (isomorphism merging only)")
    p.add_argument("--epsilon-digits", type=int, default=12,
                   help="significant digits used when comparing weights")
    p.add_argument("--evidence", help="evidence file: count, then 'var value' pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--random-ties", action="store_true",
                   help="break min-fill ties with a seeded shuffle")


def _config(args) -> RunConfig:
    return RunConfig(
        input_path=args.input,
        evidence_path=args.evidence,
        method=args.method,
        ordering_source="file" if args.order_file else args.heuristic,
        order_file=args.order_file,
        redundancy_reduction=not args.no_redundancy_reduction,
        epsilon_digits=args.epsilon_digits,
        dot_path=getattr(args, "dot", None),
        stats_path=getattr(args, "stats", None),
        seed=args.seed,
        random_ties=args.random_ties,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aomdd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a model and report statistics")
    _add_compile_options(p)
    p.add_argument("--dot", help="write the diagram in DOT format")
    p.add_argument("--stats", help="write the statistics CSV")

    p = sub.add_parser("eval", help="evaluate one full assignment on the compiled model")
    _add_compile_options(p)
    p.add_argument("assignment", help="file of 'varIndex valueIndex' lines")

    p = sub.add_parser("grid", help="generate a random grid network in UAI format")
    p.add_argument("rows", type=int)
    p.add_argument("cols", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zero-fraction", type=float, default=0.0)
    p.add_argument("-o", "--output")

    p = sub.add_parser("tree", help="print the pseudo tree: var parent depth context...")
    _add_compile_options(p)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "compile":
        return cmd_compile(_config(args))
    if args.command == "eval":
        return cmd_eval(_config(args), args.assignment)
    if args.command == "grid":
        return cmd_grid(args.rows, args.cols, args.seed, args.zero_fraction, args.output)
    config = _config(args)
    try:
        model, _ = _load(config)
        sys.stdout.write(_tree(model, config).dump())
    except (OSError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

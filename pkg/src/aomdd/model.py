"""Graphical models: factors, UAI ingestion, constraint encoding and the
brute-force oracle that the compiled diagrams are checked against."""

from __future__ import annotations

import ast
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

WEIGHTED = "weighted"
ZERO_ONE = "zero-one"

DEFAULT_ORACLE_CAP = 2 ** 24


class ModelError(ValueError):
    pass


class UaiFormatError(ModelError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class Factor:
    """A nonnegative table over an ordered scope.

    The table is flat and row-major: the last scope variable varies fastest.
    """

    scope: tuple[int, ...]
    table: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float).reshape(-1)
        table.setflags(write=False)
        object.__setattr__(self, "scope", tuple(int(v) for v in self.scope))
        object.__setattr__(self, "dims", tuple(int(k) for k in self.dims))
        object.__setattr__(self, "table", table)
        if len(self.scope) != len(self.dims):
            raise ModelError("scope and dims differ in length")
        if len(set(self.scope)) != len(self.scope):
            raise ModelError(f"repeated variable in scope {self.scope}")
        if table.size != math.prod(self.dims):
            raise ModelError(
                f"table has {table.size} entries, scope needs {math.prod(self.dims)}")
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise ModelError("factor entries must be finite and nonnegative")

    @property
    def strides(self) -> tuple[int, ...]:
        strides = []
        acc = 1
        for k in reversed(self.dims):
            strides.append(acc)
            acc *= k
        return tuple(reversed(strides))

    def value(self, assignment: Sequence[int]) -> float:
        idx = 0
        for var, stride in zip(self.scope, self.strides):
            idx += assignment[var] * stride
        return float(self.table[idx])

    def as_array(self) -> np.ndarray:
        return self.table.reshape(self.dims) if self.dims else self.table.reshape(())

    def scaled(self, c: float) -> "Factor":
        return Factor(self.scope, self.table * c, self.dims)


@dataclass(frozen=True, eq=False)
class GraphicalModel:
    domains: tuple[int, ...]
    factors: tuple[Factor, ...]
    kind: str = WEIGHTED
    names: tuple[str, ...] | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "domains", tuple(int(k) for k in self.domains))
        object.__setattr__(self, "factors", tuple(self.factors))
        if any(k < 1 for k in self.domains):
            raise ModelError("domain sizes must be at least 1")
        if self.kind not in (WEIGHTED, ZERO_ONE):
            raise ModelError(f"unknown model kind {self.kind!r}")
        n = len(self.domains)
        for i, f in enumerate(self.factors):
            for var, k in zip(f.scope, f.dims):
                if not 0 <= var < n:
                    raise ModelError(f"factor {i} references undeclared variable {var}")
                if self.domains[var] != k:
                    raise ModelError(f"factor {i} disagrees on the domain of variable {var}")
            if self.kind == ZERO_ONE and not np.all((f.table == 0) | (f.table == 1)):
                raise ModelError(f"factor {i} is not 0/1 in a zero-one model")
        if self.names is not None and len(self.names) != n:
            raise ModelError("one name per variable required")

    @property
    def n(self) -> int:
        return len(self.domains)

    def name(self, var: int) -> str:
        return self.names[var] if self.names else f"X{var}"

    def factor(self, scope: Sequence[int], table: Iterable[float]) -> Factor:
        """Build a factor over ``scope`` using this model's domains."""
        return Factor(tuple(scope), np.asarray(list(table), dtype=float),
                      tuple(self.domains[v] for v in scope))

    def with_factors(self, factors: Iterable[Factor], kind: str | None = None) -> "GraphicalModel":
        return GraphicalModel(self.domains, tuple(factors), kind or self.kind, self.names)

    def zero_fraction(self) -> float:
        total = sum(f.table.size for f in self.factors)
        if total == 0:
            return 0.0
        return sum(int(np.count_nonzero(f.table == 0)) for f in self.factors) / total


def make_factor(scope: Sequence[int], table: Iterable[float], domains: Sequence[int]) -> Factor:
    return Factor(tuple(scope), np.asarray(list(table), dtype=float),
                  tuple(domains[v] for v in scope))


# -- UAI -----------------------------------------------------------------------

def _tokens(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        for tok in line.split():
            yield tok, lineno


class _TokenStream:
    def __init__(self, text: str):
        self._it = _tokens(text)
        self.line = 0

    def next(self, what: str) -> str:
        try:
            tok, self.line = next(self._it)
        except StopIteration:
            raise UaiFormatError(f"unexpected end of file while reading {what}", self.line)
        return tok

    def int(self, what: str) -> int:
        tok = self.next(what)
        try:
            return int(tok)
        except ValueError:
            raise UaiFormatError(f"expected integer for {what}, got {tok!r}", self.line)

    def float(self, what: str) -> float:
        tok = self.next(what)
        try:
            return float(tok)
        except ValueError:
            raise UaiFormatError(f"expected number for {what}, got {tok!r}", self.line)

    def rest(self):
        return list(self._it)


def parse_uai(text: str) -> GraphicalModel:
    ts = _TokenStream(text)
    preamble = ts.next("preamble").upper()
    if preamble not in ("MARKOV", "BAYES"):
        raise UaiFormatError(f"unknown network type {preamble!r}", ts.line)
    n = ts.int("variable count")
    if n < 0:
        raise UaiFormatError("negative variable count", ts.line)
    domains = []
    for i in range(n):
        k = ts.int(f"domain size of variable {i}")
        if k < 1:
            raise UaiFormatError(f"domain size of variable {i} must be positive", ts.line)
        domains.append(k)
    r = ts.int("factor count")
    if r < 0:
        raise UaiFormatError("negative factor count", ts.line)
    scopes = []
    for i in range(r):
        arity = ts.int(f"arity of factor {i}")
        if arity < 0:
            raise UaiFormatError(f"negative arity for factor {i}", ts.line)
        scope = []
        for _ in range(arity):
            var = ts.int(f"scope of factor {i}")
            if not 0 <= var < n:
                raise UaiFormatError(f"factor {i}: variable index {var} out of range", ts.line)
            scope.append(var)
        if len(set(scope)) != len(scope):
            raise UaiFormatError(f"factor {i}: repeated variable in scope", ts.line)
        scopes.append(tuple(scope))
    factors = []
    for i, scope in enumerate(scopes):
        count = ts.int(f"entry count of factor {i}")
        start_line = ts.line
        expected = math.prod(domains[v] for v in scope)
        if count != expected:
            raise UaiFormatError(
                f"factor {i}: table has {count} entries, scope requires {expected}", start_line)
        values = [ts.float(f"table of factor {i}") for _ in range(count)]
        try:
            factors.append(make_factor(scope, values, domains))
        except ModelError as exc:
            raise UaiFormatError(f"factor {i}: {exc}", start_line) from None
    leftover = ts.rest()
    if leftover:
        raise UaiFormatError("trailing data after last table", leftover[0][1])
    return GraphicalModel(tuple(domains), tuple(factors), WEIGHTED)


def write_uai(model: GraphicalModel, network: str = "MARKOV") -> str:
    lines = [network, str(model.n), " ".join(map(str, model.domains)), str(len(model.factors))]
    for f in model.factors:
        lines.append(" ".join(map(str, (len(f.scope),) + f.scope)))
    for f in model.factors:
        lines.append("")
        lines.append(str(f.table.size))
        lines.append(" ".join(repr(float(x)) for x in f.table))
    return "\n".join(lines) + "\n"


def parse_evidence(text: str) -> dict[int, int]:
    ts = _TokenStream(text)
    try:
        count = ts.int("evidence count")
    except UaiFormatError:
        if not text.strip():
            return {}
        raise
    evidence = {}
    for _ in range(count):
        var = ts.int("evidence variable")
        evidence[var] = ts.int("evidence value")
    return evidence


def apply_evidence(model: GraphicalModel, evidence: Mapping[int, int]) -> GraphicalModel:
    """Multiply in a unary 0/1 indicator per evidence variable."""
    extra = []
    for var, val in sorted(evidence.items()):
        if not 0 <= var < model.n:
            raise ModelError(f"evidence variable {var} out of range")
        k = model.domains[var]
        if not 0 <= val < k:
            raise ModelError(f"evidence value {val} out of range for variable {var}")
        extra.append(model.factor((var,), [1.0 if j == val else 0.0 for j in range(k)]))
    return model.with_factors(model.factors + tuple(extra))


# -- constraints ---------------------------------------------------------------

_CONNECTIVE_ALIASES = {"∨": "|", "∧": "&", "⊕": "^", "¬": "~"}


def _compile_constraint(text: str, index: dict[str, int] | None):
    src = text
    for sym, op in _CONNECTIVE_ALIASES.items():
        src = src.replace(sym, op)
    try:
        tree = ast.parse(src.strip(), mode="eval").body
    except SyntaxError as exc:
        raise ModelError(f"cannot parse constraint {text!r}: {exc.msg}") from None
    names: list[str] = []

    def check(node):
        if isinstance(node, ast.Name):
            if node.id not in names:
                names.append(node.id)
        elif isinstance(node, ast.Constant) and node.value in (0, 1):
            pass
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.Invert, ast.Not)):
            check(node.operand)
        elif isinstance(node, ast.BinOp) and isinstance(node.op, (ast.BitOr, ast.BitAnd, ast.BitXor)):
            check(node.left)
            check(node.right)
        else:
            raise ModelError(f"unknown connective in constraint {text!r}: {ast.dump(node)[:40]}")

    check(tree)
    for name in names:
        if index is not None and name not in index:
            raise ModelError(f"constraint {text!r} uses undeclared variable {name!r}")

    def evaluate(node, env) -> int:
        if isinstance(node, ast.Name):
            return env[node.id]
        if isinstance(node, ast.Constant):
            return int(node.value)
        if isinstance(node, ast.UnaryOp):
            return 1 - evaluate(node.operand, env)
        a, b = evaluate(node.left, env), evaluate(node.right, env)
        if isinstance(node.op, ast.BitOr):
            return a | b
        if isinstance(node.op, ast.BitAnd):
            return a & b
        return a ^ b

    return tree, names, evaluate


def encode_constraints_as_factors(constraints: Sequence[str],
                                  variables: Sequence[str] | None = None) -> GraphicalModel:
    """Encode boolean constraints as 0/1 factors.

    Constraints use ``|`` (or ``∨``), ``&``, ``^`` (``⊕``) and ``~`` (``¬``)
    over variable names; each constraint becomes one factor whose scope is
    the set of its variables in declaration order.
    """
    if variables is None:
        seen: set[str] = set()
        for c in constraints:
            seen.update(_compile_constraint(c, None)[1])
        variables = sorted(seen)
    index = {name: i for i, name in enumerate(variables)}
    domains = (2,) * len(variables)
    factors = []
    for c in constraints:
        tree, names, evaluate = _compile_constraint(c, index)
        scope = sorted(index[nm] for nm in names)
        table = []
        for values in itertools.product((0, 1), repeat=len(scope)):
            env = {variables[v]: x for v, x in zip(scope, values)}
            table.append(float(evaluate(tree, env)))
        factors.append(make_factor(scope, table, domains))
    return GraphicalModel(domains, tuple(factors), ZERO_ONE, tuple(variables))


# -- oracle --------------------------------------------------------------------

def _as_full_assignment(model: GraphicalModel, assignment) -> tuple[int, ...]:
    if isinstance(assignment, Mapping):
        if set(assignment) != set(range(model.n)):
            raise ModelError("assignment must cover every variable")
        values = tuple(int(assignment[v]) for v in range(model.n))
    else:
        values = tuple(int(x) for x in assignment)
        if len(values) != model.n:
            raise ModelError("assignment must cover every variable")
    for var, (x, k) in enumerate(zip(values, model.domains)):
        if not 0 <= x < k:
            raise ModelError(f"value {x} out of range for variable {var}")
    return values


def evaluate_assignment(model: GraphicalModel, assignment) -> float:
    values = _as_full_assignment(model, assignment)
    result = 1.0
    for f in model.factors:
        result *= f.value(values)
    return result


def brute_force_partition(model: GraphicalModel, cap: int = DEFAULT_ORACLE_CAP,
                          block: int = 2 ** 18) -> float:
    """Sum the product of all factors over every full assignment."""
    total_size = math.prod(model.domains)
    if total_size > cap:
        raise ModelError(f"{total_size} assignments exceed the oracle cap {cap}")
    n = model.n
    # enumerate a prefix of variables explicitly, vectorize the rest
    split = n
    size = 1
    while split > 0 and size * model.domains[split - 1] <= block:
        split -= 1
        size *= model.domains[split]
    prefix, suffix = list(range(split)), list(range(split, n))
    suffix_shape = tuple(model.domains[v] for v in suffix)
    total = 0.0
    for head in itertools.product(*(range(model.domains[v]) for v in prefix)):
        joint = np.ones(suffix_shape)
        for f in model.factors:
            arr = f.as_array()
            index = tuple(head[v] if v < split else slice(None) for v in f.scope)
            sub = arr[index]
            rest = [v for v in f.scope if v >= split]
            if rest:
                order = sorted(range(len(rest)), key=lambda i: rest[i])
                sub = np.transpose(sub, order)
                shape = [1] * len(suffix)
                for v in sorted(rest):
                    shape[v - split] = model.domains[v]
                sub = sub.reshape(shape)
            joint = joint * sub
        total += float(joint.sum())
    return total


def all_assignments(model: GraphicalModel):
    return itertools.product(*(range(k) for k in model.domains))

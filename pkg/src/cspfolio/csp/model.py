"""Value types for finite-domain CSP instances and assignment checking.

An instance holds integer variables with finite (possibly non-contiguous)
domains, Boolean variables, and three kinds of constraints: intensional
(formula over comparisons of integer expressions), extensional (explicit
tuple table over a variable scope), and global (named high-level
constraint). Instances are immutable after construction and safe to share
across threads.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Union


class CspError(Exception):
    """Base class for errors raised by the CSP model and parser."""


class EvaluationError(CspError):
    """An assignment could not be checked against a constraint."""


ARITH_RELATIONS = ("<", "<=", ">", ">=", "=", "!=")
BOOL_OPS = ("and", "or", "not", "imp", "iff", "xor")
ARITH_OPS = ("+", "-", "*", "div", "mod", "abs", "min", "max")
SUPPORTED_GLOBALS = ("alldifferent", "weightedsum", "cumulative", "element")


def normalize_intervals(pairs) -> tuple[tuple[int, int], ...]:
    """Sort inclusive [lo, hi] intervals, drop empty ones, merge overlaps
    and adjacent runs."""
    kept = sorted((int(lo), int(hi)) for lo, hi in pairs if lo <= hi)
    merged: list[tuple[int, int]] = []
    for lo, hi in kept:
        if merged and lo <= merged[-1][1] + 1:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return tuple(merged)


@dataclass(frozen=True)
class IntVar:
    """Integer variable over a finite domain stored as sorted, disjoint,
    non-adjacent inclusive intervals."""

    name: str
    intervals: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.intervals:
            raise CspError(f"variable {self.name!r} has an empty domain")
        if self.intervals != normalize_intervals(self.intervals):
            raise CspError(f"variable {self.name!r} has a non-normalized domain")

    @classmethod
    def of(cls, name: str, pairs) -> "IntVar":
        return cls(name, normalize_intervals(pairs))

    @property
    def size(self) -> int:
        return sum(hi - lo + 1 for lo, hi in self.intervals)

    @property
    def lower(self) -> int:
        return self.intervals[0][0]

    @property
    def upper(self) -> int:
        return self.intervals[-1][1]

    def contains(self, value: int) -> bool:
        idx = bisect.bisect_right(self.intervals, (value, math.inf)) - 1
        if idx < 0:
            return False
        lo, hi = self.intervals[idx]
        return lo <= value <= hi


@dataclass(frozen=True)
class BoolVar:
    name: str


# ---------------------------------------------------------------------------
# Expression trees.
#
# Arithmetic expressions are integer constants, integer-variable references
# and operator nodes; Boolean expressions are Boolean-variable references,
# comparisons of two arithmetic expressions, and connective nodes.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntConst:
    value: int


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class ArithOp:
    op: str
    args: tuple["ArithExpr", ...]


ArithExpr = Union[IntConst, VarRef, ArithOp]


@dataclass(frozen=True)
class BoolVarRef:
    name: str


@dataclass(frozen=True)
class Comparison:
    rel: str
    lhs: ArithExpr
    rhs: ArithExpr


@dataclass(frozen=True)
class BoolOp:
    op: str
    args: tuple["BoolExpr", ...]


BoolExpr = Union[BoolVarRef, Comparison, BoolOp]


@dataclass(frozen=True)
class LinearExpr:
    """Sum of integer-coefficient terms plus a constant; every variable
    appears at most once and coefficients are nonzero."""

    terms: tuple[tuple[int, str], ...]
    constant: int = 0

    @classmethod
    def of(cls, terms, constant: int = 0) -> "LinearExpr":
        combined: dict[str, int] = {}
        order: list[str] = []
        for coef, var in terms:
            if var not in combined:
                combined[var] = 0
                order.append(var)
            combined[var] += int(coef)
        kept = tuple((combined[v], v) for v in order if combined[v] != 0)
        return cls(kept, int(constant))

    def evaluate(self, int_values) -> int:
        return self.constant + sum(c * int_values[v] for c, v in self.terms)


# ---------------------------------------------------------------------------
# Constraints.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntensionalConstraint:
    expr: BoolExpr

    kind = "intensional"


@dataclass(frozen=True)
class ExtensionalConstraint:
    """Table constraint: `allowed=True` lists supports, False lists
    conflicts. Tuples are kept sorted so membership is a binary search."""

    relation: str
    scope: tuple[str, ...]
    tuples: tuple[tuple[int, ...], ...]
    allowed: bool

    kind = "extensional"

    def table_contains(self, values: tuple[int, ...]) -> bool:
        idx = bisect.bisect_left(self.tuples, values)
        return idx < len(self.tuples) and self.tuples[idx] == values


# Opaque global-constraint arguments keep the raw s-expression shape:
# an atom is an int or a symbol string, a list is a tuple of nodes.
SNode = Union[int, str, tuple]


@dataclass(frozen=True)
class GlobalConstraint:
    """Named global constraint.

    Payload shapes for the supported names:
      alldifferent: args = arithmetic expressions
      weightedsum:  args = (LinearExpr, relation symbol, bound IntConst)
      cumulative:   args = (tasks, limit expr); each task is an
                    (origin, duration, height) triple of expressions
      element:      args = (index expr, tuple of entry exprs, value expr)
    Unsupported names are retained opaque with their raw argument forms.
    """

    name: str
    args: tuple
    opaque: bool = False

    kind = "global"

    @property
    def arity(self) -> int:
        if self.opaque:
            return len(self.args)
        if self.name == "alldifferent":
            return len(self.args)
        if self.name == "weightedsum":
            return len(self.args[0].terms)
        if self.name == "cumulative":
            return len(self.args[0])
        return 3  # element


Constraint = Union[IntensionalConstraint, ExtensionalConstraint, GlobalConstraint]


@dataclass(frozen=True)
class CspInstance:
    int_vars: tuple[IntVar, ...]
    bool_vars: tuple[BoolVar, ...]
    constraints: tuple[Constraint, ...]
    source_id: str = "<unknown>"

    def __post_init__(self):
        seen = set()
        for v in list(self.int_vars) + list(self.bool_vars):
            if v.name in seen:
                raise CspError(f"duplicate variable name {v.name!r}")
            seen.add(v.name)

    def int_var(self, name: str) -> IntVar:
        for v in self.int_vars:
            if v.name == name:
                return v
        raise KeyError(name)

    @property
    def var_names(self) -> set[str]:
        return {v.name for v in self.int_vars} | {v.name for v in self.bool_vars}


@dataclass
class Assignment:
    int_values: dict[str, int]
    bool_values: dict[str, bool]


# ---------------------------------------------------------------------------
# Evaluation.
# ---------------------------------------------------------------------------

def eval_arith(expr: ArithExpr, int_values: dict[str, int]) -> int:
    if isinstance(expr, IntConst):
        return expr.value
    if isinstance(expr, VarRef):
        try:
            return int_values[expr.name]
        except KeyError:
            raise EvaluationError(f"variable {expr.name!r} is unassigned") from None
    op, args = expr.op, [eval_arith(a, int_values) for a in expr.args]
    if op == "+":
        return sum(args)
    if op == "-":
        return -args[0] if len(args) == 1 else args[0] - args[1]
    if op == "*":
        out = 1
        for a in args:
            out *= a
        return out
    if op in ("div", "mod"):
        if args[1] == 0:
            raise EvaluationError("division by zero")
        # floored division, remainder takes the divisor's sign
        return args[0] // args[1] if op == "div" else args[0] % args[1]
    if op == "abs":
        return abs(args[0])
    if op == "min":
        return min(args)
    if op == "max":
        return max(args)
    raise EvaluationError(f"unknown arithmetic operator {op!r}")


def compare(rel: str, lhs: int, rhs: int) -> bool:
    if rel == "<":
        return lhs < rhs
    if rel == "<=":
        return lhs <= rhs
    if rel == ">":
        return lhs > rhs
    if rel == ">=":
        return lhs >= rhs
    if rel == "=":
        return lhs == rhs
    if rel == "!=":
        return lhs != rhs
    raise EvaluationError(f"unknown relation {rel!r}")


def eval_bool(expr: BoolExpr, assignment: Assignment) -> bool:
    if isinstance(expr, BoolVarRef):
        try:
            return assignment.bool_values[expr.name]
        except KeyError:
            raise EvaluationError(f"variable {expr.name!r} is unassigned") from None
    if isinstance(expr, Comparison):
        return compare(expr.rel,
                       eval_arith(expr.lhs, assignment.int_values),
                       eval_arith(expr.rhs, assignment.int_values))
    op = expr.op
    # no short-circuiting: an erroring subterm poisons the whole formula
    vals = [eval_bool(a, assignment) for a in expr.args]
    if op == "and":
        return all(vals)
    if op == "or":
        return any(vals)
    if op == "not":
        return not vals[0]
    if op == "imp":
        return (not vals[0]) or vals[1]
    if op == "iff":
        return vals[0] == vals[1]
    if op == "xor":
        return vals[0] != vals[1]
    raise EvaluationError(f"unknown Boolean operator {op!r}")


def _eval_global(con: GlobalConstraint, assignment: Assignment) -> bool:
    if con.opaque:
        raise EvaluationError(
            f"cannot evaluate opaque global constraint {con.name!r}")
    iv = assignment.int_values
    if con.name == "alldifferent":
        vals = [eval_arith(a, iv) for a in con.args]
        return len(set(vals)) == len(vals)
    if con.name == "weightedsum":
        linear, rel, bound = con.args
        return compare(rel, linear.evaluate(iv), bound.value)
    if con.name == "element":
        index, entries, value = con.args
        i = eval_arith(index, iv)
        if not 1 <= i <= len(entries):  # 1-based indexing
            return False
        return eval_arith(entries[i - 1], iv) == eval_arith(value, iv)
    if con.name == "cumulative":
        # limit applies at every integer time point covered by at least
        # one task; load is constant between task starts/ends, so those
        # breakpoints suffice
        tasks, limit = con.args
        cap = eval_arith(limit, iv)
        active: list[tuple[int, int, int]] = []
        for origin, duration, height in tasks:
            o = eval_arith(origin, iv)
            d = eval_arith(duration, iv)
            h = eval_arith(height, iv)
            if d > 0:
                active.append((o, d, h))
        times = {o for o, _, _ in active} | {o + d for o, d, _ in active}
        for t in times:
            if not any(o <= t < o + d for o, d, _ in active):
                continue
            load = sum(h for o, d, h in active if o <= t < o + d)
            if load > cap:
                return False
        return True
    raise EvaluationError(f"unknown global constraint {con.name!r}")


def check_assignment(inst: CspInstance, assignment: Assignment) -> bool:
    """True iff `assignment` is a solution of `inst`: every variable is
    assigned a value inside its domain and every constraint holds.

    Raises EvaluationError when a variable of the instance is unassigned
    or an opaque global constraint is encountered.
    """
    for var in inst.int_vars:
        if var.name not in assignment.int_values:
            raise EvaluationError(f"variable {var.name!r} is unassigned")
        if not var.contains(assignment.int_values[var.name]):
            return False
    for var in inst.bool_vars:
        if var.name not in assignment.bool_values:
            raise EvaluationError(f"variable {var.name!r} is unassigned")
    for con in inst.constraints:
        if isinstance(con, IntensionalConstraint):
            if not eval_bool(con.expr, assignment):
                return False
        elif isinstance(con, ExtensionalConstraint):
            values = tuple(assignment.int_values[v] for v in con.scope)
            if con.table_contains(values) != con.allowed:
                return False
        else:
            if not _eval_global(con, assignment):
                return False
    return True

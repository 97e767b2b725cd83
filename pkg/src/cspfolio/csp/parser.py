"""Parser and pretty-printer for a Sugar-style s-expression CSP language.

The accepted grammar::

    program    := item*
    item       := "(" "int" NAME (INT INT | domain) ")"
                | "(" "bool" NAME ")"
                | "(" "relation" NAME INT table ")"
                | constraint
    domain     := "(" (INT | "(" INT INT ")")* ")"
    table      := "(" ("supports" | "conflicts") tuple* ")"
    tuple      := "(" INT* ")"
    constraint := boolean s-expression, relation application, or global

Comments run from ';' to end of line. Tokens are whitespace-separated;
input is UTF-8. Boolean formulas use {and, or, not, imp, iff, xor} over
comparisons {<, <=, >, >=, =, !=} of arithmetic expressions built from
{+, -, *, div, mod, abs, min, max}, integer literals and integer
variables. Applications of declared relations become extensional
constraints; alldifferent / weightedsum / cumulative / element become
structured global constraints; any other list head is kept as an opaque
global with its raw argument shape.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .model import (
    ARITH_OPS,
    ARITH_RELATIONS,
    BOOL_OPS,
    SUPPORTED_GLOBALS,
    ArithExpr,
    ArithOp,
    BoolExpr,
    BoolOp,
    BoolVar,
    BoolVarRef,
    Comparison,
    CspError,
    CspInstance,
    ExtensionalConstraint,
    GlobalConstraint,
    IntConst,
    IntensionalConstraint,
    IntVar,
    LinearExpr,
    VarRef,
    normalize_intervals,
)


class ParseError(CspError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"line {line}, col {col}: {message}" if line else message)
        self.line = line
        self.col = col


_INT_RE = re.compile(r"^[+-]?[0-9]+$")

_RESERVED = (
    {"int", "bool", "relation", "supports", "conflicts"}
    | set(BOOL_OPS)
    | set(ARITH_RELATIONS)
    | set(ARITH_OPS)
    | set(SUPPORTED_GLOBALS)
)


@dataclass
class _Atom:
    text: str
    line: int
    col: int


@dataclass
class _List:
    items: list
    line: int
    col: int


def _tokenize(text: str):
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line, col = line + 1, 1
            i += 1
        elif ch in " \t\r":
            col += 1
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            tokens.append((ch, line, col))
            col += 1
            i += 1
        else:
            start, start_col = i, col
            while i < n and text[i] not in " \t\r\n();":
                i += 1
                col += 1
            tokens.append((text[start:i], line, start_col))
    return tokens


def _read_all(tokens) -> list:
    nodes: list = []
    stack: list[_List] = []
    for text, line, col in tokens:
        if text == "(":
            stack.append(_List([], line, col))
        elif text == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col)
            done = stack.pop()
            (stack[-1].items if stack else nodes).append(done)
        else:
            node = _Atom(text, line, col)
            (stack[-1].items if stack else nodes).append(node)
    if stack:
        raise ParseError("unclosed '('", stack[-1].line, stack[-1].col)
    return nodes


def _raw(node):
    if isinstance(node, _Atom):
        return int(node.text) if _INT_RE.match(node.text) else node.text
    return tuple(_raw(item) for item in node.items)


def _int_atom(node, what: str) -> int:
    if not (isinstance(node, _Atom) and _INT_RE.match(node.text)):
        raise ParseError(f"expected integer {what}", node.line, node.col)
    return int(node.text)


def _name_atom(node, what: str) -> str:
    if not isinstance(node, _Atom) or _INT_RE.match(node.text):
        raise ParseError(f"expected {what} name", node.line, node.col)
    return node.text


class _Resolver:
    def __init__(self):
        self.int_vars: dict[str, IntVar] = {}
        self.bool_vars: dict[str, BoolVar] = {}
        self.relations: dict[str, tuple[int, tuple, bool]] = {}
        self.constraints: list = []

    # -- declarations -------------------------------------------------

    def _declare_name(self, node) -> str:
        name = _name_atom(node, "variable or relation")
        if name in _RESERVED:
            raise ParseError(f"{name!r} is a reserved word", node.line, node.col)
        if name in self.int_vars or name in self.bool_vars or name in self.relations:
            raise ParseError(f"duplicate declaration of {name!r}", node.line, node.col)
        return name

    def _declare_int(self, node: _List):
        if len(node.items) not in (3, 4):
            raise ParseError("int declaration expects (int NAME lo hi) "
                             "or (int NAME (parts...))", node.line, node.col)
        name = self._declare_name(node.items[1])
        if len(node.items) == 4:
            lo = _int_atom(node.items[2], "lower bound")
            hi = _int_atom(node.items[3], "upper bound")
            parts = [(lo, hi)]
        else:
            spec = node.items[2]
            if not isinstance(spec, _List):
                raise ParseError("expected domain list", spec.line, spec.col)
            parts = []
            for part in spec.items:
                if isinstance(part, _Atom):
                    v = _int_atom(part, "domain value")
                    parts.append((v, v))
                else:
                    if len(part.items) != 2:
                        raise ParseError("domain interval expects (lo hi)",
                                         part.line, part.col)
                    parts.append((_int_atom(part.items[0], "lower bound"),
                                  _int_atom(part.items[1], "upper bound")))
        intervals = normalize_intervals(parts)
        if not intervals:
            raise ParseError(f"variable {name!r} has an empty domain",
                             node.line, node.col)
        self.int_vars[name] = IntVar(name, intervals)

    def _declare_bool(self, node: _List):
        if len(node.items) != 2:
            raise ParseError("bool declaration expects (bool NAME)",
                             node.line, node.col)
        name = self._declare_name(node.items[1])
        self.bool_vars[name] = BoolVar(name)

    def _declare_relation(self, node: _List):
        if len(node.items) != 4:
            raise ParseError("relation declaration expects "
                             "(relation NAME ARITY (supports|conflicts ...))",
                             node.line, node.col)
        name = self._declare_name(node.items[1])
        arity = _int_atom(node.items[2], "arity")
        if arity < 1:
            raise ParseError("relation arity must be positive",
                             node.items[2].line, node.items[2].col)
        table = node.items[3]
        if (not isinstance(table, _List) or not table.items
                or not isinstance(table.items[0], _Atom)
                or table.items[0].text not in ("supports", "conflicts")):
            raise ParseError("expected (supports ...) or (conflicts ...)",
                             table.line, table.col)
        allowed = table.items[0].text == "supports"
        rows = []
        for row in table.items[1:]:
            if not isinstance(row, _List) or len(row.items) != arity:
                raise ParseError(f"relation tuple must have {arity} integers",
                                 row.line, row.col)
            rows.append(tuple(_int_atom(v, "tuple value") for v in row.items))
        self.relations[name] = (arity, tuple(sorted(set(rows))), allowed)

    # -- expressions --------------------------------------------------

    def _arith(self, node) -> ArithExpr:
        if isinstance(node, _Atom):
            if _INT_RE.match(node.text):
                return IntConst(int(node.text))
            if node.text in self.int_vars:
                return VarRef(node.text)
            if node.text in self.bool_vars:
                raise ParseError(f"Boolean variable {node.text!r} in arithmetic "
                                 "position", node.line, node.col)
            raise ParseError(f"undeclared variable {node.text!r}",
                             node.line, node.col)
        if not node.items or not isinstance(node.items[0], _Atom):
            raise ParseError("expected arithmetic operator", node.line, node.col)
        op = node.items[0].text
        if op not in ARITH_OPS:
            raise ParseError(f"unknown arithmetic operator {op!r}",
                             node.line, node.col)
        args = tuple(self._arith(a) for a in node.items[1:])
        limits = {"+": (1, None), "*": (1, None), "-": (1, 2), "div": (2, 2),
                  "mod": (2, 2), "abs": (1, 1), "min": (2, None), "max": (2, None)}
        lo, hi = limits[op]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ParseError(f"operator {op!r} got {len(args)} arguments",
                             node.line, node.col)
        return ArithOp(op, args)

    def _bool(self, node) -> BoolExpr:
        if isinstance(node, _Atom):
            if node.text in self.bool_vars:
                return BoolVarRef(node.text)
            if _INT_RE.match(node.text) or node.text in self.int_vars:
                raise ParseError("integer in Boolean position",
                                 node.line, node.col)
            raise ParseError(f"undeclared variable {node.text!r}",
                             node.line, node.col)
        if not node.items or not isinstance(node.items[0], _Atom):
            raise ParseError("expected Boolean operator or relation",
                             node.line, node.col)
        op = node.items[0].text
        args = node.items[1:]
        if op in ARITH_RELATIONS:
            if len(args) != 2:
                raise ParseError(f"relation {op!r} expects 2 arguments",
                                 node.line, node.col)
            return Comparison(op, self._arith(args[0]), self._arith(args[1]))
        if op in BOOL_OPS:
            limits = {"and": (1, None), "or": (1, None), "not": (1, 1),
                      "imp": (2, 2), "iff": (2, 2), "xor": (2, 2)}
            lo, hi = limits[op]
            if len(args) < lo or (hi is not None and len(args) > hi):
                raise ParseError(f"operator {op!r} got {len(args)} arguments",
                                 node.line, node.col)
            return BoolOp(op, tuple(self._bool(a) for a in args))
        raise ParseError(f"expected Boolean operator or relation, got {op!r}",
                         node.line, node.col)

    # -- globals ------------------------------------------------------

    def _global(self, name: str, node: _List) -> GlobalConstraint:
        args = node.items[1:]
        if name == "alldifferent":
            if not args:
                raise ParseError("alldifferent expects at least 1 argument",
                                 node.line, node.col)
            return GlobalConstraint(name, tuple(self._arith(a) for a in args))
        if name == "weightedsum":
            if len(args) != 3:
                raise ParseError("weightedsum expects (weightedsum ((a x)...) "
                                 "REL b)", node.line, node.col)
            pairs_node, rel_node, bound_node = args
            if not isinstance(pairs_node, _List):
                raise ParseError("expected list of (coefficient variable) pairs",
                                 pairs_node.line, pairs_node.col)
            terms = []
            constant = 0
            for pair in pairs_node.items:
                if isinstance(pair, _Atom):
                    # bare integer: constant addend of the sum
                    constant += _int_atom(pair, "constant term")
                    continue
                if len(pair.items) != 2:
                    raise ParseError("expected (coefficient variable) pair",
                                     pair.line, pair.col)
                coef = _int_atom(pair.items[0], "coefficient")
                var = _name_atom(pair.items[1], "variable")
                if var not in self.int_vars:
                    raise ParseError(f"undeclared variable {var!r}",
                                     pair.items[1].line, pair.items[1].col)
                terms.append((coef, var))
            rel = _name_atom(rel_node, "relation")
            if rel not in ARITH_RELATIONS:
                raise ParseError(f"unknown relation {rel!r}",
                                 rel_node.line, rel_node.col)
            bound = IntConst(_int_atom(bound_node, "bound"))
            return GlobalConstraint(name,
                                    (LinearExpr.of(terms, constant), rel, bound))
        if name == "element":
            if len(args) != 3:
                raise ParseError("element expects (element INDEX (entries...) "
                                 "VALUE)", node.line, node.col)
            index_node, entries_node, value_node = args
            if not isinstance(entries_node, _List) or not entries_node.items:
                raise ParseError("expected nonempty entry list",
                                 entries_node.line, entries_node.col)
            entries = tuple(self._arith(e) for e in entries_node.items)
            return GlobalConstraint(
                name, (self._arith(index_node), entries, self._arith(value_node)))
        # cumulative
        if len(args) != 2:
            raise ParseError("cumulative expects (cumulative ((o d h)...) LIMIT)",
                             node.line, node.col)
        tasks_node, limit_node = args
        if not isinstance(tasks_node, _List):
            raise ParseError("expected list of (origin duration height) tasks",
                             tasks_node.line, tasks_node.col)
        tasks = []
        for task in tasks_node.items:
            if not isinstance(task, _List) or len(task.items) != 3:
                raise ParseError("expected (origin duration height) task",
                                 task.line, task.col)
            tasks.append(tuple(self._arith(f) for f in task.items))
        return GlobalConstraint(name, (tuple(tasks), self._arith(limit_node)))

    # -- top level ----------------------------------------------------

    def _item(self, node):
        if isinstance(node, _Atom):
            if node.text in self.bool_vars:
                self.constraints.append(IntensionalConstraint(BoolVarRef(node.text)))
                return
            raise ParseError(f"expected '(' but got {node.text!r}",
                             node.line, node.col)
        if not node.items:
            raise ParseError("empty s-expression", node.line, node.col)
        head = node.items[0]
        if not isinstance(head, _Atom):
            raise ParseError("expected operator or constraint name",
                             head.line, head.col)
        h = head.text
        if h == "int":
            self._declare_int(node)
        elif h == "bool":
            self._declare_bool(node)
        elif h == "relation":
            self._declare_relation(node)
        elif h in BOOL_OPS or h in ARITH_RELATIONS:
            self.constraints.append(IntensionalConstraint(self._bool(node)))
        elif h in SUPPORTED_GLOBALS:
            self.constraints.append(self._global(h, node))
        elif h in self.relations:
            arity, tuples, allowed = self.relations[h]
            scope_nodes = node.items[1:]
            if len(scope_nodes) != arity:
                raise ParseError(f"relation {h!r} expects {arity} variables",
                                 node.line, node.col)
            scope = []
            for sn in scope_nodes:
                var = _name_atom(sn, "variable")
                if var not in self.int_vars:
                    raise ParseError(f"undeclared variable {var!r}",
                                     sn.line, sn.col)
                scope.append(var)
            self.constraints.append(
                ExtensionalConstraint(h, tuple(scope), tuples, allowed))
        else:
            self.constraints.append(
                GlobalConstraint(h, tuple(_raw(a) for a in node.items[1:]),
                                 opaque=True))


def parse_instance(text, source_id: str = "<string>") -> CspInstance:
    """Parse a program in the s-expression language into a CspInstance.

    `text` may be str or UTF-8 bytes. Declarations must precede use.
    Unknown list heads are kept as opaque global constraints.
    """
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    resolver = _Resolver()
    for node in _read_all(_tokenize(text)):
        resolver._item(node)
    return CspInstance(tuple(resolver.int_vars.values()),
                       tuple(resolver.bool_vars.values()),
                       tuple(resolver.constraints),
                       source_id=source_id)


def parse_file(path) -> CspInstance:
    with open(path, "rb") as fh:
        return parse_instance(fh.read(), source_id=str(path))


# ---------------------------------------------------------------------------
# Pretty printing.
# ---------------------------------------------------------------------------

def _fmt_raw(value) -> str:
    if isinstance(value, tuple):
        return "(" + " ".join(_fmt_raw(v) for v in value) + ")"
    return str(value)


def format_arith(expr: ArithExpr) -> str:
    if isinstance(expr, IntConst):
        return str(expr.value)
    if isinstance(expr, VarRef):
        return expr.name
    return "(" + " ".join([expr.op] + [format_arith(a) for a in expr.args]) + ")"


def format_bool(expr: BoolExpr) -> str:
    if isinstance(expr, BoolVarRef):
        return expr.name
    if isinstance(expr, Comparison):
        return f"({expr.rel} {format_arith(expr.lhs)} {format_arith(expr.rhs)})"
    return "(" + " ".join([expr.op] + [format_bool(a) for a in expr.args]) + ")"


def _fmt_global(con: GlobalConstraint) -> str:
    if con.opaque:
        return "(" + " ".join([con.name] + [_fmt_raw(a) for a in con.args]) + ")"
    if con.name == "alldifferent":
        return "(" + " ".join(["alldifferent"]
                              + [format_arith(a) for a in con.args]) + ")"
    if con.name == "weightedsum":
        linear, rel, bound = con.args
        parts = [f"({c} {v})" for c, v in linear.terms]
        if linear.constant:
            parts.append(str(linear.constant))
        return f"(weightedsum ({' '.join(parts)}) {rel} {bound.value})"
    if con.name == "element":
        index, entries, value = con.args
        inner = " ".join(format_arith(e) for e in entries)
        return f"(element {format_arith(index)} ({inner}) {format_arith(value)})"
    tasks, limit = con.args
    body = " ".join("({} {} {})".format(*(format_arith(f) for f in task))
                    for task in tasks)
    return f"(cumulative ({body}) {format_arith(limit)})"


def format_instance(inst: CspInstance) -> str:
    """Render an instance back to the s-expression language. Re-parsing the
    output reproduces the instance structure (source_id aside)."""
    lines = []
    for var in inst.int_vars:
        if len(var.intervals) == 1:
            lines.append(f"(int {var.name} {var.lower} {var.upper})")
        else:
            parts = " ".join(str(lo) if lo == hi else f"({lo} {hi})"
                             for lo, hi in var.intervals)
            lines.append(f"(int {var.name} ({parts}))")
    for var in inst.bool_vars:
        lines.append(f"(bool {var.name})")
    emitted = set()
    for con in inst.constraints:
        if con.kind == "extensional" and con.relation not in emitted:
            emitted.add(con.relation)
            kind = "supports" if con.allowed else "conflicts"
            rows = " ".join("(" + " ".join(str(v) for v in row) + ")"
                            for row in con.tuples)
            body = f"{kind} {rows}" if rows else kind
            lines.append(f"(relation {con.relation} {len(con.scope)} ({body}))")
    for con in inst.constraints:
        if con.kind == "intensional":
            lines.append(format_bool(con.expr))
        elif con.kind == "extensional":
            lines.append("(" + " ".join([con.relation] + list(con.scope)) + ")")
        else:
            lines.append(_fmt_global(con))
    return "\n".join(lines) + ("\n" if lines else "")

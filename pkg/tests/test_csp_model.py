import dataclasses
import math
import random
from fractions import Fraction

import pytest

from cspfolio.csp import (
    Assignment,
    ArithOp,
    BoolOp,
    BoolVar,
    BoolVarRef,
    Comparison,
    CspError,
    CspInstance,
    EvaluationError,
    ExtensionalConstraint,
    GlobalConstraint,
    IntConst,
    IntensionalConstraint,
    IntVar,
    LinearExpr,
    ParseError,
    VarRef,
    check_assignment,
    format_instance,
    normalize_intervals,
    parse_instance,
)

THREE_LINE_PROGRAM = """
(int x1 1 2) (int x2 1 4) (int x3 2 3)
(imp (>= (+ x1 (* 2 x3)) 3) (and (< x1 x2) (<= x3 (+ x1 x2))))
(alldifferent x1 x2 x3)
"""

CLAUSE_PROGRAM = """
(int x1 1 2) (int x2 1 4) (int x3 2 3)
(bool p)
(or p (<= (+ x1 x3) 4))
(or (not p) (<= (+ x3 (* -1 x1)) 0))
(or (<= x1 1) (<= (* 2 x2) 4))
"""


# ---------------------------------------------------------------------------
# Independent naive evaluator used as the oracle. It shares no code with
# the library: dispatch tables, Fraction-based floored division, and an
# exhaustive time scan for cumulative.
# ---------------------------------------------------------------------------

class NaiveError(Exception):
    pass


def naive_arith(expr, env):
    if isinstance(expr, IntConst):
        return expr.value
    if isinstance(expr, VarRef):
        if expr.name not in env:
            raise NaiveError("unassigned")
        return env[expr.name]
    vals = [naive_arith(a, env) for a in expr.args]
    op = expr.op
    if op == "+":
        total = 0
        for v in vals:
            total = total + v
        return total
    if op == "-":
        return -vals[0] if len(vals) == 1 else vals[0] - vals[1]
    if op == "*":
        total = 1
        for v in vals:
            total = total * v
        return total
    if op == "div":
        if vals[1] == 0:
            raise NaiveError("div by zero")
        return math.floor(Fraction(vals[0], vals[1]))
    if op == "mod":
        if vals[1] == 0:
            raise NaiveError("div by zero")
        return vals[0] - vals[1] * math.floor(Fraction(vals[0], vals[1]))
    if op == "abs":
        return vals[0] if vals[0] >= 0 else -vals[0]
    if op == "min":
        return sorted(vals)[0]
    if op == "max":
        return sorted(vals)[-1]
    raise NaiveError(op)


_REL_TABLE = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}

_IMP = {(False, False): True, (False, True): True,
        (True, False): False, (True, True): True}


def naive_bool(expr, int_env, bool_env):
    if isinstance(expr, BoolVarRef):
        if expr.name not in bool_env:
            raise NaiveError("unassigned")
        return bool_env[expr.name]
    if isinstance(expr, Comparison):
        return _REL_TABLE[expr.rel](naive_arith(expr.lhs, int_env),
                                    naive_arith(expr.rhs, int_env))
    vals = [naive_bool(a, int_env, bool_env) for a in expr.args]
    op = expr.op
    if op == "and":
        return sum(1 for v in vals if not v) == 0
    if op == "or":
        return sum(1 for v in vals if v) > 0
    if op == "not":
        return not vals[0]
    if op == "imp":
        return _IMP[(vals[0], vals[1])]
    if op == "iff":
        return vals[0] is vals[1]
    if op == "xor":
        return vals[0] is not vals[1]
    raise NaiveError(op)


def naive_global(con, int_env):
    if con.name == "alldifferent":
        vals = [naive_arith(a, int_env) for a in con.args]
        for i in range(len(vals)):
            for j in range(i + 1, len(vals)):
                if vals[i] == vals[j]:
                    return False
        return True
    if con.name == "weightedsum":
        linear, rel, bound = con.args
        total = linear.constant
        for coef, var in linear.terms:
            if var not in int_env:
                raise NaiveError("unassigned")
            total += coef * int_env[var]
        return _REL_TABLE[rel](total, bound.value)
    if con.name == "element":
        index, entries, value = con.args
        i = naive_arith(index, int_env)
        if i < 1 or i > len(entries):
            return False
        return naive_arith(entries[i - 1], int_env) == naive_arith(value,
                                                                   int_env)
    if con.name == "cumulative":
        tasks, limit = con.args
        cap = naive_arith(limit, int_env)
        active = []
        for origin, duration, height in tasks:
            o = naive_arith(origin, int_env)
            d = naive_arith(duration, int_env)
            h = naive_arith(height, int_env)
            if d > 0:
                active.append((o, d, h))
        if not active:
            return True
        lo = min(o for o, _, _ in active)
        hi = max(o + d for o, d, _ in active)
        for t in range(lo, hi):
            covering = [h for o, d, h in active if o <= t < o + d]
            if covering and sum(covering) > cap:
                return False
        return True
    raise NaiveError(con.name)


def naive_check(inst, assignment):
    for var in inst.int_vars:
        if var.name not in assignment.int_values:
            raise NaiveError("unassigned")
        value = assignment.int_values[var.name]
        domain = {v for lo, hi in var.intervals for v in range(lo, hi + 1)}
        if value not in domain:
            return False
    for var in inst.bool_vars:
        if var.name not in assignment.bool_values:
            raise NaiveError("unassigned")
    for con in inst.constraints:
        if con.kind == "intensional":
            if not naive_bool(con.expr, assignment.int_values,
                              assignment.bool_values):
                return False
        elif con.kind == "extensional":
            values = tuple(assignment.int_values[v] for v in con.scope)
            member = values in set(con.tuples)
            if member != con.allowed:
                return False
        else:
            if not naive_global(con, assignment.int_values):
                return False
    return True


# ---------------------------------------------------------------------------
# Worked examples.
# ---------------------------------------------------------------------------

def test_clause_program_assignment_verifies():
    inst = parse_instance(CLAUSE_PROGRAM)
    good = Assignment({"x1": 1, "x2": 3, "x3": 2}, {"p": False})
    assert check_assignment(inst, good) is True
    # flipping p breaks the second clause (x3 - x1 <= 0 fails at 2 - 1)
    assert check_assignment(
        inst, Assignment({"x1": 1, "x2": 3, "x3": 2}, {"p": True})) is False


def test_three_line_program_structure():
    inst = parse_instance(THREE_LINE_PROGRAM)
    assert [(v.name, v.size) for v in inst.int_vars] == [
        ("x1", 2), ("x2", 4), ("x3", 2)]
    assert inst.bool_vars == ()
    kinds = [c.kind for c in inst.constraints]
    assert kinds == ["intensional", "global"]
    assert isinstance(inst.constraints[0].expr, BoolOp)
    assert inst.constraints[0].expr.op == "imp"
    assert inst.constraints[1].name == "alldifferent"
    assert inst.constraints[1].arity == 3


def test_three_line_program_solution():
    inst = parse_instance(THREE_LINE_PROGRAM)
    assert check_assignment(inst, Assignment({"x1": 1, "x2": 2, "x3": 3}, {}))
    # duplicate values violate alldifferent
    assert not check_assignment(inst,
                                Assignment({"x1": 1, "x2": 1, "x3": 3}, {}))


def test_empty_input():
    inst = parse_instance("")
    assert inst.int_vars == () and inst.bool_vars == ()
    assert inst.constraints == ()


def test_singleton_domain():
    inst = parse_instance("(int x 5 5)(<= x 5)")
    assert inst.int_vars[0].intervals == ((5, 5),)
    assert len(inst.constraints) == 1
    assert inst.constraints[0].kind == "intensional"


# ---------------------------------------------------------------------------
# Parsing details and errors.
# ---------------------------------------------------------------------------

def test_comments_and_bytes_input():
    text = b"; header comment\n(int x 1 3) ; trailing\n(<= x 2)\n"
    inst = parse_instance(text)
    assert len(inst.constraints) == 1


def test_noncontiguous_domain_normalized():
    inst = parse_instance("(int x (5 1 (2 3) (7 9) 8))")
    assert inst.int_vars[0].intervals == ((1, 3), (5, 5), (7, 9))
    assert inst.int_vars[0].size == 7


def test_syntax_error_reports_position():
    with pytest.raises(ParseError) as err:
        parse_instance("(int x 1 2)\n(<= x")
    assert err.value.line == 2
    assert err.value.col == 1


def test_unbalanced_close():
    with pytest.raises(ParseError):
        parse_instance("(int x 1 2))")


def test_undeclared_variable():
    with pytest.raises(ParseError, match="undeclared"):
        parse_instance("(int x 1 2)(<= y 2)")


def test_empty_domain_rejected():
    with pytest.raises(ParseError, match="empty domain"):
        parse_instance("(int x 5 4)")


def test_duplicate_declaration_rejected():
    with pytest.raises(ParseError, match="duplicate"):
        parse_instance("(int x 1 2)(bool x)")


def test_reserved_word_rejected():
    with pytest.raises(ParseError, match="reserved"):
        parse_instance("(int min 1 2)")


def test_bool_var_in_arith_position():
    with pytest.raises(ParseError, match="arithmetic position"):
        parse_instance("(bool p)(<= p 1)")


def test_unknown_global_kept_opaque():
    inst = parse_instance("(int x 1 3)(int y 1 3)"
                          "(lex x y (3 1))")
    con = inst.constraints[0]
    assert con.kind == "global" and con.opaque
    assert con.name == "lex"
    assert con.arity == 3
    assert con.args == ("x", "y", (3, 1))
    with pytest.raises(EvaluationError, match="opaque"):
        check_assignment(inst, Assignment({"x": 1, "y": 2}, {}))


def test_extensional_supports_and_conflicts():
    inst = parse_instance(
        "(int a 1 3)(int b 1 3)"
        "(relation ok 2 (supports (1 2) (2 3)))"
        "(relation bad 2 (conflicts (3 3)))"
        "(ok a b)(bad a b)")
    assert check_assignment(inst, Assignment({"a": 1, "b": 2}, {}))
    assert not check_assignment(inst, Assignment({"a": 2, "b": 2}, {}))
    with pytest.raises(ParseError, match="duplicate"):
        parse_instance("(relation r 1 (supports))(relation r 1 (supports))")


def test_relation_arity_mismatch():
    with pytest.raises(ParseError):
        parse_instance("(int a 1 3)(relation r 2 (supports (1 2)))(r a)")


def test_unassigned_variable_errors():
    inst = parse_instance("(int x 1 3)(<= x 2)")
    with pytest.raises(EvaluationError, match="unassigned"):
        check_assignment(inst, Assignment({}, {}))


def test_out_of_domain_value_is_false():
    inst = parse_instance("(int x (1 (4 5)))(<= x 9)")
    assert not check_assignment(inst, Assignment({"x": 3}, {}))
    assert check_assignment(inst, Assignment({"x": 4}, {}))


def test_div_mod_floor_semantics():
    inst = parse_instance("(int x 1 1)"
                          "(= (div -7 2) -4)(= (mod -7 2) 1)"
                          "(= (div 7 -2) -4)(= (mod 7 -2) -1)")
    assert check_assignment(inst, Assignment({"x": 1}, {}))


def test_division_by_zero_errors():
    inst = parse_instance("(int x 0 1)(= (div 4 x) 4)")
    with pytest.raises(EvaluationError, match="zero"):
        check_assignment(inst, Assignment({"x": 0}, {}))


def test_weightedsum_global():
    inst = parse_instance("(int x 1 5)(int y 1 5)"
                          "(weightedsum ((2 x) (-1 y)) <= 3)")
    assert check_assignment(inst, Assignment({"x": 2, "y": 1}, {}))
    assert not check_assignment(inst, Assignment({"x": 5, "y": 1}, {}))
    con = inst.constraints[0]
    assert con.arity == 2


def test_element_global_one_based_and_out_of_range():
    inst = parse_instance("(int i 0 4)(int v 1 9)"
                          "(element i (3 5 7) v)")
    assert check_assignment(inst, Assignment({"i": 2, "v": 5}, {}))
    assert not check_assignment(inst, Assignment({"i": 2, "v": 7}, {}))
    # index outside 1..3 fails the constraint rather than erroring
    assert not check_assignment(inst, Assignment({"i": 0, "v": 3}, {}))
    assert not check_assignment(inst, Assignment({"i": 4, "v": 3}, {}))


def test_cumulative_global():
    inst = parse_instance("(int s 0 5)"
                          "(cumulative ((0 3 2) (s 3 2)) 3)")
    # overlapping tasks exceed the limit, separated ones fit
    assert not check_assignment(inst, Assignment({"s": 1}, {}))
    assert check_assignment(inst, Assignment({"s": 3}, {}))


# ---------------------------------------------------------------------------
# Value-type invariants.
# ---------------------------------------------------------------------------

def test_normalize_intervals_merges_and_sorts():
    assert normalize_intervals([(5, 6), (1, 2), (3, 4)]) == ((1, 6),)
    assert normalize_intervals([(1, 2), (4, 5)]) == ((1, 2), (4, 5))
    assert normalize_intervals([(2, 1)]) == ()
    rng = random.Random(42)
    for _ in range(200):
        pairs = [(rng.randint(-10, 10), rng.randint(-10, 10))
                 for _ in range(rng.randint(0, 6))]
        got = normalize_intervals(pairs)
        # sorted, disjoint, non-adjacent
        for (lo1, hi1), (lo2, hi2) in zip(got, got[1:]):
            assert hi1 + 1 < lo2
        expanded = {v for lo, hi in got for v in range(lo, hi + 1)}
        expected = {v for lo, hi in pairs if lo <= hi
                    for v in range(lo, hi + 1)}
        assert expanded == expected


def test_intvar_rejects_empty_and_denormalized():
    with pytest.raises(CspError):
        IntVar("x", ())
    with pytest.raises(CspError):
        IntVar("x", ((1, 2), (3, 4)))  # adjacent, not normalized
    var = IntVar.of("x", [(1, 2), (3, 4)])
    assert var.intervals == ((1, 4),)


def test_table_membership_matches_linear_scan():
    rng = random.Random(9)
    for _ in range(50):
        rows = sorted({tuple(rng.randint(-3, 3) for _ in range(2))
                       for _ in range(rng.randint(0, 12))})
        con = ExtensionalConstraint("r", ("a", "b"), tuple(rows), True)
        for _ in range(20):
            probe = (rng.randint(-4, 4), rng.randint(-4, 4))
            assert con.table_contains(probe) == (probe in rows)


def test_duplicate_variable_names_rejected():
    with pytest.raises(CspError, match="duplicate"):
        CspInstance((IntVar.of("x", [(1, 2)]),), (BoolVar("x"),), ())


# ---------------------------------------------------------------------------
# Round trips and randomized agreement with the naive evaluator.
# ---------------------------------------------------------------------------

def _strip_source(inst):
    return dataclasses.replace(inst, source_id="")


def test_round_trip_all_constraint_kinds():
    text = """
    (int x (1 (3 5)))
    (int y -2 4)
    (bool p)
    (relation r 2 (conflicts (1 1) (3 3)))
    (imp p (< (+ x (* 2 y)) (max x y 7)))
    p
    (r x y)
    (alldifferent x y)
    (weightedsum ((3 x) (-2 y)) >= -4)
    (element x (1 y 3) y)
    (cumulative ((0 2 1) (y 2 1)) 2)
    (mysterious x (y 7) nested)
    """
    inst = parse_instance(text)
    reparsed = parse_instance(format_instance(inst))
    assert _strip_source(reparsed) == _strip_source(inst)
    # and the printer is a fixed point after one round
    assert format_instance(reparsed) == format_instance(inst)


def _random_arith(rng, var_names, depth):
    if depth <= 0 or rng.random() < 0.35:
        if var_names and rng.random() < 0.6:
            return VarRef(rng.choice(var_names))
        return IntConst(rng.randint(-4, 4))
    op = rng.choice(["+", "-", "*", "div", "mod", "abs", "min", "max"])
    arity = {"+": rng.randint(1, 3), "-": rng.randint(1, 2), "*": 2,
             "div": 2, "mod": 2, "abs": 1, "min": 2, "max": 2}[op]
    return ArithOp(op, tuple(_random_arith(rng, var_names, depth - 1)
                             for _ in range(arity)))


def _random_bool(rng, int_names, bool_names, depth):
    roll = rng.random()
    if depth <= 0 or roll < 0.4:
        if bool_names and roll < 0.15:
            return BoolVarRef(rng.choice(bool_names))
        rel = rng.choice(["<", "<=", ">", ">=", "=", "!="])
        return Comparison(rel, _random_arith(rng, int_names, 2),
                          _random_arith(rng, int_names, 2))
    op = rng.choice(["and", "or", "not", "imp", "iff", "xor"])
    arity = {"and": rng.randint(1, 3), "or": rng.randint(1, 3), "not": 1,
             "imp": 2, "iff": 2, "xor": 2}[op]
    return BoolOp(op, tuple(_random_bool(rng, int_names, bool_names,
                                         depth - 1) for _ in range(arity)))


def _random_instance(rng):
    n_int = rng.randint(1, 4)
    int_vars = []
    for i in range(n_int):
        values = sorted(rng.sample(range(-5, 6), rng.randint(1, 5)))
        int_vars.append(IntVar.of(f"x{i}", [(v, v) for v in values]))
    int_names = [v.name for v in int_vars]
    bool_vars = tuple(BoolVar(f"p{i}") for i in range(rng.randint(0, 2)))
    bool_names = [v.name for v in bool_vars]

    constraints = []
    for _ in range(rng.randint(1, 4)):
        kind = rng.choice(["int", "int", "ext", "alldiff", "wsum", "elem",
                           "cumul"])
        if kind == "int":
            constraints.append(IntensionalConstraint(
                _random_bool(rng, int_names, bool_names, 3)))
        elif kind == "ext":
            scope = tuple(rng.choices(int_names, k=rng.randint(1, 2)))
            rows = tuple(sorted({tuple(rng.randint(-5, 5)
                                       for _ in scope)
                                 for _ in range(rng.randint(0, 6))}))
            constraints.append(ExtensionalConstraint(
                f"r{len(constraints)}", scope, rows, rng.random() < 0.5))
        elif kind == "alldiff":
            constraints.append(GlobalConstraint("alldifferent", tuple(
                _random_arith(rng, int_names, 1)
                for _ in range(rng.randint(1, 3)))))
        elif kind == "wsum":
            terms = [(rng.choice([-3, -1, 1, 2]), name)
                     for name in rng.sample(int_names,
                                            rng.randint(1, len(int_names)))]
            constraints.append(GlobalConstraint("weightedsum", (
                LinearExpr.of(terms, rng.randint(-3, 3)),
                rng.choice(["<", "<=", ">", ">=", "=", "!="]),
                IntConst(rng.randint(-6, 6)))))
        elif kind == "elem":
            entries = tuple(_random_arith(rng, int_names, 1)
                            for _ in range(rng.randint(1, 3)))
            constraints.append(GlobalConstraint("element", (
                _random_arith(rng, int_names, 1), entries,
                _random_arith(rng, int_names, 1))))
        else:
            tasks = tuple(tuple(_random_arith(rng, int_names, 1)
                                for _ in range(3))
                          for _ in range(rng.randint(1, 2)))
            constraints.append(GlobalConstraint("cumulative", (
                tasks, _random_arith(rng, int_names, 1))))
    return CspInstance(tuple(int_vars), bool_vars, tuple(constraints),
                       source_id=f"rand{rng.random()}")


def _random_assignment(rng, inst):
    int_values = {}
    for var in inst.int_vars:
        if rng.random() < 0.12:
            int_values[var.name] = rng.randint(-8, 8)  # may be off-domain
        else:
            lo, hi = rng.choice(var.intervals)
            int_values[var.name] = rng.randint(lo, hi)
    bool_values = {v.name: rng.random() < 0.5 for v in inst.bool_vars}
    return Assignment(int_values, bool_values)


def _outcome(fn, *args):
    try:
        return ("value", fn(*args))
    except (EvaluationError, NaiveError):
        return ("error",)


def test_check_assignment_agrees_with_naive_evaluator():
    rng = random.Random(20240817)
    for _ in range(200):
        inst = _random_instance(rng)
        for _ in range(3):
            assignment = _random_assignment(rng, inst)
            got = _outcome(check_assignment, inst, assignment)
            expected = _outcome(naive_check, inst, assignment)
            assert got == expected


def test_random_instances_round_trip():
    rng = random.Random(77)
    for _ in range(60):
        inst = _random_instance(rng)
        reparsed = parse_instance(format_instance(inst))
        assert _strip_source(reparsed) == _strip_source(inst)

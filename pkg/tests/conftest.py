import json
import sys
from pathlib import Path

import pytest

from cspfolio.csp import (
    Assignment,
    ArithOp,
    BoolOp,
    BoolVar,
    BoolVarRef,
    Comparison,
    CspInstance,
    ExtensionalConstraint,
    GlobalConstraint,
    IntConst,
    IntensionalConstraint,
    IntVar,
    LinearExpr,
    VarRef,
)

FIXTURES = Path(__file__).parent / "fixtures"
TOY_CORPUS = FIXTURES / "toy_corpus"
TOY_SOLVER = FIXTURES / "toy_solver.py"
TOY_SOLVER_NAMES = ("alpha", "beta", "gamma")


def toy_corpus_paths() -> list[Path]:
    return sorted(TOY_CORPUS.glob("*.csp"))


def write_solver_config(path: Path, names=TOY_SOLVER_NAMES) -> Path:
    entries = [
        {
            "solver_id": name,
            "command_template":
                f"{sys.executable} {TOY_SOLVER} {name} {{instance}}",
        }
        for name in names
    ]
    path.write_text(json.dumps(entries, indent=2))
    return path


@pytest.fixture
def solver_config(tmp_path) -> Path:
    return write_solver_config(tmp_path / "solvers.json")


# ---------------------------------------------------------------------------
# Random small instances shared by the model, feature and acceptance tests.
# ---------------------------------------------------------------------------

def random_arith(rng, var_names, depth):
    if depth <= 0 or rng.random() < 0.35:
        if var_names and rng.random() < 0.6:
            return VarRef(rng.choice(var_names))
        return IntConst(rng.randint(-4, 4))
    op = rng.choice(["+", "-", "*", "div", "mod", "abs", "min", "max"])
    arity = {"+": rng.randint(1, 3), "-": rng.randint(1, 2), "*": 2,
             "div": 2, "mod": 2, "abs": 1, "min": 2, "max": 2}[op]
    return ArithOp(op, tuple(random_arith(rng, var_names, depth - 1)
                             for _ in range(arity)))


def random_bool(rng, int_names, bool_names, depth):
    roll = rng.random()
    if depth <= 0 or roll < 0.4:
        if bool_names and roll < 0.15:
            return BoolVarRef(rng.choice(bool_names))
        rel = rng.choice(["<", "<=", ">", ">=", "=", "!="])
        return Comparison(rel, random_arith(rng, int_names, 2),
                          random_arith(rng, int_names, 2))
    op = rng.choice(["and", "or", "not", "imp", "iff", "xor"])
    arity = {"and": rng.randint(1, 3), "or": rng.randint(1, 3), "not": 1,
             "imp": 2, "iff": 2, "xor": 2}[op]
    return BoolOp(op, tuple(random_bool(rng, int_names, bool_names, depth - 1)
                            for _ in range(arity)))


def random_instance(rng) -> CspInstance:
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
                random_bool(rng, int_names, bool_names, 3)))
        elif kind == "ext":
            scope = tuple(rng.choices(int_names, k=rng.randint(1, 2)))
            rows = tuple(sorted({tuple(rng.randint(-5, 5) for _ in scope)
                                 for _ in range(rng.randint(0, 6))}))
            constraints.append(ExtensionalConstraint(
                f"r{len(constraints)}", scope, rows, rng.random() < 0.5))
        elif kind == "alldiff":
            constraints.append(GlobalConstraint("alldifferent", tuple(
                random_arith(rng, int_names, 1)
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
            entries = tuple(random_arith(rng, int_names, 1)
                            for _ in range(rng.randint(1, 3)))
            constraints.append(GlobalConstraint("element", (
                random_arith(rng, int_names, 1), entries,
                random_arith(rng, int_names, 1))))
        else:
            tasks = tuple(tuple(random_arith(rng, int_names, 1)
                                for _ in range(3))
                          for _ in range(rng.randint(1, 2)))
            constraints.append(GlobalConstraint("cumulative", (
                tasks, random_arith(rng, int_names, 1))))
    return CspInstance(tuple(int_vars), bool_vars, tuple(constraints),
                       source_id=f"rand{rng.random()}")


def random_assignment(rng, inst) -> Assignment:
    int_values = {}
    for var in inst.int_vars:
        if rng.random() < 0.12:
            int_values[var.name] = rng.randint(-8, 8)  # may be off-domain
        else:
            lo, hi = rng.choice(var.intervals)
            int_values[var.name] = rng.randint(lo, hi)
    bool_values = {v.name: rng.random() < 0.5 for v in inst.bool_vars}
    return Assignment(int_values, bool_values)

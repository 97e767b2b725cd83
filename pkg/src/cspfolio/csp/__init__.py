"""Finite-domain CSP data model and s-expression parser."""

from .model import (
    Assignment,
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
    VarRef,
    ArithOp,
    check_assignment,
    eval_arith,
    eval_bool,
    normalize_intervals,
)
from .parser import ParseError, format_instance, parse_file, parse_instance

__all__ = [
    "Assignment",
    "ArithOp",
    "BoolOp",
    "BoolVar",
    "BoolVarRef",
    "Comparison",
    "CspError",
    "CspInstance",
    "EvaluationError",
    "ExtensionalConstraint",
    "GlobalConstraint",
    "IntConst",
    "IntensionalConstraint",
    "IntVar",
    "LinearExpr",
    "ParseError",
    "VarRef",
    "check_assignment",
    "eval_arith",
    "eval_bool",
    "format_instance",
    "normalize_intervals",
    "parse_file",
    "parse_instance",
]

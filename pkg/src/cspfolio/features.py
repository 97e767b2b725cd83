"""Syntactic feature extraction for CSP instances.

The catalog is a fixed, versioned list of features computed from the
parsed instance only (no solver probing). Groups: variable/domain
statistics, constraint census, arithmetic-operator counts, global
constraint statistics, per-constraint-class domain statistics, and
extensional-table statistics. Externally computed feature tables (for
other problem domains) can be ingested from CSV.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .csp.model import (
    ArithOp,
    BoolOp,
    BoolVarRef,
    Comparison,
    CspInstance,
    IntConst,
    VarRef,
)
from .errors import DataError


@dataclass(frozen=True)
class FeatureDef:
    """`additive` marks pure counts that double when every constraint is
    duplicated; averages, percentages and variable statistics do not."""

    name: str
    additive: bool


CATALOG_VERSION = "v1"

_DEFS = (
    FeatureDef("num_int_vars", False),
    FeatureDef("num_bool_vars", False),
    FeatureDef("num_noncontiguous_domains", False),
    FeatureDef("min_domain_size", False),
    FeatureDef("max_domain_size", False),
    FeatureDef("avg_domain_size", False),
    FeatureDef("std_domain_size", False),
    FeatureDef("sum_log2_domain_size", False),
    FeatureDef("num_constraints", True),
    FeatureDef("num_intensional", True),
    FeatureDef("num_extensional", True),
    FeatureDef("num_global", True),
    FeatureDef("pct_intensional", False),
    FeatureDef("pct_extensional", False),
    FeatureDef("pct_global", False),
    FeatureDef("num_arithmetic_constraints", True),
    FeatureDef("num_multiplications", True),
    FeatureDef("sum_domain_mul_vars", True),
    FeatureDef("num_div_mod", True),
    FeatureDef("num_bool_connectives", True),
    FeatureDef("num_alldifferent", True),
    FeatureDef("num_weightedsum", True),
    FeatureDef("num_cumulative", True),
    FeatureDef("num_element", True),
    FeatureDef("num_other_globals", True),
    FeatureDef("avg_global_arity", False),
    FeatureDef("max_global_arity", False),
    FeatureDef("avg_domain_intensional_vars", False),
    FeatureDef("avg_domain_extensional_vars", False),
    FeatureDef("avg_domain_global_vars", False),
    FeatureDef("avg_extensional_tuples", False),
    FeatureDef("avg_extensional_arity", False),
)

FEATURE_NAMES = tuple(d.name for d in _DEFS)


@dataclass(frozen=True)
class FeatureCatalog:
    names: tuple[str, ...]
    version: str

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise DataError("duplicate feature names in catalog")


CATALOG = FeatureCatalog(FEATURE_NAMES, CATALOG_VERSION)


@dataclass(frozen=True)
class FeatureVector:
    instance_id: str
    values: tuple[float, ...]

    def __post_init__(self):
        for v in self.values:
            if not math.isfinite(v):
                raise DataError(
                    f"non-finite feature value for {self.instance_id!r}")


def _mean(xs) -> float:
    return sum(xs) / len(xs) if xs else 0.0


class _Census:
    """Single pass over an instance's constraint trees."""

    def __init__(self, inst: CspInstance):
        self.size = {v.name: v.size for v in inst.int_vars}
        self.num_mult = 0
        self.sum_domain_mul = 0
        self.num_divmod = 0
        self.num_connectives = 0
        self.constraint_has_arith = False

    def arith_vars(self, expr) -> set[str]:
        if isinstance(expr, IntConst):
            return set()
        if isinstance(expr, VarRef):
            return {expr.name}
        self.constraint_has_arith = True
        seen: set[str] = set()
        for a in expr.args:
            seen |= self.arith_vars(a)
        if expr.op == "*":
            self.num_mult += 1
            self.sum_domain_mul += sum(self.size[v] for v in seen)
        elif expr.op in ("div", "mod"):
            self.num_divmod += 1
        return seen

    def bool_vars(self, expr) -> set[str]:
        if isinstance(expr, BoolVarRef):
            return set()
        if isinstance(expr, Comparison):
            return self.arith_vars(expr.lhs) | self.arith_vars(expr.rhs)
        self.num_connectives += 1
        seen: set[str] = set()
        for a in expr.args:
            seen |= self.bool_vars(a)
        return seen

    def raw_vars(self, node) -> set[str]:
        if isinstance(node, tuple):
            seen: set[str] = set()
            for item in node:
                seen |= self.raw_vars(item)
            return seen
        if isinstance(node, str) and node in self.size:
            return {node}
        return set()


def extract_features(inst: CspInstance) -> FeatureVector:
    """Compute the v1 catalog vector. Deterministic and total on parsed
    instances; ratio features with empty denominators are 0."""
    census = _Census(inst)
    sizes = [v.size for v in inst.int_vars]
    n_con = len(inst.constraints)

    by_kind = {"intensional": [], "extensional": [], "global": []}
    for con in inst.constraints:
        by_kind[con.kind].append(con)
    intensional = by_kind["intensional"]
    extensional = by_kind["extensional"]
    globals_ = by_kind["global"]

    n_arith_con = 0
    vars_intensional: set[str] = set()
    for con in intensional:
        census.constraint_has_arith = False
        vars_intensional |= census.bool_vars(con.expr)
        if census.constraint_has_arith:
            n_arith_con += 1

    vars_extensional: set[str] = set()
    for con in extensional:
        vars_extensional |= set(con.scope)

    vars_global: set[str] = set()
    global_counts = {"alldifferent": 0, "weightedsum": 0, "cumulative": 0,
                     "element": 0, "other": 0}
    arities = []
    for con in globals_:
        arities.append(con.arity)
        if con.opaque:
            global_counts["other"] += 1
            vars_global |= census.raw_vars(con.args)
        elif con.name == "alldifferent":
            global_counts["alldifferent"] += 1
            for a in con.args:
                vars_global |= census.arith_vars(a)
        elif con.name == "weightedsum":
            global_counts["weightedsum"] += 1
            vars_global |= {v for _, v in con.args[0].terms}
        elif con.name == "element":
            global_counts["element"] += 1
            index, entries, value = con.args
            for e in (index, value) + entries:
                vars_global |= census.arith_vars(e)
        else:
            global_counts["cumulative"] += 1
            tasks, limit = con.args
            vars_global |= census.arith_vars(limit)
            for task in tasks:
                for f in task:
                    vars_global |= census.arith_vars(f)

    def avg_domain(var_names: set[str]) -> float:
        return _mean([census.size[v] for v in sorted(var_names)])

    values = {
        "num_int_vars": len(inst.int_vars),
        "num_bool_vars": len(inst.bool_vars),
        "num_noncontiguous_domains": sum(
            1 for v in inst.int_vars if len(v.intervals) > 1),
        "min_domain_size": min(sizes) if sizes else 0,
        "max_domain_size": max(sizes) if sizes else 0,
        "avg_domain_size": _mean(sizes),
        "std_domain_size": (
            math.sqrt(_mean([(s - _mean(sizes)) ** 2 for s in sizes]))
            if sizes else 0.0),
        "sum_log2_domain_size": sum(math.log2(s) for s in sizes),
        "num_constraints": n_con,
        "num_intensional": len(intensional),
        "num_extensional": len(extensional),
        "num_global": len(globals_),
        "pct_intensional": len(intensional) / n_con if n_con else 0.0,
        "pct_extensional": len(extensional) / n_con if n_con else 0.0,
        "pct_global": len(globals_) / n_con if n_con else 0.0,
        "num_arithmetic_constraints": n_arith_con,
        "num_multiplications": census.num_mult,
        "sum_domain_mul_vars": census.sum_domain_mul,
        "num_div_mod": census.num_divmod,
        "num_bool_connectives": census.num_connectives,
        "num_alldifferent": global_counts["alldifferent"],
        "num_weightedsum": global_counts["weightedsum"],
        "num_cumulative": global_counts["cumulative"],
        "num_element": global_counts["element"],
        "num_other_globals": global_counts["other"],
        "avg_global_arity": _mean(arities),
        "max_global_arity": max(arities) if arities else 0,
        "avg_domain_intensional_vars": avg_domain(vars_intensional),
        "avg_domain_extensional_vars": avg_domain(vars_extensional),
        "avg_domain_global_vars": avg_domain(vars_global),
        "avg_extensional_tuples": _mean([len(c.tuples) for c in extensional]),
        "avg_extensional_arity": _mean([len(c.scope) for c in extensional]),
    }
    return FeatureVector(inst.source_id,
                         tuple(float(values[name]) for name in FEATURE_NAMES))


# ---------------------------------------------------------------------------
# Min-max normalization.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormalizationParams:
    mins: tuple[float, ...]
    maxs: tuple[float, ...]


def normalize_fit(train: list[FeatureVector]) -> NormalizationParams:
    """Per-feature min and max over the training vectors only."""
    if not train:
        raise DataError("cannot fit normalization on an empty training set")
    width = len(train[0].values)
    for v in train:
        if len(v.values) != width:
            raise DataError("feature vectors have inconsistent lengths")
    mins = tuple(min(v.values[j] for v in train) for j in range(width))
    maxs = tuple(max(v.values[j] for v in train) for j in range(width))
    return NormalizationParams(mins, maxs)


def normalize_apply(params: NormalizationParams,
                    vector: FeatureVector) -> FeatureVector:
    """Scale into [0,1] with training min/max; constant features map to 0
    and out-of-range values clamp to the boundary."""
    if len(vector.values) != len(params.mins):
        raise DataError("feature vector does not match normalization params")
    out = []
    for value, lo, hi in zip(vector.values, params.mins, params.maxs):
        if hi == lo:
            out.append(0.0)
        else:
            out.append(min(1.0, max(0.0, (value - lo) / (hi - lo))))
    return FeatureVector(vector.instance_id, tuple(out))


# ---------------------------------------------------------------------------
# CSV ingestion / emission.
# ---------------------------------------------------------------------------

def load_feature_csv(path) -> tuple[FeatureCatalog, list[FeatureVector]]:
    """Read a feature table whose header is instance_id,<name1>,...

    The catalog is inferred from the header (version "csv"). Rows must be
    rectangular, numeric, finite, with unique instance ids.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows or rows[0][:1] != ["instance_id"] or len(rows[0]) < 2:
        raise DataError(f"{path}: expected header instance_id,<name1>,...")
    catalog = FeatureCatalog(tuple(rows[0][1:]), "csv")
    vectors = []
    seen = set()
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(rows[0]):
            raise DataError(f"{path}: row {r} has {len(row)} cells, "
                            f"expected {len(rows[0])}")
        iid = row[0]
        if iid in seen:
            raise DataError(f"{path}: duplicate instance id {iid!r}")
        seen.add(iid)
        try:
            values = tuple(float(cell) for cell in row[1:])
        except ValueError:
            raise DataError(f"{path}: non-numeric cell in row {r}") from None
        for v in values:
            if not math.isfinite(v):
                raise DataError(f"{path}: non-finite value in row {r}")
        vectors.append(FeatureVector(iid, values))
    return catalog, vectors


def save_feature_csv(catalog: FeatureCatalog,
                     vectors: list[FeatureVector], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("instance_id",) + catalog.names)
        for v in vectors:
            if len(v.values) != len(catalog.names):
                raise DataError(f"vector {v.instance_id!r} does not match "
                                "catalog width")
            writer.writerow((v.instance_id,) + tuple(repr(x) for x in v.values))

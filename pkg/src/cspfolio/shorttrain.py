"""Short-training workflow and timeout-sweep simulation.

Short training runs every solver on every corpus instance at a short
preparation timeout, trains the k-NN portfolio on the resulting PAR10
data, and dispatches each still-unsolved instance to its predicted-best
solver at a larger exploitation timeout. When the exploitation timeout
does not exceed the preparation timeout the dispatch phase is skipped:
every solver already failed at that budget, so re-running one of them
cannot help and exploitation time is zero.

The sweep repeats this (or a 5-fold cross-validation evaluation) at
several preparation timeouts, fully simulated from one measured matrix
by truncation. Time accounting: preparation = sum of all phase-1
runtimes; exploitation = per dispatched instance, its runtime when
solved, the full exploitation timeout otherwise. Model grid-search time
is reported separately and excluded from totals; feature-extraction
time is included only on request.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

from . import knn
from .errors import DataError
from .features import FeatureVector
from .perfdata import (
    Par10Table,
    RunRecord,
    RuntimeMatrix,
    par10_table,
    truncate,
)

SWEEP_MODES = ("short_training", "cross_validation")


@dataclass(frozen=True)
class ShortTrainPlan:
    corpus: tuple[str, ...]
    solver_ids: tuple[str, ...]
    prep_timeout_s: float
    exploit_timeout_s: float

    def __post_init__(self):
        if self.prep_timeout_s <= 0:
            raise DataError("preparation timeout must be positive")
        if self.exploit_timeout_s < self.prep_timeout_s:
            raise DataError("exploitation timeout must be >= preparation "
                            "timeout")


@dataclass
class SweepPoint:
    timeout_s: float
    solved: int
    prep_train_s: float
    exploit_s: float
    total_s: float

    def __post_init__(self):
        # 2e-3 absorbs per-cell rounding when a point comes back from CSV
        if abs(self.total_s - (self.prep_train_s + self.exploit_s)) > 2e-3:
            raise DataError("total time must equal prep + exploitation")


@dataclass
class EvaluationReport:
    method: str
    prep_timeout_s: float
    exploit_timeout_s: float
    solver_ids: tuple[str, ...]
    corpus_size: int
    chosen_k: int
    chosen_distance: str
    phase1_solved: int
    phase3_solved: int
    solved: int
    prep_train_time_s: float
    exploitation_time_s: float
    total_time_s: float
    grid_search_time_s: float
    feature_time_s: float
    selections: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


class MatrixSimulator:
    """Execution backend that replays a measured matrix at any shorter
    timeout via truncation. Duck-typed with the live process runner."""

    def __init__(self, matrix: RuntimeMatrix):
        self.matrix = matrix
        self.instance_ids = matrix.instance_ids
        self.solver_ids = matrix.solver_ids

    def run_all(self, timeout_s: float) -> RuntimeMatrix:
        return truncate(self.matrix, timeout_s)

    def run_one(self, instance_id: str, solver_id: str,
                timeout_s: float) -> RunRecord:
        if not 0 < timeout_s <= self.matrix.measured_timeout_s:
            raise DataError("timeout out of range for this matrix")
        rec = self.matrix.cell(instance_id, solver_id)
        if rec.status != "timeout" and rec.runtime_s <= timeout_s:
            return rec
        return RunRecord(instance_id, solver_id, "timeout", timeout_s)


def _vector_map(vectors) -> dict[str, FeatureVector]:
    out = {}
    for v in vectors:
        if v.instance_id in out:
            raise DataError(f"duplicate feature vector for {v.instance_id!r}")
        out[v.instance_id] = v
    return out


def short_train_run(plan: ShortTrainPlan, vectors, backend,
                    k_range=knn.DEFAULT_K_RANGE,
                    distances=knn.DISTANCE_NAMES, seed: int = 0,
                    feature_time_s: float = 0.0,
                    include_feature_time: bool = False) -> EvaluationReport:
    """Run preparation, training and exploitation over the plan's corpus."""
    by_id = _vector_map(vectors)
    missing = [iid for iid in plan.corpus if iid not in by_id]
    if missing:
        raise DataError(f"missing features for {missing[:3]}"
                        + ("..." if len(missing) > 3 else ""))

    # phase 1: all solvers on all instances at the preparation timeout
    phase1 = backend.run_all(plan.prep_timeout_s)
    if (phase1.instance_ids != plan.corpus
            or phase1.solver_ids != plan.solver_ids):
        raise DataError("backend corpus does not match the plan")
    prep_time = sum(rec.runtime_s for rec in phase1.records())

    # phase 2: train the selector on phase-1 PAR10 data
    aligned = [by_id[iid] for iid in phase1.instance_ids]
    p1 = par10_table(phase1, plan.prep_timeout_s)
    started = time.perf_counter()
    model = knn.train(aligned, p1, k_range=k_range, distances=distances,
                      seed=seed)
    grid_time = time.perf_counter() - started

    solved_ids = set(phase1.solved_instances())
    phase1_solved = len(solved_ids)

    # phase 3: dispatch instances nobody solved yet, skipped when the
    # exploitation budget is no larger than the one that just failed
    selections: dict[str, dict] = {}
    exploit_time = 0.0
    phase3_solved = 0
    if plan.exploit_timeout_s > plan.prep_timeout_s:
        for iid in phase1.instance_ids:
            if iid in solved_ids:
                continue
            sid = knn.select_solver(model, by_id[iid])
            rec = backend.run_one(iid, sid, plan.exploit_timeout_s)
            if rec.status == "solved":
                phase3_solved += 1
                exploit_time += rec.runtime_s
            else:
                exploit_time += plan.exploit_timeout_s
            selections[iid] = {"solver": sid, "status": rec.status,
                               "runtime_s": rec.runtime_s}

    prep_train = prep_time + (feature_time_s if include_feature_time else 0.0)
    return EvaluationReport(
        method="short_train",
        prep_timeout_s=plan.prep_timeout_s,
        exploit_timeout_s=plan.exploit_timeout_s,
        solver_ids=plan.solver_ids,
        corpus_size=len(plan.corpus),
        chosen_k=model.k,
        chosen_distance=model.distance,
        phase1_solved=phase1_solved,
        phase3_solved=phase3_solved,
        solved=phase1_solved + phase3_solved,
        prep_train_time_s=prep_train,
        exploitation_time_s=exploit_time,
        total_time_s=prep_train + exploit_time,
        grid_search_time_s=grid_time,
        feature_time_s=feature_time_s,
        selections=selections)


def cross_validation_point(matrix: RuntimeMatrix, vectors, t: float,
                           seed: int, k_range=knn.DEFAULT_K_RANGE,
                           distances=knn.DISTANCE_NAMES) -> SweepPoint:
    """Evaluate held-out selection: train on 4/5 folds truncated to t,
    dispatch every test instance at the full measured timeout."""
    by_id = _vector_map(vectors)
    m_t = truncate(matrix, t)
    p_t = par10_table(m_t, t)
    prep_time = sum(rec.runtime_s for rec in m_t.records())

    folds = knn.make_folds(matrix.instance_ids, seed)
    position = {iid: i for i, iid in enumerate(matrix.instance_ids)}
    solved = 0
    exploit_time = 0.0
    full_timeout = matrix.measured_timeout_s
    for fold in range(folds.n_folds):
        train_ids = [iid for iid in matrix.instance_ids
                     if folds.assignments[iid] != fold]
        test_ids = [iid for iid in matrix.instance_ids
                    if folds.assignments[iid] == fold]
        if not test_ids:
            continue
        rows = [position[iid] for iid in train_ids]
        sub = Par10Table(tuple(train_ids), p_t.solver_ids,
                         p_t.scores[rows], p_t.timeout_s)
        model = knn.train([by_id[iid] for iid in train_ids], sub,
                          k_range=k_range, distances=distances, seed=seed)
        for iid in test_ids:
            sid = knn.select_solver(model, by_id[iid])
            rec = matrix.cell(iid, sid)
            if rec.status == "solved":
                solved += 1
                exploit_time += rec.runtime_s
            else:
                exploit_time += full_timeout
    return SweepPoint(float(t), solved, prep_time, exploit_time,
                      prep_time + exploit_time)


def timeout_sweep(matrix: RuntimeMatrix, vectors, timeouts, mode: str,
                  seed: int = 0, k_range=knn.DEFAULT_K_RANGE,
                  distances=knn.DISTANCE_NAMES) -> list[SweepPoint]:
    if mode not in SWEEP_MODES:
        raise DataError(f"unknown sweep mode {mode!r}")
    for t in timeouts:
        if not 0 < t <= matrix.measured_timeout_s:
            raise DataError(f"sweep timeout {t} out of range")
    points = []
    for t in timeouts:
        if mode == "short_training":
            plan = ShortTrainPlan(matrix.instance_ids, matrix.solver_ids,
                                  float(t), matrix.measured_timeout_s)
            report = short_train_run(plan, vectors, MatrixSimulator(matrix),
                                     k_range=k_range, distances=distances,
                                     seed=seed)
            points.append(SweepPoint(float(t), report.solved,
                                     report.prep_train_time_s,
                                     report.exploitation_time_s,
                                     report.total_time_s))
        else:
            points.append(cross_validation_point(matrix, vectors, t, seed,
                                                 k_range, distances))
    return points


# ---------------------------------------------------------------------------
# Curve CSV with baseline reference rows.
# ---------------------------------------------------------------------------

@dataclass
class ReferenceRow:
    label: str  # "best_fixed" or "oracle"
    solved: int
    total_s: float


def reference_rows(matrix: RuntimeMatrix) -> list[ReferenceRow]:
    """Horizontal-line references: solved counts and wall times of the
    best fixed solver and of the per-instance oracle, with unsolved
    instances charged at the measured timeout."""
    from .baselines import best_fixed, oracle_selection

    table = par10_table(matrix, matrix.measured_timeout_s)
    fixed = best_fixed(table)
    fixed_solved = 0
    fixed_time = 0.0
    for iid in matrix.instance_ids:
        rec = matrix.cell(iid, fixed)
        if rec.status == "solved":
            fixed_solved += 1
            fixed_time += rec.runtime_s
        else:
            fixed_time += matrix.measured_timeout_s

    chosen = oracle_selection(table)
    oracle_solved = 0
    oracle_time = 0.0
    for iid in matrix.instance_ids:
        rec = matrix.cell(iid, chosen[iid])
        if rec.status == "solved":
            oracle_solved += 1
            oracle_time += rec.runtime_s
        else:
            oracle_time += matrix.measured_timeout_s
    return [ReferenceRow("best_fixed", fixed_solved, fixed_time),
            ReferenceRow("oracle", oracle_solved, oracle_time)]


CURVE_HEADER = "timeout_s,solved,prep_train_s,exploit_s,total_s"


def emit_curve_csv(points, references, path) -> None:
    """One row per sweep point plus one reference row per baseline; the
    references carry their label in the timeout column and all their
    time in the exploitation column."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CURVE_HEADER + "\n")
        for p in points:
            fh.write(f"{p.timeout_s!r},{p.solved},{p.prep_train_s:.3f},"
                     f"{p.exploit_s:.3f},{p.total_s:.3f}\n")
        for ref in references:
            fh.write(f"{ref.label},{ref.solved},0.000,{ref.total_s:.3f},"
                     f"{ref.total_s:.3f}\n")


def read_curve_csv(path) -> tuple[list[SweepPoint], list[ReferenceRow]]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != CURVE_HEADER:
        raise DataError(f"{path}: expected header {CURVE_HEADER}")
    points, references = [], []
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != 5:
            raise DataError(f"{path}: expected 5 cells per row")
        first, solved, prep, exploit, total = cells
        try:
            t = float(first)
        except ValueError:
            references.append(ReferenceRow(first, int(solved), float(total)))
            continue
        points.append(SweepPoint(t, int(solved), float(prep), float(exploit),
                                 float(total)))
    return points, references

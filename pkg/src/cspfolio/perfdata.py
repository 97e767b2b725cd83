"""Solver performance measurements, PAR10 scoring and timeout truncation.

A RuntimeMatrix is a complete instances-by-solvers table of RunRecords
taken at one measurement timeout. Results at any shorter timeout t are
derived by truncation: runs that finished within t keep their outcome,
everything else becomes a timeout at t. PAR10 maps a record to its
runtime when solved within the timeout and to 10x the timeout otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

STATUSES = ("solved", "timeout", "crashed", "wrong_answer")


@dataclass(frozen=True)
class RunRecord:
    instance_id: str
    solver_id: str
    status: str
    runtime_s: float

    def __post_init__(self):
        if self.status not in STATUSES:
            raise DataError(f"unknown status {self.status!r}")
        if self.runtime_s < 0:
            raise DataError(f"negative runtime for ({self.instance_id!r}, "
                            f"{self.solver_id!r})")
        # millisecond resolution keeps 1-second-timeout arithmetic exact
        object.__setattr__(self, "runtime_s", round(float(self.runtime_s), 3))


class RuntimeMatrix:
    """Complete instances x solvers table of RunRecords.

    Instance and solver orders default to first occurrence in `records`
    and are preserved by CSV round-trips.
    """

    def __init__(self, records, measured_timeout_s: float,
                 instance_ids=None, solver_ids=None):
        if measured_timeout_s <= 0:
            raise DataError("measurement timeout must be positive")
        self.measured_timeout_s = float(measured_timeout_s)
        records = list(records)
        if instance_ids is None:
            instance_ids = list(dict.fromkeys(r.instance_id for r in records))
        if solver_ids is None:
            solver_ids = list(dict.fromkeys(r.solver_id for r in records))
        self.instance_ids = tuple(instance_ids)
        self.solver_ids = tuple(solver_ids)
        self._cells: dict[tuple[str, str], RunRecord] = {}
        known_i, known_s = set(self.instance_ids), set(self.solver_ids)
        for rec in records:
            key = (rec.instance_id, rec.solver_id)
            if rec.instance_id not in known_i or rec.solver_id not in known_s:
                raise DataError(f"record for unknown pair {key}")
            if key in self._cells:
                raise DataError(f"duplicate record for {key}")
            if rec.runtime_s > self.measured_timeout_s:
                raise DataError(f"runtime exceeds measurement timeout for {key}")
            if rec.status == "timeout" and rec.runtime_s != self.measured_timeout_s:
                raise DataError(f"timeout record with runtime != timeout for {key}")
            self._cells[key] = rec
        for iid in self.instance_ids:
            for sid in self.solver_ids:
                if (iid, sid) not in self._cells:
                    raise DataError(f"missing record for ({iid!r}, {sid!r})")

    def cell(self, instance_id: str, solver_id: str) -> RunRecord:
        return self._cells[(instance_id, solver_id)]

    def records(self):
        for iid in self.instance_ids:
            for sid in self.solver_ids:
                yield self._cells[(iid, sid)]

    def solved_instances(self) -> list[str]:
        """Instances solved by at least one solver, in matrix order."""
        return [iid for iid in self.instance_ids
                if any(self._cells[(iid, sid)].status == "solved"
                       for sid in self.solver_ids)]

    def __eq__(self, other):
        return (isinstance(other, RuntimeMatrix)
                and self.measured_timeout_s == other.measured_timeout_s
                and self.instance_ids == other.instance_ids
                and self.solver_ids == other.solver_ids
                and self._cells == other._cells)

    def __repr__(self):
        return (f"RuntimeMatrix({len(self.instance_ids)} instances x "
                f"{len(self.solver_ids)} solvers @ {self.measured_timeout_s}s)")


def par10(rec: RunRecord, timeout_s: float,
          measured_timeout_s: float | None = None) -> float:
    """Runtime if solved within timeout_s, else 10x timeout_s. Crashed and
    wrong answers count as unsolved. Scores at timeouts above the
    measurement timeout cannot be derived and are rejected."""
    if measured_timeout_s is not None and timeout_s > measured_timeout_s:
        raise DataError("timeout exceeds the measurement timeout")
    if rec.status == "solved" and rec.runtime_s <= timeout_s:
        return rec.runtime_s
    return 10.0 * timeout_s


@dataclass(eq=False)
class Par10Table:
    instance_ids: tuple[str, ...]
    solver_ids: tuple[str, ...]
    scores: np.ndarray  # shape (instances, solvers), float64
    timeout_s: float

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.shape != (len(self.instance_ids), len(self.solver_ids)):
            raise DataError("score array does not match id lists")
        penalty = 10.0 * self.timeout_s
        ok = (self.scores <= self.timeout_s) | (self.scores == penalty)
        if not bool(np.all(ok)):
            raise DataError("scores must be <= timeout (solved) or 10x timeout")

    def row(self, instance_id: str) -> np.ndarray:
        return self.scores[self.instance_ids.index(instance_id)]

    def solved_mask(self) -> np.ndarray:
        return self.scores <= self.timeout_s


def par10_table(matrix: RuntimeMatrix, timeout_s: float) -> Par10Table:
    if not 0 < timeout_s <= matrix.measured_timeout_s:
        raise DataError("timeout out of range for this matrix")
    scores = np.empty((len(matrix.instance_ids), len(matrix.solver_ids)))
    for i, iid in enumerate(matrix.instance_ids):
        for j, sid in enumerate(matrix.solver_ids):
            scores[i, j] = par10(matrix.cell(iid, sid), timeout_s)
    return Par10Table(matrix.instance_ids, matrix.solver_ids, scores,
                      float(timeout_s))


def truncate(matrix: RuntimeMatrix, t: float) -> RuntimeMatrix:
    """Derive the matrix that a measurement at timeout t would have
    produced: outcomes observed within t are kept, every other cell is a
    timeout at t."""
    if not 0 < t <= matrix.measured_timeout_s:
        raise DataError("truncation timeout out of range")
    t = float(t)
    records = []
    for rec in matrix.records():
        if rec.status != "timeout" and rec.runtime_s <= t:
            records.append(rec)
        else:
            records.append(RunRecord(rec.instance_id, rec.solver_id,
                                     "timeout", t))
    return RuntimeMatrix(records, t, matrix.instance_ids, matrix.solver_ids)


# ---------------------------------------------------------------------------
# CSV round-trip.
# ---------------------------------------------------------------------------

def save_matrix_csv(matrix: RuntimeMatrix, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# timeout_s={matrix.measured_timeout_s!r}\n")
        fh.write("instance_id,solver_id,status,runtime_s\n")
        for rec in matrix.records():
            fh.write(f"{rec.instance_id},{rec.solver_id},{rec.status},"
                     f"{rec.runtime_s:.3f}\n")


def load_matrix_csv(path) -> RuntimeMatrix:
    timeout_s = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("timeout_s="):
                    timeout_s = float(body.split("=", 1)[1])
                continue
            rows.append((lineno, line.split(",")))
    if timeout_s is None:
        raise DataError(f"{path}: missing '# timeout_s=<T>' comment line")
    if not rows or rows[0][1] != ["instance_id", "solver_id", "status",
                                  "runtime_s"]:
        raise DataError(f"{path}: expected header "
                        "instance_id,solver_id,status,runtime_s")
    records = []
    for lineno, cells in rows[1:]:
        if len(cells) != 4:
            raise DataError(f"{path}: line {lineno}: expected 4 cells")
        iid, sid, status, runtime = cells
        try:
            runtime_f = float(runtime)
        except ValueError:
            raise DataError(f"{path}: line {lineno}: bad runtime "
                            f"{runtime!r}") from None
        records.append(RunRecord(iid, sid, status, runtime_f))
    return RuntimeMatrix(records, timeout_s)

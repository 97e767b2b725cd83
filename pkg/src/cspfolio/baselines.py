"""Reference selection methods to compare the portfolio against.

best_fixed: the single solver with the smallest total PAR10.
oracle_selection: per-instance best solver in hindsight (virtual best).
sunny_schedule: per-query time-sharing schedule over the k nearest
    neighbors (greedy max-coverage solver set, time proportional to
    neighbor solved-counts, plus a backup slot for uncovered neighbors).
ridge: per-solver L2-regularized linear runtime prediction, selecting
    the solver with the smallest predicted PAR10.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .features import FeatureVector, normalize_apply
from .knn import FoldPartition, PortfolioModel, distance_rows
from .perfdata import Par10Table


def best_fixed(par10: Par10Table) -> str:
    """Solver with the smallest column sum; earlier solver wins ties."""
    if len(par10.instance_ids) == 0:
        raise DataError("empty PAR10 table")
    totals = np.cumsum(par10.scores, axis=0)[-1]
    return par10.solver_ids[int(np.argmin(totals))]


def oracle_selection(par10: Par10Table) -> dict[str, str]:
    """Per-instance argmin solver; earlier solver wins ties."""
    chosen = np.argmin(par10.scores, axis=1)
    return {iid: par10.solver_ids[int(j)]
            for iid, j in zip(par10.instance_ids, chosen)}


def selection_total(par10: Par10Table, selection: dict[str, str]) -> float:
    """Total PAR10 of a per-instance selection, in instance order."""
    col = {sid: j for j, sid in enumerate(par10.solver_ids)}
    contribs = np.array([par10.scores[i, col[selection[iid]]]
                         for i, iid in enumerate(par10.instance_ids)])
    return float(np.sum(contribs)) if len(contribs) else 0.0


def selection_solved(par10: Par10Table, selection: dict[str, str]) -> int:
    col = {sid: j for j, sid in enumerate(par10.solver_ids)}
    return sum(1 for i, iid in enumerate(par10.instance_ids)
               if par10.scores[i, col[selection[iid]]] <= par10.timeout_s)


def fixed_total(par10: Par10Table, solver_id: str) -> float:
    j = par10.solver_ids.index(solver_id)
    return float(np.sum(par10.scores[:, j]))


def fixed_solved(par10: Par10Table, solver_id: str) -> int:
    j = par10.solver_ids.index(solver_id)
    return int(np.sum(par10.scores[:, j] <= par10.timeout_s))


# ---------------------------------------------------------------------------
# SUNNY-style scheduling.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    slots: tuple[tuple[str, float], ...]  # (solver_id, budget_s)

    def __post_init__(self):
        for sid, budget in self.slots:
            if budget <= 0:
                raise DataError(f"non-positive budget for {sid!r}")

    @property
    def total_budget(self) -> float:
        return sum(b for _, b in self.slots)


def sunny_schedule(model: PortfolioModel, vector: FeatureVector,
                   total_timeout_s: float, k: int = 16) -> Schedule:
    """Build a time-sharing schedule for one query.

    Euclidean distance over the k nearest neighbors (regardless of the
    model's tuned distance). Solvers are picked greedily to maximize the
    number of neighbors covered; each picked solver gets time
    proportional to its neighbor solved-count, and a backup slot (the
    training-wide best_fixed solver) gets the share of still-uncovered
    neighbors. Slots are ordered by descending share.
    """
    if total_timeout_s <= 0:
        raise DataError("total timeout must be positive")
    if k > len(model.train_ids):
        raise DataError("k exceeds the number of training instances")
    normalized = normalize_apply(model.normalization, vector)
    dists = distance_rows("euclidean", model.train_X,
                          np.asarray(normalized.values))
    order = np.lexsort((model._id_rank, dists))
    neighbor_idx = order[:k]
    solved = model.par10.solved_mask()[neighbor_idx]  # (k, S) bool

    n_solvers = solved.shape[1]
    solved_counts = solved.sum(axis=0)
    uncovered = np.ones(k, dtype=bool)
    picked: list[int] = []
    while uncovered.any():
        gains = [int(np.sum(solved[uncovered, j])) for j in range(n_solvers)]
        best_j = int(np.argmax(gains))
        if gains[best_j] == 0:
            break
        picked.append(best_j)
        uncovered &= ~solved[:, best_j]

    weights = {j: int(solved_counts[j]) for j in picked}
    n_uncovered = int(np.sum(uncovered))
    backup = None
    if n_uncovered:
        backup = model.solver_ids.index(best_fixed(model.par10))
        if backup in weights:
            weights[backup] += n_uncovered
            backup = None
        else:
            weights[backup] = n_uncovered

    # order slots by descending weight, then solver order; give the last
    # slot the remainder so budgets sum to the timeout exactly
    slot_ids = sorted(weights, key=lambda j: (-weights[j], j))
    total_weight = sum(weights.values())
    slots = []
    used = 0.0
    for pos, j in enumerate(slot_ids):
        if pos == len(slot_ids) - 1:
            budget = total_timeout_s - used
        else:
            budget = total_timeout_s * weights[j] / total_weight
            used += budget
        slots.append((model.solver_ids[j], budget))
    return Schedule(tuple(slots))


# ---------------------------------------------------------------------------
# Ridge regression runtime prediction.
# ---------------------------------------------------------------------------

RIDGE_LAMBDAS = tuple(10.0 ** e for e in range(-8, 0))


@dataclass(eq=False)
class RidgeModel:
    solver_ids: tuple[str, ...]
    weights: np.ndarray     # (solvers, features)
    intercepts: np.ndarray  # (solvers,)
    ridge: float


def ridge_solve(X: np.ndarray, y: np.ndarray, ridge: float) -> tuple[np.ndarray, float]:
    """Closed-form L2-penalized least squares; the intercept column is
    not penalized."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, f = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    gram = A.T @ A
    gram[np.arange(f), np.arange(f)] += ridge
    try:
        coef = np.linalg.solve(gram, A.T @ y)
    except np.linalg.LinAlgError:
        raise DataError("singular normal equations; use a positive ridge") from None
    return coef[:f], float(coef[f])


def fit_ridge(vectors, par10: Par10Table, ridge: float) -> RidgeModel:
    """One least-squares fit per solver on normalized features; targets
    are the solver's PAR10 scores."""
    ids = tuple(v.instance_id for v in vectors)
    if ids != par10.instance_ids:
        raise DataError("feature vectors not aligned with PAR10 table")
    X = np.array([v.values for v in vectors], dtype=np.float64)
    weights = np.empty((len(par10.solver_ids), X.shape[1]))
    intercepts = np.empty(len(par10.solver_ids))
    for j in range(len(par10.solver_ids)):
        weights[j], intercepts[j] = ridge_solve(X, par10.scores[:, j], ridge)
    return RidgeModel(par10.solver_ids, weights, intercepts, float(ridge))


def ridge_predict(model: RidgeModel, values: np.ndarray) -> np.ndarray:
    return model.weights @ np.asarray(values, dtype=np.float64) + model.intercepts


def ridge_select(model: RidgeModel, vector: FeatureVector) -> str:
    """Solver with the smallest predicted PAR10 for a normalized query;
    earlier solver wins ties."""
    preds = ridge_predict(model, np.asarray(vector.values))
    return model.solver_ids[int(np.argmin(preds))]


def choose_ridge(vectors, par10: Par10Table, folds: FoldPartition,
                 lambdas=RIDGE_LAMBDAS) -> float:
    """Pick the penalty with the best 5-fold CV objective (total PAR10 of
    the selected solvers); ties prefer the smaller penalty."""
    ids = tuple(v.instance_id for v in vectors)
    if ids != par10.instance_ids:
        raise DataError("feature vectors not aligned with PAR10 table")
    X = np.array([v.values for v in vectors], dtype=np.float64)
    fold_of = np.array([folds.assignments[iid] for iid in ids])
    n = len(ids)

    best_lam, best_obj = None, None
    for lam in sorted(lambdas):
        contribs = np.zeros(n)
        for fold in range(folds.n_folds):
            test_idx = np.where(fold_of == fold)[0]
            train_idx = np.where(fold_of != fold)[0]
            if len(test_idx) == 0 or len(train_idx) == 0:
                continue
            w = np.empty((len(par10.solver_ids), X.shape[1]))
            b = np.empty(len(par10.solver_ids))
            for j in range(len(par10.solver_ids)):
                w[j], b[j] = ridge_solve(X[train_idx],
                                         par10.scores[train_idx, j], lam)
            preds = X[test_idx] @ w.T + b
            chosen = np.argmin(preds, axis=1)
            contribs[test_idx] = par10.scores[test_idx, chosen]
        obj = float(np.sum(contribs))
        if best_obj is None or obj < best_obj:
            best_lam, best_obj = lam, obj
    return best_lam

"""k-nearest-neighbor solver selection with PAR10-driven grid search.

Selection for a query instance: find the k nearest training instances
under the chosen distance, sum each solver's PAR10 scores over those
neighbors, and pick the solver with the smallest sum (earlier solver
wins ties, matching a strict-inequality minimum scan). The
metaparameters (k, distance) are chosen by 5-fold cross-validation
minimizing the total PAR10 of the selected solvers over all training
instances.

Determinism contract: neighbor ties break by ascending instance_id,
solver ties by solver order, objective ties by (smaller k, distance
order as listed). Fold assignment depends only on (seed, instance_id).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .features import (
    FeatureVector,
    NormalizationParams,
    normalize_apply,
    normalize_fit,
)
from .perfdata import Par10Table

DISTANCE_NAMES = ("euclidean", "manhattan", "chebyshev", "canberra")

DEFAULT_K_RANGE = range(1, 21)

MODEL_FORMAT_VERSION = 1


def distance_rows(name: str, X: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Distances from query point q to every row of X."""
    diff = X - q
    if name == "euclidean":
        return np.sqrt(np.sum(diff * diff, axis=1))
    if name == "manhattan":
        return np.sum(np.abs(diff), axis=1)
    if name == "chebyshev":
        return np.max(np.abs(diff), axis=1)
    if name == "canberra":
        num = np.abs(diff)
        den = np.abs(X) + np.abs(q)
        # 0/0 terms are defined as 0
        terms = np.divide(num, den, out=np.zeros_like(num), where=den != 0)
        return np.sum(terms, axis=1)
    raise DataError(f"unknown distance measure {name!r}")


def _id_ranks(ids) -> np.ndarray:
    """rank[i] = position of ids[i] in the lexicographic order of ids."""
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    rank = np.empty(len(ids), dtype=np.int64)
    for pos, i in enumerate(order):
        rank[i] = pos
    return rank


@dataclass(frozen=True)
class FoldPartition:
    assignments: dict  # instance_id -> fold index
    seed: int
    n_folds: int = 5


def make_folds(instance_ids, seed: int, n_folds: int = 5) -> FoldPartition:
    """Balanced, machine-independent partition: instances are ordered by
    sha256(seed:instance_id) and dealt round-robin into folds."""
    def key(iid: str):
        digest = hashlib.sha256(f"{seed}:{iid}".encode()).hexdigest()
        return (digest, iid)

    ordered = sorted(instance_ids, key=key)
    return FoldPartition({iid: pos % n_folds for pos, iid in enumerate(ordered)},
                         seed, n_folds)


@dataclass(eq=False)
class PortfolioModel:
    k: int
    distance: str
    normalization: NormalizationParams
    feature_names: tuple[str, ...]
    catalog_version: str
    train_ids: tuple[str, ...]
    train_X: np.ndarray  # normalized feature rows aligned with train_ids
    par10: Par10Table

    def __post_init__(self):
        self.train_X = np.asarray(self.train_X, dtype=np.float64)
        if self.distance not in DISTANCE_NAMES:
            raise DataError(f"unknown distance measure {self.distance!r}")
        if not 1 <= self.k <= len(self.train_ids):
            raise DataError("k must be between 1 and the training size")
        if self.train_X.shape != (len(self.train_ids), len(self.feature_names)):
            raise DataError("training feature array shape mismatch")
        if self.par10.instance_ids != self.train_ids:
            raise DataError("PAR10 table not aligned with training instances")
        self._id_rank = _id_ranks(self.train_ids)

    @property
    def solver_ids(self) -> tuple[str, ...]:
        return self.par10.solver_ids


def _neighbor_indices(model: PortfolioModel, values: np.ndarray,
                      k: int) -> np.ndarray:
    if k > len(model.train_ids):
        raise DataError("k exceeds the number of training instances")
    dists = distance_rows(model.distance, model.train_X, values)
    # primary key distance, secondary key lexicographic instance_id
    order = np.lexsort((model._id_rank, dists))
    return order[:k]


def nearest_neighbors(model: PortfolioModel, vector: FeatureVector,
                      k: int) -> list[str]:
    """ids of the k nearest training instances to an already-normalized
    query, ordered by (distance, instance_id)."""
    idx = _neighbor_indices(model, np.asarray(vector.values), k)
    return [model.train_ids[i] for i in idx]


def select_solver(model: PortfolioModel, vector: FeatureVector) -> str:
    """Pick the solver minimizing the PAR10 sum over the k nearest
    neighbors of a raw (unnormalized) query vector."""
    normalized = normalize_apply(model.normalization, vector)
    idx = _neighbor_indices(model, np.asarray(normalized.values), model.k)
    # cumsum is a sequential accumulation, reproducible term by term
    sums = np.cumsum(model.par10.scores[idx], axis=0)[-1]
    return model.solver_ids[int(np.argmin(sums))]


# ---------------------------------------------------------------------------
# Cross-validated grid search.
# ---------------------------------------------------------------------------

def _check_alignment(vectors, par10: Par10Table):
    ids = tuple(v.instance_id for v in vectors)
    if ids != par10.instance_ids:
        raise DataError("feature vectors not aligned with PAR10 table")
    widths = {len(v.values) for v in vectors}
    if len(widths) > 1:
        raise DataError("feature vectors have inconsistent lengths")


def _fold_array(vectors, folds: FoldPartition) -> np.ndarray:
    try:
        return np.array([folds.assignments[v.instance_id] for v in vectors])
    except KeyError as missing:
        raise DataError(f"instance {missing} has no fold assignment") from None


def grid_objectives(vectors, par10: Par10Table, folds: FoldPartition,
                    k_range=DEFAULT_K_RANGE,
                    distances=DISTANCE_NAMES) -> dict[tuple[int, str], float]:
    """CV objective (total PAR10 of selected solvers over all instances)
    for every (k, distance) pair. k is clamped to each fold's training
    size when the corpus is small."""
    _check_alignment(vectors, par10)
    n = len(vectors)
    if n < folds.n_folds:
        raise DataError(f"need at least {folds.n_folds} training instances")
    ks = sorted(set(int(k) for k in k_range))
    if not ks or ks[0] < 1:
        raise DataError("k range must contain positive integers")
    for d in distances:
        if d not in DISTANCE_NAMES:
            raise DataError(f"unknown distance measure {d!r}")

    X = np.array([v.values for v in vectors], dtype=np.float64)
    ids = [v.instance_id for v in vectors]
    id_rank = _id_ranks(ids)
    fold_of = _fold_array(vectors, folds)
    scores = par10.scores
    k_idx = np.array(ks) - 1

    objectives: dict[tuple[int, str], float] = {}
    for dname in distances:
        contribs = np.zeros((len(ks), n))
        for fold in range(folds.n_folds):
            test_idx = np.where(fold_of == fold)[0]
            train_idx = np.where(fold_of != fold)[0]
            if len(test_idx) == 0 or len(train_idx) == 0:
                continue
            clamped = np.minimum(k_idx, len(train_idx) - 1)
            for i in test_idx:
                dists = distance_rows(dname, X[train_idx], X[i])
                order = np.lexsort((id_rank[train_idx], dists))
                prefix = np.cumsum(scores[train_idx[order]], axis=0)
                chosen = np.argmin(prefix[clamped], axis=1)
                contribs[:, i] = scores[i, chosen]
        for pos, k in enumerate(ks):
            objectives[(k, dname)] = float(np.sum(contribs[pos]))
    return objectives


def cv_objective(vectors, par10: Par10Table, folds: FoldPartition,
                 k: int, distance: str) -> float:
    """Objective of one (k, distance) cell, recomputed from scratch."""
    return grid_objectives(vectors, par10, folds, [k], [distance])[(k, distance)]


def grid_search(vectors, par10: Par10Table, folds: FoldPartition,
                k_range=DEFAULT_K_RANGE,
                distances=DISTANCE_NAMES) -> tuple[int, str]:
    """Minimize the CV objective; ties prefer smaller k, then the earlier
    distance in the given order."""
    objectives = grid_objectives(vectors, par10, folds, k_range, distances)
    d_pos = {d: i for i, d in enumerate(distances)}
    best = min(objectives, key=lambda kd: (objectives[kd], kd[0], d_pos[kd[1]]))
    return best


def train(vectors, par10: Par10Table, k_range=DEFAULT_K_RANGE,
          distances=DISTANCE_NAMES, seed: int = 0,
          catalog_version: str = "csv",
          feature_names: tuple[str, ...] | None = None) -> PortfolioModel:
    """Fit normalization on all training features, grid-search (k, d) by
    5-fold CV, and package the full training data as the model."""
    _check_alignment(vectors, par10)
    params = normalize_fit(list(vectors))
    normalized = [normalize_apply(params, v) for v in vectors]
    folds = make_folds([v.instance_id for v in vectors], seed)
    k, distance = grid_search(normalized, par10, folds, k_range, distances)
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(len(vectors[0].values)))
    X = np.array([v.values for v in normalized], dtype=np.float64)
    return PortfolioModel(k=k, distance=distance, normalization=params,
                          feature_names=tuple(feature_names),
                          catalog_version=catalog_version,
                          train_ids=par10.instance_ids, train_X=X,
                          par10=par10)


# ---------------------------------------------------------------------------
# Model (de)serialization.
# ---------------------------------------------------------------------------

def model_to_json(model: PortfolioModel) -> str:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "catalog_version": model.catalog_version,
        "k": model.k,
        "distance": model.distance,
        "normalization": {"mins": list(model.normalization.mins),
                          "maxs": list(model.normalization.maxs)},
        "feature_names": list(model.feature_names),
        "solver_ids": list(model.solver_ids),
        "train_instance_ids": list(model.train_ids),
        "train_features": [list(map(float, row)) for row in model.train_X],
        "par10": {"timeout_s": model.par10.timeout_s,
                  "scores": [list(map(float, row))
                             for row in model.par10.scores]},
    }
    return json.dumps(doc, indent=2) + "\n"


def save_model(model: PortfolioModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def load_model(path) -> PortfolioModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid model JSON ({exc})") from None
    try:
        if doc["format_version"] != MODEL_FORMAT_VERSION:
            raise DataError(f"{path}: unsupported model format "
                            f"{doc['format_version']!r}")
        ids = tuple(doc["train_instance_ids"])
        par10 = Par10Table(ids, tuple(doc["solver_ids"]),
                           np.array(doc["par10"]["scores"]),
                           float(doc["par10"]["timeout_s"]))
        return PortfolioModel(
            k=int(doc["k"]),
            distance=doc["distance"],
            normalization=NormalizationParams(
                tuple(doc["normalization"]["mins"]),
                tuple(doc["normalization"]["maxs"])),
            feature_names=tuple(doc["feature_names"]),
            catalog_version=doc["catalog_version"],
            train_ids=ids,
            train_X=np.array(doc["train_features"]),
            par10=par10)
    except KeyError as missing:
        raise DataError(f"{path}: missing model field {missing}") from None

"""Seeded synthetic benchmarks for desk-scale experiments.

clustered_dataset builds a corpus whose instances fall into feature
clusters with cluster-dependent best solvers: the designated solver is
fast (bimodal lognormal runtimes), other solvers mostly time out. A few
instances are outliers (easy to solve but placed at random feature
locations) and a few are unsolvable by every solver. random_matrix
builds an unstructured runtime table for property tests.
"""

from __future__ import annotations

import math

import numpy as np

from .features import FeatureCatalog, FeatureVector
from .perfdata import RunRecord, RuntimeMatrix


def synthetic_catalog(feature_dim: int) -> FeatureCatalog:
    return FeatureCatalog(tuple(f"f{i}" for i in range(feature_dim)),
                          "synthetic")


def clustered_dataset(n_instances: int = 500, n_solvers: int = 6,
                      timeout_s: float = 600.0, seed: int = 0,
                      n_clusters: int | None = None, feature_dim: int = 8,
                      outlier_frac: float = 0.05,
                      unsolvable_frac: float = 0.03,
                      ) -> tuple[list[FeatureVector], RuntimeMatrix]:
    """Feature vectors plus a complete runtime matrix at `timeout_s`."""
    if n_clusters is None:
        n_clusters = n_solvers
    if feature_dim < n_clusters:
        raise ValueError("feature_dim must be >= n_clusters")
    rng = np.random.default_rng(seed)

    centers = rng.uniform(0.0, 1.0, size=(n_clusters, feature_dim))
    for c in range(n_clusters):
        centers[c, c] += 10.0

    instance_ids = [f"i{i:04d}" for i in range(n_instances)]
    solver_ids = [f"s{j}" for j in range(n_solvers)]

    vectors = []
    records = []
    for i, iid in enumerate(instance_ids):
        cluster = i % n_clusters
        best = cluster % n_solvers
        roll = rng.random()
        kind = ("unsolvable" if roll < unsolvable_frac
                else "outlier" if roll < unsolvable_frac + outlier_frac
                else "normal")

        if kind == "outlier":
            values = rng.uniform(0.0, 12.0, size=feature_dim)
        else:
            values = centers[cluster] + rng.normal(0.0, 0.4, size=feature_dim)
        vectors.append(FeatureVector(iid, tuple(float(v) for v in values)))

        for j, sid in enumerate(solver_ids):
            if kind == "unsolvable":
                records.append(RunRecord(iid, sid, "timeout", timeout_s))
                continue
            if kind == "outlier":
                if j == best:
                    records.append(RunRecord(iid, sid, "solved",
                                             rng.uniform(0.05, 0.8)))
                else:
                    records.append(RunRecord(iid, sid, "timeout", timeout_s))
                continue
            if j == best:
                # bimodal: mostly fast, a slow mode spreading solves
                # across preparation timeouts
                if rng.random() < 0.7:
                    rt = rng.lognormal(math.log(0.4), 0.8)
                else:
                    rt = rng.lognormal(math.log(8.0), 1.5)
                if rt <= timeout_s:
                    records.append(RunRecord(iid, sid, "solved", rt))
                else:
                    records.append(RunRecord(iid, sid, "timeout", timeout_s))
            else:
                r2 = rng.random()
                if r2 < 0.15:
                    rt = rng.lognormal(math.log(60.0), 1.0)
                    if rt <= timeout_s:
                        records.append(RunRecord(iid, sid, "solved", rt))
                    else:
                        records.append(RunRecord(iid, sid, "timeout", timeout_s))
                elif r2 < 0.17:
                    records.append(RunRecord(iid, sid, "crashed",
                                             rng.uniform(0.1, 5.0)))
                else:
                    records.append(RunRecord(iid, sid, "timeout", timeout_s))

    matrix = RuntimeMatrix(records, timeout_s, instance_ids, solver_ids)
    return vectors, matrix


def random_matrix(n_instances: int, n_solvers: int, timeout_s: float,
                  seed: int) -> RuntimeMatrix:
    """Unstructured matrix with all four statuses represented."""
    rng = np.random.default_rng(seed)
    instance_ids = [f"i{i:04d}" for i in range(n_instances)]
    solver_ids = [f"s{j}" for j in range(n_solvers)]
    records = []
    for iid in instance_ids:
        for sid in solver_ids:
            roll = rng.random()
            if roll < 0.6:
                records.append(RunRecord(iid, sid, "solved",
                                         rng.uniform(0.0, timeout_s)))
            elif roll < 0.7:
                records.append(RunRecord(iid, sid, "crashed",
                                         rng.uniform(0.0, timeout_s)))
            elif roll < 0.75:
                records.append(RunRecord(iid, sid, "wrong_answer",
                                         rng.uniform(0.0, timeout_s)))
            else:
                records.append(RunRecord(iid, sid, "timeout", timeout_s))
    return RuntimeMatrix(records, timeout_s, instance_ids, solver_ids)


def random_vectors(instance_ids, feature_dim: int, seed: int,
                   ) -> list[FeatureVector]:
    rng = np.random.default_rng(seed)
    return [FeatureVector(iid, tuple(float(v) for v in
                                     rng.uniform(0.0, 10.0, size=feature_dim)))
            for iid in instance_ids]

"""Command-line interface.

Subcommands: extract-features, run, train, select, short-train, sweep,
report, catalog. Exit codes: 0 success, 1 usage error, 2 data error
(bad file contents, inconsistent tables, parse failures).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import baselines, knn, runner, shorttrain
from .csp import CspError, parse_file
from .errors import DataError
from .features import (
    CATALOG,
    CATALOG_VERSION,
    FEATURE_NAMES,
    extract_features,
    load_feature_csv,
    save_feature_csv,
)
from .perfdata import load_matrix_csv, par10_table, save_matrix_csv


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage problems exit 1; argparse's default of 2 is reserved for
        # data errors here
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_k_range(text: str) -> range:
    try:
        lo_s, hi_s = text.split(":")
        lo, hi = int(lo_s), int(hi_s)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected LO:HI, got {text!r}") from None
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad k range {text!r}")
    return range(lo, hi + 1)


def _parse_distances(text: str) -> tuple[str, ...]:
    names = tuple(part.strip() for part in text.split(",") if part.strip())
    for name in names:
        if name not in knn.DISTANCE_NAMES:
            raise argparse.ArgumentTypeError(f"unknown distance {name!r}")
    if not names:
        raise argparse.ArgumentTypeError("empty distance list")
    return names


def _parse_timeouts(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty timeout list")
    return values


def _instance_pairs(paths) -> tuple[tuple[str, str], ...]:
    pairs = []
    seen = set()
    for path in paths:
        iid = os.path.basename(path)
        if iid in seen:
            raise DataError(f"duplicate instance id {iid!r} "
                            "(basenames must be unique)")
        seen.add(iid)
        pairs.append((iid, path))
    return tuple(pairs)


def _load_features_for_matrix(features_csv, matrix):
    catalog, vectors = load_feature_csv(features_csv)
    by_id = {v.instance_id: v for v in vectors}
    missing = [iid for iid in matrix.instance_ids if iid not in by_id]
    if missing:
        raise DataError(f"features missing for {missing[:3]}"
                        + ("..." if len(missing) > 3 else ""))
    return catalog, [by_id[iid] for iid in matrix.instance_ids]


def _catalog_version_of(catalog) -> str:
    return CATALOG_VERSION if catalog.names == FEATURE_NAMES else catalog.version


# ---------------------------------------------------------------------------
# Subcommand bodies.
# ---------------------------------------------------------------------------

def _cmd_extract_features(args) -> int:
    vectors = []
    for iid, path in _instance_pairs(args.instances):
        inst = parse_file(path)
        vector = extract_features(inst)
        vectors.append(type(vector)(iid, vector.values))
    save_feature_csv(CATALOG, vectors, args.out)
    return 0


def _cmd_run(args) -> int:
    configs = runner.load_solver_configs(args.solvers)
    pairs = _instance_pairs(args.instances)
    validate = dict(pairs) if args.validate_models else None
    live = runner.SolverRunner(pairs, configs, args.parallelism,
                               validate_paths=validate)
    matrix = live.run_all(args.timeout)
    save_matrix_csv(matrix, args.out)
    return 0


def _cmd_train(args) -> int:
    matrix = load_matrix_csv(args.matrix_csv)
    catalog, vectors = _load_features_for_matrix(args.features_csv, matrix)
    table = par10_table(matrix, matrix.measured_timeout_s)
    model = knn.train(vectors, table, k_range=args.k_range,
                      distances=args.distances, seed=args.seed,
                      catalog_version=_catalog_version_of(catalog),
                      feature_names=catalog.names)
    knn.save_model(model, args.out)
    return 0


def _cmd_select(args) -> int:
    model = knn.load_model(args.model)
    if args.instance:
        if model.feature_names != FEATURE_NAMES:
            raise DataError("model was not trained on the built-in feature "
                            "catalog; use --features-csv instead")
        vector = extract_features(parse_file(args.instance))
    else:
        _, vectors = load_feature_csv(args.features_csv)
        by_id = {v.instance_id: v for v in vectors}
        if args.instance_id not in by_id:
            raise DataError(f"instance {args.instance_id!r} not in "
                            f"{args.features_csv}")
        vector = by_id[args.instance_id]
    print(knn.select_solver(model, vector))
    return 0


def _cmd_short_train(args) -> int:
    feature_time = 0.0
    if args.matrix_csv:
        matrix = load_matrix_csv(args.matrix_csv)
        _, vectors = _load_features_for_matrix(args.features_csv, matrix)
        backend = shorttrain.MatrixSimulator(matrix)
        corpus, solver_ids = matrix.instance_ids, matrix.solver_ids
        exploit = args.exploit_timeout or matrix.measured_timeout_s
    else:
        configs = runner.load_solver_configs(args.solvers)
        pairs = _instance_pairs(args.instances)
        backend = runner.SolverRunner(pairs, configs, args.parallelism)
        corpus = tuple(iid for iid, _ in pairs)
        solver_ids = tuple(cfg.solver_id for cfg in configs)
        if args.features_csv:
            _, vectors = load_feature_csv(args.features_csv)
        else:
            started = time.perf_counter()
            vectors = []
            for iid, path in pairs:
                vector = extract_features(parse_file(path))
                vectors.append(type(vector)(iid, vector.values))
            feature_time = time.perf_counter() - started
        if args.exploit_timeout is None:
            raise DataError("live short-train needs --exploit-timeout")
        exploit = args.exploit_timeout

    plan = shorttrain.ShortTrainPlan(corpus, solver_ids, args.prep_timeout,
                                     exploit)
    report = shorttrain.short_train_run(
        plan, vectors, backend, k_range=args.k_range,
        distances=args.distances, seed=args.seed,
        feature_time_s=feature_time,
        include_feature_time=args.include_feature_time)
    text = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_sweep(args) -> int:
    matrix = load_matrix_csv(args.matrix_csv)
    _, vectors = _load_features_for_matrix(args.features_csv, matrix)
    mode = {"short": "short_training", "cv": "cross_validation"}.get(
        args.mode, args.mode)
    points = shorttrain.timeout_sweep(matrix, vectors, args.timeouts, mode,
                                      seed=args.seed, k_range=args.k_range,
                                      distances=args.distances)
    references = shorttrain.reference_rows(matrix)
    shorttrain.emit_curve_csv(points, references, args.out)
    return 0


def _cmd_report(args) -> int:
    matrix = load_matrix_csv(args.matrix_csv)
    table = par10_table(matrix, matrix.measured_timeout_s)
    solvers = {}
    for j, sid in enumerate(table.solver_ids):
        solvers[sid] = {
            "solved": int(np.sum(table.scores[:, j] <= table.timeout_s)),
            "par10_total": float(np.sum(table.scores[:, j])),
        }
    fixed = baselines.best_fixed(table)
    chosen = baselines.oracle_selection(table)
    doc = {
        "timeout_s": matrix.measured_timeout_s,
        "instances": len(matrix.instance_ids),
        "solvers": solvers,
        "best_fixed": {
            "solver": fixed,
            "solved": baselines.fixed_solved(table, fixed),
            "par10_total": baselines.fixed_total(table, fixed),
        },
        "oracle": {
            "solved": baselines.selection_solved(table, chosen),
            "par10_total": baselines.selection_total(table, chosen),
        },
    }
    if args.report_json:
        with open(args.report_json, encoding="utf-8") as fh:
            doc["short_train"] = json.load(fh)
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_catalog(args) -> int:
    print(f"# catalog_version={CATALOG_VERSION}")
    for name in FEATURE_NAMES:
        print(name)
    return 0


# ---------------------------------------------------------------------------
# Argument wiring.
# ---------------------------------------------------------------------------

def _add_model_args(sub) -> None:
    sub.add_argument("--k-range", type=_parse_k_range,
                     default=knn.DEFAULT_K_RANGE, metavar="LO:HI",
                     help="neighbor counts to grid-search (default 1:20)")
    sub.add_argument("--distances", type=_parse_distances,
                     default=knn.DISTANCE_NAMES, metavar="NAMES",
                     help="comma-separated distance measures "
                          f"(default {','.join(knn.DISTANCE_NAMES)})")
    sub.add_argument("--seed", type=int, default=0,
                     help="fold-partition seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cspfolio",
                     description="Solver-portfolio toolkit: k-NN selection, "
                                 "PAR10 scoring, short training.")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("extract-features", parents=[],
                              help="write the feature CSV for instances")
    sub.add_argument("instances", nargs="+", help="instance files")
    sub.add_argument("--out", required=True, help="output feature CSV")
    sub.set_defaults(func=_cmd_extract_features)

    sub = commands.add_parser("run", help="run all solvers on all instances")
    sub.add_argument("instances", nargs="+", help="instance files")
    sub.add_argument("--solvers", required=True, help="solver config JSON")
    sub.add_argument("--timeout", type=float, required=True,
                     help="per-run wall-clock timeout in seconds")
    sub.add_argument("--parallelism", type=int, default=1)
    sub.add_argument("--validate-models", action="store_true",
                     help="check sat models against the instance")
    sub.add_argument("--out", required=True, help="output matrix CSV")
    sub.set_defaults(func=_cmd_run)

    sub = commands.add_parser("train", help="train the k-NN portfolio model")
    sub.add_argument("--features-csv", required=True)
    sub.add_argument("--matrix-csv", required=True)
    sub.add_argument("--out", required=True, help="output model JSON")
    _add_model_args(sub)
    sub.set_defaults(func=_cmd_train)

    sub = commands.add_parser("select",
                              help="print the predicted best solver")
    sub.add_argument("--model", required=True, help="model JSON")
    sub.add_argument("--instance", help="instance file")
    sub.add_argument("--features-csv", help="precomputed features")
    sub.add_argument("--instance-id", help="row of --features-csv to use")
    sub.set_defaults(func=_cmd_select)

    sub = commands.add_parser("short-train",
                              help="prepare, train and dispatch on a corpus")
    sub.add_argument("instances", nargs="*", help="instance files (live mode)")
    sub.add_argument("--matrix-csv", help="simulate from a measured matrix")
    sub.add_argument("--features-csv", help="precomputed features")
    sub.add_argument("--solvers", help="solver config JSON (live mode)")
    sub.add_argument("--prep-timeout", type=float, required=True)
    sub.add_argument("--exploit-timeout", type=float, default=None)
    sub.add_argument("--parallelism", type=int, default=1)
    sub.add_argument("--include-feature-time", action="store_true")
    sub.add_argument("--out", help="report JSON path (default stdout)")
    _add_model_args(sub)
    sub.set_defaults(func=_cmd_short_train)

    sub = commands.add_parser("sweep",
                              help="solved/time curve over prep timeouts")
    sub.add_argument("--matrix-csv", required=True)
    sub.add_argument("--features-csv", required=True)
    sub.add_argument("--timeouts", type=_parse_timeouts, required=True,
                     metavar="T1,T2,...")
    sub.add_argument("--mode", choices=["short", "cv", "short_training",
                                        "cross_validation"],
                     default="short")
    sub.add_argument("--out", required=True, help="output curve CSV")
    _add_model_args(sub)
    sub.set_defaults(func=_cmd_sweep)

    sub = commands.add_parser("report", help="summarize matrix and baselines")
    sub.add_argument("--matrix-csv", required=True)
    sub.add_argument("--report-json", help="short-train report to include")
    sub.add_argument("--out", help="output path (default stdout)")
    sub.set_defaults(func=_cmd_report)

    sub = commands.add_parser("catalog", help="list the feature catalog")
    sub.set_defaults(func=_cmd_catalog)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "select":
        if bool(args.instance) == bool(args.features_csv and args.instance_id):
            parser.error("select needs either --instance or "
                         "--features-csv with --instance-id")
    if args.command == "short-train":
        if bool(args.matrix_csv) == bool(args.solvers):
            parser.error("short-train needs exactly one of --matrix-csv "
                         "(simulation) or --solvers (live)")
        if args.matrix_csv and not args.features_csv:
            parser.error("simulated short-train needs --features-csv")
        if args.solvers and not args.instances:
            parser.error("live short-train needs instance files")

    try:
        return args.func(args)
    except (DataError, CspError) as exc:
        print(f"cspfolio: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cspfolio: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

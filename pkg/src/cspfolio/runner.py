"""Execute external solver commands under wall-clock timeouts.

Each (instance, solver) pair runs once as its own process group; on
cutoff the whole group is killed and the cell is recorded as a timeout
at exactly the budget. A solver counts as solved only when its exit
code matches the configured expectation and its stdout matches the sat
or unsat answer pattern. Tasks fan out over a thread pool; the result
matrix is identical regardless of parallelism (statuses exact, runtimes
within measurement jitter).
"""

from __future__ import annotations

import json
import os
import re
import shlex
import signal
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .csp import Assignment, CspError, check_assignment, parse_file
from .errors import DataError
from .perfdata import RunRecord, RuntimeMatrix

DEFAULT_SAT_RE = r"^s SATISFIABLE"
DEFAULT_UNSAT_RE = r"^s UNSATISFIABLE"


@dataclass(frozen=True)
class SolverConfig:
    solver_id: str
    command_template: str
    expected_exit_code: int = 0
    stdout_regex_sat: str = DEFAULT_SAT_RE
    stdout_regex_unsat: str = DEFAULT_UNSAT_RE

    def __post_init__(self):
        if "{instance}" not in self.command_template:
            raise DataError(f"solver {self.solver_id!r}: command template "
                            "must contain {instance}")


def load_solver_configs(path) -> list[SolverConfig]:
    """Read a JSON list of solver configs. answer_parser fields are
    optional; defaults accept competition-style 's SATISFIABLE' lines."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, list) or not doc:
        raise DataError(f"{path}: expected a nonempty JSON list")
    configs = []
    seen = set()
    for entry in doc:
        try:
            parser = entry.get("answer_parser", {})
            config = SolverConfig(
                solver_id=entry["solver_id"],
                command_template=entry["command_template"],
                expected_exit_code=int(parser.get("exit_code", 0)),
                stdout_regex_sat=parser.get("stdout_regex_sat",
                                            DEFAULT_SAT_RE),
                stdout_regex_unsat=parser.get("stdout_regex_unsat",
                                              DEFAULT_UNSAT_RE))
        except (KeyError, TypeError, AttributeError):
            raise DataError(f"{path}: malformed solver entry") from None
        if config.solver_id in seen:
            raise DataError(f"{path}: duplicate solver id "
                            f"{config.solver_id!r}")
        seen.add(config.solver_id)
        configs.append(config)
    return configs


@dataclass(frozen=True)
class RunPlan:
    instances: tuple[tuple[str, str], ...]  # (instance_id, file path)
    solvers: tuple[SolverConfig, ...]
    timeout_s: float
    parallelism: int = 1

    def __post_init__(self):
        if self.parallelism < 1:
            raise DataError("parallelism must be >= 1")
        if self.timeout_s <= 0:
            raise DataError("timeout must be positive")
        ids = [iid for iid, _ in self.instances]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate instance ids in run plan")


def _parse_model_line(stdout: str) -> dict[str, str]:
    """Collect name=value pairs from 'v ...' lines."""
    values: dict[str, str] = {}
    for line in stdout.splitlines():
        if line.startswith("v ") or line == "v":
            for token in line[1:].split():
                if "=" in token:
                    name, _, value = token.partition("=")
                    values[name] = value
    return values


class SolverRunner:
    """Live execution backend over a fixed corpus and solver set.

    `validate_dir` maps instance_id to a source file in the s-expression
    language; when set, sat answers carrying a 'v' model line are checked
    against the instance and demoted to wrong_answer on mismatch.
    """

    def __init__(self, instances, solvers, parallelism: int = 1,
                 validate_paths: dict[str, str] | None = None):
        self.paths = dict(instances)
        self.instance_ids = tuple(iid for iid, _ in instances)
        self.configs = {cfg.solver_id: cfg for cfg in solvers}
        self.solver_ids = tuple(cfg.solver_id for cfg in solvers)
        if len(self.configs) != len(solvers):
            raise DataError("duplicate solver ids")
        self.parallelism = max(1, int(parallelism))
        self.validate_paths = validate_paths or {}

    # -- single execution ----------------------------------------------

    def run_one(self, instance_id: str, solver_id: str,
                timeout_s: float) -> RunRecord:
        config = self.configs[solver_id]
        path = self.paths[instance_id]
        argv = shlex.split(config.command_template.format(
            instance=path, timeout_s=timeout_s))
        env = dict(os.environ)
        scratch = env.get("PORTFOLIO_TMPDIR")
        if scratch:
            env["TMPDIR"] = scratch

        started = time.perf_counter()
        timed_out = False
        try:
            proc = subprocess.Popen(argv, stdout=subprocess.PIPE,
                                    stderr=subprocess.DEVNULL, text=True,
                                    errors="replace", env=env,
                                    start_new_session=True)
        except OSError:
            return RunRecord(instance_id, solver_id, "crashed",
                             min(time.perf_counter() - started, timeout_s))
        try:
            stdout, _ = proc.communicate(timeout=timeout_s)
        except subprocess.TimeoutExpired:
            timed_out = True
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except ProcessLookupError:
                pass
            stdout, _ = proc.communicate()
        elapsed = min(time.perf_counter() - started, timeout_s)

        if timed_out:
            return RunRecord(instance_id, solver_id, "timeout", timeout_s)
        sat = re.search(config.stdout_regex_sat, stdout, re.MULTILINE)
        unsat = re.search(config.stdout_regex_unsat, stdout, re.MULTILINE)
        if proc.returncode != config.expected_exit_code or not (sat or unsat):
            return RunRecord(instance_id, solver_id, "crashed", elapsed)
        if sat and instance_id in self.validate_paths:
            verdict = self._validate(instance_id, stdout)
            if verdict is False:
                return RunRecord(instance_id, solver_id, "wrong_answer",
                                 elapsed)
        return RunRecord(instance_id, solver_id, "solved", elapsed)

    def _validate(self, instance_id: str, stdout: str):
        """True/False when a full model could be checked, None otherwise."""
        try:
            inst = parse_file(self.validate_paths[instance_id])
        except (CspError, OSError):
            return None
        raw = _parse_model_line(stdout)
        int_values, bool_values = {}, {}
        for var in inst.int_vars:
            if var.name not in raw:
                return None
            try:
                int_values[var.name] = int(raw[var.name])
            except ValueError:
                return False
        for var in inst.bool_vars:
            if var.name not in raw:
                return None
            if raw[var.name] not in ("true", "false"):
                return False
            bool_values[var.name] = raw[var.name] == "true"
        try:
            return check_assignment(inst, Assignment(int_values, bool_values))
        except CspError:
            return None

    # -- full matrix -----------------------------------------------------

    def run_all(self, timeout_s: float) -> RuntimeMatrix:
        tasks = [(iid, sid) for iid in self.instance_ids
                 for sid in self.solver_ids]
        with ThreadPoolExecutor(max_workers=self.parallelism) as pool:
            records = list(pool.map(
                lambda pair: self.run_one(pair[0], pair[1], timeout_s), tasks))
        return RuntimeMatrix(records, timeout_s, self.instance_ids,
                             self.solver_ids)


def run_all(plan: RunPlan) -> RuntimeMatrix:
    runner = SolverRunner(plan.instances, plan.solvers, plan.parallelism)
    return runner.run_all(plan.timeout_s)

"""Grid experiment orchestration over an external task executable.

A plan is (datasets, modifiers, hyperparameter grid, repetitions).  It
expands into runs, one per (modifier, assignment, repetition) triple; each
run materializes its degraded dataset (cached and shared across runs),
invokes the task with the documented argv convention, parses the task's
``results.json``, and persists a RunRecord.  Task failures are recorded,
not raised: a degradation study expects some configurations to die.

Child argv contract:

    <executable> [fixed args] --trainds <dir> --outputpath <dir>
                 [--valds <dir>] [--testds <dir>] --<hp> <value> ...

Integers render verbatim, floats in shortest round-trip form (so 1e-06,
not 0.000001), strings as-is.  The run id and derived seed are exported
as IQH_RUN_ID and IQH_RUN_SEED.
"""

from __future__ import annotations

import fcntl
import hashlib
import itertools
import json
import logging
import os
import re
import shutil
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus
from .corpus import DatasetHandle, discover
from .errors import EmptyGrid, MalformedResults, ValidationError
from .modifiers import ModifierSpec, apply_modifier
from .runstore import RunRecord, RunStore, utc_now_iso

log = logging.getLogger(__name__)

RESULTS_FILENAME = "results.json"
STDOUT_LOG = "stdout.log"
STDERR_LOG = "stderr.log"
DIGEST_FILENAME = ".iqh_digest"
RUN_ID_ENV = "IQH_RUN_ID"
RUN_SEED_ENV = "IQH_RUN_SEED"


@dataclass(frozen=True)
class TaskSpec:
    """The external executable a run invokes."""

    executable: str
    fixed_args: tuple[str, ...] = ()
    working_dir: str | None = None
    timeout: float | None = None

    def argv_prefix(self) -> list[str]:
        exe = Path(self.executable)
        # .py scripts run under the current interpreter; no shebang needed
        if exe.suffix == ".py":
            return [sys.executable, str(exe), *self.fixed_args]
        return [str(exe), *self.fixed_args]


@dataclass(frozen=True)
class ExperimentPlan:
    experiment_name: str
    task: TaskSpec
    ref_train: DatasetHandle
    modifiers: tuple[ModifierSpec, ...]
    hyperparams: dict = field(default_factory=dict)
    val: DatasetHandle | None = None
    test: DatasetHandle | None = None
    repetitions: int = 1
    seed: int = 0
    max_parallel_runs: int = 1
    modify_eval_sets: bool = False

    def validate(self) -> None:
        if not self.modifiers:
            raise EmptyGrid("plan has no modifiers")
        for name, values in self.hyperparams.items():
            if not values:
                raise EmptyGrid(f"hyperparameter {name!r} has an empty value list")
        if self.repetitions < 1:
            raise ValidationError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.max_parallel_runs < 1:
            raise ValidationError(
                f"max_parallel_runs must be >= 1, got {self.max_parallel_runs}"
            )
        if not Path(self.task.executable).is_file():
            raise ValidationError(f"task executable not found: {self.task.executable}")


@dataclass(frozen=True)
class RunConfig:
    run_id: str
    modifier: ModifierSpec
    hyperparam_assignment: dict
    repetition_index: int
    seed: int
    train_path: Path | None = None
    val_path: Path | None = None
    test_path: Path | None = None
    output_dir: Path | None = None


def format_value(value) -> str:
    """Command-line rendering of a hyperparameter value."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _id_token(value) -> str:
    return re.sub(r"[^A-Za-z0-9_.+-]+", "-", format_value(value))


def make_run_id(modifier: ModifierSpec, assignment: dict, repetition: int) -> str:
    parts = [modifier.name]
    for name in sorted(assignment):
        parts.append(f"{name}_{_id_token(assignment[name])}")
    return "__".join(parts) + f"_r{repetition}"


def run_seed(plan_seed: int, run_id: str) -> int:
    digest = hashlib.sha256(f"{plan_seed}:{run_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def expand_runs(plan: ExperimentPlan) -> list[RunConfig]:
    """The full grid in deterministic order.

    Modifiers keep plan order; assignments iterate lexicographically over
    hyperparameter names with each value list in given order; repetitions
    innermost.
    """
    plan.validate()
    names = sorted(plan.hyperparams)
    value_lists = [plan.hyperparams[n] for n in names]
    configs = []
    for modifier in plan.modifiers:
        for combo in itertools.product(*value_lists):
            assignment = dict(zip(names, combo))
            for rep in range(plan.repetitions):
                rid = make_run_id(modifier, assignment, rep)
                configs.append(
                    RunConfig(
                        run_id=rid,
                        modifier=modifier,
                        hyperparam_assignment=assignment,
                        repetition_index=rep,
                        seed=run_seed(plan.seed, rid),
                    )
                )
    return configs


# -- dataset materialization ----------------------------------------------------


def _params_digest(spec: ModifierSpec, seed: int) -> str:
    blob = json.dumps({"kind": spec.kind, "params": spec.params, "seed": seed}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _materialize_one(ds: DatasetHandle, spec: ModifierSpec, seed: int) -> Path:
    """Build (or reuse) one derived dataset; single-flight across processes.

    The derived folder carries a digest of (kind, params, seed); a folder
    whose digest does not match is stale and gets rebuilt in place.
    """
    dest = ds.parent_folder / corpus.derived_name(ds.ds_name, spec.name)
    expected = _params_digest(spec, seed)
    lock_path = ds.parent_folder / f".{dest.name}.lock"
    with open(lock_path, "w") as lock:
        fcntl.flock(lock.fileno(), fcntl.LOCK_EX)
        try:
            digest_file = dest / DIGEST_FILENAME
            if dest.is_dir():
                if digest_file.is_file() and digest_file.read_text().strip() == expected:
                    return dest
                log.info("stale derived dataset %s, rebuilding", dest)
                shutil.rmtree(dest)
            apply_modifier(ds, spec, seed=seed)
            (dest / DIGEST_FILENAME).write_text(expected + "\n")
        finally:
            fcntl.flock(lock.fileno(), fcntl.LOCK_UN)
    return dest


def materialize(plan: ExperimentPlan, cfg: RunConfig) -> tuple[Path, Path | None, Path | None]:
    """Resolved (train, val, test) paths for one run, building as needed.

    Only the training set is degraded unless the plan opts eval sets in.
    The cache key is the derived folder name plus the params digest, with
    the plan seed, so every run sharing a modifier shares bytes.
    """
    train = _materialize_one(plan.ref_train, cfg.modifier, plan.seed)
    val = plan.val.data_path if plan.val else None
    test = plan.test.data_path if plan.test else None
    if plan.modify_eval_sets:
        if plan.val:
            val = _materialize_one(plan.val, cfg.modifier, plan.seed)
        if plan.test:
            test = _materialize_one(plan.test, cfg.modifier, plan.seed)
    return train, val, test


# -- task invocation --------------------------------------------------------------


@dataclass
class TaskOutcome:
    status: str  # completed | failed | timeout
    exit_status: int | None
    started_at: str
    ended_at: str


def invoke_task(task: TaskSpec, cfg: RunConfig) -> TaskOutcome:
    """Run the executable for one config, capturing stdout/stderr to logs."""
    out_dir = cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    argv = task.argv_prefix()
    argv += ["--trainds", str(cfg.train_path), "--outputpath", str(out_dir)]
    if cfg.val_path:
        argv += ["--valds", str(cfg.val_path)]
    if cfg.test_path:
        argv += ["--testds", str(cfg.test_path)]
    for name in sorted(cfg.hyperparam_assignment):
        argv += [f"--{name}", format_value(cfg.hyperparam_assignment[name])]

    env = dict(os.environ)
    env[RUN_ID_ENV] = cfg.run_id
    env[RUN_SEED_ENV] = str(cfg.seed)

    started = utc_now_iso()
    try:
        proc = subprocess.run(
            argv,
            capture_output=True,
            cwd=task.working_dir,
            env=env,
            timeout=task.timeout,
        )
        stdout, stderr = proc.stdout, proc.stderr
        status = "completed" if proc.returncode == 0 else "failed"
        exit_status = proc.returncode
    except subprocess.TimeoutExpired as exc:
        stdout = exc.stdout or b""
        stderr = exc.stderr or b""
        status = "timeout"
        exit_status = None
    ended = utc_now_iso()

    (out_dir / STDOUT_LOG).write_bytes(stdout)
    (out_dir / STDERR_LOG).write_bytes(stderr)
    return TaskOutcome(status=status, exit_status=exit_status, started_at=started, ended_at=ended)


# -- results parsing --------------------------------------------------------------


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def parse_results(output_dir: str | Path) -> tuple[dict, dict]:
    """Split ``results.json`` into (params, metric series).

    Scalars are parameters; arrays of numbers are per-epoch metric series.
    Anything else in an array is a task bug worth failing loudly over.
    A missing file is only a warning: not every task reports.
    """
    path = Path(output_dir) / RESULTS_FILENAME
    if not path.is_file():
        log.warning("no %s under %s", RESULTS_FILENAME, output_dir)
        return {}, {}
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedResults(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedResults(f"{path}: top level must be an object")

    params: dict = {}
    series: dict = {}
    for key, value in doc.items():
        if isinstance(value, list):
            if not all(_is_number(v) for v in value):
                raise MalformedResults(f"{path}: metric {key!r} has non-numeric members")
            series[key] = value
        elif isinstance(value, (str, bool)) or _is_number(value):
            params[key] = value
        else:
            raise MalformedResults(f"{path}: {key!r} is neither scalar nor numeric array")
    return params, series


def final_projections(series: dict) -> dict:
    """Scalar ``<name>_final`` view of each non-empty metric series."""
    return {f"{name}_final": values[-1] for name, values in series.items() if values}


# -- execution --------------------------------------------------------------------


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _artifact_digests(out_dir: Path) -> dict:
    digests = {}
    for p in sorted(out_dir.rglob("*")):
        if p.is_file():
            digests[p.relative_to(out_dir).as_posix()] = _sha256_file(p)
    return digests


def _execute_one(plan: ExperimentPlan, store: RunStore, cfg: RunConfig) -> RunRecord:
    out_dir = store.root / plan.experiment_name / cfg.run_id / "output"
    train, val, test = materialize(plan, cfg)
    cfg = RunConfig(
        run_id=cfg.run_id,
        modifier=cfg.modifier,
        hyperparam_assignment=cfg.hyperparam_assignment,
        repetition_index=cfg.repetition_index,
        seed=cfg.seed,
        train_path=train,
        val_path=val,
        test_path=test,
        output_dir=out_dir,
    )
    outcome = invoke_task(plan.task, cfg)

    params: dict = {}
    series: dict = {}
    metrics: dict = {}
    errors: dict = {}
    try:
        params, series = parse_results(out_dir)
        metrics = final_projections(series)
    except MalformedResults as exc:
        if outcome.status == "completed":
            outcome.status = "failed"
        errors[RESULTS_FILENAME] = str(exc)
        log.warning("%s: %s", cfg.run_id, exc)

    rec = RunRecord(
        experiment_name=plan.experiment_name,
        run_id=cfg.run_id,
        status=outcome.status,
        started_at=outcome.started_at,
        ended_at=outcome.ended_at,
        ds_name=plan.ref_train.ds_name,
        modifier_name=cfg.modifier.name,
        modifier_params=dict(cfg.modifier.params),
        hyperparams=dict(cfg.hyperparam_assignment),
        params=params,
        metrics=metrics,
        metric_series=series,
        artifact_dir=str(out_dir),
        artifact_digests=_artifact_digests(out_dir),
        train_path=str(train),
        val_path=str(val) if val else "",
        test_path=str(test) if test else "",
        repetition_index=cfg.repetition_index,
        seed=cfg.seed,
        exit_status=outcome.exit_status,
        metric_errors=errors,
    )
    store.save_run(rec)
    return rec


def execute(plan: ExperimentPlan, store: RunStore | None = None) -> list[RunRecord]:
    """Run the whole grid; every run yields a persisted record.

    Runs already saved under this experiment are reused rather than re-run,
    so a crashed sweep can resume.  Individual failures never stop the grid.
    """
    plan.validate()
    store = store or RunStore()
    configs = expand_runs(plan)

    pending = []
    records: dict[str, RunRecord] = {}
    for cfg in configs:
        if store.record_path(plan.experiment_name, cfg.run_id).exists():
            log.info("%s already recorded, skipping", cfg.run_id)
            records[cfg.run_id] = store.load_run(plan.experiment_name, cfg.run_id)
        else:
            pending.append(cfg)

    if pending:
        with ThreadPoolExecutor(max_workers=plan.max_parallel_runs) as pool:
            for rec in pool.map(lambda c: _execute_one(plan, store, c), pending):
                records[rec.run_id] = rec
    return [records[cfg.run_id] for cfg in configs]


# -- plan files -------------------------------------------------------------------


def load_plan(path: str | Path) -> ExperimentPlan:
    """Parse a declarative JSON plan document.

    Expected shape::

        {
          "experiment_name": "...",
          "task": {"executable": "...", "fixed_args": [], "timeout": 600},
          "train": "path/to/dataset",
          "val": "...", "test": "...",                  (optional)
          "modifiers": [{"kind": "jpeg_quality", "params": {"quality": 85}}],
          "hyperparams": {"lr": [1e-6, 1e-5]},
          "repetitions": 1, "seed": 0,
          "max_parallel_runs": 1, "modify_eval_sets": false
        }
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"plan file not found: {path}")
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: plan must be a JSON object")

    def need(key):
        if key not in doc:
            raise ValidationError(f"{path}: plan is missing {key!r}")
        return doc[key]

    task_doc = need("task")
    if not isinstance(task_doc, dict) or "executable" not in task_doc:
        raise ValidationError(f"{path}: task needs an executable")
    task = TaskSpec(
        executable=str(task_doc["executable"]),
        fixed_args=tuple(task_doc.get("fixed_args", ())),
        working_dir=task_doc.get("working_dir"),
        timeout=task_doc.get("timeout"),
    )

    modifiers = []
    for entry in need("modifiers"):
        if not isinstance(entry, dict) or "kind" not in entry:
            raise ValidationError(f"{path}: each modifier needs a kind")
        modifiers.append(ModifierSpec(kind=entry["kind"], params=entry.get("params", {})))

    return ExperimentPlan(
        experiment_name=str(need("experiment_name")),
        task=task,
        ref_train=discover(need("train")),
        val=discover(doc["val"]) if doc.get("val") else None,
        test=discover(doc["test"]) if doc.get("test") else None,
        modifiers=tuple(modifiers),
        hyperparams=dict(doc.get("hyperparams", {})),
        repetitions=int(doc.get("repetitions", 1)),
        seed=int(doc.get("seed", 0)),
        max_parallel_runs=int(doc.get("max_parallel_runs", 1)),
        modify_eval_sets=bool(doc.get("modify_eval_sets", False)),
    )

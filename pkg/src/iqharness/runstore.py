"""File-backed store for experiment run records.

Layout under the store root:

    <root>/<experiment>/<run_id>/record.json    one full record, written
                                                atomically (temp + rename)
    <root>/<experiment>/index.json              append-only journal, one
                                                JSON object per line

The journal is advisory; the record files are the source of truth, so a
writer killed mid-save can never surface a half-written record.  Multiple
processes may save distinct run ids concurrently: record writes are
renames and journal appends hold an exclusive lock.

Field namespace for queries, tables and plots: record tags (run_id,
status, modifier, ...), then the hyperparameter assignment, the modifier
params, the params parsed from results.json, and finally the metrics map.
The first namespace that defines a name wins.
"""

from __future__ import annotations

import csv
import fcntl
import json
import logging
import math
import os
import re
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from . import report
from .corpus import discover, load_coco, load_detections, load_generated_list
from .deteval import evaluate
from .errors import (
    DuplicateRunId,
    MetricError,
    NonNumericY,
    StoreError,
    UnknownExperiment,
    UnknownField,
)
from .imgio import read_image
from .qmetrics.dataset import _REGISTRY as _METRIC_REGISTRY

log = logging.getLogger(__name__)

INDEX_FILENAME = "index.json"
RECORD_FILENAME = "record.json"
DEFAULT_STORE_ROOT = "iqh_store"
STORE_ENV_VAR = "IQH_STORE"

_OP_ALIASES = {"≠": "!=", "≤": "<=", "≥": ">="}
_OPS = ("=", "!=", "<", "<=", ">", ">=", "contains")


def resolve_store_root() -> Path:
    """Store root from the environment, else ``./iqh_store``."""
    return Path(os.environ.get(STORE_ENV_VAR, DEFAULT_STORE_ROOT))


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


@dataclass
class RunRecord:
    """Everything the store keeps about one task execution."""

    experiment_name: str
    run_id: str
    status: str  # completed | failed | timeout
    started_at: str
    ended_at: str
    ds_name: str
    modifier_name: str
    modifier_params: dict = field(default_factory=dict)
    hyperparams: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    metric_series: dict = field(default_factory=dict)
    artifact_dir: str = ""
    artifact_digests: dict = field(default_factory=dict)
    train_path: str = ""
    val_path: str = ""
    test_path: str = ""
    repetition_index: int = 0
    seed: int | None = None
    exit_status: int | None = None
    metric_errors: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "RunRecord":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in payload.items() if k in known})

    def tags(self) -> dict:
        return {
            "experiment_name": self.experiment_name,
            "run_id": self.run_id,
            "status": self.status,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "ds_name": self.ds_name,
            "modifier": self.modifier_name,
            "repetition_index": self.repetition_index,
            "seed": self.seed,
            "exit_status": self.exit_status,
            "artifact_dir": self.artifact_dir,
        }

    def field_names(self) -> set[str]:
        names = set(self.tags())
        for space in (self.hyperparams, self.modifier_params, self.params, self.metrics):
            names.update(space)
        return names

    def field_value(self, name: str):
        for space in (
            self.tags(),
            self.hyperparams,
            self.modifier_params,
            self.params,
            self.metrics,
        ):
            if name in space:
                return space[name]
        return _MISSING


class _Missing:
    def __repr__(self):
        return "<missing>"


_MISSING = _Missing()


@dataclass(frozen=True)
class Filter:
    field: str
    op: str
    value: object

    def __post_init__(self):
        op = _OP_ALIASES.get(self.op, self.op)
        object.__setattr__(self, "op", op)
        if op not in _OPS:
            raise ValueError(f"unsupported operator {self.op!r}; use one of {_OPS}")


@dataclass(frozen=True)
class RunQuery:
    experiment_name: str
    filters: tuple[Filter, ...] = ()
    sort_by: str | None = None
    descending: bool = False
    limit: int | None = None


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _matches(filt: Filter, value) -> bool:
    if value is _MISSING:
        return False
    if filt.op == "=":
        return value == filt.value
    if filt.op == "!=":
        return value != filt.value
    if filt.op == "contains":
        return str(filt.value) in str(value)
    # ordering: numeric when both sides are numbers, else lexicographic
    if _is_number(value) and _is_number(filt.value):
        a, b = value, filt.value
    else:
        a, b = str(value), str(filt.value)
    return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[filt.op]


def _sort_key(value):
    # missing sorts last, numbers before strings, bools as numbers
    if value is _MISSING:
        return (2, 0.0, "")
    if _is_number(value):
        return (0, float(value), "")
    return (1, 0.0, str(value))


@dataclass(frozen=True)
class Table:
    """Column-ordered rows extracted from run records; None marks a gap."""

    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def column(self, name: str) -> list:
        if name not in self.columns:
            raise UnknownField(f"table has no column {name!r}")
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow(["" if v is None else v for v in row])
        return path

    @classmethod
    def read_csv(cls, path: str | Path) -> "Table":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            rows = tuple(tuple(_parse_cell(c) for c in row) for row in reader)
        return cls(columns=header, rows=rows)


def _parse_cell(cell: str):
    if cell == "":
        return None
    try:
        return int(cell)
    except ValueError:
        pass
    try:
        return float(cell)
    except ValueError:
        return cell


class RunStore:
    """One store root; experiments are its immediate subdirectories."""

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else resolve_store_root()

    # -- paths --------------------------------------------------------------

    def experiment_dir(self, experiment: str) -> Path:
        return self.root / experiment

    def record_path(self, experiment: str, run_id: str) -> Path:
        return self.root / experiment / run_id / RECORD_FILENAME

    def experiments(self) -> list[str]:
        if not self.root.is_dir():
            return []
        return sorted(p.name for p in self.root.iterdir() if p.is_dir())

    # -- writing ------------------------------------------------------------

    def save_run(self, rec: RunRecord) -> Path:
        """Persist one record durably; the rename is the commit point."""
        # collisions between task params and metrics resolve to metric_ keys
        for key in [k for k in rec.metrics if k in rec.params]:
            rec.metrics[f"metric_{key}"] = rec.metrics.pop(key)

        run_dir = self.root / rec.experiment_name / rec.run_id
        path = run_dir / RECORD_FILENAME
        if path.exists():
            raise DuplicateRunId(f"{rec.experiment_name}/{rec.run_id} already saved")
        run_dir.mkdir(parents=True, exist_ok=True)
        self._write_record(rec)
        self._append_index(rec.experiment_name, {"run_id": rec.run_id, "saved_at": utc_now_iso()})
        return path

    def _write_record(self, rec: RunRecord) -> None:
        run_dir = self.root / rec.experiment_name / rec.run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        tmp = run_dir / f".{RECORD_FILENAME}.tmp.{os.getpid()}"
        with open(tmp, "w") as fh:
            json.dump(rec.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, run_dir / RECORD_FILENAME)

    def _append_index(self, experiment: str, entry: dict) -> None:
        index = self.root / experiment / INDEX_FILENAME
        with open(index, "a") as fh:
            fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
            try:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            finally:
                fcntl.flock(fh.fileno(), fcntl.LOCK_UN)

    # -- reading ------------------------------------------------------------

    def read_index(self, experiment: str) -> list[dict]:
        """Journal entries, tolerating a torn final line from a dead writer."""
        self._require_experiment(experiment)
        index = self.root / experiment / INDEX_FILENAME
        entries = []
        if not index.exists():
            return entries
        with open(index) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entries.append(json.loads(line))
                except json.JSONDecodeError:
                    log.warning("%s:%d: skipping unparseable index line", index, lineno)
        return entries

    def load_run(self, experiment: str, run_id: str) -> RunRecord:
        path = self.record_path(experiment, run_id)
        if not path.exists():
            self._require_experiment(experiment)
            raise StoreError(f"no record for {experiment}/{run_id}")
        with open(path) as fh:
            return RunRecord.from_dict(json.load(fh))

    def load_runs(self, experiment: str) -> list[RunRecord]:
        """All committed records, in run_id order; the journal is not trusted."""
        self._require_experiment(experiment)
        records = []
        for run_dir in sorted(self.experiment_dir(experiment).iterdir()):
            path = run_dir / RECORD_FILENAME
            if path.is_file():
                with open(path) as fh:
                    records.append(RunRecord.from_dict(json.load(fh)))
        return records

    def _require_experiment(self, experiment: str) -> None:
        if not self.experiment_dir(experiment).is_dir():
            raise UnknownExperiment(f"experiment {experiment!r} not found under {self.root}")

    # -- querying -----------------------------------------------------------

    def schema(self, experiment: str) -> set[str]:
        names: set[str] = set()
        for rec in self.load_runs(experiment):
            names.update(rec.field_names())
        return names

    def query(self, q: RunQuery) -> list[RunRecord]:
        records = self.load_runs(q.experiment_name)
        known = set()
        for rec in records:
            known.update(rec.field_names())
        wanted = {f.field for f in q.filters} | ({q.sort_by} if q.sort_by else set())
        unknown = sorted(wanted - known)
        if unknown and records:
            raise UnknownField(f"field(s) not in experiment schema: {', '.join(unknown)}")

        for filt in q.filters:
            records = [r for r in records if _matches(filt, r.field_value(filt.field))]

        records.sort(key=lambda r: r.run_id)
        if q.sort_by:
            records.sort(
                key=lambda r: _sort_key(r.field_value(q.sort_by)), reverse=q.descending
            )
        if q.limit is not None:
            records = records[: q.limit]
        return records

    def get_table(self, q: RunQuery, columns: list[str]) -> Table:
        records = self.query(q)
        known = set()
        for rec in records:
            known.update(rec.field_names())
        unknown = sorted(set(columns) - known)
        if unknown and records:
            raise UnknownField(f"column(s) not in experiment schema: {', '.join(unknown)}")
        rows = []
        for rec in records:
            row = []
            for col in columns:
                v = rec.field_value(col)
                row.append(None if v is _MISSING else v)
            rows.append(tuple(row))
        return Table(columns=tuple(columns), rows=tuple(rows))

    # -- post-hoc metrics -----------------------------------------------------

    def apply_metric_per_run(
        self,
        experiment: str,
        metric: Callable[[RunRecord, Path], dict],
        annotations_name: str = "output.json",
    ) -> list[RunRecord]:
        """Evaluate ``metric`` on each completed run and merge the values.

        ``metric(record, annotations_path)`` returns a name-to-scalar map.
        Runs lacking the annotations file are skipped with a log entry; a
        metric failure is recorded on that run and the sweep continues.
        Re-application overwrites previous values.
        """
        updated = []
        for rec in self.load_runs(experiment):
            if rec.status != "completed":
                continue
            path = Path(rec.artifact_dir) / annotations_name
            if not path.is_file():
                log.warning("%s/%s: no %s, skipped", experiment, rec.run_id, annotations_name)
                continue
            try:
                values = metric(rec, path)
            except Exception as exc:  # noqa: BLE001 - per-run isolation is the contract
                rec.metric_errors[annotations_name] = f"{type(exc).__name__}: {exc}"
                self._write_record(rec)
                log.warning("%s/%s: metric failed: %s", experiment, rec.run_id, exc)
                continue
            for key, value in values.items():
                name = f"metric_{key}" if key in rec.params else key
                rec.metrics[name] = value
            self._write_record(rec)
            updated.append(rec)
        return updated


# -- metric adapters ----------------------------------------------------------


def detection_metric(gt_path: str | Path | None = None) -> Callable[[RunRecord, Path], dict]:
    """Adapter scoring a run's detection dump against COCO ground truth.

    Ground truth comes from ``gt_path`` when given, else from the run's
    test (or val, or train) dataset annotations.
    """

    def adapter(rec: RunRecord, pred_path: Path) -> dict:
        if gt_path is not None:
            gt_file = Path(gt_path)
        else:
            ds_path = rec.test_path or rec.val_path or rec.train_path
            if not ds_path:
                raise MetricError("run has no dataset lineage to take ground truth from")
            handle = discover(ds_path)
            if handle.coco_annotations is None:
                raise MetricError(f"dataset {ds_path} has no annotation file")
            gt_file = handle.coco_annotations
        summary = evaluate(load_coco(gt_file), load_detections(pred_path))
        values = {
            "AP": summary.ap,
            "AP50": summary.ap50,
            "AP75": summary.ap75,
            "AR_100": summary.ar_100,
        }
        for cat, ap in summary.per_category_ap.items():
            values[f"AP_cat_{cat}"] = ap
        return values

    return adapter


def quality_metric(
    name: str, params: dict | None = None, reference_dir: str | Path | None = None
) -> Callable[[RunRecord, Path], dict]:
    """Adapter running an image quality metric over a run's generated images.

    The annotations file must be a generated-image list; values are
    averaged into a single ``<name>`` scalar plus a ``<name>_count`` of
    images where the metric was defined.  Full-reference metrics read the
    file at the same relative path under ``reference_dir``.
    """
    if name not in _METRIC_REGISTRY:
        raise MetricError(f"unknown metric {name!r}")
    fn, needs_ref = _METRIC_REGISTRY[name]
    if needs_ref and reference_dir is None:
        raise MetricError(f"metric {name!r} needs reference_dir")

    def adapter(rec: RunRecord, list_path: Path) -> dict:
        base = Path(rec.artifact_dir)
        rels = load_generated_list(list_path, base)
        values = []
        for rel in rels:
            img = read_image(base / rel)
            ref = read_image(Path(reference_dir) / rel) if needs_ref else None
            v = fn(img, ref, dict(params or {}))
            if v is not None and not math.isnan(v):
                values.append(float(v))
        out = {f"{name}_count": len(values)}
        if values:
            out[name] = sum(values) / len(values)
        return out

    return adapter


# -- plotting -----------------------------------------------------------------


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def render_plots(table: Table, x: str, ys: list[str], out_dir: str | Path) -> list[Path]:
    """One SVG per y column: mean line over x with min-max whiskers.

    Rows sharing an x value (repetitions) collapse into one point.  x may
    be numeric or categorical; every y value must be numeric.
    """
    for col in [x, *ys]:
        if col not in table.columns:
            raise UnknownField(f"table has no column {col!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    x_values = table.column(x)
    categorical = not all(_is_number(v) for v in x_values if v is not None)

    written = []
    for y in ys:
        groups: dict[object, list[float]] = {}
        for xv, yv in zip(x_values, table.column(y)):
            if xv is None or yv is None:
                continue
            if not _is_number(yv):
                raise NonNumericY(f"column {y!r} has non-numeric value {yv!r}")
            groups.setdefault(xv, []).append(float(yv))
        if categorical:
            ordered = sorted(groups, key=str)
        else:
            ordered = sorted(groups)
        points = [
            (xv, sum(groups[xv]) / len(groups[xv]), min(groups[xv]), max(groups[xv]))
            for xv in ordered
        ]
        svg = report.line_plot_svg(f"{y} vs {x}", x, y, points, categorical=categorical)
        path = out_dir / f"plot_{_slug(y)}.svg"
        path.write_text(svg)
        written.append(path)
    return written

"""Command-line front end: iqh <subcommand>.

Workflow order mirrors a degradation study: inspect the data (sanity,
stats), derive degraded copies (modify), measure image quality (metric),
score detections (eval), sweep an external task over a grid (run), and
summarize the store (report).

Exit codes: 0 success, 1 validation or usage error, 2 runtime error,
3 partial failure (some runs of a grid did not complete).  Machine
artifacts go under --out; stdout carries a short, stable summary with no
timestamps so output is diffable.  Existing artifacts are never clobbered
without --overwrite.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import deteval, experiment, modifiers, qmetrics, runstore, sanity, stats
from .corpus import discover, load_coco, load_detections
from .errors import DestinationExists, IqhError, StoreError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_PARTIAL = 3


def _emit(args, text: str) -> None:
    if not args.quiet:
        print(text)


def _num(value: float) -> str:
    return f"{value:.6g}"


def _check_clobber(paths: list[Path], overwrite: bool) -> None:
    if overwrite:
        return
    for p in paths:
        if p.exists():
            raise DestinationExists(f"{p} exists; pass --overwrite to replace it")


# -- subcommands --------------------------------------------------------------


def cmd_sanity(args) -> int:
    ds = discover(args.dataset)
    flags = sanity.SanityFlags(
        dedupe=not args.no_dedupe,
        image_validity=not args.no_image_validity,
        annotation_integrity=not args.no_annotation_integrity,
        dims_fix=not args.no_dims_fix,
        geojson_clean=not args.no_geojson_clean,
        geometry_repair=not args.no_geometry_repair,
    )
    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        if not args.overwrite:
            raise DestinationExists(f"{out} is not empty; pass --overwrite to replace it")
        import shutil

        shutil.rmtree(out)
    report = sanity.run_sanity(ds, flags, out)
    d = report.to_dict()
    for key in (
        "invalid_images",
        "duplicates_removed",
        "dims_fixed",
        "annotations_dropped",
        "geometries_fixed",
        "geometries_dropped",
    ):
        value = d.get(key)
        count = len(value) if isinstance(value, list) else value
        _emit(args, f"{key}: {count}")
    _emit(args, f"clean: {'yes' if report.is_clean() else 'no'}")
    _emit(args, f"wrote {out}")
    return EXIT_OK


def cmd_stats(args) -> int:
    ds = discover(args.dataset)
    report = stats.compute_stats(ds)
    out = Path(args.out)
    _check_clobber([out / "stats.json"], args.overwrite)
    written = stats.export_report(report, out, ds=ds)
    mean_w, mean_h = report.image_size
    _emit(args, f"mean image size: {_num(mean_w)} x {_num(mean_h)}")
    _emit(args, f"annotations: {sum(report.class_histogram.values())}")
    for path in written:
        _emit(args, f"wrote {path}")
    return EXIT_OK


_KIND_FLAGS = {
    "jpeg_quality": ("quality", int),
    "quantize": ("bits", int),
    "gaussian_noise": ("sigma", float),
    "rescale": ("scale", float),
    "identity": (None, None),
}


def cmd_modify(args) -> int:
    if args.kind not in _KIND_FLAGS:
        raise ValidationError(f"--kind must be one of {', '.join(_KIND_FLAGS)}")
    param_name, _ = _KIND_FLAGS[args.kind]
    params = {}
    for name in ("quality", "bits", "sigma", "scale"):
        value = getattr(args, name)
        if value is None:
            continue
        if name != param_name:
            raise ValidationError(f"--{name} does not apply to kind {args.kind!r}")
        params[name] = value
    if param_name is not None and param_name not in params:
        raise ValidationError(f"kind {args.kind!r} needs --{param_name}")

    ds = discover(args.dataset)
    spec = modifiers.ModifierSpec(kind=args.kind, params=params)
    outcome = modifiers.apply_modifier(ds, spec, seed=args.seed, overwrite=args.overwrite)
    new_path = outcome.new_handle.data_path
    _emit(
        args,
        f"created {new_path} ({outcome.images_processed} images, "
        f"{outcome.bytes_before} -> {outcome.bytes_after} bytes)",
    )
    if args.out:
        import json

        out = Path(args.out)
        summary = out / "modify_summary.json"
        _check_clobber([summary], args.overwrite)
        out.mkdir(parents=True, exist_ok=True)
        summary.write_text(json.dumps(outcome.to_dict(), indent=2, sort_keys=True) + "\n")
        _emit(args, f"wrote {summary}")
    return EXIT_OK


def cmd_metric(args) -> int:
    ds = discover(args.dataset)
    ref = discover(args.ref) if args.ref else None
    result = qmetrics.apply_quality_metric(ds, args.name, ref_ds=ref, jobs=args.jobs)
    agg = "undefined" if result.aggregate is None else _num(result.aggregate)
    _emit(args, f"{args.name}: aggregate={agg} defined={result.count_defined}")
    if args.out:
        out = Path(args.out)
        _check_clobber([out / f"metric_{result.metric_name}.json"], args.overwrite)
        path = qmetrics.save_metric_result(result, out)
        _emit(args, f"wrote {path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    gt = load_coco(args.gt)
    preds = load_detections(args.pred)
    summary = deteval.evaluate(gt, preds)
    _emit(
        args,
        f"AP={_num(summary.ap)} AP50={_num(summary.ap50)} "
        f"AP75={_num(summary.ap75)} AR_100={_num(summary.ar_100)}",
    )
    if args.out:
        out = Path(args.out)
        _check_clobber([out / deteval.SUMMARY_FILENAME], args.overwrite)
        path = deteval.save_eval_summary(summary, out)
        _emit(args, f"wrote {path}")
    return EXIT_OK


def cmd_run(args) -> int:
    plan = experiment.load_plan(args.plan)
    if args.jobs is not None:
        plan = dataclasses.replace(plan, max_parallel_runs=args.jobs)
    store = runstore.RunStore(args.store) if args.store else runstore.RunStore()
    records = experiment.execute(plan, store)
    counts = {"completed": 0, "failed": 0, "timeout": 0}
    for rec in records:
        counts[rec.status] = counts.get(rec.status, 0) + 1
        _emit(args, f"{rec.run_id}: {rec.status}")
    _emit(
        args,
        f"runs: {len(records)} completed={counts['completed']} "
        f"failed={counts['failed']} timeout={counts['timeout']}",
    )
    if counts["completed"] == len(records):
        return EXIT_OK
    return EXIT_PARTIAL


def cmd_report(args) -> int:
    store = runstore.RunStore(args.store) if args.store else runstore.RunStore()
    query = runstore.RunQuery(experiment_name=args.experiment, sort_by=args.x)
    columns = [args.x] + [y for y in args.y if y != args.x]
    table = store.get_table(query, columns)
    out = Path(args.out)
    csv_path = out / "report.csv"
    plot_paths = [out / f"plot_{runstore._slug(y)}.svg" for y in args.y]
    _check_clobber([csv_path, *plot_paths], args.overwrite)
    table.write_csv(csv_path)
    _emit(args, f"wrote {csv_path} ({len(table.rows)} rows)")
    for path in runstore.render_plots(table, args.x, list(args.y), out):
        _emit(args, f"wrote {path}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is exit 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser, *, out_required: bool) -> None:
    if out_required:
        p.add_argument("--out", required=True, help="directory for machine artifacts")
    else:
        p.add_argument("--out", default="", help="directory for machine artifacts")
    p.add_argument("--quiet", action="store_true", help="suppress the stdout summary")
    p.add_argument("--overwrite", action="store_true", help="replace existing artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iqh", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sanity", help="check and repair a dataset into a clean copy")
    p.add_argument("dataset")
    for flag in (
        "no-dedupe",
        "no-image-validity",
        "no-annotation-integrity",
        "no-dims-fix",
        "no-geojson-clean",
        "no-geometry-repair",
    ):
        p.add_argument(f"--{flag}", action="store_true")
    _add_common(p, out_required=True)
    p.set_defaults(func=cmd_sanity)

    p = sub.add_parser("stats", help="dataset statistics report")
    p.add_argument("dataset")
    _add_common(p, out_required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("modify", help="derive a degraded sibling dataset")
    p.add_argument("dataset")
    p.add_argument("--kind", required=True, help=", ".join(_KIND_FLAGS))
    p.add_argument("--quality", type=int)
    p.add_argument("--bits", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--scale", type=float)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p, out_required=False)
    p.set_defaults(func=cmd_modify)

    p = sub.add_parser("metric", help="image quality metric over a dataset")
    p.add_argument("dataset")
    p.add_argument("--name", required=True, help=", ".join(qmetrics.registered_metrics()))
    p.add_argument("--ref", help="reference dataset for full-reference metrics")
    p.add_argument("--jobs", type=int)
    _add_common(p, out_required=False)
    p.set_defaults(func=cmd_metric)

    p = sub.add_parser("eval", help="score detections against COCO ground truth")
    p.add_argument("--gt", required=True, help="COCO annotation file")
    p.add_argument("--pred", required=True, help="detection dump (bare JSON array)")
    _add_common(p, out_required=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="execute an experiment plan")
    p.add_argument("--plan", required=True, help="JSON plan document")
    p.add_argument("--jobs", type=int, help="override the plan's max_parallel_runs")
    p.add_argument("--store", help="store root (default: $IQH_STORE or ./iqh_store)")
    _add_common(p, out_required=False)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="CSV and plots from stored runs")
    p.add_argument("--experiment", required=True)
    p.add_argument("--x", required=True, help="column for the x axis")
    p.add_argument("--y", required=True, nargs="+", help="metric column(s) to plot")
    p.add_argument("--store", help="store root (default: $IQH_STORE or ./iqh_store)")
    _add_common(p, out_required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    try:
        return args.func(args)
    except StoreError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except IqhError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last-resort boundary for exit codes
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Dataset checking and repair: duplicates, broken images, bad annotations.

``run_sanity`` writes a sanitized copy of a dataset (never mutating the
source) and reports every change it made.  Re-running it on its own output
is a no-op with an all-zero report.
"""
from __future__ import annotations

import json
import logging
import math
import shutil
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus, geometry, imgio
from .corpus import CocoDocument, DatasetHandle, FeatureTable
from .errors import EmptyResult, ValidationError

log = logging.getLogger(__name__)

REPORT_FILENAME = "sanity_report.json"


@dataclass
class SanityFlags:
    """Which checks run_sanity performs.  At least one must be enabled."""

    dedupe: bool = True
    image_validity: bool = True
    annotation_integrity: bool = True
    dims_fix: bool = True
    geojson_clean: bool = True
    geometry_repair: bool = True

    def any_enabled(self) -> bool:
        return any(
            (self.dedupe, self.image_validity, self.annotation_integrity,
             self.dims_fix, self.geojson_clean, self.geometry_repair)
        )


@dataclass
class SanityReport:
    """Change log of one sanity run; counts always match the logs."""

    duplicates_log: list[dict] = field(default_factory=list)
    invalid_images: list[dict] = field(default_factory=list)
    dims_log: list[dict] = field(default_factory=list)
    annotations_dropped: list[dict] = field(default_factory=list)
    geometries_fixed_log: list[dict] = field(default_factory=list)
    geometries_dropped_log: list[dict] = field(default_factory=list)
    output_path: str = ""

    @property
    def duplicates_removed(self) -> int:
        return len(self.duplicates_log)

    @property
    def dims_fixed(self) -> int:
        return len(self.dims_log)

    @property
    def geometries_fixed(self) -> int:
        return len(self.geometries_fixed_log)

    @property
    def geometries_dropped(self) -> int:
        return len(self.geometries_dropped_log)

    def is_clean(self) -> bool:
        return not (
            self.duplicates_log or self.invalid_images or self.dims_log
            or self.annotations_dropped or self.geometries_fixed_log
            or self.geometries_dropped_log
        )

    def to_dict(self) -> dict:
        return {
            "duplicates_removed": self.duplicates_removed,
            "duplicates_removed_log": self.duplicates_log,
            "invalid_images": self.invalid_images,
            "dims_fixed": self.dims_fixed,
            "dims_fixed_log": self.dims_log,
            "annotations_dropped": self.annotations_dropped,
            "geometries_fixed": self.geometries_fixed,
            "geometries_fixed_log": self.geometries_fixed_log,
            "geometries_dropped": self.geometries_dropped,
            "geometries_dropped_log": self.geometries_dropped_log,
            "output_path": self.output_path,
        }


# --- individual checks ---------------------------------------------------------


def dedupe_images(doc: CocoDocument) -> tuple[CocoDocument, list[dict]]:
    """Keep the first image entry per file_name; re-point annotations.

    Annotations referencing a removed duplicate are re-pointed to the kept
    entry's id, so no annotation is lost to deduplication itself.
    """
    kept: list = []
    first_by_name: dict[str, int] = {}
    remap: dict[int, int] = {}
    removed: list[dict] = []
    for img in doc.images:
        if img.file_name in first_by_name:
            remap[img.id] = first_by_name[img.file_name]
            removed.append({"id_or_path": img.file_name,
                            "reason": "duplicate-file-name",
                            "image_id": img.id})
        else:
            first_by_name[img.file_name] = img.id
            kept.append(img)
    if not removed:
        return doc, []
    annotations = []
    for ann in doc.annotations:
        if ann.image_id in remap:
            ann = corpus.CocoAnnotation(
                id=ann.id, image_id=remap[ann.image_id],
                category_id=ann.category_id, bbox=list(ann.bbox),
                area=ann.area, iscrowd=ann.iscrowd,
                segmentation=ann.segmentation, extras=dict(ann.extras))
        annotations.append(ann)
    new_doc = CocoDocument(images=kept, annotations=annotations,
                           categories=doc.categories, extras=doc.extras)
    return new_doc, removed


def check_image_files(ds: DatasetHandle) -> list[tuple[str, str]]:
    """Classify every file under the images dir; list failures with reasons.

    Reasons are ``bad-magic``, ``truncated``, and ``decode-error``.  Paths
    are relative to the images dir, sorted.
    """
    bad = []
    for path in sorted(ds.images_dir.rglob("*"), key=lambda p: p.as_posix()):
        if not path.is_file():
            continue
        reason = imgio.classify_invalid(path)
        if reason is not None:
            bad.append((path.relative_to(ds.images_dir).as_posix(), reason))
    return bad


# Relative disagreement between stored area and bbox area that gets flagged.
# Generous because stored area may come from a segmentation mask.
AREA_MISMATCH_TOL = 0.5


def check_annotation_integrity(doc: CocoDocument) -> list[tuple[int, str]]:
    """Issues per annotation: referential, size, bounds, and area checks.

    The category check only applies when the document declares categories;
    a document without a category list cannot dangle.
    """
    image_by_id = {img.id: img for img in doc.images}
    category_ids = {c.id for c in doc.categories}
    issues: list[tuple[int, str]] = []
    for ann in doc.annotations:
        img = image_by_id.get(ann.image_id)
        if img is None:
            issues.append((ann.id, "dangling-image"))
            continue
        if category_ids and ann.category_id not in category_ids:
            issues.append((ann.id, "unknown-category"))
            continue
        x, y, w, h = ann.bbox
        if w <= 0 or h <= 0:
            issues.append((ann.id, "degenerate-bbox"))
            continue
        if x < 0 or y < 0 or x + w > img.width or y + h > img.height:
            issues.append((ann.id, "out-of-bounds"))
            continue
        if ann.segmentation is None:
            box_area = w * h
            denom = max(ann.area, box_area)
            if denom > 0 and abs(ann.area - box_area) / denom > AREA_MISMATCH_TOL:
                issues.append((ann.id, "area-mismatch"))
    return issues


def fix_image_dims(
    doc: CocoDocument, ds: DatasetHandle
) -> tuple[CocoDocument, list[dict]]:
    """Replace declared width/height with decoded dimensions where they differ.

    Undecodable or missing files are left unchanged here; image-validity
    checking owns their removal.
    """
    fixed: list[dict] = []
    images = []
    for img in doc.images:
        path = ds.images_dir / img.file_name
        entry = img
        try:
            w, h = imgio.image_size(path)
        except Exception:
            log.warning("dims check skipped, cannot decode %s", path)
            images.append(entry)
            continue
        if (w, h) != (img.width, img.height):
            entry = corpus.CocoImage(id=img.id, file_name=img.file_name,
                                     width=w, height=h,
                                     extras=dict(img.extras))
            fixed.append({"id_or_path": img.file_name,
                          "reason": f"dims {img.width}x{img.height} -> {w}x{h}"})
        images.append(entry)
    if not fixed:
        return doc, []
    return CocoDocument(images=images, annotations=doc.annotations,
                        categories=doc.categories, extras=doc.extras), fixed


def _is_missing_value(value) -> bool:
    if value is None:
        return True
    return isinstance(value, float) and math.isnan(value)


def sanitize_geojson(
    tbl: FeatureTable, *, repair: bool = True
) -> tuple[FeatureTable, list[dict], list[dict]]:
    """Drop broken rows, repair repairable geometries.

    Returns (table, fixed_log, dropped_log).  Rows are dropped for a missing
    or NaN required field, a missing geometry (null), an empty geometry
    (zero coordinates), or a geometry still invalid after repair; each drop
    is logged with its classification.
    """
    fixed_log: list[dict] = []
    dropped_log: list[dict] = []
    kept: list[corpus.Feature] = []
    for idx, feat in enumerate(tbl.features):
        label = f"features[{idx}]"
        missing_fields = [
            name for name in corpus.REQUIRED_FEATURE_FIELDS
            if _is_missing_value(feat.properties.get(name))
        ]
        if missing_fields:
            dropped_log.append({"id_or_path": label,
                                "reason": "missing-field:" + ",".join(missing_fields)})
            continue
        geom = feat.geometry
        if geom is None:
            dropped_log.append({"id_or_path": label, "reason": "missing"})
            continue
        if geom.is_empty():
            dropped_log.append({"id_or_path": label, "reason": "empty"})
            continue
        defects = geometry.geometry_defects(geom)
        if not defects:
            kept.append(feat)
            continue
        if not repair:
            dropped_log.append({"id_or_path": label, "reason": "invalid"})
            continue
        repaired, _changed = geometry.repair_geometry(geom)
        if repaired is None or geometry.geometry_defects(repaired):
            dropped_log.append({"id_or_path": label, "reason": "invalid"})
            continue
        fixed_log.append({"id_or_path": label,
                          "reason": ";".join(defects)})
        kept.append(corpus.Feature(geometry=repaired,
                                   properties=dict(feat.properties)))
    return FeatureTable(features=kept, extras=tbl.extras), fixed_log, dropped_log


# --- the composite run -----------------------------------------------------------


def run_sanity(ds: DatasetHandle, flags: SanityFlags | None = None,
               out: str | Path = "") -> SanityReport:
    """Write a sanitized copy of ``ds`` to ``out`` and report all changes."""
    flags = flags if flags is not None else SanityFlags()
    if not flags.any_enabled():
        raise ValidationError("run_sanity needs at least one check enabled")
    out_dir = Path(out)
    report = SanityReport(output_path=str(out_dir))

    out_images = out_dir / ds.images_dir.name
    out_images.mkdir(parents=True, exist_ok=True)

    all_files = [p for p in sorted(ds.images_dir.rglob("*"),
                                   key=lambda p: p.as_posix()) if p.is_file()]
    invalid: dict[str, str] = {}
    if flags.image_validity:
        invalid = {
            rel: reason for rel, reason in check_image_files(ds)
        }
        report.invalid_images = [
            {"id_or_path": rel, "reason": reason}
            for rel, reason in sorted(invalid.items())
        ]

    copied = 0
    for path in all_files:
        rel = path.relative_to(ds.images_dir).as_posix()
        if rel in invalid:
            continue
        dest = out_images / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(path, dest)
        copied += 1
    if all_files and copied == 0:
        raise EmptyResult(f"sanity removed every image under {ds.images_dir}")

    surviving = {
        p.relative_to(out_images).as_posix()
        for p in out_images.rglob("*") if p.is_file()
    }

    if ds.coco_annotations is not None:
        doc = corpus.load_coco(ds.coco_annotations)
        if flags.dedupe:
            doc, removed = dedupe_images(doc)
            report.duplicates_log = removed
        if flags.image_validity:
            doc = _drop_missing_images(doc, surviving, report)
        if flags.dims_fix:
            out_handle_dir = out_images
            doc, fixed = _fix_dims_against(doc, out_handle_dir)
            report.dims_log.extend(fixed)
        if flags.annotation_integrity:
            issues = check_annotation_integrity(doc)
            if issues:
                bad_ids = {ann_id for ann_id, _ in issues}
                report.annotations_dropped.extend(
                    {"id_or_path": ann_id, "reason": reason}
                    for ann_id, reason in issues
                )
                doc = CocoDocument(
                    images=doc.images,
                    annotations=[a for a in doc.annotations if a.id not in bad_ids],
                    categories=doc.categories,
                    extras=doc.extras,
                )
        corpus.write_coco(doc, out_dir / ds.coco_annotations.name)

    if ds.geojson_annotations is not None and flags.geojson_clean:
        tbl = corpus.load_geojson(ds.geojson_annotations)
        tbl, fixed_log, dropped_log = sanitize_geojson(
            tbl, repair=flags.geometry_repair)
        report.geometries_fixed_log = fixed_log
        report.geometries_dropped_log = dropped_log
        corpus.write_geojson(tbl, out_dir / ds.geojson_annotations.name)
    elif ds.geojson_annotations is not None:
        shutil.copy2(ds.geojson_annotations,
                     out_dir / ds.geojson_annotations.name)

    if ds.mask_dir is not None:
        dest = out_dir / ds.mask_dir.name
        if dest.exists():
            shutil.rmtree(dest)
        shutil.copytree(ds.mask_dir, dest)

    (out_dir / REPORT_FILENAME).write_text(
        json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    return report


def _drop_missing_images(doc: CocoDocument, surviving: set[str],
                         report: SanityReport) -> CocoDocument:
    """Remove image entries whose file is gone, and their annotations."""
    kept_images = []
    removed_ids = set()
    for img in doc.images:
        if img.file_name in surviving:
            kept_images.append(img)
        else:
            removed_ids.add(img.id)
            report.annotations_dropped.extend(
                {"id_or_path": ann.id, "reason": "image-removed"}
                for ann in doc.annotations if ann.image_id == img.id
            )
    if not removed_ids:
        return doc
    return CocoDocument(
        images=kept_images,
        annotations=[a for a in doc.annotations if a.image_id not in removed_ids],
        categories=doc.categories,
        extras=doc.extras,
    )


def _fix_dims_against(doc: CocoDocument, images_dir: Path
                      ) -> tuple[CocoDocument, list[dict]]:
    """fix_image_dims against an explicit images directory."""
    shim = DatasetHandle(
        data_path=images_dir.parent, parent_folder=images_dir.parent.parent,
        images_dir=images_dir, params={"ds_name": images_dir.parent.name})
    return fix_image_dims(doc, shim)

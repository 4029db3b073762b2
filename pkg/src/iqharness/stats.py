"""Descriptive statistics over a dataset's images and annotations.

Computes size means, class and aspect/area histograms, per-annotation
polygon descriptors and fitted rectangles, and per-field numeric summaries,
then exports everything as ``stats.json``, SVG plots, and two static HTML
pages (annotation table, thumbnail preview).
"""
from __future__ import annotations

import base64
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from . import corpus, geometry, imgio, report
from .corpus import CocoDocument, DatasetHandle, FeatureTable
from .errors import DegenerateGeometry, NoImages, NonNumericField, UnknownField

log = logging.getLogger(__name__)

ASPECT_RANGE = (1.0 / 8.0, 8.0)
N_BINS = 20


@dataclass
class Histogram:
    """Binned counts with explicit edges and outlier bins."""

    edges: list[float]
    counts: list[int]
    underflow: int = 0
    overflow: int = 0

    @property
    def total(self) -> int:
        return sum(self.counts) + self.underflow + self.overflow

    def to_dict(self) -> dict:
        return {"edges": self.edges, "counts": self.counts,
                "underflow": self.underflow, "overflow": self.overflow}


@dataclass(frozen=True)
class RotatedRect:
    """Minimum-area enclosing rectangle: w >= h, angle of the long side."""

    cx: float
    cy: float
    w: float
    h: float
    angle: float  # degrees in [0, 180)


@dataclass
class StatsReport:
    image_size: tuple[float, float] = (0.0, 0.0)  # (mean_w, mean_h)
    class_histogram: dict[int, int] = field(default_factory=dict)
    image_aspect_hist: Histogram | None = None
    image_area_hist: Histogram | None = None
    bbox_aspect_hist: Histogram | None = None
    bbox_area_hist: Histogram | None = None
    polygon_summaries: list[dict] = field(default_factory=list)
    fitted_boxes: list[dict] = field(default_factory=list)
    field_summaries: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "image_size": {"mean_width": self.image_size[0],
                           "mean_height": self.image_size[1]},
            "class_histogram": {str(k): v
                                for k, v in sorted(self.class_histogram.items())},
            "image_aspect_hist": _hist_dict(self.image_aspect_hist),
            "image_area_hist": _hist_dict(self.image_area_hist),
            "bbox_aspect_hist": _hist_dict(self.bbox_aspect_hist),
            "bbox_area_hist": _hist_dict(self.bbox_area_hist),
            "polygon_summaries": self.polygon_summaries,
            "fitted_boxes": self.fitted_boxes,
            "field_summaries": self.field_summaries,
        }


def _hist_dict(h: Histogram | None):
    return None if h is None else h.to_dict()


# --- elementary statistics -----------------------------------------------------


def image_size_stats(ds: DatasetHandle) -> tuple[float, float]:
    """Mean (width, height) over the decodable images of the dataset."""
    widths = []
    heights = []
    for rel in imgio.list_images(ds.images_dir):
        try:
            w, h = imgio.image_size(ds.images_dir / rel)
        except Exception:
            log.warning("stats: skipping undecodable image %s", rel)
            continue
        widths.append(w)
        heights.append(h)
    if not widths:
        raise NoImages(f"no decodable images under {ds.images_dir}")
    return float(np.mean(widths)), float(np.mean(heights))


def class_histogram(doc: CocoDocument) -> dict[int, int]:
    """Annotation counts per category id; declared categories start at 0."""
    counts = {c.id: 0 for c in doc.categories}
    for ann in doc.annotations:
        counts[ann.category_id] = counts.get(ann.category_id, 0) + 1
    return counts


def _log_histogram(values: list[float], lo: float, hi: float) -> Histogram:
    edges = np.logspace(math.log10(lo), math.log10(hi), N_BINS + 1)
    arr = np.asarray(values, dtype=np.float64)
    under = int(np.count_nonzero(arr < edges[0]))
    over = int(np.count_nonzero(arr > edges[-1]))
    inside = arr[(arr >= edges[0]) & (arr <= edges[-1])]
    counts, _ = np.histogram(inside, bins=edges)
    return Histogram(edges=[float(e) for e in edges],
                     counts=[int(c) for c in counts],
                     underflow=under, overflow=over)


def _aspect_histogram(values: list[float]) -> Histogram:
    return _log_histogram(values, *ASPECT_RANGE)


def _area_histogram(values: list[float]) -> Histogram:
    """Log-spaced bins spanning the observed positive range."""
    arr = [v for v in values if v > 0]
    if not arr:
        return Histogram(edges=[], counts=[])
    lo, hi = min(arr), max(arr)
    if lo == hi:
        return Histogram(edges=[lo, hi], counts=[len(arr)])
    return _log_histogram(arr, lo, hi)


def aspect_area_histograms(
    doc: CocoDocument,
) -> tuple[Histogram, Histogram, Histogram, Histogram]:
    """(image_aspect, image_area, bbox_aspect, bbox_area) histograms.

    Aspect is width/height; boxes with a non-positive side are skipped.
    """
    img_aspects = [im.width / im.height for im in doc.images if im.height > 0]
    img_areas = [float(im.width * im.height) for im in doc.images]
    box_aspects = [a.bbox[2] / a.bbox[3] for a in doc.annotations
                   if a.bbox[2] > 0 and a.bbox[3] > 0]
    box_areas = [a.bbox[2] * a.bbox[3] for a in doc.annotations
                 if a.bbox[2] > 0 and a.bbox[3] > 0]
    return (
        _aspect_histogram(img_aspects),
        _area_histogram(img_areas),
        _aspect_histogram(box_aspects),
        _area_histogram(box_areas),
    )


def fit_rotated_bbox(points) -> RotatedRect:
    """Minimum-area rotated rectangle around a polygon or point set."""
    pts = _as_points(points)
    try:
        rect = geometry.min_area_rect(pts)
    except ValueError as exc:
        raise DegenerateGeometry(str(exc)) from exc
    return RotatedRect(cx=rect.center[0], cy=rect.center[1],
                       w=rect.width, h=rect.height, angle=rect.angle_deg)


def polygon_descriptors(poly) -> tuple[float, tuple[float, float], float]:
    """(area, centroid, compactness) of a polygon."""
    geom = _as_geometry(poly)
    area = geometry.geometry_area(geom)
    if area <= 0:
        raise DegenerateGeometry("polygon has zero area")
    centroid = geometry.geometry_centroid(geom)
    return area, centroid, geometry.compactness(geom)


def field_summary(tbl: FeatureTable, field_name: str) -> tuple[float, float, float]:
    """(min, mean, max) of one numeric property over non-missing rows."""
    present = [f.properties[field_name] for f in tbl.features
               if field_name in f.properties]
    if not present:
        raise UnknownField(f"no feature has property {field_name!r}")
    values = []
    for v in present:
        if v is None or (isinstance(v, float) and math.isnan(v)):
            continue
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise NonNumericField(f"property {field_name!r} has non-numeric value {v!r}")
        values.append(float(v))
    if not values:
        raise NonNumericField(f"property {field_name!r} has no numeric values")
    return min(values), float(np.mean(values)), max(values)


def _as_points(poly) -> list[tuple[float, float]]:
    if isinstance(poly, (geometry.PolygonGeometry, geometry.MultiPolygonGeometry)):
        return [pt for p in geometry.as_polygons(poly) for r in p.rings for pt in r]
    return [(float(x), float(y)) for x, y in poly]


def _as_geometry(poly) -> geometry.Geometry:
    if isinstance(poly, (geometry.PolygonGeometry, geometry.MultiPolygonGeometry)):
        return poly
    return geometry.PolygonGeometry(rings=[[(float(x), float(y)) for x, y in poly]])


# --- report assembly --------------------------------------------------------------


def _segmentation_rings(segmentation) -> list[list[tuple[float, float]]]:
    """Polygon rings from a COCO polygon-style segmentation, else []."""
    if not isinstance(segmentation, list) or not segmentation:
        return []
    rings = []
    for part in segmentation:
        if not isinstance(part, list) or len(part) < 6:
            continue
        if any(not isinstance(v, (int, float)) or isinstance(v, bool)
               for v in part):
            return []
        rings.append([(float(part[i]), float(part[i + 1]))
                      for i in range(0, len(part) - 1, 2)])
    return rings


def compute_stats(ds: DatasetHandle) -> StatsReport:
    """Full statistics pass over one dataset."""
    rep = StatsReport()
    rep.image_size = image_size_stats(ds)

    doc = None
    if ds.coco_annotations is not None:
        doc = corpus.load_coco(ds.coco_annotations)
        rep.class_histogram = class_histogram(doc)
        (rep.image_aspect_hist, rep.image_area_hist,
         rep.bbox_aspect_hist, rep.bbox_area_hist) = aspect_area_histograms(doc)
        for ann in sorted(doc.annotations, key=lambda a: a.id):
            rings = _segmentation_rings(ann.segmentation)
            entry = {"id": ann.id,
                     "aa_w": ann.bbox[2], "aa_h": ann.bbox[3]}
            if rings:
                try:
                    geom = geometry.PolygonGeometry(rings=rings)
                    area, centroid, comp = polygon_descriptors(geom)
                    rect = fit_rotated_bbox(geom)
                except DegenerateGeometry:
                    log.warning("stats: degenerate segmentation on annotation %s",
                                ann.id)
                    rings = []
                else:
                    rep.polygon_summaries.append({
                        "id": ann.id, "area": area,
                        "centroid": [centroid[0], centroid[1]],
                        "compactness": comp,
                    })
                    entry.update({"cx": rect.cx, "cy": rect.cy, "w": rect.w,
                                  "h": rect.h, "angle": rect.angle})
            if not rings:
                x, y, w, h = ann.bbox
                entry.update({"cx": x + w / 2, "cy": y + h / 2,
                              "w": max(w, h), "h": min(w, h),
                              "angle": 0.0 if w >= h else 90.0})
            rep.fitted_boxes.append(entry)

    if ds.geojson_annotations is not None:
        tbl = corpus.load_geojson(ds.geojson_annotations)
        numeric_fields = sorted({
            key
            for f in tbl.features
            for key, v in f.properties.items()
            if isinstance(v, (int, float)) and not isinstance(v, bool)
        })
        for name in numeric_fields:
            try:
                lo, mean, hi = field_summary(tbl, name)
            except (UnknownField, NonNumericField):
                continue
            rep.field_summaries[name] = {"min": lo, "mean": mean, "max": hi}
        for idx, feat in enumerate(tbl.features):
            if feat.geometry is None or feat.geometry.is_empty():
                continue
            label = f"geojson[{idx}]"
            try:
                area, centroid, comp = polygon_descriptors(feat.geometry)
                rect = fit_rotated_bbox(feat.geometry)
            except (DegenerateGeometry, ZeroDivisionError):
                log.warning("stats: degenerate geometry at %s", label)
                continue
            rep.polygon_summaries.append({
                "id": label, "area": area,
                "centroid": [centroid[0], centroid[1]],
                "compactness": comp,
            })
            pts = _as_points(feat.geometry)
            xs = [p[0] for p in pts]
            ys = [p[1] for p in pts]
            rep.fitted_boxes.append({
                "id": label,
                "aa_w": max(xs) - min(xs), "aa_h": max(ys) - min(ys),
                "cx": rect.cx, "cy": rect.cy, "w": rect.w, "h": rect.h,
                "angle": rect.angle,
            })
    return rep


# --- export --------------------------------------------------------------------


def _thumbnail_data_uri(path: Path, size: int) -> str | None:
    try:
        img = imgio.read_image(path)
    except Exception:
        return None
    h, w = img.shape[:2]
    scale = size / max(w, h, 1)
    if scale < 1.0:
        img = cv2.resize(img, (max(1, round(w * scale)), max(1, round(h * scale))),
                         interpolation=cv2.INTER_AREA)
    if img.dtype == np.uint16:
        img = (img / 257.0).astype(np.uint8)
    bgr = img[:, :, ::-1] if img.ndim == 3 else img
    ok, buf = cv2.imencode(".jpg", np.ascontiguousarray(bgr),
                           [cv2.IMWRITE_JPEG_QUALITY, 80])
    if not ok:
        return None
    return "data:image/jpeg;base64," + base64.b64encode(buf.tobytes()).decode()


def export_report(
    rep: StatsReport,
    out: str | Path,
    *,
    ds: DatasetHandle | None = None,
    sample: int = 20,
    thumb_size: int = 96,
) -> list[Path]:
    """Write stats.json, one SVG per histogram, and the two HTML pages.

    Returns the list of files written.  The preview page needs the dataset
    handle for pixels; without one it lists no thumbnails.
    """
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    stats_path = out_dir / "stats.json"
    stats_path.write_text(json.dumps(rep.to_dict(), indent=2) + "\n",
                          encoding="utf-8")
    written.append(stats_path)

    histograms = {
        "image_aspect_hist": (rep.image_aspect_hist, "width / height"),
        "image_area_hist": (rep.image_area_hist, "pixels^2"),
        "bbox_aspect_hist": (rep.bbox_aspect_hist, "width / height"),
        "bbox_area_hist": (rep.bbox_area_hist, "pixels^2"),
    }
    for name, (hist, x_label) in histograms.items():
        if hist is None or not hist.edges:
            continue
        svg_path = out_dir / f"{name}.svg"
        svg_path.write_text(
            report.histogram_svg(name.replace("_", " "), hist.edges, hist.counts,
                                 underflow=hist.underflow,
                                 overflow=hist.overflow, x_label=x_label),
            encoding="utf-8")
        written.append(svg_path)

    headers = ["id", "area", "centroid_x", "centroid_y", "compactness"]
    rows = [[s["id"], s["area"], s["centroid"][0], s["centroid"][1],
             s["compactness"]] for s in rep.polygon_summaries]
    summary_path = out_dir / "annots_summary.html"
    body = report.table_html(headers, rows) if rows else "<p>No polygon annotations.</p>"
    size_line = (f"<p>Mean image size: {rep.image_size[0]:.2f} x "
                 f"{rep.image_size[1]:.2f} px</p>")
    if rep.field_summaries:
        frows = [[name, v["min"], v["mean"], v["max"]]
                 for name, v in sorted(rep.field_summaries.items())]
        body += "<h2>Field summaries</h2>" + report.table_html(
            ["field", "min", "mean", "max"], frows)
    summary_path.write_text(
        report.html_page("Annotation summary", size_line + body), encoding="utf-8")
    written.append(summary_path)

    thumbs = []
    if ds is not None:
        rels = imgio.list_images(ds.images_dir)[:max(0, sample)]
        for rel in rels:
            uri = _thumbnail_data_uri(ds.images_dir / rel, thumb_size)
            if uri is not None:
                thumbs.append(
                    f'<figure style="margin:4px"><img src="{uri}" '
                    f'alt="{rel.as_posix()}">'
                    f"<figcaption style=\"font-size:10px\">{rel.as_posix()}"
                    "</figcaption></figure>")
    preview_path = out_dir / "imgs_preview.html"
    grid = '<div class="grid">' + "".join(thumbs) + "</div>" if thumbs \
        else "<p>No images sampled.</p>"
    preview_path.write_text(report.html_page("Image preview", grid),
                            encoding="utf-8")
    written.append(preview_path)
    return written

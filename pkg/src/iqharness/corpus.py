"""Dataset discovery, annotation data models, and annotation file IO.

A dataset is a folder holding one images subdirectory plus optional
annotation files: a COCO-style ``.json``, a ``.geojson`` feature collection,
and a ``masks`` subdirectory.  Derived datasets live next to their source
under ``<name>#<modifier>``.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    AmbiguousAnnotations,
    InvalidModifierName,
    NoImagesDir,
    ParseError,
    SchemaError,
    ValidationError,
)
from .geometry import Geometry, MultiPolygonGeometry, PolygonGeometry

log = logging.getLogger(__name__)

NAME_SEPARATOR = "#"
MASK_DIR_NAME = "masks"

# Toolkit-written metadata files, never annotation candidates.
RESERVED_JSON = frozenset({
    "modifier_log.json", "sanity_report.json", "stats.json",
    "eval_summary.json",
})


# --- dataset handle ---------------------------------------------------------------

@dataclass(frozen=True)
class DatasetHandle:
    """Resolved pointers into one dataset folder.  Immutable once built."""

    data_path: Path
    parent_folder: Path
    images_dir: Path
    coco_annotations: Path | None = None
    geojson_annotations: Path | None = None
    mask_dir: Path | None = None
    params: dict = field(default_factory=dict)

    @property
    def ds_name(self) -> str:
        return str(self.params.get("ds_name", self.data_path.name))


def _json_top_level(path: Path) -> str:
    """First structural character of a JSON file: '{', '[', or '' if neither."""
    try:
        with open(path, "rb") as fh:
            chunk = fh.read(64)
            while chunk:
                for byte in chunk:
                    ch = chr(byte)
                    if not ch.isspace():
                        return ch if ch in "{[" else ""
                chunk = fh.read(64)
    except OSError:
        return ""
    return ""


def discover(path: str | Path) -> DatasetHandle:
    """Resolve a dataset folder into a :class:`DatasetHandle`.

    The images subdirectory is the lexicographically first subdirectory whose
    name does not contain ``mask``; extra candidates are logged and ignored.
    A ``.json`` file whose top level is an object binds as COCO annotations
    (a bare array is a detection dump, not ground truth); a ``.geojson``
    binds as the vector annotation table; a subdirectory named exactly
    ``masks`` binds as the mask folder.
    """
    data_path = Path(path)
    if not data_path.is_dir():
        raise NoImagesDir(f"dataset folder does not exist: {data_path}")
    data_path = data_path.resolve()

    subdirs = sorted((d for d in data_path.iterdir() if d.is_dir()),
                     key=lambda d: d.name)
    candidates = [d for d in subdirs if "mask" not in d.name.lower()]
    if not candidates:
        raise NoImagesDir(f"no images subdirectory under {data_path}")
    images_dir = candidates[0]
    if len(candidates) > 1:
        log.warning(
            "%s: several image directory candidates (%s); using %s",
            data_path.name,
            ", ".join(d.name for d in candidates),
            images_dir.name,
        )

    mask_dir = data_path / MASK_DIR_NAME
    mask_dir = mask_dir if mask_dir.is_dir() else None

    coco_candidates = [
        p for p in sorted(data_path.iterdir())
        if p.is_file() and p.suffix.lower() == ".json"
        and p.name not in RESERVED_JSON and _json_top_level(p) == "{"
    ]
    if len(coco_candidates) > 1:
        raise AmbiguousAnnotations(
            f"{data_path.name}: several COCO annotation candidates: "
            + ", ".join(p.name for p in coco_candidates),
            candidates=[str(p) for p in coco_candidates],
        )
    geojson_candidates = [
        p for p in sorted(data_path.iterdir())
        if p.is_file() and p.suffix.lower() == ".geojson"
    ]
    if len(geojson_candidates) > 1:
        raise AmbiguousAnnotations(
            f"{data_path.name}: several geojson annotation candidates: "
            + ", ".join(p.name for p in geojson_candidates),
            candidates=[str(p) for p in geojson_candidates],
        )

    params = {"ds_name": data_path.name}
    if NAME_SEPARATOR in data_path.name:
        base, _, modifier = data_path.name.partition(NAME_SEPARATOR)
        params["base_name"] = base
        params["modifier"] = modifier

    return DatasetHandle(
        data_path=data_path,
        parent_folder=data_path.parent,
        images_dir=images_dir,
        coco_annotations=coco_candidates[0] if coco_candidates else None,
        geojson_annotations=geojson_candidates[0] if geojson_candidates else None,
        mask_dir=mask_dir,
        params=params,
    )


def derived_name(ds_name: str, modifier_name: str) -> str:
    """Folder name of a dataset derived by a modifier: ``<ds>#<modifier>``."""
    if not modifier_name:
        raise InvalidModifierName("modifier name must be non-empty")
    for bad in ("/", "\\", "\x00"):
        if bad in modifier_name:
            raise InvalidModifierName(
                f"modifier name may not contain {bad!r}: {modifier_name!r}"
            )
    return f"{ds_name}{NAME_SEPARATOR}{modifier_name}"


# --- JSON plumbing ----------------------------------------------------------------

def _load_json(path: Path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 text", offset=exc.start) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at byte {exc.pos}: {exc.msg}",
                         offset=exc.pos) from exc


def _require(entry: dict, key: str, where: str):
    if key not in entry:
        raise SchemaError(f"{where}: missing field {key!r}")
    return entry[key]


def _as_number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {type(value).__name__}")
    return float(value)


# --- COCO models ------------------------------------------------------------------

@dataclass
class CocoImage:
    id: int
    file_name: str
    width: int
    height: int
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"id": self.id, "file_name": self.file_name,
                "width": self.width, "height": self.height, **self.extras}


@dataclass
class CocoAnnotation:
    id: int
    image_id: int
    category_id: int
    bbox: list[float]
    area: float
    iscrowd: int = 0
    segmentation: object = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"id": self.id, "image_id": self.image_id,
               "category_id": self.category_id, "bbox": list(self.bbox),
               "area": self.area, "iscrowd": self.iscrowd}
        if self.segmentation is not None:
            out["segmentation"] = self.segmentation
        out.update(self.extras)
        return out


@dataclass
class CocoCategory:
    id: int
    name: str = ""
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"id": self.id, "name": self.name, **self.extras}


@dataclass
class CocoDocument:
    images: list[CocoImage] = field(default_factory=list)
    annotations: list[CocoAnnotation] = field(default_factory=list)
    categories: list[CocoCategory] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = dict(self.extras)
        out["images"] = [im.to_dict() for im in self.images]
        out["annotations"] = [a.to_dict() for a in self.annotations]
        out["categories"] = [c.to_dict() for c in self.categories]
        return out


_IMAGE_FIELDS = ("id", "file_name", "width", "height")
_ANN_FIELDS = ("id", "image_id", "category_id", "bbox", "area", "iscrowd",
               "segmentation")


def _parse_coco_image(entry, where: str) -> CocoImage:
    if not isinstance(entry, dict):
        raise SchemaError(f"{where}: expected an object")
    img = CocoImage(
        id=int(_as_number(_require(entry, "id", where), where + ".id")),
        file_name=str(_require(entry, "file_name", where)),
        width=int(_as_number(_require(entry, "width", where), where + ".width")),
        height=int(_as_number(_require(entry, "height", where), where + ".height")),
        extras={k: v for k, v in entry.items() if k not in _IMAGE_FIELDS},
    )
    return img


def _parse_bbox(value, where: str) -> list[float]:
    if not isinstance(value, list) or len(value) != 4:
        raise SchemaError(f"{where}: bbox must be a list of 4 numbers")
    return [_as_number(v, where + ".bbox") for v in value]


def _parse_coco_annotation(entry, where: str) -> CocoAnnotation:
    if not isinstance(entry, dict):
        raise SchemaError(f"{where}: expected an object")
    bbox = _parse_bbox(_require(entry, "bbox", where), where)
    area = entry.get("area")
    area = (bbox[2] * bbox[3]) if area is None else _as_number(area, where + ".area")
    return CocoAnnotation(
        id=int(_as_number(_require(entry, "id", where), where + ".id")),
        image_id=int(_as_number(_require(entry, "image_id", where),
                                where + ".image_id")),
        category_id=int(_as_number(_require(entry, "category_id", where),
                                   where + ".category_id")),
        bbox=bbox,
        area=area,
        iscrowd=int(entry.get("iscrowd", 0) or 0),
        segmentation=entry.get("segmentation"),
        extras={k: v for k, v in entry.items() if k not in _ANN_FIELDS},
    )


def load_coco(path: str | Path) -> CocoDocument:
    """Parse a COCO-style annotation file, preserving unknown fields."""
    path = Path(path)
    raw = _load_json(path)
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: top level must be an object")
    images_raw = _require(raw, "images", str(path))
    if not isinstance(images_raw, list):
        raise SchemaError(f"{path}: 'images' must be a list")
    anns_raw = raw.get("annotations", [])
    if not isinstance(anns_raw, list):
        raise SchemaError(f"{path}: 'annotations' must be a list")
    cats_raw = raw.get("categories", [])
    if not isinstance(cats_raw, list):
        raise SchemaError(f"{path}: 'categories' must be a list")

    doc = CocoDocument(
        images=[_parse_coco_image(e, f"images[{i}]")
                for i, e in enumerate(images_raw)],
        annotations=[_parse_coco_annotation(e, f"annotations[{i}]")
                     for i, e in enumerate(anns_raw)],
        categories=[],
        extras={k: v for k, v in raw.items()
                if k not in ("images", "annotations", "categories")},
    )
    for i, entry in enumerate(cats_raw):
        if not isinstance(entry, dict):
            raise SchemaError(f"categories[{i}]: expected an object")
        where = f"categories[{i}]"
        doc.categories.append(CocoCategory(
            id=int(_as_number(_require(entry, "id", where), where + ".id")),
            name=str(entry.get("name", "")),
            extras={k: v for k, v in entry.items() if k not in ("id", "name")},
        ))
    return doc


def write_coco(doc: CocoDocument, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc.to_dict(), indent=2) + "\n",
                          encoding="utf-8")


# --- detection records --------------------------------------------------------------

@dataclass
class DetectionRecord:
    """One predicted box with a confidence score."""

    image_id: int
    category_id: int
    bbox: list[float]
    score: float
    id: int = 0
    area: float = 0.0
    iscrowd: int = 0
    segmentation: object = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"image_id": self.image_id, "category_id": self.category_id,
               "bbox": list(self.bbox), "score": self.score, "id": self.id,
               "area": self.area, "iscrowd": self.iscrowd}
        if self.segmentation is not None:
            out["segmentation"] = self.segmentation
        out.update(self.extras)
        return out


_DET_FIELDS = ("id", "image_id", "category_id", "bbox", "score", "area",
               "iscrowd", "segmentation")


def load_detections(path: str | Path) -> list[DetectionRecord]:
    """Parse a bare-array detection dump (model inference output)."""
    path = Path(path)
    raw = _load_json(path)
    if not isinstance(raw, list):
        raise SchemaError(f"{path}: top level must be an array")
    records = []
    for i, entry in enumerate(raw):
        where = f"detections[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where}: expected an object")
        bbox = _parse_bbox(_require(entry, "bbox", where), where)
        score = _as_number(_require(entry, "score", where), where + ".score")
        if not (0.0 <= score <= 1.0) or math.isnan(score):
            raise ValidationError(f"{where}: score {score} outside [0, 1]")
        if bbox[2] < 0 or bbox[3] < 0:
            raise ValidationError(f"{where}: negative bbox size {bbox}")
        area = entry.get("area")
        area = (bbox[2] * bbox[3]) if area is None else _as_number(
            area, where + ".area")
        records.append(DetectionRecord(
            image_id=int(_as_number(_require(entry, "image_id", where),
                                    where + ".image_id")),
            category_id=int(_as_number(_require(entry, "category_id", where),
                                       where + ".category_id")),
            bbox=bbox,
            score=score,
            id=int(_as_number(entry.get("id", i + 1), where + ".id")),
            area=area,
            iscrowd=int(entry.get("iscrowd", 0) or 0),
            segmentation=entry.get("segmentation"),
            extras={k: v for k, v in entry.items() if k not in _DET_FIELDS},
        ))
    return records


def write_detections(records: list[DetectionRecord], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps([r.to_dict() for r in records], indent=2) + "\n",
        encoding="utf-8",
    )


# --- geojson feature tables -----------------------------------------------------------

REQUIRED_FEATURE_FIELDS = ("image_filename", "class_id")


@dataclass
class Feature:
    """One vector annotation row: geometry plus free-form properties."""

    geometry: Geometry | None
    properties: dict = field(default_factory=dict)

    @property
    def image_filename(self) -> str | None:
        value = self.properties.get("image_filename")
        return None if value is None else str(value)

    @property
    def class_id(self):
        return self.properties.get("class_id")


@dataclass
class FeatureTable:
    """All features of one geojson file, with pass-through extras."""

    features: list[Feature] = field(default_factory=list)
    extras: dict = field(default_factory=dict)


def _parse_ring(raw, where: str) -> list[tuple[float, float]]:
    if not isinstance(raw, list):
        raise SchemaError(f"{where}: ring must be a list of positions")
    ring = []
    for j, pos in enumerate(raw):
        if not isinstance(pos, list) or len(pos) < 2:
            raise SchemaError(f"{where}[{j}]: position must be [x, y]")
        ring.append((_as_number(pos[0], where), _as_number(pos[1], where)))
    # GeoJSON repeats the first vertex at the end; store rings open.
    if len(ring) > 1 and ring[0] == ring[-1]:
        ring.pop()
    return ring


def _parse_geometry(raw, where: str) -> Geometry | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise SchemaError(f"{where}: geometry must be an object or null")
    gtype = raw.get("type")
    coords = raw.get("coordinates")
    if gtype == "Polygon":
        if not isinstance(coords, list):
            raise SchemaError(f"{where}: Polygon coordinates must be a list")
        rings = [_parse_ring(r, f"{where}.coordinates[{i}]")
                 for i, r in enumerate(coords)]
        return PolygonGeometry(rings=[r for r in rings if r] if rings else [])
    if gtype == "MultiPolygon":
        if not isinstance(coords, list):
            raise SchemaError(f"{where}: MultiPolygon coordinates must be a list")
        polys = []
        for i, poly in enumerate(coords):
            if not isinstance(poly, list):
                raise SchemaError(f"{where}.coordinates[{i}]: expected a list")
            rings = [_parse_ring(r, f"{where}.coordinates[{i}][{j}]")
                     for j, r in enumerate(poly)]
            polys.append(PolygonGeometry(rings=[r for r in rings if r]))
        return MultiPolygonGeometry(polygons=polys)
    raise SchemaError(f"{where}: unsupported geometry type {gtype!r}")


def load_geojson(path: str | Path) -> FeatureTable:
    """Parse a geojson FeatureCollection into a :class:`FeatureTable`.

    The required property columns (``image_filename``, ``class_id``) must be
    present on at least one feature each; otherwise the file as a whole is
    rejected with a :class:`SchemaError` naming the absent columns.
    """
    path = Path(path)
    raw = _load_json(path)
    if not isinstance(raw, dict) or raw.get("type") != "FeatureCollection":
        raise SchemaError(f"{path}: expected a FeatureCollection")
    feats_raw = raw.get("features")
    if not isinstance(feats_raw, list):
        raise SchemaError(f"{path}: 'features' must be a list")

    features = []
    for i, entry in enumerate(feats_raw):
        where = f"features[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError(f"{where}: expected an object")
        props = entry.get("properties") or {}
        if not isinstance(props, dict):
            raise SchemaError(f"{where}: 'properties' must be an object")
        geom = _parse_geometry(entry.get("geometry"), where)
        features.append(Feature(geometry=geom, properties=dict(props)))

    missing = [
        col for col in REQUIRED_FEATURE_FIELDS
        if features and not any(col in f.properties for f in features)
    ]
    if missing:
        raise SchemaError(
            f"{path}: required property columns absent: {', '.join(missing)}"
        )
    return FeatureTable(
        features=features,
        extras={k: v for k, v in raw.items() if k not in ("type", "features")},
    )


def _geometry_to_coords(geom: Geometry):
    def close(ring):
        pts = [[x, y] for x, y in ring]
        if pts and pts[0] != pts[-1]:
            pts.append(list(pts[0]))
        return pts

    if isinstance(geom, MultiPolygonGeometry):
        return {
            "type": "MultiPolygon",
            "coordinates": [[close(r) for r in p.rings] for p in geom.polygons],
        }
    return {"type": "Polygon", "coordinates": [close(r) for r in geom.rings]}


def write_geojson(table: FeatureTable, path: str | Path) -> None:
    out = dict(table.extras)
    out["type"] = "FeatureCollection"
    out["features"] = [
        {
            "type": "Feature",
            "geometry": None if f.geometry is None else _geometry_to_coords(f.geometry),
            "properties": f.properties,
        }
        for f in table.features
    ]
    Path(path).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")


# --- generated-image listings -----------------------------------------------------------

def load_generated_list(path: str | Path, base_dir: str | Path) -> list[str]:
    """Parse a bare-array listing of generated image paths.

    Every entry must be a string that resolves to an existing file inside
    ``base_dir``; anything else fails validation.
    """
    path = Path(path)
    base_dir = Path(base_dir).resolve()
    raw = _load_json(path)
    if not isinstance(raw, list):
        raise SchemaError(f"{path}: top level must be an array")
    out = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, str):
            raise SchemaError(f"{path}: entry {i} must be a string")
        resolved = (base_dir / entry).resolve()
        if not resolved.is_file():
            raise ValidationError(f"{path}: listed file missing: {entry}")
        if not resolved.is_relative_to(base_dir):
            raise ValidationError(f"{path}: listed path escapes output dir: {entry}")
        out.append(entry)
    return out

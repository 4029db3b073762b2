"""Dataset checking and repair: each defect class plus full-run idempotence."""

import json

import pytest

from iqharness import corpus, sanity
from iqharness.corpus import CocoAnnotation, CocoCategory, CocoDocument, CocoImage
from iqharness.errors import ValidationError

from conftest import make_dataset, smooth_image, write_png


def build_defective_dataset(root):
    """One of each: duplicate entry, truncated file, wrong dims, dangling
    annotation, bow-tie geometry."""
    images = {
        "good0.png": smooth_image(1, 48),
        "good1.png": smooth_image(2, 48),
        "wrongdims.png": smooth_image(3, 32),
    }
    ds_dir = make_dataset(root, "defective", images)

    # a real PNG cut short: header survives, data and trailer do not
    whole = ds_dir / "images" / "good0.png"
    trunc = ds_dir / "images" / "trunc.png"
    trunc.write_bytes(whole.read_bytes()[:120])

    coco = {
        "images": [
            {"id": 1, "file_name": "good0.png", "width": 48, "height": 48},
            {"id": 2, "file_name": "good0.png", "width": 48, "height": 48},
            {"id": 3, "file_name": "trunc.png", "width": 48, "height": 48},
            {"id": 4, "file_name": "wrongdims.png", "width": 64, "height": 64},
            {"id": 5, "file_name": "good1.png", "width": 48, "height": 48},
        ],
        "annotations": [
            {"id": 1, "image_id": 1, "category_id": 1,
             "bbox": [2, 2, 10, 10], "area": 100, "iscrowd": 0},
            {"id": 2, "image_id": 777, "category_id": 1,
             "bbox": [2, 2, 10, 10], "area": 100, "iscrowd": 0},
            {"id": 3, "image_id": 5, "category_id": 1,
             "bbox": [4, 4, 8, 8], "area": 64, "iscrowd": 0},
        ],
        "categories": [{"id": 1, "name": "thing"}],
    }
    (ds_dir / "annotations.json").write_text(json.dumps(coco))

    geojson = {
        "type": "FeatureCollection",
        "features": [
            {"type": "Feature",
             "geometry": {"type": "Polygon", "coordinates": [
                 [[0, 0], [8, 0], [8, 8], [0, 8], [0, 0]]]},
             "properties": {"image_filename": "good0.png", "class_id": 1}},
            {"type": "Feature",
             "geometry": {"type": "Polygon", "coordinates": [
                 [[0, 0], [4, 4], [4, 0], [0, 4], [0, 0]]]},  # bow-tie
             "properties": {"image_filename": "good1.png", "class_id": 1}},
        ],
    }
    (ds_dir / "labels.geojson").write_text(json.dumps(geojson))
    return ds_dir


def test_full_run_counts_each_defect_once(tmp_path):
    ds = corpus.discover(build_defective_dataset(tmp_path))
    report = sanity.run_sanity(ds, out=tmp_path / "clean")

    assert report.duplicates_removed == 1
    assert len(report.invalid_images) == 1
    assert report.invalid_images[0]["id_or_path"] == "trunc.png"
    assert report.invalid_images[0]["reason"] == "truncated"
    assert report.dims_fixed == 1
    assert len(report.annotations_dropped) == 1
    assert report.annotations_dropped[0]["id_or_path"] == 2
    assert report.geometries_fixed == 1
    assert report.geometries_dropped == 0
    assert not report.is_clean()
    assert (tmp_path / "clean" / sanity.REPORT_FILENAME).is_file()


def test_rerun_on_output_is_clean(tmp_path):
    ds = corpus.discover(build_defective_dataset(tmp_path))
    sanity.run_sanity(ds, out=tmp_path / "clean")
    again = sanity.run_sanity(
        corpus.discover(tmp_path / "clean"), out=tmp_path / "clean2")
    assert again.is_clean()
    assert again.duplicates_removed == 0
    assert again.dims_fixed == 0
    assert len(again.annotations_dropped) == 0
    assert again.geometries_fixed == 0


def test_output_dataset_contents(tmp_path):
    ds = corpus.discover(build_defective_dataset(tmp_path))
    sanity.run_sanity(ds, out=tmp_path / "clean")
    out = corpus.discover(tmp_path / "clean")
    files = sorted(p.name for p in out.images_dir.iterdir())
    assert files == ["good0.png", "good1.png", "wrongdims.png"]
    doc = corpus.load_coco(out.coco_annotations)
    assert len(doc.images) == 3  # duplicate and truncated entries gone
    by_name = {img.file_name: img for img in doc.images}
    assert (by_name["wrongdims.png"].width,
            by_name["wrongdims.png"].height) == (32, 32)
    assert {a.id for a in doc.annotations} == {1, 3}
    tbl = corpus.load_geojson(out.geojson_annotations)
    assert len(tbl.features) == 2


def test_requires_at_least_one_check(tmp_path, small_dataset):
    ds = corpus.discover(small_dataset)
    flags = sanity.SanityFlags(dedupe=False, image_validity=False,
                               annotation_integrity=False, dims_fix=False,
                               geojson_clean=False, geometry_repair=False)
    with pytest.raises(ValidationError):
        sanity.run_sanity(ds, flags, out=tmp_path / "x")


def test_disabled_checks_leave_defects_alone(tmp_path):
    ds = corpus.discover(build_defective_dataset(tmp_path))
    flags = sanity.SanityFlags(dedupe=False, annotation_integrity=False,
                               dims_fix=False, geojson_clean=False,
                               geometry_repair=False)
    report = sanity.run_sanity(ds, flags, out=tmp_path / "partial")
    assert report.duplicates_removed == 0
    assert report.dims_fixed == 0
    assert len(report.invalid_images) == 1  # only validity ran
    doc = corpus.load_coco(tmp_path / "partial" / "annotations.json")
    names = [img.file_name for img in doc.images]
    assert names.count("good0.png") == 2  # duplicate survived


def test_dedupe_repoints_annotations():
    doc = CocoDocument(
        images=[CocoImage(id=1, file_name="a.png", width=8, height=8),
                CocoImage(id=2, file_name="a.png", width=8, height=8)],
        annotations=[CocoAnnotation(id=10, image_id=2, category_id=1,
                                    bbox=[0, 0, 2, 2], area=4)],
        categories=[CocoCategory(id=1)],
    )
    out, removed = sanity.dedupe_images(doc)
    assert len(removed) == 1
    assert len(out.images) == 1
    assert out.annotations[0].image_id == 1  # re-pointed, not dropped


@pytest.mark.parametrize("ann,reason", [
    (dict(bbox=[0, 0, 0, 5], area=0), "degenerate-bbox"),
    (dict(bbox=[-1, 0, 4, 4], area=16), "out-of-bounds"),
    (dict(bbox=[6, 6, 4, 4], area=16), "out-of-bounds"),
    (dict(bbox=[0, 0, 2, 2], area=400), "area-mismatch"),
    (dict(bbox=[0, 0, 2, 2], area=4, category_id=9), "unknown-category"),
    (dict(bbox=[0, 0, 2, 2], area=4, image_id=5), "dangling-image"),
])
def test_annotation_integrity_classifications(ann, reason):
    base = dict(id=1, image_id=1, category_id=1)
    doc = CocoDocument(
        images=[CocoImage(id=1, file_name="a.png", width=8, height=8)],
        annotations=[CocoAnnotation(**{**base, **ann})],
        categories=[CocoCategory(id=1)],
    )
    issues = sanity.check_annotation_integrity(doc)
    assert issues == [(1, reason)]


def test_category_check_skipped_without_category_list():
    doc = CocoDocument(
        images=[CocoImage(id=1, file_name="a.png", width=8, height=8)],
        annotations=[CocoAnnotation(id=1, image_id=1, category_id=999,
                                    bbox=[0, 0, 2, 2], area=4)],
        categories=[],
    )
    assert sanity.check_annotation_integrity(doc) == []


def test_geojson_drop_reasons():
    from iqharness.corpus import Feature, FeatureTable
    from iqharness.geometry import PolygonGeometry

    ok = {"image_filename": "a.png", "class_id": 1}
    tbl = FeatureTable(features=[
        Feature(geometry=None, properties=dict(ok)),
        Feature(geometry=PolygonGeometry(rings=[[]]), properties=dict(ok)),
        Feature(geometry=PolygonGeometry(rings=[[(0, 0), (1, 0), (1, 1), (0, 1)]]),
                properties={"class_id": 1}),
        Feature(geometry=PolygonGeometry(rings=[[(0, 0), (1, 0), (1, 1), (0, 1)]]),
                properties=dict(ok)),
    ])
    out, fixed, dropped = sanity.sanitize_geojson(tbl)
    assert len(out.features) == 1
    assert fixed == []
    reasons = [d["reason"] for d in dropped]
    assert reasons == ["missing", "empty", "missing-field:image_filename"]


def test_wrong_dims_annotation_survives_when_still_in_bounds(tmp_path):
    # dims fix runs before integrity: a box valid under the real dims stays
    images = {"a.png": smooth_image(20, 48)}
    ds_dir = make_dataset(tmp_path, "dims", images)
    coco = {
        "images": [{"id": 1, "file_name": "a.png", "width": 16, "height": 16}],
        "annotations": [{"id": 1, "image_id": 1, "category_id": 1,
                         "bbox": [2, 2, 30, 30], "area": 900, "iscrowd": 0}],
        "categories": [{"id": 1, "name": "t"}],
    }
    (ds_dir / "annotations.json").write_text(json.dumps(coco))
    report = sanity.run_sanity(corpus.discover(ds_dir), out=tmp_path / "o")
    assert report.dims_fixed == 1
    assert len(report.annotations_dropped) == 0

"""Shared fixture builders: datasets on disk, synthetic images, stub tasks."""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import cv2
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import norm_cdf  # noqa: E402


# -- synthetic images -------------------------------------------------------------


def smooth_image(seed: int, size: int = 64) -> np.ndarray:
    """Natural-looking uint8 RGB content: upscaled low-frequency noise."""
    rng = np.random.default_rng(seed)
    small = rng.uniform(30, 225, size=(8, 8, 3))
    big = cv2.resize(small, (size, size), interpolation=cv2.INTER_CUBIC)
    big += rng.normal(0, 3, size=big.shape)
    return np.clip(np.rint(big), 0, 255).astype(np.uint8)


def slanted_edge_image(sigma: float, angle_deg: float = 5.0, size: int = 128,
                       lo: float = 40.0, hi: float = 220.0) -> np.ndarray:
    """Gaussian-blurred step edge, point-sampled at pixel centers.

    The edge runs through the image center, tilted ``angle_deg`` from
    vertical; intensity is lo + (hi-lo) * Phi(d / sigma) with d the signed
    distance from the edge line, which is the exact profile of an ideal
    step blurred by a Gaussian of width sigma.
    """
    theta = math.radians(angle_deg)
    nx, ny = math.cos(theta), math.sin(theta)  # unit normal, mostly +x
    cx = cy = (size - 1) / 2.0
    ys, xs = np.mgrid[0:size, 0:size]
    d = (xs - cx) * nx + (ys - cy) * ny
    phi = np.vectorize(norm_cdf)(d / sigma) if sigma > 0 else (d >= 0).astype(float)
    img = lo + (hi - lo) * phi
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def checkerboard(size: int = 256) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size]
    return (((xs + ys) % 2) * 255).astype(np.uint8)


def noisy_constant(level: float = 120.0, sigma: float = 6.0, size: int = 512,
                   seed: int = 11) -> np.ndarray:
    rng = np.random.default_rng(seed)
    img = level + rng.normal(0.0, sigma, size=(size, size))
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def half_flat_composite(size: int = 256, seed: int = 5) -> np.ndarray:
    """Left half flat+noise (homogeneous), right half checkerboard texture."""
    rng = np.random.default_rng(seed)
    img = np.empty((size, size), dtype=np.float64)
    img[:, : size // 2] = 150.0 + rng.normal(0.0, 5.0, size=(size, size // 2))
    ys, xs = np.mgrid[0:size, 0 : size - size // 2]
    img[:, size // 2 :] = ((xs + ys) % 2) * 255.0
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


# -- datasets on disk -------------------------------------------------------------


def write_png(path: Path, img: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    out = img[:, :, ::-1] if img.ndim == 3 else img
    assert cv2.imwrite(str(path), out)


def make_dataset(root: Path, name: str, images: dict[str, np.ndarray],
                 annotations: dict | None = None,
                 ann_filename: str = "annotations.json") -> Path:
    """Lay out <root>/<name>/images/... plus an optional COCO file."""
    ds = root / name
    for rel, img in images.items():
        write_png(ds / "images" / rel, img)
    if annotations is not None:
        (ds / ann_filename).write_text(json.dumps(annotations))
    return ds


def default_coco(images: dict[str, np.ndarray]) -> dict:
    entries = []
    anns = []
    for i, (rel, img) in enumerate(sorted(images.items()), start=1):
        h, w = img.shape[:2]
        entries.append({"id": i, "file_name": rel, "width": w, "height": h})
        anns.append({
            "id": i, "image_id": i, "category_id": 1,
            "bbox": [2.0, 3.0, w / 4.0, h / 4.0],
            "area": (w / 4.0) * (h / 4.0), "iscrowd": 0,
        })
    return {"images": entries, "annotations": anns,
            "categories": [{"id": 1, "name": "thing"}]}


@pytest.fixture(scope="session")
def ten_image_dataset(tmp_path_factory) -> Path:
    """10 smooth 64x64 RGB images with simple COCO annotations."""
    root = tmp_path_factory.mktemp("corpus")
    images = {f"img_{i:02d}.png": smooth_image(100 + i) for i in range(10)}
    return make_dataset(root, "ds_coco_dataset", images, default_coco(images))


@pytest.fixture()
def small_dataset(tmp_path) -> Path:
    images = {f"im{i}.png": smooth_image(40 + i, size=32) for i in range(3)}
    return make_dataset(tmp_path, "small", images, default_coco(images))


# -- stub task executables ---------------------------------------------------------


MEAN_INTENSITY_TASK = """\
import argparse, json
from pathlib import Path
import cv2
import numpy as np

p = argparse.ArgumentParser()
p.add_argument("--trainds", required=True)
p.add_argument("--outputpath", required=True)
args, _extra = p.parse_known_args()

values = []
for path in sorted(Path(args.trainds, "images").rglob("*.png")):
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    values.append(float(np.mean(img)))
out = Path(args.outputpath)
out.mkdir(parents=True, exist_ok=True)
(out / "results.json").write_text(json.dumps({
    "n_images": len(values),
    "mean_intensity": [sum(values) / len(values)],
}))
"""


def write_stub_task(path: Path, body: str) -> Path:
    path.write_text(body)
    return path

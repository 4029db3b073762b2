"""Degradation transforms that derive sibling datasets from an original.

Each modifier maps every image of a dataset through a parameterized
transform and writes the result to ``<parent>/<ds>#<name>/`` with the same
relative image paths; annotation files carry over verbatim so evaluations
stay aligned.  Transforms never mutate the source dataset.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import shutil
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import cv2
import numpy as np

from . import corpus, imgio
from .corpus import DatasetHandle
from .errors import (
    DestinationExists,
    DuplicateKind,
    UnsupportedChannelCount,
    ValidationError,
)

log = logging.getLogger(__name__)

BUILTIN_KINDS = ("jpeg_quality", "quantize", "gaussian_noise", "rescale", "identity")

LOG_FILENAME = "modifier_log.json"


def _num_token(value: float) -> str:
    """Filesystem-safe token for a numeric parameter (decimal point -> '_')."""
    text = f"{value:g}"
    return text.replace(".", "_").replace("-", "m")


def _auto_name(kind: str, params: dict) -> str:
    if kind == "jpeg_quality":
        return f"jpg{int(params['quality'])}_modifier"
    if kind == "quantize":
        return f"quant{int(params['bits'])}_modifier"
    if kind == "gaussian_noise":
        return f"noise{_num_token(float(params['sigma']))}_modifier"
    if kind == "rescale":
        return f"rescale{_num_token(float(params['scale']) * 100.0)}_modifier"
    return f"{kind}_modifier"


def _validate_params(kind: str, params: dict) -> None:
    if kind == "jpeg_quality":
        q = params.get("quality")
        if not isinstance(q, int) or isinstance(q, bool) or not 1 <= q <= 100:
            raise ValidationError(f"jpeg_quality needs integer quality in [1,100], got {q!r}")
    elif kind == "quantize":
        b = params.get("bits")
        if not isinstance(b, int) or isinstance(b, bool) or not 1 <= b <= 8:
            raise ValidationError(f"quantize needs integer bits in [1,8], got {b!r}")
    elif kind == "gaussian_noise":
        s = params.get("sigma")
        if not isinstance(s, (int, float)) or isinstance(s, bool) or s < 0 \
                or math.isnan(s):
            raise ValidationError(f"gaussian_noise needs sigma >= 0, got {s!r}")
    elif kind == "rescale":
        s = params.get("scale")
        if not isinstance(s, (int, float)) or isinstance(s, bool) \
                or not 0 < s <= 1:
            raise ValidationError(f"rescale needs scale in (0,1], got {s!r}")
    elif kind == "identity":
        if params:
            raise ValidationError(f"identity takes no params, got {params!r}")
    elif kind not in _custom_kinds:
        raise ValidationError(f"unknown modifier kind {kind!r}")


@dataclass(frozen=True)
class ModifierSpec:
    """A degradation kind with validated parameters and an auto-derived name."""

    kind: str
    params: dict = field(default_factory=dict)
    name: str = field(init=False, default="")

    def __post_init__(self):
        _validate_params(self.kind, self.params)
        object.__setattr__(self, "name", _auto_name(self.kind, self.params))


@dataclass
class ModifierOutcome:
    """What one apply_modifier call produced."""

    new_handle: DatasetHandle
    images_processed: int
    bytes_before: int
    bytes_after: int
    per_image_log: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "new_path": str(self.new_handle.data_path),
            "images_processed": self.images_processed,
            "bytes_before": self.bytes_before,
            "bytes_after": self.bytes_after,
            "per_image": self.per_image_log,
        }


# --- per-image transforms -------------------------------------------------------


def jpeg_quality_transform(img: np.ndarray, q: int) -> np.ndarray:
    """Round-trip through a baseline JPEG encode at quality ``q``."""
    data = imgio.encode_jpeg(img, q)
    decoded = cv2.imdecode(np.frombuffer(data, dtype=np.uint8),
                           cv2.IMREAD_UNCHANGED)
    if decoded is None:
        raise UnsupportedChannelCount("JPEG round-trip failed to decode")
    if decoded.ndim == 3:
        decoded = decoded[:, :, ::-1]
    if img.ndim == 2 and decoded.ndim == 3:
        decoded = decoded[:, :, 0]
    return np.ascontiguousarray(decoded)


def quantize_transform(img: np.ndarray, bits: int) -> np.ndarray:
    """Snap each channel value to 2^bits uniformly spaced levels."""
    full = imgio.max_value(img)
    step = full / (2 ** bits - 1) if bits < 16 else 1.0
    values = np.asarray(img, dtype=np.float64)
    out = np.rint(values / step) * step
    return np.clip(np.rint(out), 0, full).astype(img.dtype)


def gaussian_noise_transform(img: np.ndarray, sigma: float,
                             rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. Normal(0, sigma) per sample, clamped to the value range."""
    if sigma == 0:
        return img.copy()
    full = imgio.max_value(img)
    noisy = np.asarray(img, dtype=np.float64) + rng.normal(
        0.0, sigma, size=img.shape)
    return np.clip(np.rint(noisy), 0, full).astype(img.dtype)


def rescale_transform(img: np.ndarray, scale: float) -> np.ndarray:
    """Box-filter down to ceil(scale*dim), bilinear back up; size-preserving."""
    if scale == 1:
        return img.copy()
    h, w = img.shape[:2]
    small_w = max(1, math.ceil(scale * w))
    small_h = max(1, math.ceil(scale * h))
    small = cv2.resize(img, (small_w, small_h), interpolation=cv2.INTER_AREA)
    return cv2.resize(small, (w, h), interpolation=cv2.INTER_LINEAR)


# --- registry --------------------------------------------------------------------

_custom_kinds: dict[str, Callable] = {}


def register_custom(kind: str, transform: Callable) -> None:
    """Make a per-image function available as a modifier kind.

    ``transform(img, params, rng)`` must return the transformed array.
    """
    if kind in BUILTIN_KINDS or kind in _custom_kinds:
        raise DuplicateKind(f"modifier kind already registered: {kind}")
    _custom_kinds[kind] = transform


def registered_kinds() -> list[str]:
    return list(BUILTIN_KINDS) + sorted(_custom_kinds)


def _image_rng(seed: int, rel_path: str) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}:{rel_path}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


def _transform_one(img: np.ndarray, spec: ModifierSpec,
                   rng: np.random.Generator) -> tuple[np.ndarray, bytes | None]:
    """(output array, encoded bytes to store verbatim or None)."""
    if spec.kind == "jpeg_quality":
        data = imgio.encode_jpeg(img, int(spec.params["quality"]))
        out = jpeg_quality_transform(img, int(spec.params["quality"]))
        return out, data
    if spec.kind == "quantize":
        return quantize_transform(img, int(spec.params["bits"])), None
    if spec.kind == "gaussian_noise":
        return gaussian_noise_transform(img, float(spec.params["sigma"]), rng), None
    if spec.kind == "rescale":
        return rescale_transform(img, float(spec.params["scale"])), None
    if spec.kind == "identity":
        return img.copy(), None
    transform = _custom_kinds.get(spec.kind)
    if transform is None:
        raise ValidationError(f"unknown modifier kind {spec.kind!r}")
    return transform(img, spec.params, rng), None


def apply_modifier(ds: DatasetHandle, spec: ModifierSpec, seed: int = 0,
                   *, overwrite: bool = False) -> ModifierOutcome:
    """Write the derived dataset ``<parent>/<ds>#<spec.name>`` and describe it.

    Per-image codec failures downgrade to a verbatim copy with a warning so
    the derived dataset keeps exactly the source's relative paths.  JPEG
    outputs are stored as JPEG bytestreams under the original file names
    (readers dispatch on magic bytes, not extensions).
    """
    dest_name = corpus.derived_name(ds.ds_name, spec.name)
    dest = ds.parent_folder / dest_name
    if dest.exists():
        if not overwrite:
            raise DestinationExists(f"derived dataset already exists: {dest}")
        shutil.rmtree(dest)
    dest_images = dest / ds.images_dir.name
    dest_images.mkdir(parents=True)

    rels = imgio.list_images(ds.images_dir)
    bytes_before = 0
    bytes_after = 0
    per_image: list[dict] = []
    for rel in rels:
        src_path = ds.images_dir / rel
        dst_path = dest_images / rel
        dst_path.parent.mkdir(parents=True, exist_ok=True)
        src_bytes = src_path.stat().st_size
        bytes_before += src_bytes
        entry = {"path": rel.as_posix(), "bytes_before": src_bytes}
        try:
            img = imgio.read_image(src_path)
            out, encoded = _transform_one(img, spec,
                                          _image_rng(seed, rel.as_posix()))
            if encoded is not None:
                dst_path.write_bytes(encoded)
            elif np.array_equal(out, img):
                # Identity result: keep the original bytes bit-for-bit.
                shutil.copy2(src_path, dst_path)
            else:
                imgio.write_image(dst_path, out)
        except Exception as exc:
            log.warning("modifier %s failed on %s (%s); copying unmodified",
                        spec.name, rel, exc)
            shutil.copy2(src_path, dst_path)
            entry["error"] = str(exc)
        entry["bytes_after"] = dst_path.stat().st_size
        bytes_after += entry["bytes_after"]
        per_image.append(entry)

    for ann in (ds.coco_annotations, ds.geojson_annotations):
        if ann is not None:
            shutil.copy2(ann, dest / ann.name)
    if ds.mask_dir is not None:
        shutil.copytree(ds.mask_dir, dest / ds.mask_dir.name)

    handle = corpus.discover(dest)
    params = dict(handle.params)
    params["modifier"] = spec.name
    params.update({f"modifier_{k}": str(v) for k, v in spec.params.items()})
    handle = replace(handle, params=params)

    outcome = ModifierOutcome(
        new_handle=handle,
        images_processed=len(rels),
        bytes_before=bytes_before,
        bytes_after=bytes_after,
        per_image_log=per_image,
    )
    payload = outcome.to_dict()
    payload.update({"kind": spec.kind, "params": spec.params,
                    "name": spec.name, "seed": seed})
    (dest / LOG_FILENAME).write_text(json.dumps(payload, indent=2) + "\n",
                                     encoding="utf-8")
    return outcome

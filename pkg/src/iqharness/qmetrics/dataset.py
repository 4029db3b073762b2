"""Dataset-level metric runs: per-image values plus one aggregate.

A metric is a named callable over a single image (optionally with a
reference image).  The built-in names cover the full-reference and blind
metrics in this package; :func:`register_metric` plugs in custom ones.
Values may be undefined for individual images (a blind estimator giving
up, say); such images are excluded from the aggregate but still counted
against ``count_defined``.
"""

from __future__ import annotations

import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ..corpus import DatasetHandle
from ..errors import EmptyDataset, MetricError, MissingReference, NoEdgesFound
from ..imgio import list_images, read_image
from .fullref import psnr, ssim
from .sharpness import sharpness
from .snr import snr_ha, snr_hb

# params dict is forwarded as keyword arguments to the underlying metric
MetricFn = Callable[[np.ndarray, np.ndarray | None, dict], "float | None"]

_NAME_RE = re.compile(r"^[a-z][a-z0-9_]*$")
_REGISTRY: dict[str, tuple[MetricFn, bool]] = {}


@dataclass(frozen=True)
class MetricResult:
    """Outcome of one metric over one dataset.

    ``per_image`` maps relative image path to value; images where the
    metric was undefined are absent.  ``aggregate`` is the arithmetic mean
    of the defined values, or None when nothing was defined.
    """

    metric_name: str
    per_image: dict[str, float]
    aggregate: float | None
    count_defined: int

    def to_dict(self) -> dict:
        return {
            "metric_name": self.metric_name,
            "per_image": dict(self.per_image),
            "aggregate": self.aggregate,
            "count_defined": self.count_defined,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MetricResult":
        return cls(
            metric_name=payload["metric_name"],
            per_image=dict(payload["per_image"]),
            aggregate=payload["aggregate"],
            count_defined=payload["count_defined"],
        )


def register_metric(name: str, fn: MetricFn, *, full_reference: bool = False) -> None:
    """Register a custom metric under ``name``.

    ``fn(img, ref, params)`` returns a float, or None when the metric is
    undefined for that image.  ``ref`` is None for blind metrics.
    """
    if not _NAME_RE.match(name):
        raise MetricError(f"invalid metric name {name!r}")
    _REGISTRY[name] = (fn, full_reference)


def registered_metrics() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def _psnr_metric(img, ref, params):
    return psnr(ref, img, **params)


def _ssim_metric(img, ref, params):
    return ssim(ref, img, **params)


def _snr_hb_metric(img, ref, params):
    return snr_hb(img, **params).value_linear


def _snr_ha_metric(img, ref, params):
    est = snr_ha(img, **params)
    return None if est is None else est.value_linear


def _sharpness_metric(img, ref, params):
    # scalar view of the full result: median RER over every accepted edge
    try:
        result = sharpness(img, **params)
    except NoEdgesFound:
        return None
    return float(np.median([e.rer for e in result.edges]))


register_metric("psnr", _psnr_metric, full_reference=True)
register_metric("ssim", _ssim_metric, full_reference=True)
register_metric("snr_hb", _snr_hb_metric)
register_metric("snr_ha", _snr_ha_metric)
register_metric("sharpness", _sharpness_metric)


def apply_quality_metric(
    ds: DatasetHandle,
    name: str,
    params: dict | None = None,
    ref_ds: DatasetHandle | None = None,
    *,
    jobs: int | None = None,
) -> MetricResult:
    """Run one metric over every image of ``ds``.

    Full-reference metrics pair each image with the file at the same
    relative path in ``ref_ds``.  Images are processed in parallel; the
    result map is assembled in sorted path order regardless.
    """
    if name not in _REGISTRY:
        raise MetricError(f"unknown metric {name!r}; have {', '.join(registered_metrics())}")
    fn, needs_ref = _REGISTRY[name]
    params = dict(params or {})

    paths = list_images(ds.images_dir)
    if not paths:
        raise EmptyDataset(f"no images under {ds.images_dir}")

    if needs_ref:
        if ref_ds is None:
            raise MissingReference(f"metric {name!r} needs a reference dataset")
        missing = [p.as_posix() for p in paths if not (ref_ds.images_dir / p).is_file()]
        if missing:
            raise MissingReference(
                f"reference dataset lacks {len(missing)} image(s): {', '.join(missing[:5])}"
            )

    def one(rel: Path) -> float | None:
        img = read_image(ds.images_dir / rel)
        ref = read_image(ref_ds.images_dir / rel) if needs_ref else None
        value = fn(img, ref, params)
        return None if value is None else float(value)

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        values = list(pool.map(one, paths))

    per_image = {
        rel.as_posix(): v for rel, v in zip(paths, values) if v is not None and not math.isnan(v)
    }
    aggregate = sum(per_image.values()) / len(per_image) if per_image else None
    return MetricResult(
        metric_name=name,
        per_image=per_image,
        aggregate=aggregate,
        count_defined=len(per_image),
    )


def save_metric_result(result: MetricResult, out_dir: Path) -> Path:
    """Write ``metric_<name>.json``; infinities use JSON's extended literals."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"metric_{result.metric_name}.json"
    path.write_text(json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")
    return path


def load_metric_result(path: Path) -> MetricResult:
    with open(path) as fh:
        return MetricResult.from_dict(json.load(fh))

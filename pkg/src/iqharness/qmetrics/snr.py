"""Blind signal-to-noise estimation from a single image.

Two estimators with opposite failure modes: homogeneous blocks (HB) tiles
the image and always returns a value; homogeneous areas (HA) grows flat
regions and returns None when the image has none big enough.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..errors import TooSmall
from ..imgio import to_gray

# One quantization level of noise: the std of a uniform unit step.
SIGMA_FLOOR = 1.0 / math.sqrt(12.0)

HB_BLOCK = 16
HB_KEEP_FRACTION = 0.5
HA_MIN_AREA = 64
HA_SIGMA_TOL = 0.9
# HA growth: once a region has this many pixels, candidates must also sit
# within 3 regional sigmas of the regional mean.  A large region's variance
# barely moves per absorbed pixel, so the global sigma cap alone would let
# it creep across a real boundary into texture; the mean gate stops that
# locally.  Below the threshold the statistics are too thin to gate on.
HA_BOOTSTRAP_N = 16
HA_MEAN_GATE = 3.0


@dataclass(frozen=True)
class SnrEstimate:
    """A blind SNR value with its provenance."""

    method: str           # "HB" or "HA"
    value_linear: float
    value_db: float
    support: int          # blocks (HB) or union pixels (HA)


def _to_db(linear: float) -> float:
    if linear <= 0:
        return float("-inf")
    return 20.0 * math.log10(linear)


def snr_hb(img: np.ndarray, block: int = HB_BLOCK,
           keep_fraction: float = HB_KEEP_FRACTION) -> SnrEstimate:
    """SNR from the most homogeneous non-overlapping block tiles.

    Tiles of ``block`` px are ranked by standard deviation; the lowest
    ``keep_fraction`` are kept and the estimate is median(mean)/median(std)
    over them, with the denominator floored at one quantization level.
    """
    gray = to_gray(img)
    h, w = gray.shape
    if h < block or w < block:
        raise TooSmall(f"snr_hb needs both dimensions >= {block}, got {gray.shape}")
    ny, nx = h // block, w // block
    tiles = gray[: ny * block, : nx * block].reshape(ny, block, nx, block)
    tiles = tiles.transpose(0, 2, 1, 3).reshape(ny * nx, block * block)
    means = tiles.mean(axis=1)
    stds = tiles.std(axis=1)
    keep = max(1, int(round(len(stds) * keep_fraction)))
    order = np.argsort(stds, kind="stable")[:keep]
    med_mean = float(np.median(means[order]))
    med_std = max(float(np.median(stds[order])), SIGMA_FLOOR)
    linear = med_mean / med_std
    return SnrEstimate(method="HB", value_linear=linear,
                       value_db=_to_db(linear), support=keep)


def snr_ha(img: np.ndarray, min_area: int = HA_MIN_AREA,
           sigma_tol: float = HA_SIGMA_TOL) -> SnrEstimate | None:
    """SNR from grown homogeneous areas, or None when none qualify.

    Regions grow 4-connected from low-gradient seeds.  A pixel joins a
    region only if (a) the region's std stays at or below
    ``sigma_tol * global std`` and (b) the pixel's local contrast (largest
    absolute difference to a 4-neighbor) stays under the contrast gate, so
    regions stop at real boundaries.  Regions of at least ``min_area``
    pixels qualify; the estimate is mean/std over their union.
    """
    gray = to_gray(img)
    h, w = gray.shape
    n_pixels = h * w
    flat = gray.ravel()
    global_sigma = float(flat.std())
    limit_var = (sigma_tol * global_sigma) ** 2

    # Local contrast per pixel: max abs difference to any 4-neighbor.
    # Used only to order seeds (flattest neighborhoods first).
    contrast = np.zeros_like(gray)
    if h > 1:
        dy = np.abs(np.diff(gray, axis=0))
        contrast[:-1] = np.maximum(contrast[:-1], dy)
        contrast[1:] = np.maximum(contrast[1:], dy)
    if w > 1:
        dx = np.abs(np.diff(gray, axis=1))
        contrast[:, :-1] = np.maximum(contrast[:, :-1], dx)
        contrast[:, 1:] = np.maximum(contrast[:, 1:], dx)
    seed_order = np.argsort(contrast.ravel(), kind="stable")

    visited = np.zeros(n_pixels, dtype=bool)
    union_n = 0
    union_s = 0.0
    union_s2 = 0.0

    for seed in seed_order:
        if visited[seed]:
            continue
        n = 0
        s = 0.0
        s2 = 0.0
        queued = {int(seed)}
        frontier = deque(queued)
        while frontier:
            p = frontier.popleft()
            if visited[p]:
                continue
            v = flat[p]
            if n > 0:
                nn = n + 1
                var_new = (s2 + v * v) / nn - ((s + v) / nn) ** 2
                if var_new > limit_var:
                    continue
                if n >= HA_BOOTSTRAP_N:
                    mean = s / n
                    var = max(s2 / n - mean * mean, 0.0)
                    gate = HA_MEAN_GATE * max(math.sqrt(var), SIGMA_FLOOR)
                    if abs(v - mean) > gate:
                        continue
            visited[p] = True
            n += 1
            s += v
            s2 += v * v
            y, x = divmod(p, w)
            for q in (p - w if y > 0 else -1,
                      p + w if y < h - 1 else -1,
                      p - 1 if x > 0 else -1,
                      p + 1 if x < w - 1 else -1):
                if q >= 0 and not visited[q] and q not in queued:
                    queued.add(q)
                    frontier.append(q)
        if n >= min_area:
            union_n += n
            union_s += s
            union_s2 += s2

    if union_n == 0:
        return None
    mean = union_s / union_n
    var = max(union_s2 / union_n - mean * mean, 0.0)
    sigma = max(math.sqrt(var), SIGMA_FLOOR)
    linear = mean / sigma
    return SnrEstimate(method="HA", value_linear=linear,
                       value_db=_to_db(linear), support=union_n)

"""Slow, direct reference implementations used to cross-check the package.

Everything here is written the long way on purpose: explicit loops, no
vectorization, no code shared with the package. When a package function
and its oracle disagree, the bug is in exactly one place.
"""

from __future__ import annotations

import math

import numpy as np


def norm_cdf(x: float) -> float:
    """Standard normal CDF via the error function."""
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


# -- full-reference metrics ------------------------------------------------------


def psnr_oracle(ref: np.ndarray, test: np.ndarray, peak: float = 255.0) -> float:
    """PSNR from a scalar double-loop MSE."""
    a = np.asarray(ref, dtype=np.float64).ravel()
    b = np.asarray(test, dtype=np.float64).ravel()
    total = 0.0
    for i in range(len(a)):
        d = a[i] - b[i]
        total += d * d
    mse = total / len(a)
    if mse == 0.0:
        return float("inf")
    return 10.0 * math.log10(peak * peak / mse)


def gaussian_window_oracle(size: int = 11, sigma: float = 1.5) -> list[list[float]]:
    half = (size - 1) / 2.0
    raw = [
        [
            math.exp(-((r - half) ** 2 + (c - half) ** 2) / (2.0 * sigma * sigma))
            for c in range(size)
        ]
        for r in range(size)
    ]
    total = sum(sum(row) for row in raw)
    return [[v / total for v in row] for row in raw]


def _ssim_plane_oracle(ref: np.ndarray, test: np.ndarray, peak: float) -> float:
    size = 11
    w = gaussian_window_oracle(size, 1.5)
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    h, wd = ref.shape
    values = []
    for top in range(h - size + 1):
        for left in range(wd - size + 1):
            mu1 = mu2 = 0.0
            e11 = e22 = e12 = 0.0
            for r in range(size):
                for c in range(size):
                    x = float(ref[top + r, left + c])
                    y = float(test[top + r, left + c])
                    wk = w[r][c]
                    mu1 += wk * x
                    mu2 += wk * y
                    e11 += wk * x * x
                    e22 += wk * y * y
                    e12 += wk * x * y
            s11 = e11 - mu1 * mu1
            s22 = e22 - mu2 * mu2
            s12 = e12 - mu1 * mu2
            num = (2.0 * mu1 * mu2 + c1) * (2.0 * s12 + c2)
            den = (mu1 * mu1 + mu2 * mu2 + c1) * (s11 + s22 + c2)
            values.append(num / den)
    return sum(values) / len(values)


def ssim_oracle(ref: np.ndarray, test: np.ndarray, peak: float = 255.0) -> float:
    """Mean SSIM from per-window scalar loops (channels averaged)."""
    a = np.asarray(ref, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    if a.ndim == 2:
        return _ssim_plane_oracle(a, b, peak)
    per_channel = [
        _ssim_plane_oracle(a[:, :, c], b[:, :, c], peak) for c in range(a.shape[2])
    ]
    return sum(per_channel) / len(per_channel)


# -- detection evaluation ---------------------------------------------------------

THRESHOLDS = [i / 100 for i in range(50, 100, 5)]
RECALLS = [i / 100 for i in range(101)]


def iou_xywh(a: list[float], b: list[float]) -> float:
    ax0, ay0 = a[0], a[1]
    ax1, ay1 = a[0] + a[2], a[1] + a[3]
    bx0, by0 = b[0], b[1]
    bx1, by1 = b[0] + b[2], b[1] + b[3]
    ix = min(ax1, bx1) - max(ax0, bx0)
    iy = min(ay1, by1) - max(ay0, by0)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a[2] * a[3] + b[2] * b[3] - inter
    return inter / union if union > 0 else 0.0


def detection_summary_oracle(gt_boxes: list[list[float]],
                             preds: list[tuple[float, list[float]]]) -> dict:
    """COCO-protocol scores for one image and one category, no crowds.

    ``preds`` is [(score, bbox)]; prediction ids are list positions.  The
    matching and the 101-point interpolation are both done from their
    definitions: score-descending greedy with best-IoU choice (ties going
    to the later ground-truth box), and interpolated precision at recall r
    taken as the max precision over all operating points with recall >= r.
    """
    order = sorted(range(len(preds)), key=lambda i: (-preds[i][0], i))
    n_gt = len(gt_boxes)
    ap_per_t = []
    recall_per_t = []
    for thr in THRESHOLDS:
        taken = [False] * n_gt
        flags = []
        for pi in order:
            _score, box = preds[pi]
            best = thr
            match = -1
            for gi in range(n_gt):
                if taken[gi]:
                    continue
                value = iou_xywh(box, gt_boxes[gi])
                if value >= best:
                    best = value
                    match = gi
            if match >= 0:
                taken[match] = True
                flags.append(True)
            else:
                flags.append(False)
        tp = 0
        points = []
        for k, flag in enumerate(flags):
            if flag:
                tp += 1
            points.append((tp / n_gt, tp / (k + 1)))
        sampled = []
        for r in RECALLS:
            candidates = [prec for rec, prec in points if rec >= r]
            sampled.append(max(candidates) if candidates else 0.0)
        ap_per_t.append(sum(sampled) / len(sampled))
        recall_per_t.append(points[-1][0] if points else 0.0)
    return {
        "AP": sum(ap_per_t) / len(ap_per_t),
        "AP50": ap_per_t[0],
        "AP75": ap_per_t[THRESHOLDS.index(0.75)],
        "AR_100": sum(recall_per_t) / len(recall_per_t),
    }


# -- geometry ---------------------------------------------------------------------


def area_even_odd(rings: list[list[tuple[float, float]]]) -> float:
    """Polygon area under the even-odd fill rule, by horizontal slab sweep.

    Exact for straight edges: between consecutive event ordinates the
    covered width varies linearly, so evaluating it at slab midheight and
    multiplying by slab height integrates each trapezoid exactly...
    except where edges cross inside a slab.  Crossings are added as event
    ordinates first, so within a slab the left-right order of edges is
    constant and the midpoint rule is exact.
    """
    events = set()
    segs = []
    for ring in rings:
        n = len(ring)
        for i in range(n):
            p, q = ring[i], ring[(i + 1) % n]
            if p[1] != q[1]:
                segs.append((p, q))
            events.add(p[1])
            events.add(q[1])
    # add y of every proper pairwise crossing so slabs have stable structure
    for i in range(len(segs)):
        for j in range(i + 1, len(segs)):
            y = _crossing_y(segs[i], segs[j])
            if y is not None:
                events.add(y)
    ys = sorted(events)
    total = 0.0
    for lo, hi in zip(ys, ys[1:]):
        if hi <= lo:
            continue
        mid = (lo + hi) / 2.0
        xs = []
        for (px, py), (qx, qy) in segs:
            y0, y1 = (py, qy) if py < qy else (qy, py)
            if y0 <= mid < y1:
                t = (mid - py) / (qy - py)
                xs.append(px + t * (qx - px))
        xs.sort()
        width = 0.0
        for k in range(0, len(xs) - 1, 2):
            width += xs[k + 1] - xs[k]
        total += width * (hi - lo)
    return total


def _crossing_y(s1, s2):
    (x1, y1), (x2, y2) = s1
    (x3, y3), (x4, y4) = s2
    d = (x2 - x1) * (y4 - y3) - (y2 - y1) * (x4 - x3)
    if d == 0:
        return None
    t = ((x3 - x1) * (y4 - y3) - (y3 - y1) * (x4 - x3)) / d
    u = ((x3 - x1) * (y2 - y1) - (y3 - y1) * (x2 - x1)) / d
    if 0 < t < 1 and 0 < u < 1:
        return y1 + t * (y2 - y1)
    return None


def min_rect_area_sweep(points: list[tuple[float, float]],
                        step_deg: float = 0.01) -> float:
    """Minimum-area enclosing rectangle by brute-force angle sweep."""
    best = float("inf")
    steps = int(round(90.0 / step_deg))
    for k in range(steps):
        theta = math.radians(k * step_deg)
        ct, st = math.cos(theta), math.sin(theta)
        us = [x * ct + y * st for x, y in points]
        vs = [-x * st + y * ct for x, y in points]
        area = (max(us) - min(us)) * (max(vs) - min(vs))
        if area < best:
            best = area
    return best

"""Blind sharpness estimation from slanted edges.

Finds near-straight intensity edges in a single image, builds an
oversampled edge-spread function (ESF) across each one, and derives three
classical sharpness figures:

* RER: relative edge response, the rise of the normalized ESF between
  -0.5 px and +0.5 px around the edge.
* FWHM: full width at half maximum of the line-spread function, in pixels.
* MTF at Nyquist: modulation transfer magnitude at 0.5 cycles/pixel.

Edges are grouped by their normal into ``horizontal``, ``vertical`` and
``other``; each group reports the median over its edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from ..errors import NoEdgesFound
from ..imgio import to_gray

BAND_HALF_WIDTH = 8.0
BIN_WIDTH = 0.25
MIN_SEGMENT_POINTS = 20
MAX_RMS_RESIDUAL = 0.5
MIN_TILT_DEG = 2.0
MAX_TILT_DEG = 25.0
DIRECTION_HALF_ANGLE = 22.5
NYQUIST = 0.5
MTF_CLIP = 1.05

# bin centers sit on the quarter-pixel grid from -8 to +8 inclusive
_N_BINS = int(round(2 * BAND_HALF_WIDTH / BIN_WIDTH)) + 1
_CENTER = _N_BINS // 2
_BIN_D = (np.arange(_N_BINS) - _CENTER) * BIN_WIDTH


@dataclass(frozen=True)
class EdgeProfile:
    """One accepted edge and the figures measured across it."""

    center: tuple[float, float]
    direction_deg: float
    tilt_deg: float
    group: str
    length: float
    rer: float
    fwhm: float
    mtf_nyq: float
    mtf_flagged: bool


@dataclass(frozen=True)
class DirectionSharpness:
    """Median figures for one edge direction; values absent when no edge."""

    rer: float | None
    fwhm: float | None
    mtf_nyq: float | None
    edge_count: int
    mtf_flagged: bool = False


@dataclass(frozen=True)
class SharpnessResult:
    horizontal: DirectionSharpness
    vertical: DirectionSharpness
    other: DirectionSharpness
    edges: tuple[EdgeProfile, ...] = ()

    def group(self, name: str) -> DirectionSharpness:
        return getattr(self, name)


@dataclass(frozen=True)
class _Segment:
    center: np.ndarray  # (x, y)
    direction: np.ndarray  # unit vector along the line
    t_min: float
    t_max: float
    n_points: int
    rms: float


def _otsu_threshold(values: np.ndarray) -> float:
    """Otsu's threshold over a 256-bin histogram of ``values``."""
    hist, edges = np.histogram(values, bins=256)
    hist = hist.astype(np.float64)
    centers = (edges[:-1] + edges[1:]) / 2.0
    w0 = np.cumsum(hist)
    w1 = w0[-1] - w0
    m0 = np.cumsum(hist * centers)
    mu0 = m0 / np.where(w0 > 0, w0, 1.0)
    mu1 = (m0[-1] - m0) / np.where(w1 > 0, w1, 1.0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    k = int(np.argmax(between))
    return float(edges[k + 1])


def _axis_distance_deg(angle_deg: float) -> float:
    """Angular distance from a line direction to the nearest image axis."""
    fold = angle_deg % 90.0
    return min(fold, 90.0 - fold)


def _fit_ridge(xs: np.ndarray, ys: np.ndarray, weights: np.ndarray) -> _Segment | None:
    """Total-least-squares line through per-scanline ridge centroids.

    The scan axis follows the component's dominant direction so that each
    scan line crosses the edge once. Returns None when the segment is too
    short, too wobbly, or not usefully slanted.
    """
    wsum = float(weights.sum())
    mx = float((weights * xs).sum() / wsum)
    my = float((weights * ys).sum() / wsum)
    sxx = float((weights * (xs - mx) ** 2).sum())
    syy = float((weights * (ys - my) ** 2).sum())
    scan_rows = syy >= sxx

    if scan_rows:
        sums = np.bincount(ys, weights=weights)
        sums_c = np.bincount(ys, weights=weights * xs)
        lines = np.nonzero(sums > 0)[0]
        pts = np.column_stack([sums_c[lines] / sums[lines], lines.astype(np.float64)])
    else:
        sums = np.bincount(xs, weights=weights)
        sums_c = np.bincount(xs, weights=weights * ys)
        lines = np.nonzero(sums > 0)[0]
        pts = np.column_stack([lines.astype(np.float64), sums_c[lines] / sums[lines]])

    if len(pts) < MIN_SEGMENT_POINTS:
        return None

    center = pts.mean(axis=0)
    cov = np.cov((pts - center).T, bias=True)
    evals, evecs = np.linalg.eigh(cov)
    direction = evecs[:, int(np.argmax(evals))]
    rms = math.sqrt(max(float(evals.min()), 0.0))
    if rms > MAX_RMS_RESIDUAL:
        return None

    angle = math.degrees(math.atan2(direction[1], direction[0])) % 180.0
    tilt = _axis_distance_deg(angle)
    if not (MIN_TILT_DEG <= tilt <= MAX_TILT_DEG):
        return None

    t = (pts - center) @ direction
    return _Segment(
        center=center,
        direction=direction,
        t_min=float(t.min()),
        t_max=float(t.max()),
        n_points=len(pts),
        rms=rms,
    )


def _detect_segments(gray: np.ndarray) -> list[_Segment]:
    """Gradient-ridge segments acceptable for slanted-edge analysis."""
    gy, gx = np.gradient(gray)
    mag = np.hypot(gx, gy)
    if float(mag.max()) <= 0.0:
        return []
    mask = mag > _otsu_threshold(mag.ravel())
    if not mask.any():
        return []

    n_labels, labels = cv2.connectedComponents(mask.astype(np.uint8), connectivity=8)
    segments = []
    for lab in range(1, n_labels):
        ys, xs = np.nonzero(labels == lab)
        if len(ys) < MIN_SEGMENT_POINTS:
            continue
        seg = _fit_ridge(xs, ys, mag[ys, xs])
        if seg is not None:
            segments.append(seg)
    return segments


def _band_samples(
    gray: np.ndarray, seg: _Segment
) -> tuple[np.ndarray, np.ndarray] | None:
    """Signed normal distance and intensity for pixels in the edge band."""
    h, w = gray.shape
    u = seg.direction
    normal = np.array([-u[1], u[0]])

    ends = np.stack([seg.center + seg.t_min * u, seg.center + seg.t_max * u])
    corners = np.concatenate([ends + BAND_HALF_WIDTH * normal, ends - BAND_HALF_WIDTH * normal])
    x0 = max(int(math.floor(corners[:, 0].min())) - 1, 0)
    x1 = min(int(math.ceil(corners[:, 0].max())) + 1, w - 1)
    y0 = max(int(math.floor(corners[:, 1].min())) - 1, 0)
    y1 = min(int(math.ceil(corners[:, 1].max())) + 1, h - 1)
    if x1 < x0 or y1 < y0:
        return None

    yy, xx = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    rx = xx.ravel() - seg.center[0]
    ry = yy.ravel() - seg.center[1]
    d = rx * normal[0] + ry * normal[1]
    t = rx * u[0] + ry * u[1]
    keep = (np.abs(d) <= BAND_HALF_WIDTH) & (t >= seg.t_min) & (t <= seg.t_max)
    if not keep.any():
        return None
    return d[keep], gray[y0 : y1 + 1, x0 : x1 + 1].ravel()[keep]


def _bin_esf(d: np.ndarray, v: np.ndarray) -> np.ndarray | None:
    """Oversampled ESF on the quarter-pixel grid, oriented dark to bright."""
    # orient so intensity rises with distance
    if float(np.mean(d * v) - np.mean(d) * np.mean(v)) < 0.0:
        d = -d

    idx = np.rint(d / BIN_WIDTH).astype(np.int64) + _CENTER
    np.clip(idx, 0, _N_BINS - 1, out=idx)
    counts = np.bincount(idx, minlength=_N_BINS).astype(np.float64)
    sums = np.bincount(idx, weights=v, minlength=_N_BINS)

    outer = np.abs(_BIN_D) >= 2 * BAND_HALF_WIDTH / 3.0
    filled = counts > 0
    # both flanks need support or the plateau levels are meaningless
    if (filled & outer & (_BIN_D < 0)).sum() < 3 or (filled & outer & (_BIN_D > 0)).sum() < 3:
        return None

    esf = np.empty(_N_BINS)
    esf[filled] = sums[filled] / counts[filled]
    if not filled.all():
        esf[~filled] = np.interp(_BIN_D[~filled], _BIN_D[filled], esf[filled])
    return esf


def _normalize_esf(esf: np.ndarray) -> np.ndarray | None:
    """Scale the ESF to [0, 1] using robust plateau levels.

    The low and high plateaus are the 10th and 90th percentiles of the
    pooled outer thirds of the band, which tolerates plateau noise and
    residual gradient without tracking the transition itself.
    """
    pool = esf[np.abs(_BIN_D) >= 2 * BAND_HALF_WIDTH / 3.0]
    low = float(np.percentile(pool, 10))
    high = float(np.percentile(pool, 90))
    if high - low <= 1e-9:
        return None
    return (esf - low) / (high - low)


def _half_max_width(lsf: np.ndarray, peak: int) -> float | None:
    """Width of ``lsf`` at half its peak, linearly interpolated, in pixels."""
    half = lsf[peak] / 2.0

    left = None
    for i in range(peak - 1, -1, -1):
        if lsf[i] <= half:
            frac = (half - lsf[i]) / (lsf[i + 1] - lsf[i])
            left = (i + frac - peak) * BIN_WIDTH
            break
    right = None
    for i in range(peak + 1, len(lsf)):
        if lsf[i] <= half:
            frac = (half - lsf[i - 1]) / (lsf[i] - lsf[i - 1])
            right = (i - 1 + frac - peak) * BIN_WIDTH
            break
    if left is None or right is None:
        return None
    return right - left


def _mtf_at_nyquist(lsf: np.ndarray, peak: int) -> tuple[float, bool] | None:
    """MTF magnitude at 0.5 cycles/pixel from the tapered LSF spectrum.

    A Hann taper centered on the peak suppresses plateau leakage. The
    centered finite difference that produced the LSF attenuates high
    frequencies by sin(2*pi*f*h)/(2*pi*f*h) with h = 0.25 px, so the
    spectrum is divided by that response before normalization.
    """
    half_width = min(peak, len(lsf) - 1 - peak)
    if half_width * BIN_WIDTH < 2.0:
        return None
    offs = np.arange(len(lsf)) - peak
    taper = np.where(
        np.abs(offs) <= half_width,
        np.cos(np.pi * offs / (2.0 * half_width)) ** 2,
        0.0,
    )

    spectrum = np.abs(np.fft.rfft(lsf * taper))
    freqs = np.fft.rfftfreq(len(lsf), d=BIN_WIDTH)
    spectrum = spectrum / np.sinc(2.0 * freqs * BIN_WIDTH)
    if spectrum[0] <= 0.0:
        return None
    mtf = spectrum / spectrum[0]

    raw = float(np.interp(NYQUIST, freqs, mtf))
    flagged = raw > 1.0
    return min(max(raw, 0.0), MTF_CLIP), flagged


def _profile_edge(gray: np.ndarray, seg: _Segment) -> EdgeProfile | None:
    """Measure one fitted segment; None when the profile is unusable."""
    samples = _band_samples(gray, seg)
    if samples is None:
        return None
    esf = _bin_esf(*samples)
    if esf is None:
        return None
    esf = _normalize_esf(esf)
    if esf is None:
        return None

    rer = float(np.clip(esf[_CENTER + 2] - esf[_CENTER - 2], 0.0, 1.0))

    lsf = (esf[2:] - esf[:-2]) / (2.0 * BIN_WIDTH)
    peak = int(np.argmax(lsf))
    if lsf[peak] <= 0.0:
        return None
    fwhm = _half_max_width(lsf, peak)
    if fwhm is None:
        return None
    nyq = _mtf_at_nyquist(lsf, peak)
    if nyq is None:
        return None
    mtf, flagged = nyq

    angle = math.degrees(math.atan2(seg.direction[1], seg.direction[0])) % 180.0
    normal_angle = (angle + 90.0) % 180.0
    if min(normal_angle, 180.0 - normal_angle) <= DIRECTION_HALF_ANGLE:
        group = "vertical"  # normal near the x-axis: edge runs up-down
    elif abs(90.0 - normal_angle) <= DIRECTION_HALF_ANGLE:
        group = "horizontal"
    else:
        group = "other"

    return EdgeProfile(
        center=(float(seg.center[0]), float(seg.center[1])),
        direction_deg=angle,
        tilt_deg=_axis_distance_deg(angle),
        group=group,
        length=seg.t_max - seg.t_min,
        rer=rer,
        fwhm=fwhm,
        mtf_nyq=mtf,
        mtf_flagged=flagged,
    )


def _aggregate(profiles: list[EdgeProfile]) -> DirectionSharpness:
    if not profiles:
        return DirectionSharpness(None, None, None, 0)
    return DirectionSharpness(
        rer=float(np.median([p.rer for p in profiles])),
        fwhm=float(np.median([p.fwhm for p in profiles])),
        mtf_nyq=float(np.median([p.mtf_nyq for p in profiles])),
        edge_count=len(profiles),
        mtf_flagged=any(p.mtf_flagged for p in profiles),
    )


def sharpness(img: np.ndarray) -> SharpnessResult:
    """Estimate RER, FWHM and MTF at Nyquist from the image's own edges.

    Works on grayscale or RGB input (RGB is reduced to luma). Raises
    NoEdgesFound when no direction yields a usable edge.
    """
    gray = to_gray(img).astype(np.float64)
    profiles = []
    for seg in _detect_segments(gray):
        prof = _profile_edge(gray, seg)
        if prof is not None:
            profiles.append(prof)
    if not profiles:
        raise NoEdgesFound("no usable straight edges detected")

    by_group = {"horizontal": [], "vertical": [], "other": []}
    for prof in profiles:
        by_group[prof.group].append(prof)
    return SharpnessResult(
        horizontal=_aggregate(by_group["horizontal"]),
        vertical=_aggregate(by_group["vertical"]),
        other=_aggregate(by_group["other"]),
        edges=tuple(profiles),
    )

"""Image quality metrics: full-reference, blind SNR, and edge sharpness."""

from .dataset import (
    MetricResult,
    apply_quality_metric,
    load_metric_result,
    register_metric,
    registered_metrics,
    save_metric_result,
)
from .fullref import psnr, ssim
from .sharpness import DirectionSharpness, EdgeProfile, SharpnessResult, sharpness
from .snr import SnrEstimate, snr_ha, snr_hb

__all__ = [
    "MetricResult",
    "apply_quality_metric",
    "load_metric_result",
    "register_metric",
    "registered_metrics",
    "save_metric_result",
    "psnr",
    "ssim",
    "DirectionSharpness",
    "EdgeProfile",
    "SharpnessResult",
    "sharpness",
    "SnrEstimate",
    "snr_ha",
    "snr_hb",
]

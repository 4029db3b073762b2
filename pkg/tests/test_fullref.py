"""PSNR and SSIM against scalar double-loop oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from iqharness.errors import ShapeMismatch, TooSmall
from iqharness.qmetrics import psnr, ssim

from oracles import psnr_oracle, ssim_oracle


def _pair(seed: int, size: int = 64, channels: int = 0):
    rng = np.random.default_rng(seed)
    shape = (size, size) if channels == 0 else (size, size, channels)
    a = rng.integers(0, 256, size=shape, dtype=np.uint8)
    noise = rng.normal(0, 12, size=shape)
    b = np.clip(a.astype(np.float64) + noise, 0, 255).astype(np.uint8)
    return a, b


def test_psnr_matches_oracle_on_random_pairs():
    for seed in range(20):
        a, b = _pair(seed)
        assert psnr(a, b) == pytest.approx(psnr_oracle(a, b), abs=1e-9)


def test_psnr_analytic_extremes():
    zeros = np.zeros((8, 8), dtype=np.uint8)
    assert psnr(zeros, zeros) == float("inf")
    assert psnr(zeros, np.full((8, 8), 255, np.uint8)) == pytest.approx(0.0, abs=1e-12)


def test_psnr_symmetry_and_shape_check():
    a, b = _pair(3)
    assert psnr(a, b) == psnr(b, a)
    with pytest.raises(ShapeMismatch):
        psnr(a, a[:32, :32])


def test_ssim_matches_oracle_on_random_pairs():
    # window loops are slow, so oracle comparisons use smaller frames
    for seed in range(6):
        a, b = _pair(seed, size=24)
        assert ssim(a, b) == pytest.approx(ssim_oracle(a, b), abs=1e-6)


def test_ssim_matches_oracle_on_color_pair():
    a, b = _pair(50, size=20, channels=3)
    assert ssim(a, b) == pytest.approx(ssim_oracle(a, b), abs=1e-6)


def test_ssim_self_is_one_and_symmetric():
    a, b = _pair(7, size=32)
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_ssim_negative_image_scores_near_zero():
    rng = np.random.default_rng(21)
    a = rng.integers(0, 256, size=(48, 48), dtype=np.uint8)
    assert ssim(a, 255 - a) < 0.1


def test_ssim_too_small_raises():
    a = np.zeros((10, 12), dtype=np.uint8)
    with pytest.raises(TooSmall):
        ssim(a, a)


@settings(max_examples=25, deadline=None)
@given(hnp.arrays(np.uint8, (16, 16), elements=st.integers(0, 255)),
       hnp.arrays(np.uint8, (16, 16), elements=st.integers(0, 255)))
def test_psnr_oracle_equivalence_property(a, b):
    if np.array_equal(a, b):
        assert psnr(a, b) == float("inf")
    else:
        assert psnr(a, b) == pytest.approx(psnr_oracle(a, b), abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_ssim_bounded_and_ordered_by_noise(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 256, size=(24, 24), dtype=np.uint8)
    small = np.clip(a + rng.normal(0, 4, a.shape), 0, 255).astype(np.uint8)
    large = np.clip(a + rng.normal(0, 40, a.shape), 0, 255).astype(np.uint8)
    s_small, s_large = ssim(a, small), ssim(a, large)
    assert -1.0 <= s_large <= 1.0 and -1.0 <= s_small <= 1.0
    assert s_small >= s_large

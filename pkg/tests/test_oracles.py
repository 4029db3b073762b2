"""The oracles themselves checked against hand-computed values.

These anchor the reference implementations before anything else trusts
them: each case below was worked out by hand, not copied from code.
"""

import math

import numpy as np
import pytest

from oracles import (
    area_even_odd,
    detection_summary_oracle,
    gaussian_window_oracle,
    iou_xywh,
    min_rect_area_sweep,
    norm_cdf,
    psnr_oracle,
    ssim_oracle,
)


def test_norm_cdf_known_values():
    assert norm_cdf(0.0) == 0.5
    assert norm_cdf(1.959963985) == pytest.approx(0.975, abs=1e-6)
    assert norm_cdf(-1.0) == pytest.approx(1.0 - norm_cdf(1.0), abs=1e-15)


def test_psnr_oracle_extremes():
    zeros = np.zeros((4, 4), dtype=np.uint8)
    full = np.full((4, 4), 255, dtype=np.uint8)
    # MSE = 255^2 exactly, so PSNR = 0 dB
    assert psnr_oracle(zeros, full) == pytest.approx(0.0, abs=1e-12)
    assert psnr_oracle(zeros, zeros) == float("inf")


def test_psnr_oracle_single_step():
    a = np.zeros((2, 2), dtype=np.uint8)
    b = a.copy()
    b[0, 0] = 2  # MSE = 4/4 = 1 -> 10*log10(65025)
    assert psnr_oracle(a, b) == pytest.approx(10 * math.log10(255.0 ** 2), abs=1e-12)


def test_gaussian_window_normalized_and_symmetric():
    w = gaussian_window_oracle()
    assert sum(sum(r) for r in w) == pytest.approx(1.0, abs=1e-12)
    assert w[0][0] == pytest.approx(w[10][10], abs=1e-15)
    assert w[5][5] == max(max(r) for r in w)


def test_ssim_oracle_constant_pair_analytic():
    # flat 100 vs flat 110: all variances vanish, so per-window SSIM collapses
    # to (2*100*110 + c1) / (100^2 + 110^2 + c1) with c1 = (0.01*255)^2
    a = np.full((13, 13), 100, dtype=np.uint8)
    b = np.full((13, 13), 110, dtype=np.uint8)
    c1 = (0.01 * 255.0) ** 2
    want = (2 * 100 * 110 + c1) / (100 ** 2 + 110 ** 2 + c1)
    assert ssim_oracle(a, b) == pytest.approx(want, abs=1e-12)
    assert ssim_oracle(a, a) == pytest.approx(1.0, abs=1e-12)


def test_iou_hand_case():
    # unit squares offset by half: inter 0.5, union 1.5 -> 1/3
    assert iou_xywh([0, 0, 1, 1], [0.5, 0, 1, 1]) == pytest.approx(1 / 3, abs=1e-15)
    assert iou_xywh([0, 0, 1, 1], [2, 2, 1, 1]) == 0.0
    assert iou_xywh([0, 0, 2, 2], [1, 1, 2, 2]) == pytest.approx(1 / 7, abs=1e-15)


def test_detection_oracle_perfect_and_empty():
    gts = [[0, 0, 10, 10], [20, 20, 5, 5]]
    preds = [(0.9, [0, 0, 10, 10]), (0.8, [20, 20, 5, 5])]
    out = detection_summary_oracle(gts, preds)
    assert out["AP"] == 1.0
    assert out["AR_100"] == 1.0
    out = detection_summary_oracle(gts, [])
    assert out["AP"] == 0.0 and out["AR_100"] == 0.0


def test_detection_oracle_worked_micro_case():
    # 1 GT; the higher-scored pred misses, the lower-scored hits at IoU 2/3.
    # At each threshold t <= 0.65 the operating points are (r=0, p=0) then
    # (r=1, p=1/2); interpolated precision is 1/2 at every recall point, so
    # AP(t) = 0.5 for those 4 thresholds and 0 above -> AP = 4*0.5/10 = 0.2.
    gt = [[0.0, 0.0, 10.0, 10.0]]
    hit = [0.0, 0.0, 10.0, 15.0]
    assert iou_xywh(gt[0], hit) == pytest.approx(2 / 3, abs=1e-12)
    preds = [(0.9, [50.0, 50.0, 10.0, 10.0]), (0.5, hit)]
    out = detection_summary_oracle(gt, preds)
    assert out["AP"] == pytest.approx(0.2, abs=1e-12)
    assert out["AP50"] == pytest.approx(0.5, abs=1e-12)
    assert out["AP75"] == 0.0
    assert out["AR_100"] == pytest.approx(4 / 10, abs=1e-12)


def test_area_even_odd_square_and_bowtie():
    square = [[(0, 0), (4, 0), (4, 3), (0, 3)]]
    assert area_even_odd(square) == pytest.approx(12.0, abs=1e-9)
    # self-crossing bow-tie covers two unit-height triangles of area 1 each
    bowtie = [[(0, 0), (2, 2), (2, 0), (0, 2)]]
    assert area_even_odd(bowtie) == pytest.approx(2.0, abs=1e-9)


def test_area_even_odd_ring_with_hole():
    outer = [(0, 0), (6, 0), (6, 6), (0, 6)]
    hole = [(2, 2), (4, 2), (4, 4), (2, 4)]
    assert area_even_odd([outer, hole]) == pytest.approx(32.0, abs=1e-9)


def test_min_rect_sweep_known_shapes():
    rect = [(0, 0), (5, 0), (5, 2), (0, 2)]
    assert min_rect_area_sweep(rect) == pytest.approx(10.0, rel=1e-4)
    # diamond = unit square rotated 45 degrees, side sqrt(2)
    diamond = [(1, 0), (2, 1), (1, 2), (0, 1)]
    assert min_rect_area_sweep(diamond) == pytest.approx(2.0, rel=1e-4)

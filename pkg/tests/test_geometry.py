"""Polygon measurement and repair against brute-force geometry oracles."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iqharness import geometry
from iqharness.geometry import MultiPolygonGeometry, PolygonGeometry

from oracles import area_even_odd, min_rect_area_sweep

SQUARE = [(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)]
BOWTIE = [(0.0, 0.0), (2.0, 2.0), (2.0, 0.0), (0.0, 2.0)]


def test_signed_area_orientation():
    assert geometry.signed_area(SQUARE) == pytest.approx(16.0)
    assert geometry.signed_area(list(reversed(SQUARE))) == pytest.approx(-16.0)


def test_area_with_hole():
    poly = PolygonGeometry(rings=[
        [(0, 0), (6, 0), (6, 6), (0, 6)],
        [(2, 2), (4, 2), (4, 4), (2, 4)],
    ])
    assert geometry.geometry_area(poly) == pytest.approx(32.0)
    assert geometry.geometry_area(poly) == pytest.approx(
        area_even_odd(poly.rings), abs=1e-9)


def test_compactness_of_square_is_pi_over_4():
    poly = PolygonGeometry(rings=[SQUARE])
    assert geometry.compactness(poly) == pytest.approx(math.pi / 4.0, abs=1e-12)


def test_compactness_decreases_with_elongation():
    squat = PolygonGeometry(rings=[[(0, 0), (4, 0), (4, 4), (0, 4)]])
    long_ = PolygonGeometry(rings=[[(0, 0), (16, 0), (16, 1), (0, 1)]])
    assert geometry.compactness(long_) < geometry.compactness(squat)


def test_min_area_rect_matches_sweep_on_known_shapes():
    for pts in (
        SQUARE,
        [(0, 0), (5, 0), (5, 2), (0, 2)],
        [(1, 0), (2, 1), (1, 2), (0, 1)],
        [(0, 0), (3, 1), (5, 4), (1, 3), (-1, 1)],
    ):
        rect = geometry.min_area_rect(pts)
        want = min_rect_area_sweep(pts)
        assert rect.width * rect.height == pytest.approx(want, rel=1e-3)


@settings(max_examples=40, deadline=None)
@given(st.lists(
    st.tuples(st.floats(-50, 50), st.floats(-50, 50)),
    min_size=3, max_size=12, unique=True,
))
def test_min_area_rect_valid_and_no_worse_than_sweep(points):
    # sound sandwich: the rectangle must contain every input point, and its
    # area may never exceed any sweep angle's axis-aligned bounding area
    points = list(points)
    if len(geometry.convex_hull(points)) < 3:
        return
    rect = geometry.min_area_rect(points)
    theta = math.radians(rect.angle_deg)
    ux, uy = math.cos(theta), math.sin(theta)
    pad = 1e-6 * max(1.0, rect.width)
    for x, y in points:
        du = (x - rect.center[0]) * ux + (y - rect.center[1]) * uy
        dv = -(x - rect.center[0]) * uy + (y - rect.center[1]) * ux
        assert abs(du) <= rect.width / 2 + pad
        assert abs(dv) <= rect.height / 2 + pad
    want = min_rect_area_sweep(points, step_deg=0.05)
    assert rect.width * rect.height <= want * (1 + 1e-9)


def test_defects_flag_self_intersection():
    assert geometry.geometry_defects(PolygonGeometry(rings=[SQUARE])) == []
    defects = geometry.geometry_defects(PolygonGeometry(rings=[BOWTIE]))
    assert any("self" in d for d in defects)


def test_repair_bowtie_preserves_covered_area():
    broken = PolygonGeometry(rings=[BOWTIE])
    fixed, changed = geometry.repair_geometry(broken)
    assert changed
    assert fixed is not None
    assert geometry.geometry_defects(fixed) == []
    want = area_even_odd([BOWTIE])
    assert geometry.geometry_area(fixed) == pytest.approx(want, rel=1e-9)


def test_repair_keeps_valid_geometry_untouched():
    poly = PolygonGeometry(rings=[SQUARE])
    fixed, changed = geometry.repair_geometry(poly)
    assert not changed
    assert geometry.geometry_area(fixed) == pytest.approx(16.0)


def test_repair_multipolygon_with_one_broken_part():
    geom = MultiPolygonGeometry(polygons=[
        PolygonGeometry(rings=[SQUARE]),
        PolygonGeometry(rings=[[(10 + x, y) for x, y in BOWTIE]]),
    ])
    fixed, changed = geometry.repair_geometry(geom)
    assert changed
    want = area_even_odd([SQUARE]) + area_even_odd([BOWTIE])
    assert geometry.geometry_area(fixed) == pytest.approx(want, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 8), st.integers(0, 10_000))
def test_repair_of_random_star_polygons_matches_even_odd_area(n, seed):
    # star-order vertices with randomized radii: frequently self-crossing
    import random

    rnd = random.Random(seed)
    ring = []
    for i in range(n):
        angle = 2 * math.pi * i / n
        r = rnd.uniform(1.0, 10.0)
        # jitter the angle so edges are generic (no shared endpoints)
        a = angle + rnd.uniform(-0.2, 0.2)
        ring.append((r * math.cos(a), r * math.sin(a)))
    ring = ring[::2] + ring[1::2]  # shuffle order to force crossings
    want = area_even_odd([ring])
    if want < 1e-6:
        return
    fixed, _changed = geometry.repair_geometry(PolygonGeometry(rings=[ring]))
    assert fixed is not None
    assert geometry.geometry_defects(fixed) == []
    assert geometry.geometry_area(fixed) == pytest.approx(want, rel=1e-6)


def test_convex_hull_square_with_interior_point():
    pts = SQUARE + [(2.0, 2.0)]
    hull = geometry.convex_hull(pts)
    assert len(hull) == 4
    assert set(hull) == set(SQUARE)

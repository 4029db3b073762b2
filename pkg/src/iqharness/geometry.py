"""Planar polygon primitives: descriptors, enclosing rectangles, repair.

Rings are lists of (x, y) float pairs, implicitly closed (the first vertex is
not repeated at the end).  A polygon is a list of rings: exterior first,
holes after.  Exterior rings are counter-clockwise in a y-up frame, holes
clockwise; the validity and repair routines enforce that convention.

The self-intersection repair re-polygonizes the even-odd filled region of a
broken ring set: split every edge at every crossing, trace the faces of the
resulting planar subdivision, and keep the faces whose parity against the
original rings is odd.  This preserves even-odd filled area exactly (up to
float rounding), which a naive "drop the twisted lobe" fix does not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

Point = tuple[float, float]
Ring = list[Point]


@dataclass
class PolygonGeometry:
    """One polygon: exterior ring plus zero or more hole rings."""

    rings: list[Ring] = field(default_factory=list)

    @property
    def exterior(self) -> Ring:
        return self.rings[0]

    @property
    def holes(self) -> list[Ring]:
        return self.rings[1:]

    def is_empty(self) -> bool:
        return not self.rings or not self.rings[0]


@dataclass
class MultiPolygonGeometry:
    """Several disjoint polygons treated as one annotation geometry."""

    polygons: list[PolygonGeometry] = field(default_factory=list)

    def is_empty(self) -> bool:
        return all(p.is_empty() for p in self.polygons)


Geometry = PolygonGeometry | MultiPolygonGeometry


def as_polygons(geom: Geometry) -> list[PolygonGeometry]:
    if isinstance(geom, MultiPolygonGeometry):
        return geom.polygons
    return [geom]


# --- scalar descriptors ---------------------------------------------------------

def signed_area(ring: Ring) -> float:
    """Shoelace signed area; positive for counter-clockwise rings (y-up)."""
    total = 0.0
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return total / 2.0


def ring_perimeter(ring: Ring) -> float:
    n = len(ring)
    return sum(
        math.dist(ring[i], ring[(i + 1) % n]) for i in range(n)
    )


def ring_centroid(ring: Ring) -> Point:
    """Area-weighted centroid of a simple ring."""
    a = 0.0
    cx = 0.0
    cy = 0.0
    n = len(ring)
    for i in range(n):
        x1, y1 = ring[i]
        x2, y2 = ring[(i + 1) % n]
        cross = x1 * y2 - x2 * y1
        a += cross
        cx += (x1 + x2) * cross
        cy += (y1 + y2) * cross
    if a == 0.0:
        raise ZeroDivisionError("zero-area ring has no centroid")
    return cx / (3.0 * a), cy / (3.0 * a)


def geometry_area(geom: Geometry) -> float:
    """Filled area: exterior areas minus hole areas, over all parts."""
    total = 0.0
    for poly in as_polygons(geom):
        if poly.is_empty():
            continue
        total += abs(signed_area(poly.exterior))
        for hole in poly.holes:
            total -= abs(signed_area(hole))
    return total


def geometry_centroid(geom: Geometry) -> Point:
    """Area-weighted centroid across parts and holes."""
    sx = sy = sa = 0.0
    for poly in as_polygons(geom):
        for k, ring in enumerate(poly.rings):
            if len(ring) < 3:
                continue
            a = abs(signed_area(ring))
            if a == 0.0:
                continue
            cx, cy = ring_centroid(ring)
            w = a if k == 0 else -a
            sx += cx * w
            sy += cy * w
            sa += w
    if sa == 0.0:
        raise ZeroDivisionError("zero-area geometry has no centroid")
    return sx / sa, sy / sa


def geometry_perimeter(geom: Geometry) -> float:
    """Total boundary length, hole rings included."""
    return sum(
        ring_perimeter(ring)
        for poly in as_polygons(geom)
        for ring in poly.rings
        if len(ring) >= 2
    )


def compactness(geom: Geometry) -> float:
    """Isoperimetric ratio 4*pi*A / P^2; 1.0 for a disc."""
    p = geometry_perimeter(geom)
    if p == 0.0:
        raise ZeroDivisionError("zero-perimeter geometry")
    return 4.0 * math.pi * geometry_area(geom) / (p * p)


# --- convex hull and minimum-area rectangle --------------------------------------

def convex_hull(points: list[Point]) -> list[Point]:
    """Monotone-chain convex hull in counter-clockwise order.

    Collinear points on the hull boundary are dropped.  Returns fewer than
    three points when the input is degenerate.
    """
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o: Point, a: Point, b: Point) -> float:
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[Point] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


@dataclass(frozen=True)
class RotatedRect:
    """Minimum-area enclosing rectangle."""

    center: Point
    width: float    # long side
    height: float   # short side, height <= width
    angle_deg: float  # direction of the long side, in [0, 180)


def min_area_rect(points: list[Point]) -> RotatedRect:
    """Smallest enclosing rectangle via rotating calipers over hull edges.

    The optimal rectangle shares a side with some hull edge, so scanning
    hull-edge directions is exact.  Degenerate input (all points collinear)
    has no finite-area rectangle and raises ValueError.
    """
    hull = convex_hull(points)
    if len(hull) < 3:
        raise ValueError("min_area_rect needs at least 3 non-collinear points")

    best: tuple[float, float, float, Point, Point] | None = None
    n = len(hull)
    for i in range(n):
        x1, y1 = hull[i]
        x2, y2 = hull[(i + 1) % n]
        ex, ey = x2 - x1, y2 - y1
        norm = math.hypot(ex, ey)
        if norm == 0.0:
            continue
        ux, uy = ex / norm, ey / norm          # edge direction
        vx, vy = -uy, ux                       # outward-of-edge normal
        us = [px * ux + py * uy for px, py in hull]
        vs = [px * vx + py * vy for px, py in hull]
        w = max(us) - min(us)
        h = max(vs) - min(vs)
        area = w * h
        # relative hysteresis: float-identical areas keep the first edge,
        # but any real improvement wins at every coordinate scale
        if best is None or area < best[0] * (1.0 - 1e-12):
            cu = (max(us) + min(us)) / 2.0
            cv = (max(vs) + min(vs)) / 2.0
            center = (cu * ux + cv * vx, cu * uy + cv * vy)
            best = (area, w, h, (ux, uy), center)

    assert best is not None
    _, w, h, (ux, uy), center = best
    if w >= h:
        long_dir = (ux, uy)
        width, height = w, h
    else:
        long_dir = (-uy, ux)
        width, height = h, w
    angle = math.degrees(math.atan2(long_dir[1], long_dir[0])) % 180.0
    # A hair under 180 is the same direction as 0; snap for stable reporting.
    if angle > 180.0 - 1e-9:
        angle = 0.0
    return RotatedRect(center=center, width=width, height=height, angle_deg=angle)


# --- validity -------------------------------------------------------------------

_EPS = 1e-12


def _dedupe_consecutive(ring: Ring) -> Ring:
    out: Ring = []
    for p in ring:
        if not out or p != out[-1]:
            out.append(p)
    if len(out) > 1 and out[0] == out[-1]:
        out.pop()
    return out


def _segments_properly_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool:
    """True when the open interiors of the two segments intersect."""
    d1x, d1y = p2[0] - p1[0], p2[1] - p1[1]
    d2x, d2y = q2[0] - q1[0], q2[1] - q1[1]
    denom = d1x * d2y - d1y * d2x
    rx, ry = q1[0] - p1[0], q1[1] - p1[1]
    if abs(denom) < _EPS:
        # Parallel: overlap counts as invalid contact if collinear and the
        # projections overlap in more than a point.
        if abs(rx * d1y - ry * d1x) > _EPS:
            return False
        ts = []
        L2 = d1x * d1x + d1y * d1y
        if L2 < _EPS:
            return False
        for q in (q1, q2):
            ts.append(((q[0] - p1[0]) * d1x + (q[1] - p1[1]) * d1y) / L2)
        lo, hi = min(ts), max(ts)
        return min(hi, 1.0) - max(lo, 0.0) > 1e-9
    t = (rx * d2y - ry * d2x) / denom
    u = (rx * d1y - ry * d1x) / denom
    return 1e-9 < t < 1.0 - 1e-9 and 1e-9 < u < 1.0 - 1e-9


def ring_self_intersects(ring: Ring) -> bool:
    """True when any two non-adjacent edges of the ring touch or cross."""
    n = len(ring)
    if n < 4:
        return False
    edges = [(ring[i], ring[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j - i) % n == 1 or (i - j) % n == 1:
                continue
            if _segments_properly_cross(*edges[i], *edges[j]):
                return True
    return False


def classify_ring(ring: Ring) -> list[str]:
    """Defect labels for one ring; empty list means the ring is clean.

    Possible labels: ``too-few-points``, ``duplicate-points``, ``zero-area``,
    ``self-intersection``.  Orientation is checked separately because it
    depends on ring role (exterior vs hole).
    """
    defects = []
    deduped = _dedupe_consecutive(ring)
    if len(deduped) != len(ring):
        defects.append("duplicate-points")
    if len(deduped) < 3:
        defects.append("too-few-points")
        return defects
    if abs(signed_area(deduped)) < _EPS:
        defects.append("zero-area")
    if ring_self_intersects(deduped):
        defects.append("self-intersection")
    return defects


def geometry_defects(geom: Geometry) -> list[str]:
    """All defect labels across rings, orientation convention included."""
    defects: list[str] = []
    for poly in as_polygons(geom):
        for k, ring in enumerate(poly.rings):
            ring_defects = classify_ring(ring)
            defects.extend(ring_defects)
            if ring_defects:
                continue
            clean = _dedupe_consecutive(ring)
            a = signed_area(clean)
            if k == 0 and a < 0:
                defects.append("wrong-orientation")
            elif k > 0 and a > 0:
                defects.append("wrong-orientation")
    return sorted(set(defects))


# --- even-odd re-polygonization ---------------------------------------------------


def _point_in_rings(pt: Point, rings: list[Ring]) -> bool:
    """Even-odd containment of ``pt`` against a set of rings (ray cast +x)."""
    x, y = pt
    inside = False
    for ring in rings:
        n = len(ring)
        for i in range(n):
            x1, y1 = ring[i]
            x2, y2 = ring[(i + 1) % n]
            if (y1 > y) != (y2 > y):
                xcross = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                if xcross > x:
                    inside = not inside
    return inside


def _split_all_segments(rings: list[Ring]) -> list[tuple[Point, Point]]:
    """Edges of ``rings`` subdivided at every pairwise intersection point."""
    segs: list[tuple[Point, Point]] = []
    for ring in rings:
        clean = _dedupe_consecutive(ring)
        n = len(clean)
        if n < 2:
            continue
        for i in range(n):
            a, b = clean[i], clean[(i + 1) % n]
            if a != b:
                segs.append((a, b))

    cuts: list[list[float]] = [[] for _ in segs]
    for i in range(len(segs)):
        p1, p2 = segs[i]
        d1x, d1y = p2[0] - p1[0], p2[1] - p1[1]
        for j in range(i + 1, len(segs)):
            q1, q2 = segs[j]
            d2x, d2y = q2[0] - q1[0], q2[1] - q1[1]
            denom = d1x * d2y - d1y * d2x
            rx, ry = q1[0] - p1[0], q1[1] - p1[1]
            if abs(denom) < _EPS:
                if abs(rx * d1y - ry * d1x) > _EPS:
                    continue
                # Collinear overlap: cut each segment at the other's endpoints.
                L1 = d1x * d1x + d1y * d1y
                L2 = d2x * d2x + d2y * d2y
                if L1 > _EPS:
                    for q in (q1, q2):
                        t = ((q[0] - p1[0]) * d1x + (q[1] - p1[1]) * d1y) / L1
                        if 1e-12 < t < 1 - 1e-12:
                            cuts[i].append(t)
                if L2 > _EPS:
                    for p in (p1, p2):
                        u = ((p[0] - q1[0]) * d2x + (p[1] - q1[1]) * d2y) / L2
                        if 1e-12 < u < 1 - 1e-12:
                            cuts[j].append(u)
                continue
            t = (rx * d2y - ry * d2x) / denom
            u = (rx * d1y - ry * d1x) / denom
            if -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12:
                if 1e-12 < t < 1 - 1e-12:
                    cuts[i].append(t)
                if 1e-12 < u < 1 - 1e-12:
                    cuts[j].append(u)

    pieces: list[tuple[Point, Point]] = []
    for (a, b), ts in zip(segs, cuts):
        params = sorted(set([0.0, 1.0] + [t for t in ts if 0.0 < t < 1.0]))
        for t0, t1 in zip(params, params[1:]):
            pa = (a[0] + (b[0] - a[0]) * t0, a[1] + (b[1] - a[1]) * t0)
            pb = (a[0] + (b[0] - a[0]) * t1, a[1] + (b[1] - a[1]) * t1)
            pieces.append((pa, pb))
    return pieces


class _PointMerger:
    """Snaps nearly identical points onto shared node coordinates."""

    def __init__(self, scale: float):
        self.tol = max(scale, 1.0) * 1e-9
        self.grid: dict[tuple[int, int], Point] = {}

    def canon(self, p: Point) -> Point:
        kx = round(p[0] / self.tol)
        ky = round(p[1] / self.tol)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                hit = self.grid.get((kx + dx, ky + dy))
                if hit is not None and math.dist(hit, p) <= self.tol:
                    return hit
        self.grid[(kx, ky)] = p
        return p


def _trace_faces(
    edges: list[tuple[Point, Point]],
) -> list[tuple[list[Point], float]]:
    """Boundary cycles of the planar subdivision, with signed areas.

    Each undirected edge contributes two half-edges; cycles are traced with
    the bounded region on the left, so outer boundaries of bounded faces come
    out counter-clockwise (positive area) and hole boundaries clockwise.
    """
    # Drop edges that appear an even number of times: a doubled edge bounds
    # no filled region under even-odd semantics.
    count: dict[tuple[Point, Point], int] = {}
    for a, b in edges:
        key = (a, b) if a <= b else (b, a)
        count[key] = count.get(key, 0) + 1
    unique = [key for key, c in count.items() if c % 2 == 1]

    half_edges: list[tuple[Point, Point]] = []
    for a, b in unique:
        half_edges.append((a, b))
        half_edges.append((b, a))

    outgoing: dict[Point, list[int]] = {}
    for idx, (a, _b) in enumerate(half_edges):
        outgoing.setdefault(a, []).append(idx)
    for a, idxs in outgoing.items():
        idxs.sort(
            key=lambda i: math.atan2(
                half_edges[i][1][1] - a[1], half_edges[i][1][0] - a[0]
            )
        )

    def twin(i: int) -> int:
        return i ^ 1

    nxt: dict[int, int] = {}
    for i, (_a, b) in enumerate(half_edges):
        ring_at_b = outgoing[b]
        pos = ring_at_b.index(twin(i))
        nxt[i] = ring_at_b[pos - 1]  # rotational predecessor in CCW order

    faces: list[tuple[list[Point], float]] = []
    seen = [False] * len(half_edges)
    for start in range(len(half_edges)):
        if seen[start]:
            continue
        cycle: list[Point] = []
        i = start
        while not seen[i]:
            seen[i] = True
            cycle.append(half_edges[i][0])
            i = nxt[i]
        if len(cycle) >= 3:
            faces.append((cycle, signed_area(cycle)))
    return faces


def _inner_sample(cycle: list[Point], area_sign: float, scale: float) -> Point:
    """A point just inside the region on the left of the cycle's edges."""
    n = len(cycle)
    best_len = -1.0
    best = 0
    for i in range(n):
        a, b = cycle[i], cycle[(i + 1) % n]
        d = math.dist(a, b)
        if d > best_len:
            best_len = d
            best = i
    a, b = cycle[best], cycle[(best + 1) % n]
    mx, my = (a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0
    ux, uy = (b[0] - a[0]) / best_len, (b[1] - a[1]) / best_len
    # Left normal: region traced with interior on the left.
    nx, ny = -uy, ux
    delta = max(scale, 1.0) * 1e-7
    return mx + nx * delta, my + ny * delta


def repolygonize_even_odd(rings: list[Ring]) -> list[PolygonGeometry]:
    """Valid polygons covering the even-odd fill of possibly broken rings.

    Splits the input edges at all crossings, traces subdivision faces, keeps
    faces with odd crossing parity against the original rings, and reattaches
    hole boundaries to their owning faces.  Output exteriors are CCW, holes
    CW, and every output ring is simple.
    """
    cleaned = [
        _dedupe_consecutive(r) for r in rings if len(_dedupe_consecutive(r)) >= 3
    ]
    if not cleaned:
        return []
    span = 0.0
    for r in cleaned:
        xs = [p[0] for p in r]
        ys = [p[1] for p in r]
        span = max(span, max(xs) - min(xs), max(ys) - min(ys))

    merger = _PointMerger(span)
    pieces = []
    for a, b in _split_all_segments(cleaned):
        ca, cb = merger.canon(a), merger.canon(b)
        if ca != cb:
            pieces.append((ca, cb))
    if not pieces:
        return []

    faces = _trace_faces(pieces)
    outers = []   # (cycle, area) with positive area and odd parity
    inners = []   # negative-area cycles: hole boundaries of some face
    for cycle, area in faces:
        if area > _EPS:
            sample = _inner_sample(cycle, area, span)
            if _point_in_rings(sample, cleaned):
                outers.append((cycle, area))
        elif area < -_EPS:
            inners.append((cycle, area))

    polys = [PolygonGeometry(rings=[cycle]) for cycle, _ in outers]

    # A hole cycle is traced with its owning face on the left, so the sample
    # point lies inside the owner.  Odd parity there means the owner is a
    # kept face; attach the cycle to the smallest kept face containing it.
    for cycle, _area in inners:
        sample = _inner_sample(cycle, _area, span)
        if not _point_in_rings(sample, cleaned):
            continue
        owner = None
        owner_area = math.inf
        for idx, (outer, oarea) in enumerate(outers):
            if oarea < owner_area and _point_in_rings(sample, [outer]):
                owner = idx
                owner_area = oarea
        if owner is not None:
            polys[owner].rings.append(cycle)
    return [p for p in polys if not p.is_empty()]


def repair_geometry(geom: Geometry) -> tuple[Geometry | None, bool]:
    """(repaired geometry or None, whether anything changed).

    Clean geometries pass through untouched.  Fixable defects (duplicate
    points, orientation, self-intersection) are repaired; geometries that
    remain degenerate afterwards come back as None.
    """
    defects = geometry_defects(geom)
    if not defects:
        return geom, False

    if "self-intersection" in defects:
        rings = [r for poly in as_polygons(geom) for r in poly.rings]
        polys = repolygonize_even_odd(rings)
        if not polys:
            return None, True
        if len(polys) == 1:
            return polys[0], True
        return MultiPolygonGeometry(polygons=polys), True

    repaired: list[PolygonGeometry] = []
    for poly in as_polygons(geom):
        rings = []
        for k, ring in enumerate(poly.rings):
            clean = _dedupe_consecutive(ring)
            if len(clean) < 3 or abs(signed_area(clean)) < _EPS:
                continue
            a = signed_area(clean)
            if (k == 0 and a < 0) or (k > 0 and a > 0):
                clean = clean[::-1]
            rings.append(clean)
        if rings:
            repaired.append(PolygonGeometry(rings=rings))
    if not repaired:
        return None, True
    if len(repaired) == 1 and isinstance(geom, PolygonGeometry):
        return repaired[0], True
    if isinstance(geom, MultiPolygonGeometry):
        return MultiPolygonGeometry(polygons=repaired), True
    return repaired[0], True

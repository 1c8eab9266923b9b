"""Spherical geodesy and map matching onto predefined polylines.

Distances use the haversine formula on a sphere of mean Earth radius.
Projection onto a path happens per segment in a local equirectangular
plane anchored at the segment start; for scenes under a kilometre the
planar error is well below a centimetre.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ._backend import kernels
from .errors import DegenerateInput, NegativeArcLength, ValidationError

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class GeoPoint:
    lat_deg: float
    lon_deg: float

    def __post_init__(self) -> None:
        lat, lon = float(self.lat_deg), float(self.lon_deg)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValidationError(f"non-finite coordinate ({lat}, {lon})")
        if not -90.0 <= lat <= 90.0:
            raise ValidationError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise ValidationError(f"longitude {lon} outside [-180, 180]")
        object.__setattr__(self, "lat_deg", lat)
        object.__setattr__(self, "lon_deg", lon)


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in metres between two points."""
    p1 = math.radians(a.lat_deg)
    p2 = math.radians(b.lat_deg)
    dphi = p2 - p1
    dlam = math.radians(b.lon_deg - a.lon_deg)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlam / 2.0) ** 2
    h = min(max(h, 0.0), 1.0)
    return 2.0 * EARTH_RADIUS_M * math.atan2(math.sqrt(h), math.sqrt(1.0 - h))


def haversine_many(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Array form of :func:`haversine_distance` (degrees in, metres out)."""
    return kernels.haversine_many(lat1, lon1, lat2, lon2, EARTH_RADIUS_M)


def bearing(a: GeoPoint, b: GeoPoint) -> float:
    """Initial great-circle bearing from ``a`` to ``b``; 0 = north, 90 = east."""
    if a == b:
        raise DegenerateInput("bearing undefined for coincident points")
    p1 = math.radians(a.lat_deg)
    p2 = math.radians(b.lat_deg)
    dlam = math.radians(b.lon_deg - a.lon_deg)
    x = math.sin(dlam) * math.cos(p2)
    y = math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dlam)
    deg = math.degrees(math.atan2(x, y)) % 360.0
    # -0.0 % 360 and tiny negatives can round up to exactly 360
    return 0.0 if deg >= 360.0 else deg


def offset_point(origin: GeoPoint, east_m: float, north_m: float) -> GeoPoint:
    """Point displaced from ``origin`` in its local east/north tangent plane."""
    dlat = math.degrees(north_m / EARTH_RADIUS_M)
    dlon = math.degrees(east_m / (EARTH_RADIUS_M * math.cos(math.radians(origin.lat_deg))))
    return GeoPoint(origin.lat_deg + dlat, origin.lon_deg + dlon)


def local_xy(origin: GeoPoint, p: GeoPoint) -> tuple[float, float]:
    """Inverse of :func:`offset_point`: east/north metres of ``p`` from ``origin``."""
    x = math.radians(p.lon_deg - origin.lon_deg) * EARTH_RADIUS_M * math.cos(math.radians(origin.lat_deg))
    y = math.radians(p.lat_deg - origin.lat_deg) * EARTH_RADIUS_M
    return x, y


@dataclass(frozen=True)
class PathPolyline:
    vertices: tuple[GeoPoint, ...]
    cum_s: tuple[float, ...]

    @property
    def length(self) -> float:
        return self.cum_s[-1]

    def segment_heading(self, i: int) -> float:
        return bearing(self.vertices[i], self.vertices[i + 1])


class PathFix(NamedTuple):
    s: float
    lateral_offset_m: float
    heading_deg: float


class PathPosition(NamedTuple):
    point: GeoPoint
    heading_deg: float
    saturated: bool


def build_path(vertices: Sequence[GeoPoint]) -> PathPolyline:
    verts = tuple(vertices)
    if len(verts) < 2:
        raise DegenerateInput("a path needs at least two vertices")
    cum = [0.0]
    for a, b in zip(verts, verts[1:]):
        if a == b:
            raise DegenerateInput(f"duplicate consecutive vertex {a}")
        d = haversine_distance(a, b)
        if d <= 0.0:
            raise DegenerateInput(f"zero-length segment at {a}")
        cum.append(cum[-1] + d)
    return PathPolyline(verts, tuple(cum))


def project_onto_path(path: PathPolyline, p: GeoPoint) -> PathFix:
    """Map-match ``p`` to the closest point on ``path``.

    Lateral offset is positive when ``p`` lies to the right of the direction
    of travel. Equal distances resolve toward the smaller arc length.
    """
    best: tuple[float, float, float, int] | None = None
    for i in range(len(path.vertices) - 1):
        a, b = path.vertices[i], path.vertices[i + 1]
        bx, by = local_xy(a, b)
        px, py = local_xy(a, p)
        seg2 = bx * bx + by * by
        t = min(max((px * bx + py * by) / seg2, 0.0), 1.0)
        dx, dy = px - t * bx, py - t * by
        dist = math.hypot(dx, dy)
        # cross(direction, offset) < 0 means clockwise of travel, i.e. right
        cross = bx * dy - by * dx
        signed = -dist if cross > 0.0 else dist
        s = path.cum_s[i] + t * (path.cum_s[i + 1] - path.cum_s[i])
        if best is None or dist < best[0] - 1e-12:
            best = (dist, s, signed, i)
    assert best is not None
    _, s, signed, i = best
    s = min(max(s, 0.0), path.length)
    return PathFix(s, signed, path.segment_heading(i))


def point_at_arc_length(path: PathPolyline, s: float) -> PathPosition:
    """Position and heading at arc length ``s``; overshoot clamps to the end."""
    if s < 0.0:
        raise NegativeArcLength(f"arc length {s} < 0")
    n_seg = len(path.vertices) - 1
    if s >= path.length:
        return PathPosition(path.vertices[-1], path.segment_heading(n_seg - 1), s > path.length)
    i = min(bisect.bisect_right(path.cum_s, s) - 1, n_seg - 1)
    a, b = path.vertices[i], path.vertices[i + 1]
    t = (s - path.cum_s[i]) / (path.cum_s[i + 1] - path.cum_s[i])
    pt = GeoPoint(a.lat_deg + t * (b.lat_deg - a.lat_deg), a.lon_deg + t * (b.lon_deg - a.lon_deg))
    return PathPosition(pt, path.segment_heading(i), False)


def path_intersection(p: PathPolyline, q: PathPolyline) -> tuple[float, float] | None:
    """Arc lengths ``(s_p, s_q)`` of the first crossing of ``p`` with ``q``, if any."""
    origin = p.vertices[0]
    pq = [local_xy(origin, v) for v in q.vertices]
    pp = [local_xy(origin, v) for v in p.vertices]
    for i in range(len(pp) - 1):
        (ax, ay), (bx, by) = pp[i], pp[i + 1]
        rx, ry = bx - ax, by - ay
        for j in range(len(pq) - 1):
            (cx, cy), (dx, dy) = pq[j], pq[j + 1]
            sx, sy = dx - cx, dy - cy
            den = rx * sy - ry * sx
            if den == 0.0:
                continue
            t = ((cx - ax) * sy - (cy - ay) * sx) / den
            u = ((cx - ax) * ry - (cy - ay) * rx) / den
            if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
                s_p = p.cum_s[i] + t * (p.cum_s[i + 1] - p.cum_s[i])
                s_q = q.cum_s[j] + u * (q.cum_s[j + 1] - q.cum_s[j])
                return s_p, s_q
    return None

"""Intersection site: predefined paths, detection zones and the site file format.

The vehicle approach path ends where the through and left-turn paths begin;
``Site.route(maneuver)`` joins the approach with a continuation so that an
arc length measured on the approach is valid on either route.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .errors import InvalidZone, ValidationError
from .geodesy import GeoPoint, PathPolyline, build_path, path_intersection
from .ingest import DetectionZone, compute_vehicle_zone

SITE_FORMAT_VERSION = 1
PATH_NAMES = ("crosswalk", "approach", "through", "left_turn")


@dataclass(frozen=True)
class Site:
    crosswalk: PathPolyline
    crosswalk_width_m: float
    crosswalk_span: tuple[float, float]
    approach: PathPolyline
    through: PathPolyline
    left_turn: PathPolyline
    speed_limit_mps: float
    ssd_m: float
    crossing_time_s: float
    vehicle_zone_half_width_m: float = 6.0
    zone_speed_mps: float = 0.0
    ped_zone: DetectionZone = field(init=False, repr=False)
    veh_zone: DetectionZone = field(init=False, repr=False)

    def __post_init__(self) -> None:
        for name in ("through", "left_turn"):
            start = getattr(self, name).vertices[0]
            if start != self.approach.vertices[-1]:
                raise ValidationError(f"{name} path does not start at the approach end")
        lo, hi = self.crosswalk_span
        object.__setattr__(
            self, "ped_zone", DetectionZone("pedestrian", self.crosswalk, lo, hi, self.crosswalk_width_m / 2.0)
        )
        speed = self.zone_speed_mps if self.zone_speed_mps > 0.0 else self.speed_limit_mps
        final_m, start_m = compute_vehicle_zone(self.ssd_m, speed, self.crossing_time_s)
        s_cross = self.crossing_arc("through")[0]
        s_min, s_max = s_cross - start_m, s_cross - final_m
        if s_min < 0.0 or s_max > self.approach.length:
            raise InvalidZone(
                f"vehicle zone [{s_min:.2f}, {s_max:.2f}] does not fit on an approach of {self.approach.length:.2f} m"
            )
        object.__setattr__(
            self, "veh_zone", DetectionZone("vehicle", self.approach, s_min, s_max, self.vehicle_zone_half_width_m)
        )

    def continuation(self, maneuver: str) -> PathPolyline:
        if maneuver == "through":
            return self.through
        if maneuver == "left_turn":
            return self.left_turn
        raise ValueError(f"unknown maneuver {maneuver!r}")

    @cached_property
    def _routes(self) -> dict[str, PathPolyline]:
        return {
            m: build_path(self.approach.vertices + self.continuation(m).vertices[1:])
            for m in ("through", "left_turn")
        }

    def route(self, maneuver: str) -> PathPolyline:
        return self._routes[maneuver]

    def crossing_arc(self, maneuver: str) -> tuple[float, float]:
        """(arc on route, arc on pedestrian path) where the route crosses the crosswalk."""
        hit = path_intersection(self.route(maneuver), self.crosswalk)
        if hit is None:
            raise ValidationError(f"{maneuver} route never crosses the pedestrian path")
        return hit

    def distance_to_crosswalk(self, s_route: float, maneuver: str = "through") -> float:
        return self.crossing_arc(maneuver)[0] - s_route

    def to_dict(self) -> dict:
        def verts(p: PathPolyline) -> list[list[float]]:
            return [[v.lat_deg, v.lon_deg] for v in p.vertices]

        return {
            "format_version": SITE_FORMAT_VERSION,
            "paths": {name: verts(getattr(self, name)) for name in PATH_NAMES},
            "crosswalk_width_m": self.crosswalk_width_m,
            "crosswalk_span_m": list(self.crosswalk_span),
            "vehicle_zone_half_width_m": self.vehicle_zone_half_width_m,
            "speed_limit_mps": self.speed_limit_mps,
            "zone_speed_mps": self.zone_speed_mps,
            "ssd_m": self.ssd_m,
            "crossing_time_s": self.crossing_time_s,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> Site:
        if not isinstance(doc, dict):
            raise ValidationError("site document must be a JSON object")
        if doc.get("format_version") != SITE_FORMAT_VERSION:
            raise ValidationError(f"unsupported site format_version {doc.get('format_version')!r}")
        try:
            paths = {name: build_path([GeoPoint(*v) for v in doc["paths"][name]]) for name in PATH_NAMES}
            span = tuple(float(x) for x in doc["crosswalk_span_m"])
            if len(span) != 2:
                raise ValidationError("crosswalk_span_m needs two values")
            return cls(
                crosswalk=paths["crosswalk"],
                crosswalk_width_m=float(doc["crosswalk_width_m"]),
                crosswalk_span=span,  # type: ignore[arg-type]
                approach=paths["approach"],
                through=paths["through"],
                left_turn=paths["left_turn"],
                speed_limit_mps=float(doc["speed_limit_mps"]),
                ssd_m=float(doc["ssd_m"]),
                crossing_time_s=float(doc["crossing_time_s"]),
                vehicle_zone_half_width_m=float(doc.get("vehicle_zone_half_width_m", 6.0)),
                zone_speed_mps=float(doc.get("zone_speed_mps", 0.0)),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed site document: {exc!r}") from None


def save_site(site: Site, destination: str | os.PathLike) -> None:
    Path(destination).write_text(json.dumps(site.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_site(source: str | os.PathLike) -> Site:
    try:
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{source}: not valid JSON ({exc.msg})") from None
    return Site.from_dict(doc)

"""Collision risk region (CRR) geometry and collision risk estimate (CRE).

The CRR is a circular sector ahead of the vehicle whose radius is the typical
stop distance and whose half-angle comes from the vehicle width.  A future
step is a crash when the pedestrian sits inside the sector and CRE, the stop
distance over the pedestrian-vehicle distance, is strictly above one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .errors import NonPositiveInput, ZeroDistance
from .geodesy import GeoPoint, bearing, haversine_distance

DEFAULT_STOP_DISTANCE_M = 16.95
DEFAULT_VEHICLE_WIDTH_M = 2.6
MANEUVERS = ("through", "left_turn")


def crr_half_angle(vehicle_width_m: float, stop_distance_m: float) -> float:
    """Sector half-angle in degrees, ``atan(width / stop distance)``.

    (2.6 m, 16.95 m) gives the 8.72 degree threshold.
    """
    if vehicle_width_m <= 0.0 or stop_distance_m <= 0.0:
        raise NonPositiveInput("vehicle width and stop distance must be positive")
    return math.degrees(math.atan(vehicle_width_m / stop_distance_m))


@dataclass(frozen=True)
class CrrParams:
    stop_distance_m: float = DEFAULT_STOP_DISTANCE_M
    vehicle_width_m: float = DEFAULT_VEHICLE_WIDTH_M
    half_angle_deg: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "half_angle_deg", crr_half_angle(self.vehicle_width_m, self.stop_distance_m))


@dataclass(frozen=True)
class RelativeGeometry:
    distance_m: float
    bearing_offset_deg: float


def normalize_angle(deg: float) -> float:
    """Wrap to (-180, 180]."""
    a = math.fmod(deg, 360.0)
    if a <= -180.0:
        a += 360.0
    elif a > 180.0:
        a -= 360.0
    return a


def relative_geometry(vehicle_pos: GeoPoint, vehicle_heading_deg: float, ped_pos: GeoPoint) -> RelativeGeometry:
    """Distance and signed bearing offset (positive = right of heading)."""
    if vehicle_pos == ped_pos:
        return RelativeGeometry(0.0, 0.0)
    d = haversine_distance(vehicle_pos, ped_pos)
    off = normalize_angle(bearing(vehicle_pos, ped_pos) - vehicle_heading_deg)
    return RelativeGeometry(d, off)


def in_crr(geom: RelativeGeometry, params: CrrParams = CrrParams()) -> bool:
    return geom.distance_m <= params.stop_distance_m and abs(geom.bearing_offset_deg) <= params.half_angle_deg


def compute_cre(stop_distance_m: float, ped_veh_distance_m: float) -> float:
    if ped_veh_distance_m <= 0.0:
        raise ZeroDistance("pedestrian and vehicle coincide")
    return stop_distance_m / ped_veh_distance_m


@dataclass(frozen=True)
class RiskAssessment:
    step_k: int
    maneuver: str
    geometry: RelativeGeometry
    in_crr: bool
    cre: float
    is_crash: bool
    ped_pos: GeoPoint | None = None
    veh_pos: GeoPoint | None = None

    def to_dict(self) -> dict:
        return {
            "k": self.step_k,
            "maneuver": self.maneuver,
            "distance_m": self.geometry.distance_m,
            "angle_deg": self.geometry.bearing_offset_deg,
            "in_crr": self.in_crr,
            "cre": self.cre if math.isfinite(self.cre) else "inf",
            "crash": self.is_crash,
        }


def assess_geometry(k: int, maneuver: str, geom: RelativeGeometry, params: CrrParams = CrrParams()) -> RiskAssessment:
    inside = in_crr(geom, params)
    try:
        cre = compute_cre(params.stop_distance_m, geom.distance_m)
    except ZeroDistance:
        # coincident agents: treat as the maximal-risk crash
        return RiskAssessment(k, maneuver, geom, True, math.inf, True)
    return RiskAssessment(k, maneuver, geom, inside, cre, inside and cre > 1.0)


def assess_step(k: int, maneuver: str, vehicle_pose: tuple[GeoPoint, float], ped_pos: GeoPoint,
                params: CrrParams = CrrParams()) -> RiskAssessment:
    """Verdict for future step ``k`` given the vehicle (position, heading) and pedestrian."""
    veh_pos, heading = vehicle_pose
    a = assess_geometry(k, maneuver, relative_geometry(veh_pos, heading, ped_pos), params)
    return replace(a, ped_pos=ped_pos, veh_pos=veh_pos)

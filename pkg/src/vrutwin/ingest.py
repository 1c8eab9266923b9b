"""Sensor stream parsing, per-agent tracks, detection zones and feature windows.

Pedestrian sensors report at 5 Hz and vehicle sensors at 1 Hz.  Every
record appended to a track gets a cumulative travelled distance (sum of
haversine hops) and a map-matched :class:`~vrutwin.geodesy.PathFix`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Literal, NamedTuple

import numpy as np

from .errors import (
    InsufficientHistory,
    InvalidZone,
    NoAlignedSample,
    NonMonotonicTimestamp,
    ParseError,
    ValidationError,
)
from .geodesy import GeoPoint, PathFix, PathPolyline, haversine_distance, project_onto_path
from .predictor.norm import N_FEATURES, NormParams

Kind = Literal["pedestrian", "vehicle"]
KINDS = ("pedestrian", "vehicle")
FIELDS = ("t", "agent_id", "kind", "lat", "lon", "speed", "ax", "ay", "az", "gx", "gy", "gz")
SAMPLE_PERIOD_S = {"pedestrian": 0.2, "vehicle": 1.0}
TWIN_STEP_S = 1.0


@dataclass(frozen=True)
class SensorRecord:
    t: float
    agent_id: str
    kind: str
    pos: GeoPoint
    speed_mps: float
    accel: tuple[float, float, float]
    gyro: tuple[float, float, float]

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"unknown agent kind {self.kind!r}")
        nums = (self.t, self.speed_mps, *self.accel, *self.gyro)
        if len(self.accel) != 3 or len(self.gyro) != 3:
            raise ValidationError("accel and gyro need three axes each")
        if not all(math.isfinite(v) for v in nums):
            raise ValidationError("non-finite numeric channel")
        if self.speed_mps < 0.0:
            raise ValidationError(f"negative speed {self.speed_mps}")

    def features(self) -> tuple[float, ...]:
        """The seven raw channels preceding distance in feature order."""
        return (self.speed_mps, *self.accel, *self.gyro)

    def to_row(self) -> dict:
        return {
            "t": self.t,
            "agent_id": self.agent_id,
            "kind": self.kind,
            "lat": self.pos.lat_deg,
            "lon": self.pos.lon_deg,
            "speed": self.speed_mps,
            "ax": self.accel[0],
            "ay": self.accel[1],
            "az": self.accel[2],
            "gx": self.gyro[0],
            "gy": self.gyro[1],
            "gz": self.gyro[2],
        }


def serialize_record(r: SensorRecord) -> str:
    return json.dumps(r.to_row())


def _from_mapping(obj: dict) -> SensorRecord:
    missing = [k for k in FIELDS if k not in obj]
    if missing:
        raise ParseError(f"missing field(s): {', '.join(missing)}")
    try:
        nums = {k: float(obj[k]) for k in FIELDS if k not in ("agent_id", "kind")}
    except (TypeError, ValueError) as exc:
        raise ParseError(f"non-numeric field: {exc}") from None
    try:
        pos = GeoPoint(nums["lat"], nums["lon"])
    except ValidationError:
        raise
    return SensorRecord(
        t=nums["t"],
        agent_id=str(obj["agent_id"]),
        kind=str(obj["kind"]),
        pos=pos,
        speed_mps=nums["speed"],
        accel=(nums["ax"], nums["ay"], nums["az"]),
        gyro=(nums["gx"], nums["gy"], nums["gz"]),
    )


def parse_record(line: str) -> SensorRecord:
    """Parse one JSON Lines sensor record."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ParseError("record must be a JSON object")
    return _from_mapping(obj)


def read_jsonl(text: str) -> list[SensorRecord]:
    return [parse_record(line) for line in text.splitlines() if line.strip()]


def read_csv(text: str) -> list[SensorRecord]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != FIELDS:
        raise ParseError(f"CSV header must be {','.join(FIELDS)}")
    return [_from_mapping(row) for row in reader]


def write_jsonl(records: Iterable[SensorRecord]) -> str:
    return "".join(serialize_record(r) + "\n" for r in records)


def write_csv(records: Iterable[SensorRecord]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=FIELDS, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.to_row().items()})
    return buf.getvalue()


def read_stream(path) -> list[SensorRecord]:
    """Load a ``.jsonl`` or ``.csv`` sensor file."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if str(path).endswith(".csv"):
        return read_csv(text)
    return read_jsonl(text)


class HistoryEntry(NamedTuple):
    record: SensorRecord
    cumulative_distance_m: float
    fix: PathFix


@dataclass(frozen=True)
class TrackState:
    agent_id: str
    kind: str
    history: tuple[HistoryEntry, ...] = ()
    sample_period_s: float = field(default=0.0)

    def __post_init__(self) -> None:
        if not self.sample_period_s:
            object.__setattr__(self, "sample_period_s", SAMPLE_PERIOD_S[self.kind])

    def __len__(self) -> int:
        return len(self.history)

    @property
    def last(self) -> HistoryEntry:
        return self.history[-1]


def append_record(track: TrackState, r: SensorRecord, path: PathPolyline) -> TrackState:
    """Return a new track with ``r`` appended, distance folded and map-matched."""
    if track.history:
        prev = track.history[-1]
        if not r.t > prev.record.t:
            raise NonMonotonicTimestamp(f"t={r.t} not after {prev.record.t}")
        cum = prev.cumulative_distance_m + haversine_distance(prev.record.pos, r.pos)
    else:
        cum = 0.0
    entry = HistoryEntry(r, cum, project_onto_path(path, r.pos))
    return TrackState(track.agent_id, track.kind, track.history + (entry,), track.sample_period_s)


def build_track(records: Iterable[SensorRecord], path: PathPolyline) -> TrackState:
    records = list(records)
    if not records:
        raise InsufficientHistory("no records")
    track = TrackState(records[0].agent_id, records[0].kind)
    for r in records:
        track = append_record(track, r, path)
    return track


@dataclass(frozen=True)
class DetectionZone:
    kind: str
    path: PathPolyline
    s_min: float
    s_max: float
    half_width_m: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.s_min < self.s_max <= self.path.length + 1e-9:
            raise InvalidZone(f"zone bounds [{self.s_min}, {self.s_max}] invalid for path of length {self.path.length}")
        if self.half_width_m <= 0.0:
            raise InvalidZone("half width must be positive")


def in_zone(zone: DetectionZone, fix: PathFix) -> bool:
    return zone.s_min <= fix.s <= zone.s_max and abs(fix.lateral_offset_m) <= zone.half_width_m


def compute_vehicle_zone(ssd_m: float, speed_mps: float, crossing_time_s: float) -> tuple[float, float]:
    """Vehicle detection band as (final, start) distances before the crosswalk.

    The near edge adds one second of travel to the stopping sight distance
    because vehicle fixes arrive at 1 Hz.
    """
    if ssd_m <= 0.0 or crossing_time_s <= 0.0 or speed_mps < 0.0:
        raise InvalidZone("ssd, speed and crossing time must be positive")
    final_m = ssd_m + speed_mps * 1.0
    start_m = speed_mps * crossing_time_s
    if start_m <= final_m:
        raise InvalidZone(f"start {start_m:.2f} m does not exceed final {final_m:.2f} m")
    return final_m, start_m


def raw_feature_rows(entries: tuple[HistoryEntry, ...] | list[HistoryEntry]) -> np.ndarray:
    """Raw (speed, accel, gyro, window-relative distance) matrix for ``entries``."""
    out = np.empty((len(entries), N_FEATURES))
    if not entries:
        return out
    d0 = entries[0].cumulative_distance_m
    for i, e in enumerate(entries):
        out[i, :7] = e.record.features()
        out[i, 7] = e.cumulative_distance_m - d0
    return out


@dataclass(frozen=True)
class FeatureWindow:
    values: np.ndarray
    normalized: bool


def build_feature_window(track: TrackState, steps: int, norm: NormParams | None = None) -> FeatureWindow:
    if len(track.history) < steps:
        raise InsufficientHistory(f"need {steps} samples, track has {len(track.history)}")
    raw = raw_feature_rows(track.history[-steps:])
    if norm is None:
        return FeatureWindow(raw, False)
    return FeatureWindow(norm.normalize_features(raw), True)


def resample(track: TrackState, step_s: float = TWIN_STEP_S, t_end: float | None = None) -> TrackState:
    """Pick the sample nearest each grid instant ``t_end - j*step_s``.

    Grid points without a sample within half a step end the walk back in time.
    Cumulative distances are carried over from the native-rate fold.
    """
    hist = track.history
    if not hist:
        return TrackState(track.agent_id, track.kind, (), step_s)
    times = np.array([e.record.t for e in hist])
    t_grid = times[-1] if t_end is None else t_end
    picked: list[HistoryEntry] = []
    last_idx = len(hist)
    while True:
        j = int(np.argmin(np.abs(times[:last_idx] - t_grid))) if last_idx else -1
        if j < 0 or abs(times[j] - t_grid) > step_s / 2.0:
            break
        picked.append(hist[j])
        last_idx = j
        t_grid -= step_s
    return TrackState(track.agent_id, track.kind, tuple(reversed(picked)), step_s)


def truncate(track: TrackState, t_max: float) -> TrackState:
    hist = tuple(e for e in track.history if e.record.t <= t_max)
    return TrackState(track.agent_id, track.kind, hist, track.sample_period_s)


@dataclass(frozen=True)
class Snapshot:
    t: float
    ped: TrackState
    veh: TrackState
    ped_resampled: TrackState


def _aligned(track: TrackState, t: float, tol_s: float) -> TrackState:
    for idx in range(len(track.history) - 1, -1, -1):
        rt = track.history[idx].record.t
        if rt <= t + tol_s:
            if abs(rt - t) <= tol_s:
                return TrackState(track.agent_id, track.kind, track.history[: idx + 1], track.sample_period_s)
            break
    raise NoAlignedSample(f"{track.kind} {track.agent_id}: no sample within {tol_s} s of t={t}")


def snapshot_at(ped: TrackState, veh: TrackState, t: float, tol_s: float) -> Snapshot:
    """Pair the newest samples of both tracks that lie within ``tol_s`` of ``t``."""
    p = _aligned(ped, t, tol_s)
    v = _aligned(veh, t, tol_s)
    return Snapshot(t, p, v, resample(p, TWIN_STEP_S, p.last.record.t))


def merge_streams(*streams: Iterable[SensorRecord]) -> Iterator[SensorRecord]:
    """Time-ordered merge; ties keep pedestrian before vehicle."""
    order = {"pedestrian": 0, "vehicle": 1}
    allrec = [r for s in streams for r in s]
    allrec.sort(key=lambda r: (r.t, order[r.kind], r.agent_id))
    return iter(allrec)

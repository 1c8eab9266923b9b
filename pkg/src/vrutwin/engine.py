"""The twin loop: gate, predict both vehicle maneuvers, assess, alert.

One engine tick happens per vehicle fix (1 Hz).  Pedestrian fixes arriving
since the previous tick are folded in first, the pedestrian track is
resampled to one-second steps, and both vehicle hypotheses are evaluated
over the same eight-second horizon.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .errors import InsufficientHistory, ShapeMismatch, TwinError
from .geodesy import GeoPoint, point_at_arc_length
from .ingest import (
    SensorRecord,
    Snapshot,
    TrackState,
    append_record,
    build_feature_window,
    in_zone,
    merge_streams,
    snapshot_at,
)
from .predictor.model import EncoderDecoderModel, forward
from .risk import MANEUVERS, CrrParams, RiskAssessment, assess_step
from .site import Site

HORIZON = 8
ALIGN_TOL_S = 0.15


class GateResult(NamedTuple):
    ok: bool
    reason: str


def gate(snapshot: Snapshot, site: Site) -> GateResult:
    """Both agents must sit in their detection zones for the twin to run."""
    if not in_zone(site.ped_zone, snapshot.ped.last.fix):
        return GateResult(False, "no pedestrian in zone")
    if not in_zone(site.veh_zone, snapshot.veh.last.fix):
        return GateResult(False, "no vehicle in zone")
    return GateResult(True, "")


@dataclass(frozen=True)
class ScenarioPredictions:
    ped_s: tuple[float, ...]
    veh_through_s: tuple[float, ...]
    veh_left_s: tuple[float, ...]
    ped_base_s: float
    veh_base_s: float
    ped_direction: int = 1

    def __post_init__(self) -> None:
        vals = (*self.ped_s, *self.veh_through_s, *self.veh_left_s, self.ped_base_s, self.veh_base_s)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("non-finite prediction")
        if not len(self.ped_s) == len(self.veh_through_s) == len(self.veh_left_s):
            raise ValueError("prediction sequences differ in length")

    def vehicle(self, maneuver: str) -> tuple[float, ...]:
        return self.veh_through_s if maneuver == "through" else self.veh_left_s


def crossing_direction(track: TrackState, lookback: int = 10) -> int:
    """+1 / -1 from recent arc-length progress; stationary keeps the last moving sign."""
    hist = track.history
    for j in range(len(hist) - 1, 0, -1):
        lo = max(j - lookback, 0)
        ds = hist[j].fix.s - hist[lo].fix.s
        if abs(ds) > 1e-3:
            return 1 if ds > 0 else -1
    return 1


def predict_scenarios(snapshot: Snapshot, ped_model: EncoderDecoderModel, through_model: EncoderDecoderModel,
                      left_model: EncoderDecoderModel) -> ScenarioPredictions:
    ped_w = build_feature_window(snapshot.ped_resampled, ped_model.config.input_steps, ped_model.norm)
    out = {}
    for name, model in (("through", through_model), ("left_turn", left_model)):
        w = build_feature_window(snapshot.veh, model.config.input_steps, model.norm)
        out[name] = tuple(float(v) for v in forward(model, w))
    ped = tuple(float(v) for v in forward(ped_model, ped_w))
    return ScenarioPredictions(
        ped_s=ped,
        veh_through_s=out["through"],
        veh_left_s=out["left_turn"],
        ped_base_s=snapshot.ped.last.fix.s,
        veh_base_s=snapshot.veh.last.fix.s,
        ped_direction=crossing_direction(snapshot.ped),
    )


def _ped_position(preds: ScenarioPredictions, site: Site, k: int) -> GeoPoint:
    s = preds.ped_base_s + preds.ped_direction * preds.ped_s[k - 1]
    s = min(max(s, 0.0), site.crosswalk.length)
    return point_at_arc_length(site.crosswalk, s).point


def assess_pair(preds: ScenarioPredictions, site: Site, params: CrrParams, maneuver: str, k: int) -> RiskAssessment:
    route = site.route(maneuver)
    pose = point_at_arc_length(route, max(preds.veh_base_s + preds.vehicle(maneuver)[k - 1], 0.0))
    return assess_step(k, maneuver, (pose.point, pose.heading_deg), _ped_position(preds, site, k), params)


def evaluate_scenarios(preds: ScenarioPredictions, site: Site, params: CrrParams = CrrParams(),
                       order: Sequence[tuple[str, int]] | None = None) -> list[RiskAssessment]:
    """All maneuver x step assessments, returned through-first then by step.

    ``order`` only changes the evaluation sequence, never the result.
    """
    horizon = len(preds.ped_s)
    pairs = [(m, k) for m in MANEUVERS for k in range(1, horizon + 1)]
    results = {pair: assess_pair(preds, site, params, *pair) for pair in (order or pairs)}
    return [results[pair] for pair in pairs]


@dataclass(frozen=True)
class Alert:
    t_issued: float
    maneuver: str
    k: int
    cre: float
    ped_pos: GeoPoint
    veh_pos: GeoPoint

    def to_dict(self) -> dict:
        return {
            "t": self.t_issued,
            "maneuver": self.maneuver,
            "k": self.k,
            "cre": self.cre if math.isfinite(self.cre) else "inf",
            "ped_lat": self.ped_pos.lat_deg,
            "ped_lon": self.ped_pos.lon_deg,
            "veh_lat": self.veh_pos.lat_deg,
            "veh_lon": self.veh_pos.lon_deg,
        }


def generate_alert(assessments: Iterable[RiskAssessment], t: float = 0.0) -> list[Alert]:
    """At most one alert per maneuver, at its earliest crash step."""
    alerts = []
    by_m: dict[str, list[RiskAssessment]] = {}
    for a in assessments:
        by_m.setdefault(a.maneuver, []).append(a)
    for m in MANEUVERS:
        crashes = [a for a in by_m.get(m, []) if a.is_crash]
        if crashes:
            first = min(crashes, key=lambda a: a.step_k)
            alerts.append(Alert(t, m, first.step_k, first.cre, first.ped_pos, first.veh_pos))
    return alerts


@dataclass(frozen=True)
class TwinEvent:
    t: float
    kind: str  # "gate_skipped" | "evaluated" | "alert"
    reason: str = ""
    assessments: tuple[RiskAssessment, ...] = ()
    alerts: tuple[Alert, ...] = ()

    def to_dict(self) -> dict:
        d: dict = {"t": self.t, "event": self.kind}
        if self.kind == "gate_skipped":
            d["reason"] = self.reason
            return d
        if self.alerts:
            d["alerts"] = [a.to_dict() for a in self.alerts]
        d["assessments"] = [a.to_dict() for a in self.assessments]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class TwinEngine:
    site: Site
    ped_model: EncoderDecoderModel
    through_model: EncoderDecoderModel
    left_model: EncoderDecoderModel
    params: CrrParams = field(default_factory=CrrParams)
    align_tol_s: float = ALIGN_TOL_S
    ped: TrackState | None = None
    veh: TrackState | None = None
    log: list[TwinEvent] = field(default_factory=list)

    def __post_init__(self) -> None:
        roles = (self.ped_model.role, self.through_model.role, self.left_model.role)
        if roles != ("pedestrian", "vehicle_through", "vehicle_left"):
            raise ShapeMismatch(f"models passed in the wrong roles: {roles}")

    def _ingest(self, r: SensorRecord) -> None:
        if r.kind == "pedestrian":
            self.ped = append_record(self.ped or TrackState(r.agent_id, r.kind), r, self.site.crosswalk)
        else:
            self.veh = append_record(self.veh or TrackState(r.agent_id, r.kind), r, self.site.approach)

    def step(self, records: Iterable[SensorRecord], t: float | None = None) -> TwinEvent:
        """Fold ``records`` in and run one tick at ``t`` (default: newest record time)."""
        problems = []
        latest = None
        for r in records:
            latest = r.t if latest is None else max(latest, r.t)
            try:
                self._ingest(r)
            except TwinError as exc:
                problems.append(f"{r.kind} record rejected: {exc}")
        tick = t if t is not None else latest
        if tick is None:
            tick = self.log[-1].t + 1.0 if self.log else 0.0
        event = self._tick(tick, problems)
        self.log.append(event)
        return event

    def _tick(self, t: float, problems: list[str]) -> TwinEvent:
        if problems:
            return TwinEvent(t, "gate_skipped", "; ".join(problems))
        if self.ped is None or not self.ped.history:
            return TwinEvent(t, "gate_skipped", "no pedestrian in zone")
        if self.veh is None or not self.veh.history:
            return TwinEvent(t, "gate_skipped", "no vehicle in zone")
        try:
            snap = snapshot_at(self.ped, self.veh, t, self.align_tol_s)
        except TwinError as exc:
            return TwinEvent(t, "gate_skipped", str(exc))
        g = gate(snap, self.site)
        if not g.ok:
            return TwinEvent(t, "gate_skipped", g.reason)
        try:
            preds = predict_scenarios(snap, self.ped_model, self.through_model, self.left_model)
        except InsufficientHistory as exc:
            return TwinEvent(t, "gate_skipped", f"insufficient history: {exc}")
        assessments = tuple(evaluate_scenarios(preds, self.site, self.params))
        alerts = tuple(generate_alert(assessments, t))
        if alerts:
            return TwinEvent(t, "alert", assessments=assessments, alerts=alerts)
        return TwinEvent(t, "evaluated", assessments=assessments)


def step(engine: TwinEngine, records: Iterable[SensorRecord], t: float | None = None) -> TwinEvent:
    return engine.step(records, t)


def tick_batches(ped: Iterable[SensorRecord], veh: Iterable[SensorRecord]):
    """Group merged records into per-vehicle-fix ticks: ``(t, records)`` pairs.

    Pedestrian fixes up to the vehicle fix time (plus a small tolerance) join
    that tick; trailing pedestrian fixes after the last vehicle fix are dropped.
    """
    batch: list[SensorRecord] = []
    for r in merge_streams(ped, veh):
        batch.append(r)
        if r.kind == "vehicle":
            yield r.t, batch
            batch = []


def replay(engine: TwinEngine, ped: Iterable[SensorRecord], veh: Iterable[SensorRecord]) -> list[TwinEvent]:
    for t, batch in tick_batches(ped, veh):
        engine.step(batch, t)
    return engine.log


def summarize(events: Sequence[TwinEvent]) -> dict:
    """Per-maneuver alert counts, earliest step and max CRE, plus collapsed alert runs."""
    out: dict = {"ticks": len(events), "evaluated": 0, "alerts": {}}
    lines = []
    prev_key = None
    for ev in events:
        if ev.kind != "gate_skipped":
            out["evaluated"] += 1
        for a in ev.alerts:
            s = out["alerts"].setdefault(a.maneuver, {"count": 0, "earliest_k": None, "max_cre": None})
            s["count"] += 1
            s["earliest_k"] = a.k if s["earliest_k"] is None else min(s["earliest_k"], a.k)
            cre = a.cre if math.isfinite(a.cre) else float("inf")
            s["max_cre"] = cre if s["max_cre"] is None else max(s["max_cre"], cre)
        key = tuple(sorted(a.maneuver for a in ev.alerts))
        if key and key != prev_key:
            lines.append(f"t={ev.t:.1f} " + ", ".join(f"{a.maneuver} k={a.k} cre={a.cre:.2f}" for a in ev.alerts))
        prev_key = key
    for s in out["alerts"].values():
        if s["max_cre"] == float("inf"):
            s["max_cre"] = "inf"
    out["total_alerts"] = sum(s["count"] for s in out["alerts"].values())
    out["summary_lines"] = lines
    return out


def write_event_log(events: Sequence[TwinEvent]) -> str:
    return "".join(ev.to_json() + "\n" for ev in events)

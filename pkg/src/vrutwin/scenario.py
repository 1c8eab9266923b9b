"""Seeded synthetic site, trajectories, training corpora and staged encounters.

The generated site mimics a mid-block crosswalk on a 25 mph arterial: a
straight approach that splits into a through lane and a left-turn lane one
lane to the left, both crossing a perpendicular crosswalk before the left
lane turns through a quarter circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .errors import Infeasible
from .geodesy import GeoPoint, PathPolyline, build_path, offset_point, point_at_arc_length
from .ingest import SensorRecord, TrackState, build_track, raw_feature_rows, resample
from .predictor.model import ROLE_INPUT_STEPS
from .site import Site

GRAVITY = 9.80665
MPH_25 = 11.176


@dataclass(frozen=True)
class SiteConfig:
    origin_lat: float = 33.2140
    origin_lon: float = -87.5450
    heading_deg: float = 315.0
    approach_length_m: float = 300.0
    split_to_crosswalk_m: float = 50.0
    lane_width_m: float = 3.5
    lane_change_m: float = 30.0
    turn_after_crosswalk_m: float = 10.0
    left_turn_radius_m: float = 15.0
    exit_length_m: float = 40.0
    crosswalk_left_m: float = 14.0
    crosswalk_width_m: float = 3.0
    sidewalk_lead_m: float = 30.0
    sidewalk_tail_m: float = 5.0
    speed_limit_mps: float = MPH_25
    ssd_m: float = 47.24
    crossing_time_s: float = 15.0
    ped_speed_mps: float = 1.4
    zone_speed_mps: float = 0.0


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    ped_speed_mps: float = 1.4
    veh_speed_mps: float = MPH_25
    speed_noise_sigma: float = 0.0
    position_noise_sigma_m: float = 0.0
    imu_noise_sigma: float = 0.0
    maneuver: Literal["through", "left_turn"] = "through"
    start_offsets: tuple[float, float] = (0.0, 0.0)
    duration_s: float = 30.0
    ped_rate_hz: float = 5.0
    veh_rate_hz: float = 1.0
    speed_spread: float = 0.25
    t0: float = 1_690_000_000.0

    def __post_init__(self) -> None:
        if self.ped_rate_hz <= 0 or self.veh_rate_hz <= 0:
            raise ValueError("sample rates must be positive")
        if min(self.speed_noise_sigma, self.position_noise_sigma_m, self.imu_noise_sigma) < 0:
            raise ValueError("noise sigmas must be non-negative")
        if self.ped_speed_mps < 0 or self.veh_speed_mps < 0:
            raise ValueError("speeds must be non-negative")
        if self.maneuver not in ("through", "left_turn"):
            raise ValueError(f"unknown maneuver {self.maneuver!r}")

    def with_noise(self, sigma: float) -> GenConfig:
        return replace(self, speed_noise_sigma=sigma, position_noise_sigma_m=sigma, imu_noise_sigma=sigma)


class _Frame:
    """Local road frame: ``fwd`` along the approach, ``right`` to its right."""

    def __init__(self, cfg: SiteConfig):
        self.origin = GeoPoint(cfg.origin_lat, cfg.origin_lon)
        th = math.radians(cfg.heading_deg)
        self.fwd = (math.sin(th), math.cos(th))
        self.right = (math.cos(th), -math.sin(th))

    def point(self, along: float, right: float) -> GeoPoint:
        e = along * self.fwd[0] + right * self.right[0]
        n = along * self.fwd[1] + right * self.right[1]
        return offset_point(self.origin, e, n)


def make_site(config: SiteConfig | None = None) -> Site:
    """Build the synthetic site; the split point sits at the frame origin."""
    cfg = config or SiteConfig()
    fr = _Frame(cfg)
    d_cw = cfg.split_to_crosswalk_m
    approach = build_path([fr.point(-cfg.approach_length_m, 0.0), fr.point(0.0, 0.0)])
    through = build_path([fr.point(0.0, 0.0), fr.point(d_cw, 0.0), fr.point(d_cw + cfg.exit_length_m, 0.0)])

    lw = cfg.lane_width_m
    pts = [fr.point(0.0, 0.0)]
    n_lc = 24
    for i in range(1, n_lc + 1):
        x = cfg.lane_change_m * i / n_lc
        pts.append(fr.point(x, -lw * (1.0 - math.cos(math.pi * i / n_lc)) / 2.0))
    turn_x = d_cw + cfg.turn_after_crosswalk_m
    pts.append(fr.point(turn_x, -lw))
    r = cfg.left_turn_radius_m
    n_arc = 30
    for i in range(1, n_arc + 1):
        phi = (math.pi / 2.0) * i / n_arc
        pts.append(fr.point(turn_x + r * math.sin(phi), -lw - r * (1.0 - math.cos(phi))))
    pts.append(fr.point(turn_x + r, -lw - r - cfg.exit_length_m))
    left = build_path(pts)

    cw_right = cfg.ped_speed_mps * cfg.crossing_time_s - cfg.crosswalk_left_m
    crosswalk = build_path([
        fr.point(d_cw, -cfg.crosswalk_left_m - cfg.sidewalk_lead_m),
        fr.point(d_cw, cw_right + cfg.sidewalk_tail_m),
    ])
    span = (cfg.sidewalk_lead_m, cfg.sidewalk_lead_m + cfg.crosswalk_left_m + cw_right)
    return Site(
        crosswalk=crosswalk,
        crosswalk_width_m=cfg.crosswalk_width_m,
        crosswalk_span=span,
        approach=approach,
        through=through,
        left_turn=left,
        speed_limit_mps=cfg.speed_limit_mps,
        ssd_m=cfg.ssd_m,
        crossing_time_s=cfg.crossing_time_s,
        zone_speed_mps=cfg.zone_speed_mps,
    )


@dataclass
class Trajectory:
    records: list[SensorRecord]
    truth_s: np.ndarray  # ground-truth arc length per record
    path: PathPolyline

    def truth_rows(self) -> list[tuple[float, str, float]]:
        return [(r.t, r.agent_id, float(s)) for r, s in zip(self.records, self.truth_s)]


def agent_path(site: Site, kind: str, maneuver: str = "through") -> PathPolyline:
    return site.crosswalk if kind == "pedestrian" else site.route(maneuver)


def _heading_rate(path: PathPolyline, s: float, ds: float) -> float:
    """Yaw rate proxy: heading change per metre around ``s`` (rad/m, left positive)."""
    lo = max(s - ds / 2.0, 0.0)
    hi = min(lo + ds, path.length)
    if hi - lo <= 1e-9:
        return 0.0
    h0 = point_at_arc_length(path, lo).heading_deg
    h1 = point_at_arc_length(path, hi).heading_deg
    dh = (h1 - h0 + 180.0) % 360.0 - 180.0
    return -math.radians(dh) / (hi - lo)


def gen_trajectory(site: Site, config: GenConfig, kind: str, rng: np.random.Generator | None = None,
                   speed: float | None = None, start_s: float | None = None,
                   agent_id: str | None = None) -> Trajectory:
    """Constant-speed trajectory along the agent's path, emitted at its sensor rate.

    Samples are taken at ``t0 + i / rate`` for ``i = 1 .. duration * rate`` and
    stop early once the agent runs off the end of its path.
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    path = agent_path(site, kind, config.maneuver)
    if kind == "pedestrian":
        rate, v = config.ped_rate_hz, config.ped_speed_mps
        s0 = config.start_offsets[0]
    else:
        rate, v = config.veh_rate_hz, config.veh_speed_mps
        s0 = config.start_offsets[1]
    v = v if speed is None else speed
    s0 = s0 if start_s is None else start_s
    aid = agent_id or ("ped-0" if kind == "pedestrian" else "veh-0")
    dt = 1.0 / rate
    n = int(round(config.duration_s * rate))
    records: list[SensorRecord] = []
    truth: list[float] = []
    for i in range(1, n + 1):
        s = s0 + v * i * dt
        if s > path.length:
            break
        pos = point_at_arc_length(path, s).point
        if config.position_noise_sigma_m > 0.0:
            de, dn = rng.normal(0.0, config.position_noise_sigma_m, 2)
            pos = offset_point(pos, de, dn)
        yaw_rate = v * _heading_rate(path, s, max(v * dt, 0.5))
        accel = [0.0, v * yaw_rate, GRAVITY]
        gyro = [0.0, 0.0, yaw_rate]
        speed_meas = v
        if config.speed_noise_sigma > 0.0:
            speed_meas = max(0.0, v + float(rng.normal(0.0, config.speed_noise_sigma)))
        if config.imu_noise_sigma > 0.0:
            accel = [a + float(e) for a, e in zip(accel, rng.normal(0.0, config.imu_noise_sigma, 3))]
            gyro = [g + float(e) for g, e in zip(gyro, rng.normal(0.0, config.imu_noise_sigma, 3))]
        records.append(SensorRecord(
            t=config.t0 + i / rate,
            agent_id=aid,
            kind=kind,
            pos=pos,
            speed_mps=speed_meas,
            accel=tuple(accel),
            gyro=tuple(gyro),
        ))
        truth.append(s)
    return Trajectory(records, np.array(truth), path)


def windows_from_track(track: TrackState, input_steps: int, output_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Stride-1 windows over one run and the distance travelled 1..K steps ahead."""
    hist = track.history
    n = len(hist) - input_steps - output_steps + 1
    if n <= 0:
        return np.empty((0, input_steps, 8)), np.empty((0, output_steps))
    cum = np.array([e.cumulative_distance_m for e in hist])
    xs = np.empty((n, input_steps, 8))
    ys = np.empty((n, output_steps))
    for j in range(n):
        last = j + input_steps - 1
        xs[j] = raw_feature_rows(hist[j:last + 1])
        ys[j] = cum[last + 1:last + 1 + output_steps] - cum[last]
    return xs, ys


def run_track(site: Site, traj: Trajectory, kind: str) -> TrackState:
    path = site.crosswalk if kind == "pedestrian" else site.approach
    return build_track(traj.records, path)


ROLE_SETUP = {
    "pedestrian": ("pedestrian", "through"),
    "vehicle_through": ("vehicle", "through"),
    "vehicle_left": ("vehicle", "left_turn"),
}


def gen_runs(site: Site, config: GenConfig, n_runs: int, role: str) -> list[Trajectory]:
    """``n_runs`` seeded training runs for one role.

    Each run draws its own nominal speed within ``speed_spread`` of the
    configured one and a random start offset.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    kind, maneuver = ROLE_SETUP[role]
    cfg = replace(config, maneuver=maneuver)
    rng = np.random.default_rng([config.seed, tuple(ROLE_SETUP).index(role)])
    path = agent_path(site, kind, maneuver)
    nominal = cfg.ped_speed_mps if kind == "pedestrian" else cfg.veh_speed_mps
    runs = []
    for i in range(n_runs):
        factor = 1.0 + rng.uniform(-config.speed_spread, config.speed_spread)
        if kind == "pedestrian":
            start = rng.uniform(0.0, 0.2 * path.length)
        else:
            start = rng.uniform(0.0, max(path.length - 30.0 * nominal * factor, 0.0))
        aid = f"{'ped' if kind == 'pedestrian' else 'veh'}-{i:03d}"
        runs.append(gen_trajectory(site, cfg, kind, rng=rng, speed=nominal * factor, start_s=start, agent_id=aid))
    return runs


def _role_track(site: Site, role: str, records, ped_step_s: float | None) -> TrackState | None:
    records = list(records)
    if len(records) < 2:
        return None
    kind, _ = ROLE_SETUP[role]
    track = build_track(records, site.crosswalk if kind == "pedestrian" else site.approach)
    if kind == "pedestrian" and ped_step_s is not None:
        track = _forward_resample(track, ped_step_s)
    return track


def dataset_from_runs(site: Site, role: str, runs, output_steps: int = 8,
                      ped_step_s: float | None = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Windows and targets for ``role`` from runs given as record sequences.

    Runs are never concatenated; pedestrian runs are resampled to
    ``ped_step_s`` (None keeps the native rate).
    """
    xs = [np.empty((0, ROLE_INPUT_STEPS[role], 8))]
    ys = [np.empty((0, output_steps))]
    for records in runs:
        track = _role_track(site, role, records, ped_step_s)
        if track is None:
            continue
        x, y = windows_from_track(track, ROLE_INPUT_STEPS[role], output_steps)
        xs.append(x)
        ys.append(y)
    return np.concatenate(xs), np.concatenate(ys)


def truth_targets(site: Site, role: str, runs: list[Trajectory], output_steps: int = 8,
                  ped_step_s: float | None = 1.0) -> np.ndarray:
    """Noise-free targets aligned with ``dataset_from_runs`` over the same runs.

    Uses each run's ground-truth arc lengths at the sampled instants instead
    of the distance folded from (possibly noisy) positions.
    """
    ys = [np.empty((0, output_steps))]
    steps = ROLE_INPUT_STEPS[role]
    for traj in runs:
        track = _role_track(site, role, traj.records, ped_step_s)
        if track is None:
            continue
        truth = {r.t: s for r, s in zip(traj.records, traj.truth_s)}
        s = np.array([truth[e.record.t] for e in track.history])
        n = len(s) - steps - output_steps + 1
        for j in range(max(n, 0)):
            last = j + steps - 1
            ys.append((s[last + 1:last + 1 + output_steps] - s[last])[None, :])
    return np.concatenate(ys)


def gen_dataset(site: Site, config: GenConfig, n_runs: int, roles=tuple(ROLE_SETUP),
                output_steps: int = 8, ped_step_s: float | None = 1.0) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    """Per-role ``(windows, targets)`` from ``n_runs`` seeded runs."""
    return {
        role: dataset_from_runs(site, role, (t.records for t in gen_runs(site, config, n_runs, role)),
                                output_steps, ped_step_s)
        for role in roles
    }


def _forward_resample(track: TrackState, step_s: float) -> TrackState:
    """Resample a whole run onto the whole-second grid ending at its last sample."""
    last_t = track.history[-1].record.t
    t_end = math.floor(last_t / step_s + 1e-9) * step_s
    return resample(track, step_s, t_end)


@dataclass
class Encounter:
    maneuver: str
    collide: bool
    ped: Trajectory
    veh: Trajectory
    conflict_time: float  # vehicle reaches the crosswalk (seconds after t0)
    t0: float
    config: GenConfig = field(repr=False)


def gen_encounter(site: Site, config: GenConfig, collide: bool) -> Encounter:
    """Paired pedestrian and vehicle streams timed to collide or to stay apart.

    Colliding runs put the vehicle on the crosswalk at a whole-second tick with
    the pedestrian reaching the same point 0.2-0.8 s earlier. Safe runs keep the
    pedestrian at least 2.5 s away from both lanes' conflict points.
    """
    rng = np.random.default_rng([config.seed, 7919])
    vp, vv = config.ped_speed_mps, config.veh_speed_mps
    m = config.maneuver
    if vv <= 0.0:
        raise Infeasible("vehicle never reaches the crosswalk")
    if collide and vp <= 0.0:
        raise Infeasible("pedestrian never reaches the conflict point")
    route_c, ped_c = site.crossing_arc(m)
    other = "left_turn" if m == "through" else "through"
    route_o, ped_o = site.crossing_arc(other)

    # vehicle needs ~10 s of history before the first tick that can see the crash
    t_lo = 20
    t_hi_veh = math.floor(route_c / vv)
    if collide:
        t_hi_ped = math.floor(ped_c / vp + 0.2)
        t_hi = min(t_hi_veh, t_hi_ped, 26)
        if t_hi < t_lo:
            raise Infeasible("speeds leave no feasible collision timing")
        t_c = int(rng.integers(t_lo, t_hi + 1))
        lead = rng.uniform(0.2, 0.8)
        ped_s0 = ped_c - vp * (t_c - lead)
    else:
        t_hi = min(t_hi_veh, 26)
        if t_hi < t_lo:
            raise Infeasible("vehicle speed too high for the approach length")
        for _ in range(200):
            t_c = int(rng.integers(t_lo, t_hi + 1))
            if vp <= 0.0:
                ped_s0 = rng.uniform(0.0, 0.5 * site.crosswalk_span[0])
                break
            shift = rng.uniform(3.0, 9.0) * (1 if rng.random() < 0.5 else -1)
            ped_s0 = ped_c - vp * (t_c + shift)
            t_other_ped = (ped_o - ped_s0) / vp
            t_other_veh = t_c + (route_o - route_c) / vv
            if 0.0 <= ped_s0 <= site.crosswalk.length and abs(t_other_ped - t_other_veh) >= 2.5:
                break
        else:
            raise Infeasible("no safe timing found")
    veh_s0 = route_c - vv * t_c
    if ped_s0 < 0.0 or veh_s0 < 0.0:
        raise Infeasible("required start offsets fall before the path starts")
    duration = max(config.duration_s, t_c + 10.0)
    cfg = replace(config, start_offsets=(ped_s0, veh_s0), duration_s=duration)
    ped = gen_trajectory(site, cfg, "pedestrian", rng=np.random.default_rng([config.seed, 1]))
    veh = gen_trajectory(site, cfg, "vehicle", rng=np.random.default_rng([config.seed, 2]))
    return Encounter(m, collide, ped, veh, float(t_c), config.t0, cfg)


def truth_arc_at(traj: Trajectory, t: float, rate_hz: float) -> float | None:
    """Ground-truth arc length at time ``t`` (exact for constant-speed runs)."""
    ts = np.array([r.t for r in traj.records])
    idx = np.flatnonzero(np.abs(ts - t) < 0.5 / rate_hz)
    if idx.size == 0:
        return None
    return float(traj.truth_s[idx[0]])


def truth_arc(enc: Encounter, kind: str, t: float) -> float:
    """Closed-form ground-truth arc length of an encounter agent at absolute time ``t``."""
    cfg = enc.config
    if kind == "pedestrian":
        return cfg.start_offsets[0] + cfg.ped_speed_mps * (t - enc.t0)
    return cfg.start_offsets[1] + cfg.veh_speed_mps * (t - enc.t0)


def _truth_assessment(site: Site, enc: Encounter, maneuver: str, t: float, k: int, params):
    from .risk import assess_step

    route = site.route(maneuver)
    ped_s = min(max(truth_arc(enc, "pedestrian", t), 0.0), site.crosswalk.length)
    veh = point_at_arc_length(route, max(truth_arc(enc, "vehicle", t), 0.0))
    ped = point_at_arc_length(site.crosswalk, ped_s).point
    return assess_step(k, maneuver, (veh.point, veh.heading_deg), ped, params)


def oracle_earliest_crash(site: Site, enc: Encounter, tick: float, params=None,
                          horizon: int = 8) -> dict[str, int | None]:
    """Earliest crash step per maneuver from ground-truth positions at ``tick + k``."""
    from .risk import MANEUVERS, CrrParams

    params = params or CrrParams()
    out: dict[str, int | None] = {}
    for m in MANEUVERS:
        out[m] = None
        for k in range(1, horizon + 1):
            if _truth_assessment(site, enc, m, tick + k, k, params).is_crash:
                out[m] = k
                break
    return out


def oracle_containment_times(site: Site, enc: Encounter, params=None) -> list[tuple[float, str]]:
    """Every whole-second instant (and maneuver) at which the ground truth sits in the CRR."""
    from .risk import MANEUVERS, CrrParams

    params = params or CrrParams()
    hits = []
    for i in range(0, int(enc.config.duration_s) + 1):
        t = enc.t0 + i
        for m in MANEUVERS:
            if _truth_assessment(site, enc, m, t, 1, params).in_crr:
                hits.append((float(i), m))
    return hits

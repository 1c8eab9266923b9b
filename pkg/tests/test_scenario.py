import math

import numpy as np
import pytest

from vrutwin.errors import Infeasible
from vrutwin.geodesy import haversine_distance, point_at_arc_length
from vrutwin.scenario import (
    GenConfig,
    SiteConfig,
    dataset_from_runs,
    gen_dataset,
    gen_encounter,
    gen_runs,
    gen_trajectory,
    make_site,
    oracle_containment_times,
    truth_arc,
    truth_targets,
    windows_from_track,
    run_track,
)


def test_pedestrian_kinematics(site):
    tr = gen_trajectory(site, GenConfig(duration_s=10.0), "pedestrian")
    assert len(tr.records) == 50
    assert tr.truth_s[-1] == pytest.approx(14.0, abs=1e-9)
    assert tr.records[1].t - tr.records[0].t == pytest.approx(0.2)


def test_vehicle_increments(site):
    tr = gen_trajectory(site, GenConfig(duration_s=20.0), "vehicle")
    np.testing.assert_allclose(np.diff(tr.truth_s), 11.176, atol=1e-9)
    # the measured positions agree: cumulative haversine within 0.1 % of ground truth
    pts = [r.pos for r in tr.records]
    walked = sum(haversine_distance(a, b) for a, b in zip(pts, pts[1:]))
    assert walked == pytest.approx(tr.truth_s[-1] - tr.truth_s[0], rel=1e-3)


def test_same_seed_same_stream(site):
    cfg = GenConfig(seed=5).with_noise(0.1)
    a = gen_runs(site, cfg, 3, "vehicle_left")
    b = gen_runs(site, cfg, 3, "vehicle_left")
    assert [r.records for r in a] == [r.records for r in b]
    c = gen_runs(site, GenConfig(seed=6).with_noise(0.1), 3, "vehicle_left")
    assert [r.records for r in a] != [r.records for r in c]


def test_window_counts(site):
    tr = gen_trajectory(site, GenConfig(duration_s=10.0), "pedestrian")
    x, y = windows_from_track(run_track(site, tr, "pedestrian"), 4, 8)
    assert x.shape == (39, 4, 8) and y.shape == (39, 8)
    short = gen_trajectory(site, GenConfig(duration_s=2.0), "pedestrian")
    x, y = windows_from_track(run_track(site, short, "pedestrian"), 4, 8)
    assert x.shape == (0, 4, 8) and y.shape == (0, 8)


def test_identical_runs_double_the_dataset(site):
    runs = gen_runs(site, GenConfig(seed=2), 1, "vehicle_through")
    x1, y1 = dataset_from_runs(site, "vehicle_through", [runs[0].records])
    x2, y2 = dataset_from_runs(site, "vehicle_through", [runs[0].records] * 2)
    assert len(x2) == 2 * len(x1) > 0
    np.testing.assert_array_equal(x2[: len(x1)], x2[len(x1):])
    np.testing.assert_array_equal(y2[: len(y1)], y1)


def test_zero_noise_targets_equal_truth(site):
    runs = gen_runs(site, GenConfig(seed=3), 4, "vehicle_through")
    _, y = dataset_from_runs(site, "vehicle_through", [r.records for r in runs])
    np.testing.assert_allclose(y, truth_targets(site, "vehicle_through", runs), atol=1e-3)
    # through the turn, summed chords fall slightly short of the arc
    runs = gen_runs(site, GenConfig(seed=3), 4, "vehicle_left")
    _, y = dataset_from_runs(site, "vehicle_left", [r.records for r in runs])
    truth = truth_targets(site, "vehicle_left", runs)
    assert np.all(y <= truth + 1e-3)
    np.testing.assert_allclose(y, truth, rtol=0.01)


def test_gen_dataset_shapes(site):
    ds = gen_dataset(site, GenConfig(seed=1), 2)
    assert ds["pedestrian"][0].shape[1:] == (4, 8)
    assert ds["vehicle_through"][0].shape[1:] == (10, 8)
    assert all(len(x) == len(y) > 0 for x, y in ds.values())


def test_default_zone_bounds(site):
    z = site.veh_zone
    assert site.distance_to_crosswalk(z.s_max) == pytest.approx(58.42, abs=0.01)
    assert site.distance_to_crosswalk(z.s_min) == pytest.approx(167.64, abs=0.01)


def test_zone_falls_back_to_speed_limit():
    site = make_site(SiteConfig(zone_speed_mps=0.0))
    assert site.distance_to_crosswalk(site.veh_zone.s_min) == pytest.approx(167.64, abs=0.01)


def test_left_turn_ends_perpendicular(site):
    start = point_at_arc_length(site.approach, site.approach.length).heading_deg
    end = point_at_arc_length(site.left_turn, site.left_turn.length).heading_deg
    turn = (start - end) % 360.0
    assert turn == pytest.approx(90.0, abs=0.5)


def test_collide_encounter_gets_close(site):
    for seed in range(3):
        for m in ("through", "left_turn"):
            enc = gen_encounter(site, GenConfig(seed=seed, maneuver=m), collide=True)
            route = site.route(m)
            gaps = []
            for i in range(int(enc.config.duration_s) + 1):
                t = enc.t0 + i
                ped_s = min(max(truth_arc(enc, "pedestrian", t), 0.0), site.crosswalk.length)
                ped = point_at_arc_length(site.crosswalk, ped_s).point
                veh = point_at_arc_length(route, truth_arc(enc, "vehicle", t)).point
                gaps.append(haversine_distance(ped, veh))
            assert min(gaps) < 2.6


def test_safe_encounter_never_in_crr(site):
    for seed in range(5):
        for m in ("through", "left_turn"):
            enc = gen_encounter(site, GenConfig(seed=seed, maneuver=m), collide=False)
            assert oracle_containment_times(site, enc) == []


def test_stationary_pedestrian_cannot_collide(site):
    with pytest.raises(Infeasible):
        gen_encounter(site, GenConfig(ped_speed_mps=0.0), collide=True)


def test_truth_arc_matches_records(site):
    enc = gen_encounter(site, GenConfig(seed=8), collide=True)
    for r, s in zip(enc.veh.records, enc.veh.truth_s):
        assert truth_arc(enc, "vehicle", r.t) == pytest.approx(s, abs=1e-6)
    assert math.isfinite(enc.conflict_time)

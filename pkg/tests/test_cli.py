import json

import pytest

from vrutwin.cli import main, sha256_file
from vrutwin.predictor.persist import dumps_model

TINY = {"model": {"enc1_units": 4, "enc2_units": 4, "dec_units": 3}}


def run(*argv) -> int:
    return main([str(a) for a in argv])


def tree(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


@pytest.fixture
def gen_dir(tmp_path):
    out = tmp_path / "gen"
    assert run("generate", "--out", out, "--seed", 3, "--runs", 2) == 0
    return out


def test_generate_layout(gen_dir):
    files = set(tree(gen_dir))
    assert {"site.json", "ped.jsonl", "veh.jsonl", "truth.csv", "encounter.json", "manifest.json"} <= files
    assert "corpus/vehicle_left/run_001.jsonl" in files
    ped = (gen_dir / "ped.jsonl").read_text().splitlines()
    veh = (gen_dir / "veh.jsonl").read_text().splitlines()
    dt_ped = json.loads(ped[1])["t"] - json.loads(ped[0])["t"]
    dt_veh = json.loads(veh[1])["t"] - json.loads(veh[0])["t"]
    assert dt_ped == pytest.approx(0.2) and dt_veh == pytest.approx(1.0)


def test_generate_is_byte_identical(tmp_path, gen_dir):
    again = tmp_path / "again"
    assert run("generate", "--out", again, "--seed", 3, "--runs", 2) == 0
    a, b = tree(gen_dir), tree(again)
    man_a, man_b = json.loads(a.pop("manifest.json")), json.loads(b.pop("manifest.json"))
    assert a == b
    assert man_a["outputs"] == man_b["outputs"]
    assert man_a["config_digest"] == man_b["config_digest"]


def test_invalid_site_file(tmp_path, capsys):
    bad = tmp_path / "site.json"
    bad.write_text('{"format_version": 1, "paths": {}}')
    assert run("generate", "--out", tmp_path / "o", "--site", bad) != 0
    assert "error" in capsys.readouterr().err
    bad.write_text("{not json")
    assert run("generate", "--out", tmp_path / "o", "--site", bad) != 0


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"gen": {"sed": 1}}')
    assert run("generate", "--out", tmp_path / "o", "--config", cfg) != 0


def test_train_eval_and_rerun_checksum(tmp_path, gen_dir):
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert run("train", "--role", "vehicle_through", "--data", gen_dir, "--out", out,
                   "--config", cfg, "--epochs", 3, "--seed", 1) == 0
        outs.append(out)
    m = "model_vehicle_through.json"
    assert sha256_file(outs[0] / m) == sha256_file(outs[1] / m)
    curve = (outs[0] / "curve_vehicle_through.csv").read_text().splitlines()
    assert curve[0] == "epoch,train_mae,val_mae" and len(curve) == 4

    ev = tmp_path / "ev"
    assert run("eval", "--model", outs[0] / m, "--data", gen_dir, "--out", ev) == 0
    rep = json.loads((ev / "eval_vehicle_through.json").read_text())
    assert rep["role"] == "vehicle_through" and rep["rmse_m"] > 0.0
    assert run("eval", "--model", outs[0] / m, "--data", gen_dir, "--out", ev, "--role", "pedestrian") != 0

    assert run("verify", outs[0] / "manifest.json") == 0
    (outs[0] / m).write_text("{}")
    assert run("verify", outs[0] / "manifest.json") != 0


def test_train_rejects_wrong_input_steps(tmp_path, gen_dir, capsys):
    rc = run("train", "--role", "vehicle_left", "--data", gen_dir, "--out", tmp_path / "t", "--input-steps", 4)
    assert rc != 0
    assert "requires 10 input steps" in capsys.readouterr().err


def test_replay_missing_model_fails_first(tmp_path, gen_dir, capsys):
    rc = run("replay", "--data", gen_dir, "--out", tmp_path / "r",
             "--model", f"pedestrian={tmp_path / 'nope.json'}",
             "--model", f"vehicle_through={tmp_path / 'nope.json'}",
             "--model", f"vehicle_left={tmp_path / 'nope.json'}")
    assert rc != 0
    assert not (tmp_path / "r").exists()
    assert "error" in capsys.readouterr().err


def saved_models(models, d):
    d.mkdir(exist_ok=True)
    args = []
    for role, m in models.items():
        p = d / f"model_{role}.json"
        p.write_text(dumps_model(m))
        args += ["--model", f"{role}={p}"]
    return args


@pytest.mark.slow
@pytest.mark.parametrize("encounter,maneuver", [("collide", "through"), ("collide", "left_turn"), ("safe", "through")])
def test_replay_alerts(tmp_path, models, encounter, maneuver):
    data = tmp_path / "data"
    assert run("generate", "--out", data, "--seed", 11, "--encounter", encounter, "--maneuver", maneuver) == 0
    out = tmp_path / "replay"
    assert run("replay", "--data", data, "--out", out, *saved_models(models, tmp_path / "m")) == 0
    summary = json.loads((out / "summary.json").read_text())
    if encounter == "safe":
        assert summary["total_alerts"] == 0
    else:
        assert summary["total_alerts"] >= 1
        assert summary["alerts"][maneuver]["earliest_k"] in range(1, 9)
    assert run("verify", out / "manifest.json") == 0

"""Command-line entry point: generate, train, eval, replay, verify.

Every command writes its outputs plus a ``manifest.json`` into ``--out``.
Diagnostics go to stderr; the exit code is 0 only when the run completed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, fields
from pathlib import Path
from typing import Sequence

from . import __version__
from .engine import TwinEngine, replay, summarize, write_event_log
from .errors import ConfigError, TwinError
from .ingest import read_stream, write_jsonl
from .predictor import ROLE_EPOCHS, ROLE_INPUT_STEPS, ROLES, ModelConfig, evaluate, load_model, train
from .predictor.persist import dumps_model
from .scenario import ROLE_SETUP, GenConfig, SiteConfig, dataset_from_runs, gen_encounter, gen_runs, make_site
from .site import Site, load_site

MANIFEST = "manifest.json"
CONFIG_SECTIONS = ("site", "gen", "model")


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def config_digest(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def load_config(path: str | None) -> dict:
    """Read a JSON config with optional ``site``, ``gen`` and ``model`` sections."""
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc.msg})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = sorted(set(doc) - set(CONFIG_SECTIONS))
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {unknown}")
    return doc


def _build(cls, section: dict | None, **overrides):
    section = dict(section or {})
    names = {f.name for f in fields(cls) if f.init}
    unknown = sorted(set(section) - names)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} field(s) {unknown}")
    if "start_offsets" in section:
        section["start_offsets"] = tuple(section["start_offsets"])
    section.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, TwinError):
            raise
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from None


def write_manifest(out: Path, command: str, argv: Sequence[str], config: dict, seeds: dict,
                   inputs: Sequence[Path], outputs: Sequence[str]) -> Path:
    doc = {
        "command": command,
        "argv": list(argv),
        "version": __version__,
        "config": config,
        "config_digest": config_digest(config),
        "seeds": seeds,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {name: sha256_file(out / name) for name in sorted(outputs)},
    }
    path = out / MANIFEST
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path


def verify_manifest(path: Path) -> list[str]:
    """Names of outputs whose checksum no longer matches (missing files included)."""
    doc = json.loads(path.read_text(encoding="utf-8"))
    bad = []
    for name, digest in doc["outputs"].items():
        p = path.parent / name
        if not p.is_file() or sha256_file(p) != digest:
            bad.append(name)
    return bad


def _write(out: Path, name: str, text: str, written: list[str]) -> None:
    p = out / name
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")
    written.append(name)


def _site_from(args, data_dir: Path | None = None) -> tuple[Site, list[Path]]:
    if args.site:
        return load_site(args.site), [Path(args.site)]
    if data_dir is not None and (data_dir / "site.json").is_file():
        return load_site(data_dir / "site.json"), [data_dir / "site.json"]
    raise ConfigError("no site given (use --site or a data directory containing site.json)")


def cmd_generate(args, argv) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs: list[Path] = []
    if args.site:
        site, inputs = load_site(args.site), [Path(args.site)]
        site_cfg = None
    else:
        site_cfg = _build(SiteConfig, cfg.get("site"))
        site = make_site(site_cfg)
    gen = _build(GenConfig, cfg.get("gen"), seed=args.seed, maneuver=args.maneuver)
    if args.noise is not None:
        gen = gen.with_noise(args.noise)
    written: list[str] = []
    _write(out, "site.json", json.dumps(site.to_dict(), indent=2) + "\n", written)

    if args.encounter != "none":
        enc = gen_encounter(site, gen, collide=args.encounter == "collide")
        _write(out, "ped.jsonl", write_jsonl(enc.ped.records), written)
        _write(out, "veh.jsonl", write_jsonl(enc.veh.records), written)
        rows = ["t,agent_id,arc_length_m"]
        for t, aid, s in enc.ped.truth_rows() + enc.veh.truth_rows():
            rows.append(f"{t!r},{aid},{s!r}")
        _write(out, "truth.csv", "\n".join(rows) + "\n", written)
        meta = {
            "maneuver": enc.maneuver,
            "collide": enc.collide,
            "conflict_time_s": enc.conflict_time,
            "t0": enc.t0,
            "start_offsets": list(enc.config.start_offsets),
            "duration_s": enc.config.duration_s,
        }
        _write(out, "encounter.json", json.dumps(meta, indent=2) + "\n", written)

    for role in ROLE_SETUP if args.runs > 0 else ():
        for i, traj in enumerate(gen_runs(site, gen, args.runs, role)):
            _write(out, f"corpus/{role}/run_{i:03d}.jsonl", write_jsonl(traj.records), written)

    config = {"site": asdict(site_cfg) if site_cfg else None, "gen": asdict(gen),
              "encounter": args.encounter, "runs": args.runs}
    write_manifest(out, "generate", argv, config, {"gen": gen.seed}, inputs, written)
    print(f"generate: wrote {len(written)} files to {out}")
    return 0


def _corpus_runs(data: Path, role: str) -> tuple[list, list[Path]]:
    files = sorted((data / "corpus" / role).glob("run_*.jsonl"))
    if not files:
        raise ConfigError(f"no {role} runs under {data / 'corpus' / role}")
    return [read_stream(f) for f in files], files


def cmd_train(args, argv) -> int:
    cfg = load_config(args.config)
    data, out = Path(args.data), Path(args.out)
    section = {"input_steps": ROLE_INPUT_STEPS[args.role], "epochs": ROLE_EPOCHS[args.role], **cfg.get("model", {}), "role": args.role}
    model_cfg = _build(ModelConfig, section, seed=args.seed, epochs=args.epochs, input_steps=args.input_steps)
    site, site_inputs = _site_from(args, data)
    runs, files = _corpus_runs(data, args.role)
    dataset = dataset_from_runs(site, args.role, runs, model_cfg.output_steps)
    model, report = train(model_cfg, dataset, split=args.split, progress=args.progress)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    _write(out, f"model_{args.role}.json", dumps_model(model), written)
    _write(out, f"curve_{args.role}.csv", report.curve_csv(), written)
    rep = {"role": args.role, "seed": report.seed, "epochs": model_cfg.epochs, "n_train": report.n_train,
           "n_val": report.n_val, "final_train_mae_m": report.train_mae[-1],
           "final_val_mae_m": report.val_mae[-1], "test_rmse_m": report.test_rmse}
    _write(out, f"report_{args.role}.json", json.dumps(rep, indent=2) + "\n", written)
    config = {"model": model_cfg.to_dict(), "split": args.split}
    write_manifest(out, "train", argv, config, {"model": model_cfg.seed}, site_inputs + files, written)
    print(f"train {args.role}: val RMSE {report.test_rmse:.4f} m after {model_cfg.epochs} epochs")
    return 0


def cmd_eval(args, argv) -> int:
    data, out = Path(args.data), Path(args.out)
    model = load_model(args.model)
    if args.role and args.role != model.role:
        raise ConfigError(f"model {args.model} is a {model.role} model, not {args.role}")
    site, site_inputs = _site_from(args, data)
    runs, files = _corpus_runs(data, model.role)
    x, y = dataset_from_runs(site, model.role, runs, model.config.output_steps)
    report = {"role": model.role, "n_windows": int(len(x)), "rmse_m": evaluate(model, x, y)}
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    _write(out, f"eval_{model.role}.json", json.dumps(report, indent=2) + "\n", written)
    write_manifest(out, "eval", argv, {"role": model.role}, {}, [Path(args.model)] + site_inputs + files, written)
    print(f"eval {model.role}: RMSE {report['rmse_m']:.4f} m over {report['n_windows']} windows")
    return 0


def parse_model_args(specs: Sequence[str]) -> dict[str, Path]:
    """``role=path`` or bare ``path`` (role read from the file) into a role map."""
    paths: dict[str, Path] = {}
    for spec in specs:
        role, sep, path = spec.partition("=")
        if not sep:
            path, role = spec, load_model(spec).role
        if role not in ROLES:
            raise ConfigError(f"unknown model role {role!r}")
        if role in paths:
            raise ConfigError(f"two models given for role {role}")
        paths[role] = Path(path)
    missing = [r for r in ROLES if r not in paths]
    if missing:
        raise ConfigError(f"missing model(s) for role(s) {missing}")
    return paths


def cmd_replay(args, argv) -> int:
    out = Path(args.out)
    data = Path(args.data) if args.data else None
    paths = parse_model_args(args.model)
    # load everything before the first tick so bad inputs fail fast
    models = {}
    for role, p in paths.items():
        m = load_model(p)
        if m.role != role:
            raise ConfigError(f"{p} holds a {m.role} model, given as {role}")
        models[role] = m
    site, site_inputs = _site_from(args, data)
    ped_path = Path(args.ped) if args.ped else (data / "ped.jsonl" if data else None)
    veh_path = Path(args.veh) if args.veh else (data / "veh.jsonl" if data else None)
    if ped_path is None or veh_path is None:
        raise ConfigError("give --data or both --ped and --veh")
    ped, veh = read_stream(ped_path), read_stream(veh_path)
    engine = TwinEngine(site, models["pedestrian"], models["vehicle_through"], models["vehicle_left"])
    events = replay(engine, ped, veh)
    summary = summarize(events)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    _write(out, "events.jsonl", write_event_log(events), written)
    _write(out, "summary.json", json.dumps(summary, indent=2) + "\n", written)
    inputs = [paths[r] for r in ROLES] + site_inputs + [ped_path, veh_path]
    write_manifest(out, "replay", argv, {"align_tol_s": engine.align_tol_s}, {}, inputs, written)
    for line in summary["summary_lines"]:
        print(line)
    print(f"replay: {summary['ticks']} ticks, {summary['evaluated']} evaluated, {summary['total_alerts']} alerts")
    return 0


def cmd_verify(args, argv) -> int:
    bad = verify_manifest(Path(args.manifest))
    for name in bad:
        print(f"checksum mismatch: {name}", file=sys.stderr)
    if bad:
        return 1
    print("verify: all checksums match")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vrutwin", description="Pedestrian-vehicle collision warning twin.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a site, an encounter and optional training runs")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.add_argument("--config", help="JSON with optional site/gen sections")
    g.add_argument("--site", help="use this site file instead of the synthetic site")
    g.add_argument("--maneuver", choices=("through", "left_turn"))
    g.add_argument("--encounter", choices=("collide", "safe", "none"), default="collide")
    g.add_argument("--runs", type=int, default=0, help="training runs per role")
    g.add_argument("--noise", type=float, help="one sigma for speed, position and IMU noise")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train one role's predictor on a generated corpus")
    t.add_argument("--role", required=True, choices=ROLES)
    t.add_argument("--data", required=True, help="directory produced by generate --runs")
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--config", help="JSON with a model section")
    t.add_argument("--site")
    t.add_argument("--epochs", type=int)
    t.add_argument("--input-steps", type=int)
    t.add_argument("--split", type=float, default=0.8)
    t.add_argument("--progress", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="RMSE of a model on a generated corpus")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--role", choices=ROLES, help="fail unless the model has this role")
    e.add_argument("--site")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("replay", help="run the twin over recorded streams")
    r.add_argument("--model", action="append", required=True, metavar="ROLE=PATH")
    r.add_argument("--out", required=True)
    r.add_argument("--data", help="directory with ped.jsonl, veh.jsonl and site.json")
    r.add_argument("--site")
    r.add_argument("--ped")
    r.add_argument("--veh")
    r.set_defaults(func=cmd_replay)

    v = sub.add_parser("verify", help="re-check the output checksums of a manifest")
    v.add_argument("manifest")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except (TwinError, OSError, json.JSONDecodeError) as exc:
        print(f"vrutwin {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

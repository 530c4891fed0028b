"""Command-line entry points.

Batch subcommands (simulate, play, gait-dump, calibrate-camera, bench) run
the library in-process so their outputs stay byte-reproducible; `serve`
starts the HTTP/WebSocket service that the trajectory editor talks to.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .camera_geometry import (
    CalibrationError,
    calibrate_extrinsics,
    default_camera_path,
    load_camera,
    load_landmarks_csv,
)
from .robot_model import load_default_model, load_model
from .runtime import (
    Runtime,
    RuntimeConfig,
    ScenarioEvent,
    default_config_path,
    gait_dump_csv,
    load_runtime_config,
    load_scenario,
    snapshot_lines,
)


def _load_config(path: str | None) -> RuntimeConfig:
    return load_runtime_config(path if path else default_config_path())


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        cfg = _load_config(args.config)
    except FileNotFoundError:
        return _fail(f"config file not found: {args.config}")
    scenario: list[ScenarioEvent] = []
    if args.scenario:
        try:
            scenario = load_scenario(args.scenario)
        except FileNotFoundError:
            return _fail(f"scenario file not found: {args.scenario}")
    runtime = Runtime(cfg)
    snapshots = runtime.run(scenario, args.ticks)
    text = snapshot_lines(snapshots)
    if args.log:
        Path(args.log).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_play(args: argparse.Namespace) -> int:
    try:
        cfg = _load_config(args.config)
    except FileNotFoundError:
        return _fail(f"config file not found: {args.config}")
    runtime = Runtime(cfg)
    if args.motion not in runtime.motions:
        return _fail(f"unknown motion '{args.motion}' (available: {sorted(runtime.motions)})")
    duration = runtime.motions[args.motion].duration
    ticks = args.ticks or int(duration * cfg.loop_rate) + 20
    scenario = [ScenarioEvent(t=0.0, command="play", args={"name": args.motion})]
    snapshots = runtime.run(scenario, ticks)
    text = snapshot_lines(snapshots)
    if args.log:
        Path(args.log).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_gait_dump(args: argparse.Namespace) -> int:
    try:
        cfg = _load_config(args.config)
    except FileNotFoundError:
        return _fail(f"config file not found: {args.config}")
    csv_text = gait_dump_csv(cfg, args.ticks, vx=args.vx, vy=args.vy, omega=args.omega)
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    return 0


def cmd_calibrate_camera(args: argparse.Namespace) -> int:
    try:
        cam = load_camera(args.camera if args.camera else default_camera_path())
    except FileNotFoundError:
        return _fail(f"camera file not found: {args.camera}")
    try:
        observations = load_landmarks_csv(args.landmarks)
    except FileNotFoundError:
        return _fail(f"landmark file not found: {args.landmarks}")
    except ValueError as exc:
        return _fail(str(exc))
    model = load_model(args.model) if args.model else load_default_model()
    try:
        fitted, report = calibrate_extrinsics(observations, cam, model)
    except CalibrationError as exc:
        return _fail(str(exc))
    print(f"observations:   {report['observations']}")
    print(f"before RMS [m]: {report['before_rms_m']:.6f}")
    print(f"after RMS [m]:  {report['after_rms_m']:.6f}")
    print(f"evaluations:    {report['evals']} ({'converged' if report['converged'] else 'budget spent'})")
    result = {
        "position": list(fitted.position),
        "orientation": list(fitted.orientation),
        "report": report,
    }
    if args.out:
        Path(args.out).write_text(json.dumps(result, indent=2) + "\n")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    try:
        cfg = _load_config(args.config)
    except FileNotFoundError:
        return _fail(f"config file not found: {args.config}")
    editor = args.editor_dir
    if editor is None:
        candidate = Path.cwd() / "frontend" / "dist"
        editor = candidate if candidate.is_dir() else None
    app = create_app(cfg, motion_dir=args.motion_dir, editor_dir=editor)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    runtime = Runtime(cfg)
    runtime.command_gait(0.3, 0.1, 0.05, True)
    runtime.run([], 50)  # warm-up and gait ramp-in
    stages = {"total": 0.0}
    t0 = time.perf_counter()
    runtime.run([], args.ticks)
    stages["total"] = (time.perf_counter() - t0) / args.ticks
    budget = 1.0 / cfg.loop_rate / 10.0 * 100.0  # 10 ms at the default rate
    per_tick_ms = stages["total"] * 1e3
    print(f"ticks:          {args.ticks}")
    print(f"loop rate:      {cfg.loop_rate:.0f} Hz")
    print(f"mean tick time: {per_tick_ms:.3f} ms")
    print(f"budget:         10.000 ms")
    print(f"verdict:        {'PASS' if per_tick_ms < 10.0 else 'FAIL'}")
    return 0 if per_tick_ms < 10.0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="humanoidsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the control loop on a scenario script")
    p.add_argument("--config", help="runtime config JSON (default: shipped config)")
    p.add_argument("--scenario", help="scenario script JSON")
    p.add_argument("--ticks", type=int, default=100)
    p.add_argument("--log", help="write snapshots to this JSONL file (default: stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("play", help="play a motion from the library and log snapshots")
    p.add_argument("--motion", required=True)
    p.add_argument("--config")
    p.add_argument("--ticks", type=int, default=0, help="0 means motion duration plus margin")
    p.add_argument("--log")
    p.set_defaults(func=cmd_play)

    p = sub.add_parser("gait-dump", help="write per-tick gait waveforms as CSV")
    p.add_argument("--config")
    p.add_argument("--ticks", type=int, default=400)
    p.add_argument("--vx", type=float, default=0.3)
    p.add_argument("--vy", type=float, default=0.0)
    p.add_argument("--omega", type=float, default=0.0)
    p.add_argument("--out", help="output CSV path (default: stdout)")
    p.set_defaults(func=cmd_gait_dump)

    p = sub.add_parser("calibrate-camera", help="fit camera mounting offsets to landmarks")
    p.add_argument("--camera", help="camera intrinsics JSON (default: shipped camera)")
    p.add_argument("--landmarks", required=True, help="CSV u,v,x,y,head_yaw,head_pitch")
    p.add_argument("--model", help="robot model JSON (default: shipped model)")
    p.add_argument("--out", help="write fitted offsets JSON here")
    p.set_defaults(func=cmd_calibrate_camera)

    p = sub.add_parser("serve", help="start the HTTP/WebSocket service")
    p.add_argument("--config")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--motion-dir", help="directory for saved motions")
    p.add_argument("--editor-dir", help="static editor files to mount at /editor")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("bench", help="measure the mean control-tick wall time")
    p.add_argument("--config")
    p.add_argument("--ticks", type=int, default=500)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry points.

Exit codes are a contract: 0 success, 2 configuration error, 3 protocol
violation (including an incomplete scripted workflow), 4 safety abort.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import compare_report, render_report_text
from .config import load_config
from .errors import ConfigError, LuscanError, ProtocolError, ReplayError, ReportError
from .kinematics import Gantry
from .session import EXIT_CONFIG, EXIT_PROTOCOL, SessionRuntime, replay
from .scripts import SCRIPTS, parse_script, render_script
from .torso import BreathingModel, TorsoDims, TorsoModel, anchors_from_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="luscan",
        description="Tele-operated robotic lung-ultrasound scanning simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the live teleoperation server")
    p.add_argument("--config", help="config JSON (falls back to LUS_CONFIG env)")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--out", help="session log directory")
    p.add_argument("--console", help="static directory served under /console")

    p = sub.add_parser("run-session", help="run a scripted headless session")
    p.add_argument("--config", help="config JSON (falls back to LUS_CONFIG env)")
    p.add_argument("--script", required=True,
                   help="script file, or a builtin name: " + ", ".join(sorted(SCRIPTS)))
    p.add_argument("--out", required=True, help="session log directory")

    p = sub.add_parser("replay", help="verify a recorded session reproduces")
    p.add_argument("--session", required=True)

    p = sub.add_parser("workspace-check", help="anchor reachability table")
    p.add_argument("--config", help="config JSON (falls back to LUS_CONFIG env)")

    p = sub.add_parser("analyze", help="compare two recorded sessions")
    p.add_argument("--session-a", required=True)
    p.add_argument("--session-b", required=True)
    p.add_argument("--report", required=True, help="output report JSON path")
    p.add_argument("--margin-force", type=float)
    p.add_argument("--margin-cnr", type=float)
    p.add_argument("--margin-score", type=float)
    p.add_argument("--margin-duration-min", type=float)
    p.add_argument("--scores-a", help="expert score CSV for session A")
    p.add_argument("--scores-b", help="expert score CSV for session B")

    p = sub.add_parser("make-script", help="emit a builtin script as JSONL")
    p.add_argument("--config", help="config JSON (falls back to LUS_CONFIG env)")
    p.add_argument("--name", required=True, choices=sorted(SCRIPTS))
    p.add_argument("--out", help="output path (default stdout)")
    return parser


def _load_config_or_exit(path) -> dict:
    try:
        return load_config(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def cmd_serve(args) -> int:
    cfg = _load_config_or_exit(args.config)
    from .server import Server

    server = Server(cfg, port=args.port, host=args.host, out_dir=args.out,
                    console_dir=args.console)
    print(f"listening on {args.host}:{server.port} "
          f"(ndjson tcp, ws at /ws, console at /console)", flush=True)
    return server.serve_forever()


def cmd_run_session(args) -> int:
    cfg = _load_config_or_exit(args.config)
    if args.script in SCRIPTS:
        script = SCRIPTS[args.script](cfg)
    else:
        path = Path(args.script)
        if not path.is_file():
            print(f"config error: script {path} not found", file=sys.stderr)
            return EXIT_CONFIG
        try:
            script = parse_script(path)
        except (ProtocolError, LuscanError) as exc:
            print(f"script error: {exc}", file=sys.stderr)
            return EXIT_PROTOCOL
    runtime = SessionRuntime(cfg, out_dir=args.out)
    code = runtime.run_script(script)
    report = runtime.build_report()
    print(json.dumps({
        "exit": code,
        "phase": report["phase"],
        "completed_views": report["completed_views"],
        "recordings": len(report["recordings"]),
        "estop": report["estop_latched"],
        "violation": report["protocol_violation"],
    }, indent=2))
    return code


def cmd_replay(args) -> int:
    try:
        report = replay(args.session)
    except ReplayError as exc:
        print(f"replay error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(report, indent=2))
    return 0 if report["ok"] else 1


def cmd_workspace_check(args) -> int:
    cfg = _load_config_or_exit(args.config)
    gantry = Gantry.from_config(cfg)
    t = cfg["torso"]
    rows = []
    all_ok = True
    for label, sd in (("mean", 0.0), ("mean+1sd", 1.0), ("mean-1sd", -1.0)):
        torso = TorsoModel(
            dims=TorsoDims(
                width_mm=t["width_mm"] + sd * t["width_sd_mm"],
                depth_mm=t["depth_mm"] + sd * t["depth_sd_mm"],
                height_mm=t["height_mm"] + sd * t["height_sd_mm"],
            ),
            breathing=BreathingModel(cfg["breathing"]["amplitude_mm"],
                                     cfg["breathing"]["period_s"],
                                     cfg["breathing"]["phase_rad"],
                                     cfg["breathing"]["enabled"]),
            center_mm=tuple(t["center_mm"]),
            anchors=anchors_from_config(cfg["regions"]),
        )
        reachable = {}
        for anchor in torso.anchors:
            ok = gantry.anchor_reachable(torso, anchor)
            reachable[f"{anchor.region_id}/{anchor.side}"] = ok
            all_ok = all_ok and ok
        count = sum(reachable.values())
        rows.append({"dims": label, "reachable": count, "total": len(reachable),
                     "anchors": reachable})
        print(f"{label:>9}: {count}/{len(reachable)} anchors reachable")
        for key, ok in sorted(reachable.items()):
            if not ok:
                print(f"          unreachable: {key}")
    print(json.dumps(rows, indent=2))
    return 0 if all_ok else 1


def cmd_analyze(args) -> int:
    # ROI geometry and default margins come from the config the sessions
    # were recorded with.
    manifest = Path(args.session_a) / "manifest.json"
    if manifest.is_file():
        cfg = json.loads(manifest.read_text(encoding="utf-8"))["config"]
    else:
        cfg = load_config(None)
    margins = {}
    if args.margin_force is not None:
        margins["force_N"] = args.margin_force
    if args.margin_cnr is not None:
        margins["cnr"] = args.margin_cnr
    if args.margin_score is not None:
        margins["score"] = args.margin_score
    if args.margin_duration_min is not None:
        margins["duration_min"] = args.margin_duration_min
    try:
        report = compare_report(args.session_a, args.session_b,
                                cfg["analysis"], margins=margins,
                                scores_a=args.scores_a, scores_b=args.scores_b)
    except ReportError as exc:
        print(f"report error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.report)
    out.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n",
                   encoding="utf-8")
    out.with_suffix(".txt").write_text(render_report_text(report), encoding="utf-8")
    print(render_report_text(report))
    return 0


def cmd_make_script(args) -> int:
    cfg = _load_config_or_exit(args.config)
    text = render_script(SCRIPTS[args.name](cfg))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {
        "serve": cmd_serve,
        "run-session": cmd_run_session,
        "replay": cmd_replay,
        "workspace-check": cmd_workspace_check,
        "analyze": cmd_analyze,
        "make-script": cmd_make_script,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())

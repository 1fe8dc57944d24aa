"""Command-line entry point: scene generation, trials, batches, replay, serving.

Exit codes: 0 success, 1 usage, 2 config or schema error, 3 runtime
divergence (replay mismatch).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import adapter as ad
from . import scene as sc
from . import simulator as sim
from . import techniques as tq

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _preset_config(name: str) -> ad.AdapterConfig:
    if name not in ad.PRESETS:
        raise SystemExit(EXIT_USAGE)
    return ad.PRESETS[name]()


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adaptsel", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a study environment scene")
    gen.add_argument("--env", required=True, choices=sorted(sim.ENVIRONMENTS))
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--target-size", type=float, required=True)
    gen.add_argument("--out", required=True)

    trial = sub.add_parser("trial", help="run one scripted trial on a scene file")
    trial.add_argument("--scene", required=True)
    trial.add_argument("--target", required=True, help="designated target id")
    trial.add_argument("--mode", default="adaptive")
    trial.add_argument("--preset", default="study", choices=sorted(ad.PRESETS))
    trial.add_argument("--seed", type=int, default=0)
    trial.add_argument("--trace", help="optional JSONL trace output path")

    batch = sub.add_parser("batch", help="run a batch of scripted trials")
    batch.add_argument("--config", help="batch config JSON path")
    batch.add_argument("--preset", default="study", choices=sorted(ad.PRESETS))
    batch.add_argument("--out", required=True, help="output directory")

    replay = sub.add_parser("replay", help="re-validate a recorded trial trace")
    replay.add_argument("--trace", required=True)

    serve = sub.add_parser("serve", help="host the interactive session service")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--scene", help="extra scene file to bundle")
    serve.add_argument("--preset", default="application", choices=sorted(ad.PRESETS))

    validate = sub.add_parser("validate", help="check a scene or batch config file")
    validate.add_argument("--scene", help="scene JSON path")
    validate.add_argument("--config", help="batch config JSON path")
    return parser


def cmd_generate(args) -> int:
    spec = sim.environment_spec(args.env, args.target_size, args.seed)
    scene, target_id = sim.generate_environment(spec)
    sc.save_scene(scene, args.out)
    print(target_id)
    return EXIT_OK


def cmd_trial(args) -> int:
    try:
        scene = sc.load_scene(args.scene)
    except (OSError, sc.SceneFormatError, json.JSONDecodeError) as exc:
        print(f"scene error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    config = _preset_config(args.preset)
    if args.mode != "adaptive" and args.mode not in config.techniques:
        print(
            f"mode must be 'adaptive' or one of {config.techniques}", file=sys.stderr
        )
        return EXIT_USAGE
    try:
        scene.by_id(args.target)
    except KeyError:
        print(f"unknown target id {args.target!r}", file=sys.stderr)
        return EXIT_CONFIG
    traj = sim.TrajectoryParams()
    sink = None
    if args.trace:
        sink = sim._TraceSink()
        sink.write(
            sim.trace_header(
                "trial_cli",
                config,
                preset=args.preset,
                scene=scene,
                target_id=args.target,
                mode=args.mode,
                seed=args.seed,
                traj=traj,
            )
        )
    result = sim.run_trial(
        scene, args.target, args.mode, traj, config, args.seed, sink
    )
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(sink.dump())
    print(
        json.dumps(
            {
                "success": result.success,
                "timeout": result.timeout,
                "selection_time": round(result.selection_time, 6),
                "rotational_movement": round(result.rotational_movement, 4),
                "translational_movement": round(result.translational_movement, 4),
                "error_count": result.error_count,
                "switch_count": len(result.switches),
                "final_technique": result.final_technique,
            },
            sort_keys=True,
        )
    )
    return EXIT_OK


def cmd_batch(args) -> int:
    doc = {}
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    doc.setdefault("preset", args.preset)
    try:
        batch = sim.BatchConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    config = _preset_config(batch.preset)
    rows = sim.run_batch(batch, config, out_dir=args.out)
    print(f"{len(rows)} trials -> {args.out}")
    return EXIT_OK


def _replay_trace(lines: list[dict]) -> tuple[int, str]:
    """Re-run the engine over one recorded trace; (exit code, message)."""
    if not lines or lines[0].get("type") != "header":
        return EXIT_CONFIG, "trace missing header record"
    header = lines[0]
    preset = header.get("preset")
    if preset not in ad.PRESETS:
        return EXIT_CONFIG, f"unknown preset {preset!r} in trace header"
    config = ad.PRESETS[preset]()
    if header.get("config_hash") != config.hash():
        return (
            EXIT_CONFIG,
            "config mismatch: trace hash "
            f"{header.get('config_hash')} vs current {config.hash()}",
        )
    scene = sc.scene_from_dict(header["scene"])
    mode = header["mode"]
    adapter_state = ad.AdapterState.initial(config)
    current = config.initial_technique if mode == "adaptive" else mode
    tech_states = {k: tq.TechniqueState(kind=k) for k in config.techniques}
    cursor_cache = tq.RaycursorCellCache()

    for i, rec in enumerate(lines[1:]):
        if rec.get("type") != "frame":
            continue
        p = rec["pointer"]
        pointer = sc.PointerState(
            controller_position=np.asarray(p["position"], dtype=float),
            pointing_direction=np.asarray(p["direction"], dtype=float),
            hmd_position=np.asarray(sim.HMD_POSITION, dtype=float),
            hmd_forward=np.asarray(sim.HMD_FORWARD, dtype=float),
            trigger=False,
            trackpad_delta=p["trackpad_delta"],
            timestamp=rec["t"],
        )
        ctx = sc.extract_context(
            scene, pointer, arm=config.arm, r_c=config.r_c, dominant=config.dominant
        )
        regions = {
            k: tq.regions_for(k, ctx, cursor_cache if k == "RayCursor" else None)
            for k in config.techniques
        }
        if mode == "adaptive":
            decision, adapter_state = ad.step(ctx, regions, config, adapter_state)
            if decision.switched:
                current = decision.new_technique
            got = {
                "optimal": decision.optimal,
                "switched": decision.switched,
                "scores": {
                    k: round(v["overall"], 12) for k, v in decision.scores.items()
                },
            }
            for key, value in got.items():
                if key in rec and rec[key] != value:
                    return (
                        EXIT_DIVERGENCE,
                        f"frame {i}: {key} diverged: trace {rec[key]!r} "
                        f"vs replay {value!r}",
                    )
        if rec.get("current") != current:
            return (
                EXIT_DIVERGENCE,
                f"frame {i}: technique diverged: trace {rec.get('current')!r} "
                f"vs replay {current!r}",
            )
        hit, tech_states[current] = tq.highlight(tech_states[current], ctx, pointer)
        if rec.get("highlight") != hit:
            return (
                EXIT_DIVERGENCE,
                f"frame {i}: highlight diverged: trace {rec.get('highlight')!r} "
                f"vs replay {hit!r}",
            )
    return EXIT_OK, "replay ok"


def cmd_replay(args) -> int:
    try:
        with open(args.trace) as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
    except (OSError, json.JSONDecodeError) as exc:
        print(f"trace error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code, message = _replay_trace(lines)
    stream = sys.stdout if code == EXIT_OK else sys.stderr
    print(message, file=stream)
    return code


def cmd_serve(args) -> int:
    from . import service

    extra = {}
    if args.scene:
        try:
            extra["custom"] = sc.load_scene(args.scene)
        except (OSError, sc.SceneFormatError, json.JSONDecodeError) as exc:
            print(f"scene error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    app = service.create_app(default_preset=args.preset, extra_scenes=extra)
    import uvicorn

    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except SystemExit:
        print(f"failed to serve on {args.host}:{args.port}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_validate(args) -> int:
    if not args.scene and not args.config:
        print("nothing to validate: pass --scene and/or --config", file=sys.stderr)
        return EXIT_USAGE
    if args.scene:
        try:
            scene = sc.load_scene(args.scene)
        except (OSError, sc.SceneFormatError, json.JSONDecodeError) as exc:
            print(f"scene invalid: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"scene ok: {len(scene.targets)} targets")
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
            batch = sim.BatchConfig.from_dict(doc)
        except (OSError, json.JSONDecodeError, TypeError, ValueError) as exc:
            print(f"config invalid: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        total = (
            len(batch.environments)
            * len(batch.target_sizes)
            * batch.repetitions
            * len(batch.modes)
        )
        print(f"config ok: {total} trials")
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "trial": cmd_trial,
    "batch": cmd_batch,
    "replay": cmd_replay,
    "serve": cmd_serve,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())

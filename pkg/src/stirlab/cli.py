"""Command-line interface.

Subcommands: gen-traj, calibrate, run select, run speed, replay,
report.  All errors exit nonzero with a one-line diagnostic.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import confidence as confidence_mod
from . import controller as controller_mod
from .config import ExperimentConfig, load_config
from .errors import ConfigError, StirlabError
from .harness import (run_speed_comparison, run_trajectory_selection,
                      reaggregate_trials, write_selection_outputs, write_speed_outputs)
from .trajectory import TrajectoryKind, generate, time_parameterize, write_waypoints


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="config file")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stirlab",
        description="Stirred water-trap pest counting simulator and experiment harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-traj", help="emit a waypoint file for one trajectory")
    _common_flags(p)
    p.add_argument("--kind", required=True, help="trajectory kind, e.g. circle")
    p.add_argument("--speed-scale", type=float, default=0.5)

    p = sub.add_parser("calibrate", help="fit confidence coefficients from simulation")
    _common_flags(p)
    p.add_argument("--frames", type=int, default=5000, help="training frames to simulate")

    p = sub.add_parser("run", help="run an experiment from a config file")
    run_sub = p.add_subparsers(dest="experiment", required=True)
    for name, blurb in (("select", "trajectory selection sweep"),
                        ("speed", "constant vs adaptive speed comparison")):
        q = run_sub.add_parser(name, help=blurb)
        _common_flags(q)
        if name == "speed":
            q.add_argument("--coef", type=Path, default=None, help="coefficient file")

    p = sub.add_parser("replay", help="replay a recorded confidence stream")
    _common_flags(p)
    p.add_argument("--trace", type=Path, required=True, help="input stream (frame,t_s,C)")

    p = sub.add_parser("report", help="re-aggregate existing trial CSVs")
    _common_flags(p)
    p.add_argument("--trials", type=Path, required=True, help="existing trials.csv")

    return parser


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    return cfg


def _cmd_gen_traj(args) -> int:
    cfg = _resolve_config(args)
    kind = TrajectoryKind.from_name(args.kind)
    seed = cfg.master_seed
    path = generate(kind, cfg.arena, seed=seed, spacing=cfg.spacing,
                    n_lines=cfg.n_lines)
    timed = time_parameterize(path, args.speed_scale, v_max=cfg.v_max, dt=cfg.dt)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out_path = cfg.out_dir / f"traj_{kind.value}_seed{seed}.txt"
    with open(out_path, "w", encoding="utf-8") as fh:
        write_waypoints(timed, kind, seed, fh)
    if not args.quiet:
        print(f"wrote {out_path}")
    return 0


def _cmd_calibrate(args) -> int:
    cfg = _resolve_config(args)
    coef = confidence_mod.calibrate(
        n_frames=args.frames, seed=cfg.master_seed, arena=cfg.arena,
        template=cfg.template, flow=cfg.flow, detector=cfg.detector,
        count_normalizer=cfg.count_normalizer,
    )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    out_path = cfg.out_dir / "coefficients.txt"
    confidence_mod.save(coef, out_path)
    if not args.quiet:
        print(f"wrote {out_path} ({coef.training_meta})")
    return 0


def _cmd_run_select(args) -> int:
    cfg = _resolve_config(args)
    report = run_trajectory_selection(cfg)
    paths = write_selection_outputs(report, cfg, cfg.out_dir)
    if not args.quiet:
        print(f"lowest overall mean error: {report.best_error_kind.value}")
        print(f"highest overall mean confidence: {report.best_confidence_kind.value}")
        print(f"wrote {paths['table1']}")
    return 0


def _cmd_run_speed(args) -> int:
    cfg = _resolve_config(args)
    coef_path = args.coef or cfg.coefficients_path
    if coef_path is None:
        raise ConfigError(
            "no coefficient file given; run `stirlab calibrate` first and pass --coef"
        )
    if not Path(coef_path).exists():
        raise ConfigError(
            f"coefficient file not found: {coef_path}; run `stirlab calibrate` first"
        )
    coef = confidence_mod.load(coef_path)
    report = run_speed_comparison(cfg, coef)
    paths = write_speed_outputs(report, cfg, cfg.out_dir)
    if not args.quiet:
        for cell in report.cells:
            print(f"{cell.density.value} {cell.mode}: "
                  f"mean {cell.mean_duration:.3f}s std {cell.std_duration:.3f}s "
                  f"(n={cell.n_included}, failed={cell.n_failed})")
        print(f"wrote {paths['table2']}")
    return 0


def _cmd_replay(args) -> int:
    cfg = _resolve_config(args)
    if not args.trace.exists():
        raise ConfigError(f"trace file not found: {args.trace}")
    with open(args.trace, "r", encoding="utf-8") as fh:
        times, confidences = controller_mod.read_replay_stream(fh)
    state, decisions = controller_mod.run_confidence_stream(confidences, cfg.controller)
    out_dir = cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "replay_trace.csv"
    with open(out_path, "w", encoding="utf-8") as fh:
        controller_mod.write_trace(fh, state, decisions, times=times)
    if not args.quiet:
        outcome = controller_mod.classify_outcome(state)
        print(f"outcome: {outcome.value} (stop frame {state.stop_frame}); wrote {out_path}")
    return 0


def _cmd_report(args) -> int:
    cfg = _resolve_config(args)
    if not args.trials.exists():
        raise ConfigError(f"trials file not found: {args.trials}")
    out_path = reaggregate_trials(args.trials, cfg.out_dir)
    if not args.quiet:
        print(f"wrote {out_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "gen-traj": _cmd_gen_traj,
        "calibrate": _cmd_calibrate,
        "replay": _cmd_replay,
        "report": _cmd_report,
    }
    try:
        if args.command == "run":
            if args.experiment == "select":
                return _cmd_run_select(args)
            return _cmd_run_speed(args)
        return handlers[args.command](args)
    except StirlabError as exc:
        print(f"stirlab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

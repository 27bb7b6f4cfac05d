"""Experiment orchestration: sweeps, aggregation, and report files.

Two experiment modes exist.  Trajectory selection runs every
(density, trajectory) cell for a fixed stir window and scores mean
counting error and confidence per trial, per cell, and overall;
speed comparison runs constant-speed and adaptive-speed cells and
compares stir durations, excluding failed initiations from the
statistics exactly because those trials never entered sustained
stirring.

Every trial draws its random streams from the master seed mixed with
its cell coordinates and index, so results are byte-identical across
runs and independent of execution order.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

from . import confidence as confidence_mod
from . import engine
from .config import ExperimentConfig, resolved_lines
from .controller import ControllerConfig, Outcome
from .errors import ConfigError, ParameterError
from .fluidsim import Density
from .trajectory import TrajectoryKind
from .util import fmt, mix64

MODE_CONSTANT = "constant"
MODE_ADAPTIVE = "adaptive"
MODE_SELECT = "select"

FRAME_COLUMNS = ["trial_id", "t_s", "gt", "tp", "fp", "fn", "E", "C", "C_predict",
                 "x1", "x2", "x3", "x4", "x5", "x6", "speed"]
TRIAL_COLUMNS = ["trial_id", "mode", "density", "trajectory", "trial_index", "seed",
                 "outcome", "duration", "mean_error", "mean_confidence",
                 "final_error", "final_confidence"]


@dataclass
class TrialResult:
    trial_id: str
    mode: str
    density: Density
    kind: TrajectoryKind
    trial_index: int
    seed: int
    duration: float
    outcome: Outcome
    frames: list[engine.FrameObservation]
    mean_error: float
    mean_confidence: float
    final_error: float
    final_confidence: float


@dataclass
class SelectionReport:
    trials: list[TrialResult]
    cell_means: dict[tuple[Density, TrajectoryKind], tuple[float, float]]
    overall_means: dict[TrajectoryKind, tuple[float, float]]
    best_error_kind: TrajectoryKind
    best_confidence_kind: TrajectoryKind


@dataclass
class SpeedCell:
    density: Density
    mode: str
    mean_duration: float
    std_duration: float
    n_included: int
    n_failed: int


@dataclass
class SpeedReport:
    trials: list[TrialResult]
    cells: list[SpeedCell]


def summarize(durations) -> tuple[float, float]:
    """Arithmetic mean and population standard deviation."""
    values = [float(v) for v in durations]
    if not values:
        raise ParameterError("cannot summarize an empty sequence")
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(var)


def _setup_from_config(config: ExperimentConfig) -> engine.SimSetup:
    return engine.SimSetup(
        arena=config.arena,
        template=config.template,
        flow=config.flow,
        detector=config.detector,
        v_max=config.v_max,
        dt=config.dt,
        spacing=config.spacing,
        n_lines=config.n_lines,
        count_normalizer=config.count_normalizer,
    )


def _frame_stats(frames) -> tuple[float, float, float, float]:
    errors = [f.error for f in frames]
    confs = [f.confidence for f in frames]
    return (sum(errors) / len(errors), sum(confs) / len(confs),
            float(errors[-1]), float(confs[-1]))


def run_trajectory_selection(config: ExperimentConfig,
                             coefficients=None) -> SelectionReport:
    """Sweep every (density, trajectory) cell at constant speed 0.5.

    The ground-truth confidence score drives the report, so no fitted
    coefficients are needed; if supplied they only fill the per-frame
    prediction column.
    """
    setup = _setup_from_config(config)
    trials: list[TrialResult] = []
    for density in config.densities:
        for kind in config.trajectories:
            for idx in range(config.trials_per_cell):
                seed = mix64(config.master_seed, MODE_SELECT, density.value,
                             kind.value, idx)
                frames = engine.run_selection_trial(
                    kind, density, setup=setup, trial_seed=seed,
                    speed_scale=config.controller.s0, coefficients=coefficients,
                )
                mean_e, mean_c, final_e, final_c = _frame_stats(frames)
                trials.append(TrialResult(
                    trial_id=f"{MODE_SELECT}-{density.value}-{kind.value}-{idx:03d}",
                    mode=MODE_SELECT, density=density, kind=kind, trial_index=idx,
                    seed=seed, duration=engine.STIR_END - engine.STIR_START,
                    outcome=Outcome.COMPLETED, frames=frames,
                    mean_error=mean_e, mean_confidence=mean_c,
                    final_error=final_e, final_confidence=final_c,
                ))

    cell_means, overall = aggregate_selection(
        [(t.density, t.kind, t.mean_error, t.mean_confidence) for t in trials],
        config.densities, config.trajectories,
    )
    best_error = min(overall, key=lambda k: overall[k][0])
    best_conf = max(overall, key=lambda k: overall[k][1])
    return SelectionReport(
        trials=trials, cell_means=cell_means, overall_means=overall,
        best_error_kind=best_error, best_confidence_kind=best_conf,
    )


def aggregate_selection(rows, densities, trajectories):
    """Per-cell means, then the unweighted mean of density means per kind.

    ``rows`` are (density, kind, mean_error, mean_confidence) tuples,
    one per trial.  The overall mean is computed as the plain average
    of the per-density means so the aggregation identity is exact.
    """
    cell_means: dict[tuple[Density, TrajectoryKind], tuple[float, float]] = {}
    for density in densities:
        for kind in trajectories:
            cell = [(e, c) for d, k, e, c in rows if d is density and k is kind]
            if not cell:
                raise ParameterError(f"no trials for cell ({density.value}, {kind.value})")
            errs = [e for e, _ in cell]
            confs = [c for _, c in cell]
            cell_means[(density, kind)] = (sum(errs) / len(errs), sum(confs) / len(confs))
    overall: dict[TrajectoryKind, tuple[float, float]] = {}
    for kind in trajectories:
        per_density = [cell_means[(d, kind)] for d in densities]
        overall[kind] = (
            sum(e for e, _ in per_density) / len(per_density),
            sum(c for _, c in per_density) / len(per_density),
        )
    return cell_means, overall


def run_speed_comparison(config: ExperimentConfig, coefficients) -> SpeedReport:
    """Constant-speed vs adaptive-speed timing over every density.

    Both groups stop by the confidence rule (the adaptive group also
    feeds the change rate back into its speed); with
    ``constant_stop = fixed_window`` the constant group instead stirs
    the full selection window.  Failed initiations are reported per
    cell and excluded from the duration statistics.
    """
    if coefficients is None:
        raise ConfigError(
            "speed comparison needs a coefficient file; run `stirlab calibrate` first"
        )
    setup = _setup_from_config(config)
    kind = config.speed_trajectory
    base = config.controller
    constant_cfg = dataclasses.replace(base, s_min=base.s0, s_max=base.s0)

    trials: list[TrialResult] = []
    for density in config.densities:
        for mode in (MODE_CONSTANT, MODE_ADAPTIVE):
            for idx in range(config.trials_per_cell):
                seed = mix64(config.master_seed, mode, density.value, kind.value, idx)
                if mode == MODE_CONSTANT and config.constant_stop == "fixed_window":
                    result = engine.run_fixed_window_trial(
                        kind, density, setup=setup, speed_scale=base.s0,
                        coefficients=coefficients, trial_seed=seed,
                    )
                else:
                    cfg = constant_cfg if mode == MODE_CONSTANT else base
                    result = engine.run_feedback_trial(
                        kind, density, setup=setup, controller_cfg=cfg,
                        coefficients=coefficients, trial_seed=seed,
                    )
                mean_e, mean_c, final_e, final_c = _frame_stats(result.frames)
                trials.append(TrialResult(
                    trial_id=f"{mode}-{density.value}-{kind.value}-{idx:03d}",
                    mode=mode, density=density, kind=kind, trial_index=idx,
                    seed=seed, duration=result.duration, outcome=result.outcome,
                    frames=result.frames, mean_error=mean_e, mean_confidence=mean_c,
                    final_error=final_e, final_confidence=final_c,
                ))

    cells = aggregate_speed(
        [(t.density, t.mode, t.duration, t.outcome) for t in trials],
        config.densities,
    )
    return SpeedReport(trials=trials, cells=cells)


def aggregate_speed(rows, densities, include_failed: bool = False) -> list[SpeedCell]:
    """Duration mean/std per (density, mode).

    ``include_failed`` exists only as a guard for tests; the reported
    statistics always leave failed initiations out.
    """
    cells: list[SpeedCell] = []
    for density in densities:
        for mode in (MODE_CONSTANT, MODE_ADAPTIVE):
            group = [(dur, out) for d, m, dur, out in rows
                     if d is density and m == mode]
            if not group:
                continue
            failed = [dur for dur, out in group if out is Outcome.FAILED_INITIATION]
            if include_failed:
                durations = [dur for dur, _ in group]
            else:
                durations = [dur for dur, out in group
                             if out is not Outcome.FAILED_INITIATION]
            if not durations:
                raise ParameterError(
                    f"every {mode} trial at {density.value} density failed initiation"
                )
            mean, std = summarize(durations)
            cells.append(SpeedCell(
                density=density, mode=mode, mean_duration=mean, std_duration=std,
                n_included=len(durations), n_failed=len(failed),
            ))
    return cells


# ---------------------------------------------------------------------------
# report files


def _write_csv(path: Path, header: list[str], rows, comments: list[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _cfg_comments(config: ExperimentConfig) -> list[str]:
    return ["resolved configuration:"] + [f"  {line}" for line in resolved_lines(config)]


def _trial_rows(trials: list[TrialResult]):
    for t in trials:
        yield [
            t.trial_id, t.mode, t.density.value, t.kind.value, str(t.trial_index),
            str(t.seed), t.outcome.value, fmt(t.duration), fmt(t.mean_error),
            fmt(t.mean_confidence), fmt(t.final_error), fmt(t.final_confidence),
        ]


def _frame_rows(trials: list[TrialResult]):
    for t in trials:
        for f in t.frames:
            pred = "" if f.c_predict is None else fmt(f.c_predict)
            x = f.features.as_array()
            yield [
                t.trial_id, fmt(f.t), str(f.gt), str(f.tp), str(f.fp), str(f.fn),
                str(f.error), fmt(f.confidence), pred,
                *(fmt(v) for v in x), fmt(f.speed),
            ]


def write_selection_outputs(report: SelectionReport, config: ExperimentConfig,
                            out_dir: Path) -> dict[str, Path]:
    comments = _cfg_comments(config)
    paths = {
        "trials": out_dir / "trials.csv",
        "frames": out_dir / "frames.csv",
        "table1": out_dir / "table1.csv",
    }
    _write_csv(paths["trials"], TRIAL_COLUMNS, _trial_rows(report.trials), comments)
    _write_csv(paths["frames"], FRAME_COLUMNS, _frame_rows(report.trials), comments)

    rows = []
    for density in config.densities:
        for kind in config.trajectories:
            e, c = report.cell_means[(density, kind)]
            rows.append([density.value, kind.value, fmt(e), fmt(c)])
    for kind in config.trajectories:
        e, c = report.overall_means[kind]
        rows.append(["overall", kind.value, fmt(e), fmt(c)])
    table_comments = comments + [
        f"lowest overall mean error: {report.best_error_kind.value}",
        f"highest overall mean confidence: {report.best_confidence_kind.value}",
    ]
    _write_csv(paths["table1"], ["density", "trajectory", "mean_error", "mean_confidence"],
               rows, table_comments)
    return paths


def write_speed_outputs(report: SpeedReport, config: ExperimentConfig,
                        out_dir: Path) -> dict[str, Path]:
    comments = _cfg_comments(config) + [
        "std is the population standard deviation",
        "failed-initiation trials are excluded from mean/std",
    ]
    paths = {
        "trials": out_dir / "trials.csv",
        "frames": out_dir / "frames.csv",
        "table2": out_dir / "table2.csv",
    }
    _write_csv(paths["trials"], TRIAL_COLUMNS, _trial_rows(report.trials), comments)
    _write_csv(paths["frames"], FRAME_COLUMNS, _frame_rows(report.trials), comments)
    rows = [
        [c.density.value, c.mode, fmt(c.mean_duration), fmt(c.std_duration),
         str(c.n_included), str(c.n_failed)]
        for c in report.cells
    ]
    _write_csv(paths["table2"],
               ["density", "mode", "mean_duration", "std_duration", "n_trials", "n_failed"],
               rows, comments)
    for density in config.densities:
        curve_path = out_dir / f"curves_{density.value}.csv"
        rows = [
            [str(t.trial_index), t.mode, fmt(t.duration), t.outcome.value]
            for t in report.trials if t.density is density
        ]
        _write_csv(curve_path, ["trial", "mode", "duration", "outcome"], rows, comments)
        paths[f"curves_{density.value}"] = curve_path
    return paths


# ---------------------------------------------------------------------------
# re-aggregation from trial CSVs (the `report` subcommand)


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    header: list[str] | None = None
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
            else:
                rows.append(line.split(","))
    if header is None:
        raise ConfigError(f"{path}: no header row found")
    return header, rows


def reaggregate_trials(trials_csv: Path, out_dir: Path) -> Path:
    """Rebuild the aggregate table from an existing trials.csv."""
    header, rows = read_csv(trials_csv)
    idx = {name: i for i, name in enumerate(header)}
    missing = [c for c in ("mode", "density", "trajectory") if c not in idx]
    if missing:
        raise ConfigError(f"{trials_csv}: missing columns {missing}")
    records = [
        {name: row[i] for name, i in idx.items()}
        for row in rows
    ]
    modes = {r["mode"] for r in records}
    densities = [d for d in Density if any(r["density"] == d.value for r in records)]
    comments = [f"re-aggregated from {trials_csv.name}"]
    if modes == {MODE_SELECT}:
        kinds = [k for k in TrajectoryKind
                 if any(r["trajectory"] == k.value for r in records)]
        tuples = [
            (Density.from_name(r["density"]), TrajectoryKind.from_name(r["trajectory"]),
             float(r["mean_error"]), float(r["mean_confidence"]))
            for r in records
        ]
        cell_means, overall = aggregate_selection(tuples, densities, kinds)
        out_rows = []
        for density in densities:
            for kind in kinds:
                e, c = cell_means[(density, kind)]
                out_rows.append([density.value, kind.value, fmt(e), fmt(c)])
        for kind in kinds:
            e, c = overall[kind]
            out_rows.append(["overall", kind.value, fmt(e), fmt(c)])
        out_path = out_dir / "table1.csv"
        _write_csv(out_path, ["density", "trajectory", "mean_error", "mean_confidence"],
                   out_rows, comments)
    else:
        tuples = [
            (Density.from_name(r["density"]), r["mode"], float(r["duration"]),
             Outcome(r["outcome"]))
            for r in records
        ]
        cells = aggregate_speed(tuples, densities)
        out_rows = [
            [c.density.value, c.mode, fmt(c.mean_duration), fmt(c.std_duration),
             str(c.n_included), str(c.n_failed)]
            for c in cells
        ]
        out_path = out_dir / "table2.csv"
        _write_csv(out_path,
                   ["density", "mode", "mean_duration", "std_duration", "n_trials", "n_failed"],
                   out_rows, comments)
    return out_path

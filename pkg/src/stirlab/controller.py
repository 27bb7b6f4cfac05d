"""Counting-confidence-driven closed-loop speed control.

The controller watches the per-frame confidence stream.  Once it holds
``k`` frames it computes the average per-frame change rate over the
most recent ``k`` and compares its magnitude against a threshold:
large changes feed straight back into the speed (``s += delta_c``,
clamped); a small change means the water has told us everything it
will, so stirring stops.  Stopping at the very first evaluation frame
means sustained stirring never began -- a failed initiation, which
timing statistics must exclude.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

from .errors import InsufficientHistoryError, ParameterError, StateError
from .util import fmt


class Status(enum.Enum):
    RUNNING = "running"
    STOPPED = "stopped"
    FAILED_INITIATION = "failed_initiation"
    TIMED_OUT = "timed_out"


class Outcome(enum.Enum):
    COMPLETED = "completed"
    FAILED_INITIATION = "failed_initiation"
    TIMED_OUT = "timed_out"


@dataclass(frozen=True)
class ControllerConfig:
    s0: float = 0.5
    c_th: float = 0.01
    k: int = 3
    s_min: float = 0.05
    s_max: float = 1.0
    frame_period: float = 2.0
    max_duration: float = 120.0

    def __post_init__(self) -> None:
        if not (0.0 < self.s_min <= self.s0 <= self.s_max <= 1.0):
            raise ParameterError(
                f"need 0 < s_min <= s0 <= s_max <= 1, got "
                f"s_min={self.s_min}, s0={self.s0}, s_max={self.s_max}"
            )
        if self.c_th <= 0.0:
            raise ParameterError(f"c_th must be positive, got {self.c_th}")
        if self.k < 2:
            raise ParameterError(f"k must be >= 2, got {self.k}")
        if self.frame_period <= 0.0:
            raise ParameterError(f"frame_period must be positive, got {self.frame_period}")
        if self.max_duration <= 0.0:
            raise ParameterError(f"max_duration must be positive, got {self.max_duration}")


@dataclass
class ControllerState:
    speed: float
    confidence_history: list[tuple[int, float]] = field(default_factory=list)
    status: Status = Status.RUNNING
    stop_frame: int | None = None

    @classmethod
    def fresh(cls, cfg: ControllerConfig) -> "ControllerState":
        return cls(speed=cfg.s0)


@dataclass(frozen=True)
class Decision:
    """Outcome of one controller step: keep stirring at ``speed`` or stop."""

    stop: bool
    speed: float
    delta_c: float | None = None


def avg_change_rate(history: Sequence[float], k: int) -> float:
    """Mean per-frame confidence change over the last ``k`` values.

    The mean of the k-1 consecutive differences telescopes to
    ``(last - first) / (k - 1)``.
    """
    if k < 2:
        raise ParameterError(f"k must be >= 2, got {k}")
    if len(history) < k:
        raise InsufficientHistoryError(
            f"need {k} confidence values, got {len(history)}"
        )
    window = list(history[-k:])
    return (window[-1] - window[0]) / (k - 1)


def update_speed(s_prev: float, delta_c: float, cfg: ControllerConfig) -> float:
    """Feedback step ``s = s_prev + delta_c`` clamped to the legal band."""
    return min(max(s_prev + delta_c, cfg.s_min), cfg.s_max)


def controller_step(state: ControllerState, new_confidence: float,
                    cfg: ControllerConfig) -> Decision:
    """Ingest one frame's confidence and decide whether to keep stirring.

    Frames are counted from the start of stirring; frame ``j`` marks
    ``(j - 1) * frame_period`` seconds of stirring.  Before ``k`` frames
    exist there is nothing to evaluate.  A change-rate magnitude above
    the threshold feeds back into the speed; at or below it, stop.  The
    magnitude is used on both branches so the two conditions partition
    all cases.  Guard: once ``j * frame_period`` reaches the maximum
    duration the controller stops regardless, marked timed out.
    """
    if state.status is not Status.RUNNING:
        raise StateError(f"controller already stopped ({state.status.value})")
    frame = state.confidence_history[-1][0] + 1 if state.confidence_history else 1
    state.confidence_history.append((frame, float(new_confidence)))

    delta_c: float | None = None
    if len(state.confidence_history) >= cfg.k:
        values = [c for _, c in state.confidence_history]
        delta_c = avg_change_rate(values, cfg.k)
        if abs(delta_c) <= cfg.c_th:
            state.status = (
                Status.FAILED_INITIATION if frame == cfg.k else Status.STOPPED
            )
            state.stop_frame = frame
            return Decision(stop=True, speed=state.speed, delta_c=delta_c)
        state.speed = update_speed(state.speed, delta_c, cfg)

    if frame * cfg.frame_period >= cfg.max_duration:
        state.status = Status.TIMED_OUT
        state.stop_frame = frame
        return Decision(stop=True, speed=state.speed, delta_c=delta_c)
    return Decision(stop=False, speed=state.speed, delta_c=delta_c)


def classify_outcome(state: ControllerState) -> Outcome:
    """Label a finished run; calling this on a running controller is a bug."""
    if state.status is Status.RUNNING:
        raise StateError("controller is still running")
    if state.status is Status.FAILED_INITIATION:
        return Outcome.FAILED_INITIATION
    if state.status is Status.TIMED_OUT:
        return Outcome.TIMED_OUT
    return Outcome.COMPLETED


def run_confidence_stream(confidences: Sequence[float], cfg: ControllerConfig
                          ) -> tuple[ControllerState, list[Decision]]:
    """Replay a recorded confidence stream through a fresh controller."""
    state = ControllerState.fresh(cfg)
    decisions: list[Decision] = []
    for c in confidences:
        decision = controller_step(state, c, cfg)
        decisions.append(decision)
        if decision.stop:
            break
    return state, decisions


TRACE_HEADER = ["frame", "t_s", "C", "delta_c", "speed", "decision"]


def write_trace(out_file, state: ControllerState, decisions: Sequence[Decision],
                times: Sequence[float] | None = None) -> None:
    """CSV trace of a controller run: frame t_s C delta_c speed decision."""
    out_file.write(",".join(TRACE_HEADER) + "\n")
    for (frame, conf), decision in zip(state.confidence_history, decisions):
        t = times[frame - 1] if times is not None else (frame - 1) * 2.0
        delta = "" if decision.delta_c is None else fmt(decision.delta_c)
        word = "stop" if decision.stop else "continue"
        out_file.write(
            f"{frame},{fmt(t)},{fmt(conf)},{delta},{fmt(decision.speed)},{word}\n"
        )


def read_replay_stream(in_file) -> tuple[list[float], list[float]]:
    """Parse replay input (frame, t_s, C columns) into times and confidences."""
    times: list[float] = []
    confidences: list[float] = []
    header_seen = False
    for line in in_file:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            header_seen = True
            if line.split(",")[0].strip().lower() == "frame":
                continue  # header row
        parts = line.split(",")
        if len(parts) < 3:
            raise ParameterError(f"replay rows need frame,t_s,C columns, got {line!r}")
        times.append(float(parts[1]))
        confidences.append(float(parts[2]))
    return times, confidences

"""Single-trial timelines shared by the harness and calibration.

The standard protocol: a frame is captured at t=0, the stick descends
during [1, 2) s, stirring runs from t=2 s, and the camera keeps
capturing one frame every two seconds.  In selection trials stirring
lasts exactly 13 s (stick out at t=15) and capture continues to t=50 s
while the water settles.  In feedback trials the per-frame confidence
stream drives the stop decision (and, in adaptive mode, the speed), so
the trial ends when the controller says so.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import confidence as confidence_mod
from . import controller as controller_mod
from . import perception
from .arena import ArenaSpec, TemplateSpec
from .errors import ParameterError
from .fluidsim import Density, FlowParams, Scene, StickState, init_scene, step
from .perception import DetectorParams
from .trajectory import DEFAULT_N_LINES, DEFAULT_SPACING, DEFAULT_V_MAX, PathCursor, TrajectoryKind, generate
from .util import mix64

FRAME_PERIOD = 2.0
DESCENT_AT = 1.0
STIR_START = 2.0
STIR_END = 15.0
CAPTURE_END = 50.0
DEFAULT_DT = 0.02


@dataclass
class FrameObservation:
    """Everything measured from one captured frame."""

    t: float
    gt: int
    tp: int
    fp: int
    fn: int
    error: int
    confidence: float
    c_predict: float | None
    features: perception.FeatureVector
    speed: float


@dataclass
class SimSetup:
    """Bundled simulation parameters for one trial."""

    arena: ArenaSpec
    template: TemplateSpec
    flow: FlowParams
    detector: DetectorParams
    v_max: float = DEFAULT_V_MAX
    dt: float = DEFAULT_DT
    spacing: float = DEFAULT_SPACING
    n_lines: int = DEFAULT_N_LINES
    count_normalizer: float = 100.0


def _steps_for(seconds: float, dt: float) -> int:
    steps = round(seconds / dt)
    if abs(steps * dt - seconds) > 1e-9:
        raise ParameterError(f"dt={dt} must divide the {seconds}s schedule evenly")
    return steps


def _observe(scene: Scene, setup: SimSetup, det_seed: int, t: float,
             coefficients, speed: float) -> FrameObservation:
    visibility = perception.compute_visibility(scene)
    det = perception.simulate_detection(
        scene, visibility, setup.detector, scene.agitation, det_seed
    )
    error = perception.counting_error(scene.n_pests, det.tp)
    conf = perception.counting_confidence(det.tp, det.fp, det.fn_)
    features = perception.extract_features(
        scene, visibility, det, scene.agitation, setup.count_normalizer
    )
    c_pred = (
        confidence_mod.predict(coefficients, features)
        if coefficients is not None else None
    )
    return FrameObservation(
        t=t, gt=scene.n_pests, tp=det.tp, fp=det.fp, fn=det.fn_,
        error=error, confidence=conf, c_predict=c_pred,
        features=features, speed=speed,
    )


def _prepare(kind: TrajectoryKind, density: Density, setup: SimSetup,
             trial_seed: int) -> tuple[Scene, PathCursor, np.random.Generator]:
    scene = init_scene(density, setup.template, setup.arena,
                       seed=mix64(trial_seed, "init"))
    scene.rng = np.random.default_rng(mix64(trial_seed, "process"))
    path = generate(kind, setup.arena, seed=mix64(trial_seed, "path"),
                    spacing=setup.spacing, n_lines=setup.n_lines)
    cursor = PathCursor(path, loop=True)
    detector_rng = np.random.default_rng(mix64(trial_seed, "detect"))
    return scene, cursor, detector_rng


def run_selection_trial(kind: TrajectoryKind, density: Density, *,
                        arena: ArenaSpec | None = None,
                        template: TemplateSpec | None = None,
                        flow: FlowParams | None = None,
                        detector: DetectorParams | None = None,
                        trial_seed: int = 0,
                        speed_scale: float = 0.5,
                        setup: SimSetup | None = None,
                        count_normalizer: float = 100.0,
                        coefficients=None) -> list[FrameObservation]:
    """One fixed-window trial: stir [2, 15) s, observe until 50 s.

    Returns the 26 frames at t = 0, 2, ..., 50.
    """
    if setup is None:
        setup = SimSetup(
            arena=arena or ArenaSpec(),
            template=template or TemplateSpec(),
            flow=flow or FlowParams(),
            detector=detector or DetectorParams(),
            count_normalizer=count_normalizer,
        )
    scene, cursor, detector_rng = _prepare(kind, density, setup, trial_seed)

    dt = setup.dt
    steps_per_frame = _steps_for(FRAME_PERIOD, dt)
    descent_step = _steps_for(DESCENT_AT, dt)
    stir_start_step = _steps_for(STIR_START, dt)
    stir_end_step = _steps_for(STIR_END, dt)
    total_steps = _steps_for(CAPTURE_END, dt)

    speed = speed_scale * setup.v_max
    arc = 0.0
    frames: list[FrameObservation] = []
    for k in range(total_steps + 1):
        if k % steps_per_frame == 0:
            t = (k // steps_per_frame) * FRAME_PERIOD
            stirring = stir_start_step <= k < stir_end_step
            frames.append(_observe(
                scene, setup, int(detector_rng.integers(0, 2**63)), t,
                coefficients, speed_scale if stirring else 0.0,
            ))
        if k == total_steps:
            break
        if k < descent_step or k >= stir_end_step:
            stick = None
        elif k < stir_start_step:
            stick = StickState(cursor.position(0.0), np.zeros(2),
                               radius=setup.arena.stick_radius)
        else:
            prev = cursor.position(arc)
            arc += speed * dt
            nxt = cursor.position(arc)
            stick = StickState(nxt, (nxt - prev) / dt, radius=setup.arena.stick_radius)
        step(scene, stick, setup.flow, dt)
    return frames


@dataclass
class FeedbackTrial:
    """Result of one confidence-terminated trial."""

    frames: list[FrameObservation]
    outcome: controller_mod.Outcome
    duration: float
    stop_frame: int
    controller_state: controller_mod.ControllerState
    decisions: list[controller_mod.Decision]


def run_feedback_trial(kind: TrajectoryKind, density: Density, *,
                       setup: SimSetup, controller_cfg: controller_mod.ControllerConfig,
                       coefficients, trial_seed: int) -> FeedbackTrial:
    """One stop-rule trial: stirring lasts until the controller stops it.

    Frames from the start of stirring feed the controller's predicted
    confidence; the t=0 frame is recorded but precedes stirring.
    Duration runs from stir start to the stopping frame.
    """
    if coefficients is None:
        raise ParameterError("feedback trials need fitted confidence coefficients")
    if abs(controller_cfg.frame_period - FRAME_PERIOD) > 1e-12:
        raise ParameterError(
            f"capture cadence is fixed at {FRAME_PERIOD}s per frame; "
            f"got frame_period={controller_cfg.frame_period}"
        )
    scene, cursor, detector_rng = _prepare(kind, density, setup, trial_seed)

    dt = setup.dt
    steps_per_frame = _steps_for(FRAME_PERIOD, dt)
    descent_step = _steps_for(DESCENT_AT, dt)
    stir_start_step = _steps_for(STIR_START, dt)

    state = controller_mod.ControllerState.fresh(controller_cfg)
    decisions: list[controller_mod.Decision] = []
    frames: list[FrameObservation] = []
    speed_scale = controller_cfg.s0
    arc = 0.0
    k = 0
    stop_frame = None
    while True:
        if k % steps_per_frame == 0:
            t = (k // steps_per_frame) * FRAME_PERIOD
            stirring = k >= stir_start_step
            obs = _observe(
                scene, setup, int(detector_rng.integers(0, 2**63)), t,
                coefficients, speed_scale if stirring else 0.0,
            )
            frames.append(obs)
            if stirring:
                decision = controller_mod.controller_step(state, obs.c_predict,
                                                          controller_cfg)
                decisions.append(decision)
                if decision.stop:
                    stop_frame = state.stop_frame
                    break
                speed_scale = decision.speed
        if k < descent_step:
            stick = None
        elif k < stir_start_step:
            stick = StickState(cursor.position(0.0), np.zeros(2),
                               radius=setup.arena.stick_radius)
        else:
            prev = cursor.position(arc)
            arc += speed_scale * setup.v_max * dt
            nxt = cursor.position(arc)
            stick = StickState(nxt, (nxt - prev) / dt, radius=setup.arena.stick_radius)
        step(scene, stick, setup.flow, dt)
        k += 1

    duration = (stop_frame - 1) * FRAME_PERIOD
    return FeedbackTrial(
        frames=frames,
        outcome=controller_mod.classify_outcome(state),
        duration=duration,
        stop_frame=stop_frame,
        controller_state=state,
        decisions=decisions,
    )


def run_fixed_window_trial(kind: TrajectoryKind, density: Density, *,
                           setup: SimSetup, speed_scale: float,
                           coefficients, trial_seed: int) -> FeedbackTrial:
    """Constant-speed trial with a hard 13 s stir window and no stop rule.

    The alternative reading of the constant-speed comparison: stirring
    always runs the full selection window, so the duration is exactly
    ``STIR_END - STIR_START`` every time.
    """
    scene, cursor, detector_rng = _prepare(kind, density, setup, trial_seed)

    dt = setup.dt
    steps_per_frame = _steps_for(FRAME_PERIOD, dt)
    descent_step = _steps_for(DESCENT_AT, dt)
    stir_start_step = _steps_for(STIR_START, dt)
    stir_end_step = _steps_for(STIR_END, dt)

    frames: list[FrameObservation] = []
    speed = speed_scale * setup.v_max
    arc = 0.0
    for k in range(stir_end_step + 1):
        if k % steps_per_frame == 0:
            t = (k // steps_per_frame) * FRAME_PERIOD
            stirring = stir_start_step <= k < stir_end_step
            frames.append(_observe(
                scene, setup, int(detector_rng.integers(0, 2**63)), t,
                coefficients, speed_scale if stirring else 0.0,
            ))
        if k == stir_end_step:
            break
        if k < descent_step:
            stick = None
        elif k < stir_start_step:
            stick = StickState(cursor.position(0.0), np.zeros(2),
                               radius=setup.arena.stick_radius)
        else:
            prev = cursor.position(arc)
            arc += speed * dt
            nxt = cursor.position(arc)
            stick = StickState(nxt, (nxt - prev) / dt, radius=setup.arena.stick_radius)
        step(scene, stick, setup.flow, dt)

    state = controller_mod.ControllerState.fresh(
        controller_mod.ControllerConfig()
    )
    state.status = controller_mod.Status.STOPPED
    state.stop_frame = len(frames)
    return FeedbackTrial(
        frames=frames,
        outcome=controller_mod.Outcome.COMPLETED,
        duration=STIR_END - STIR_START,
        stop_frame=state.stop_frame,
        controller_state=state,
        decisions=[],
    )

"""The crop-row exit state machine.

Phase order is strict: Idle -> Stage1 (label A) -> halted at the row end
(label B) -> Stage2 -> Done (label C).  Stage 1 starts on the external
end-of-row trigger and compares every incoming frame against the reference
crop taken at the trigger; stage 2 re-anchors on a fresh reference whose
crop is sized from the depth frame, then repeats the same halt rule.  A
frame halts its stage when the similarity score drops strictly below the
configured threshold.

Also holds the odometry dead-reckoning baseline used to benchmark stage 2.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidMask, StateError
from .features import FeatureParams, detect_and_describe
from .headland import CameraIntrinsics, RobotGeometry, estimate_span, stage2_mask
from .imaging import CropMask, DepthImage, GrayImage, RgbImage, crop_rows, rgb_to_gray
from .matching import MatcherConfig, SimScore, score_descriptors

MIN_CROP_ROWS = 16


class Phase(enum.Enum):
    IDLE = "idle"
    STAGE1 = "stage1"
    STAGE2 = "stage2"
    DONE = "done"


@dataclass(frozen=True)
class StageConfig:
    """Motion and matching parameters shared by both stages."""

    linear_velocity: float
    frame_rate: float = 1.5
    matcher: MatcherConfig = field(default_factory=MatcherConfig)
    features: FeatureParams = field(default_factory=FeatureParams)
    robot: RobotGeometry = field(default_factory=lambda: RobotGeometry(length_l=1.2))
    max_frames: int = 200  # safety limit per stage; plumbing, not field behavior

    def __post_init__(self):
        if self.linear_velocity <= 0:
            raise ValueError("linear velocity must be positive")
        if self.frame_rate <= 0:
            raise ValueError("frame rate must be positive")
        if self.max_frames < 1:
            raise ValueError("max_frames must be >= 1")

    @property
    def step_distance(self) -> float:
        return self.linear_velocity / self.frame_rate


@dataclass(frozen=True)
class EorEvent:
    """Image row where the external detector localized the row end."""

    y_eor: int

    def __post_init__(self):
        if self.y_eor < 0:
            raise ValueError("y_eor cannot be negative")


@dataclass(frozen=True)
class StepDecision:
    halt: bool
    score: SimScore

    @property
    def kind(self) -> str:
        return "halt" if self.halt else "continue"


@dataclass(frozen=True)
class TraversalState:
    """Current phase plus the reference crop the phase matches against."""

    phase: Phase
    label: str | None = None  # deepest of A/B/C reached so far
    reference: GrayImage | None = None
    mask: CropMask | None = None
    cfg: StageConfig | None = None
    ref_descriptors: np.ndarray | None = field(default=None, repr=False, compare=False)


def idle_state() -> TraversalState:
    return TraversalState(phase=Phase.IDLE)


def _reference_descriptors(reference: GrayImage, params: FeatureParams) -> np.ndarray:
    feats = detect_and_describe(reference, params)
    return np.array([d for _, d in feats]).reshape(len(feats), -1)


def _score_against_reference(state: TraversalState, rgb: RgbImage) -> SimScore:
    current = crop_rows(rgb_to_gray(rgb), state.mask)
    feats = detect_and_describe(current, state.cfg.features)
    desc = np.array([d for _, d in feats]).reshape(len(feats), -1)
    return score_descriptors(state.ref_descriptors, desc, state.cfg.matcher)


def on_eor_trigger(rgb: RgbImage, event: EorEvent, cfg: StageConfig) -> TraversalState:
    """Enter stage 1: crop below the row-end position and keep it as reference."""
    if event.y_eor > rgb.height - MIN_CROP_ROWS:
        raise InvalidMask(
            f"trigger row {event.y_eor} leaves fewer than {MIN_CROP_ROWS} rows"
        )
    mask = CropMask(event.y_eor, rgb.height)
    reference = crop_rows(rgb_to_gray(rgb), mask)
    return TraversalState(
        phase=Phase.STAGE1,
        label="A",
        reference=reference,
        mask=mask,
        cfg=cfg,
        ref_descriptors=_reference_descriptors(reference, cfg.features),
    )


def stage1_step(state: TraversalState, rgb: RgbImage) -> tuple[TraversalState, StepDecision]:
    """Score the current frame against the stage-1 reference; halt below threshold."""
    if state.phase is not Phase.STAGE1:
        raise StateError(f"stage1_step in phase {state.phase.value}")
    score = _score_against_reference(state, rgb)
    if score.value < state.cfg.matcher.sim_threshold:
        return replace(state, label="B"), StepDecision(halt=True, score=score)
    return state, StepDecision(halt=False, score=score)


def stage2_init(
    state: TraversalState,
    rgb: RgbImage,
    depth: DepthImage,
    intr: CameraIntrinsics,
    cfg: StageConfig | None = None,
) -> TraversalState:
    """Enter stage 2 from the row-end halt: size the crop from the depth frame.

    Raises HeadlandTooShort or InsufficientDepth (via the geometry helpers)
    when the visible headland cannot host one robot length; both abort the
    task upstream.
    """
    if state.phase is not Phase.STAGE1 or state.label != "B":
        raise StateError("stage2_init requires a stage-1 halt (label B)")
    cfg = cfg or state.cfg
    span = estimate_span(depth, intr)
    mask = stage2_mask(span, cfg.robot, rgb.height)
    reference = crop_rows(rgb_to_gray(rgb), mask)
    return TraversalState(
        phase=Phase.STAGE2,
        label="B",
        reference=reference,
        mask=mask,
        cfg=cfg,
        ref_descriptors=_reference_descriptors(reference, cfg.features),
    )


def stage2_step(state: TraversalState, rgb: RgbImage) -> tuple[TraversalState, StepDecision]:
    """Same halt rule as stage 1; a halt completes the task (label C)."""
    if state.phase is not Phase.STAGE2:
        raise StateError(f"stage2_step in phase {state.phase.value}")
    score = _score_against_reference(state, rgb)
    if score.value < state.cfg.matcher.sim_threshold:
        done = TraversalState(phase=Phase.DONE, label="C", cfg=state.cfg)
        return done, StepDecision(halt=True, score=score)
    return state, StepDecision(halt=False, score=score)


@dataclass(frozen=True)
class OdometryResult:
    steps: int
    error: float  # meters past the target at the halt


def odometry_stage2(
    robot: RobotGeometry,
    step_distance: float,
    noise_std: float,
    seed: int = 0,
) -> OdometryResult:
    """Dead-reckoning baseline: advance in fixed steps until the cumulative
    (noisy) traveled distance first reaches the target length.

    Per-step noise models wheel slip folded into the odometer reading; with
    zero noise the overshoot is strictly below one step.
    """
    if step_distance <= 0:
        raise ValueError("step distance must be positive")
    if noise_std < 0:
        raise ValueError("noise_std cannot be negative")
    target = robot.target_length
    rng = np.random.default_rng(seed)
    traveled = 0.0
    steps = 0
    while traveled < target:
        traveled += step_distance + (rng.normal(0.0, noise_std) if noise_std > 0 else 0.0)
        steps += 1
    return OdometryResult(steps=steps, error=traveled - target)


class RowExitPipeline:
    """Stateful wrapper enforcing call order and emitting the event log.

    One instance per traversal; process frames strictly in order.  Log
    records use simulated time (frame index over frame rate), so identical
    inputs produce byte-identical logs.
    """

    def __init__(self, cfg: StageConfig):
        self.cfg = cfg
        self.state = idle_state()
        self.events: list[dict] = []

    def _log(self, frame_id: int, score: int | None, decision: str) -> None:
        self.events.append(
            {
                "frame": frame_id,
                "t_sim": round(frame_id / self.cfg.frame_rate, 6),
                "phase": self.state.phase.value,
                "label": self.state.label,
                "score": score,
                "decision": decision,
            }
        )

    def trigger(self, rgb: RgbImage, event: EorEvent, frame_id: int) -> None:
        if self.state.phase is not Phase.IDLE:
            raise StateError("trigger fired while not idle")
        self.state = on_eor_trigger(rgb, event, self.cfg)
        self._log(frame_id, None, "trigger")

    def step_stage1(self, rgb: RgbImage, frame_id: int) -> StepDecision:
        self.state, decision = stage1_step(self.state, rgb)
        self._log(frame_id, decision.score.value, decision.kind)
        return decision

    def init_stage2(
        self, rgb: RgbImage, depth: DepthImage, intr: CameraIntrinsics, frame_id: int
    ) -> None:
        self.state = stage2_init(self.state, rgb, depth, intr)
        self._log(frame_id, None, "stage2_init")

    def step_stage2(self, rgb: RgbImage, frame_id: int) -> StepDecision:
        self.state, decision = stage2_step(self.state, rgb)
        self._log(frame_id, decision.score.value, decision.kind)
        return decision

    def log_abort(self, frame_id: int, reason: str) -> None:
        self._log(frame_id, None, f"abort:{reason}")

    def write_events(self, path: str) -> None:
        with open(path, "w") as fh:
            for record in self.events:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

"""Seeded end-to-end trials of the crop-row exit task.

A trial places the robot a random distance short of the trigger point,
advances it one frame-step at a time, fires the row-end event at the first
frame past the trigger geometry, and runs the pipeline to completion (or
abort), recording ground-truth halt errors against the simulated world.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import HeadlandTooShort, InsufficientDepth
from ..headland import CameraIntrinsics
from ..imaging import save_depth, save_rgb
from ..pipeline import EorEvent, RowExitPipeline, StageConfig
from .render import CameraPose, WorldConfig, render_frame

ABORT_HEADLAND_TOO_SHORT = "headland_too_short"
ABORT_INSUFFICIENT_DEPTH = "insufficient_depth"
ABORT_STAGE1_NO_HALT = "stage1_no_halt"
ABORT_STAGE2_NO_HALT = "stage2_no_halt"


@dataclass
class TrialResult:
    """Per-trial outcome; errors are None when the stage never completed."""

    seed: int
    regime: str
    stage1_halt_error: float | None
    stage2_travel_error: float | None
    abort: str | None
    frames: int
    trace: list = field(default_factory=list)
    events: list = field(default_factory=list)


def trigger_distance(pose: CameraPose, intr: CameraIntrinsics, y_mid: int) -> float:
    """Camera-to-row-end distance at which the row end projects to y_mid."""
    a = (intr.center_y - y_mid) / intr.focal_y
    cp, sp = math.cos(pose.pitch), math.sin(pose.pitch)
    denominator = sp - a * cp
    if denominator <= 0:
        raise ValueError("row end never reaches the requested image row")
    return pose.height_above_ground * (cp + a * sp) / denominator


def export_manifest_path(export_dir: str) -> str:
    return os.path.join(export_dir, "manifest.jsonl")


# kept for import stability in older scripts
export_interval_paths = export_manifest_path


class _Recorder:
    """Renders frames and optionally spools them to a replay dataset."""

    def __init__(self, world, camera, intr, export_dir):
        self.world = world
        self.camera = camera
        self.intr = intr
        self.export_dir = export_dir
        self.manifest: list[dict] = []
        if export_dir:
            os.makedirs(export_dir, exist_ok=True)

    def capture(self, frame_id: int, position: float):
        rgb, depth = render_frame(self.world, self.camera.at(position), self.intr)
        if self.export_dir:
            rgb_name = f"rgb_{frame_id:04d}.png"
            depth_name = f"depth_{frame_id:04d}.png"
            save_rgb(os.path.join(self.export_dir, rgb_name), rgb)
            save_depth(os.path.join(self.export_dir, depth_name), depth)
            self.manifest.append(
                {
                    "frame_id": frame_id,
                    "rgb_path": rgb_name,
                    "depth_path": depth_name,
                    "odom_position_m": round(position, 9),
                }
            )
        return rgb, depth

    def mark_trigger(self, y_eor: int, eor_position: float) -> None:
        if self.manifest:
            self.manifest[0]["eor_trigger"] = True
            self.manifest[0]["y_eor"] = y_eor
            self.manifest[0]["eor_position_m"] = round(eor_position, 9)

    def flush(self) -> None:
        if self.export_dir:
            with open(export_manifest_path(self.export_dir), "w") as fh:
                for record in self.manifest:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")


def run_trial(
    world: WorldConfig,
    camera: CameraPose,
    cfg: StageConfig,
    seed: int,
    intr: CameraIntrinsics | None = None,
    start_offset_max: float = 1.0,
    export_dir: str | None = None,
) -> TrialResult:
    """Run one seeded trial; optionally export frames + manifest for replay."""
    intr = intr or CameraIntrinsics(width=640, height=480)
    step = cfg.step_distance
    rng = np.random.default_rng(seed)
    offset = float(rng.uniform(0.0, start_offset_max))

    y_mid = intr.height // 2
    eor_x = world.eor_position
    d_trig = trigger_distance(camera, intr, y_mid)
    # frames advance from the start pose; the trigger fires on the first
    # frame at or past the exact trigger geometry
    k0 = math.ceil(offset / step - 1e-12)
    trigger_pos = (eor_x - d_trig - offset) + k0 * step

    pipeline = RowExitPipeline(cfg)
    recorder = _Recorder(world, camera, intr, export_dir)
    trace: list[int | None] = []
    regime = world.headland_texture

    abort = None
    stage1_error = None
    stage2_error = None

    frame_id = 0
    position = trigger_pos
    rgb, depth = recorder.capture(frame_id, position)
    pipeline.trigger(rgb, EorEvent(y_eor=y_mid), frame_id)
    recorder.mark_trigger(y_mid, eor_x)
    trace.append(None)

    # stage 1: drive forward until the reference crop stops matching
    halted = False
    for _ in range(cfg.max_frames):
        frame_id += 1
        position += step
        rgb, depth = recorder.capture(frame_id, position)
        decision = pipeline.step_stage1(rgb, frame_id)
        trace.append(decision.score.value)
        if decision.halt:
            halted = True
            break

    if not halted:
        abort = ABORT_STAGE1_NO_HALT
    else:
        halt1_pos = position
        stage1_error = (halt1_pos + cfg.robot.camera_setback) - eor_x
        # stage 2 anchors on the frame captured at the stage-1 halt pose
        try:
            pipeline.init_stage2(rgb, depth, intr, frame_id)
        except HeadlandTooShort:
            abort = ABORT_HEADLAND_TOO_SHORT
        except InsufficientDepth:
            abort = ABORT_INSUFFICIENT_DEPTH

    if abort is None:
        halted = False
        for _ in range(cfg.max_frames):
            frame_id += 1
            position += step
            rgb, depth = recorder.capture(frame_id, position)
            decision = pipeline.step_stage2(rgb, frame_id)
            trace.append(decision.score.value)
            if decision.halt:
                halted = True
                break
        if halted:
            stage2_error = (position - halt1_pos) - cfg.robot.target_length
        else:
            abort = ABORT_STAGE2_NO_HALT

    if abort:
        pipeline.log_abort(frame_id, abort)
    recorder.flush()

    return TrialResult(
        seed=seed,
        regime=regime,
        stage1_halt_error=stage1_error,
        stage2_travel_error=stage2_error,
        abort=abort,
        frames=frame_id + 1,
        trace=trace,
        events=pipeline.events,
    )

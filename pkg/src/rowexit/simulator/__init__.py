"""Deterministic synthetic RGB-D world for desk-scale trials.

A flat textured ground plane carries two crop rows of vertical billboards;
a pinhole camera with fixed pitch travels the track between them.  All
rendering is a pure function of (world, pose, intrinsics), so seeded trials
replay bit-identically.
"""

from .noise import value_noise
from .render import (
    CameraPose,
    WorldConfig,
    ray_directions,
    render_frame,
    render_frame_ex,
    noise_texture_image,
    HIT_SKY,
    HIT_GROUND,
    HIT_PLANT,
    HIT_VOID,
)
from .trial import TrialResult, run_trial, trigger_distance, export_interval_paths

__all__ = [
    "value_noise",
    "CameraPose",
    "WorldConfig",
    "ray_directions",
    "render_frame",
    "render_frame_ex",
    "noise_texture_image",
    "TrialResult",
    "run_trial",
    "trigger_distance",
    "export_interval_paths",
    "HIT_SKY",
    "HIT_GROUND",
    "HIT_PLANT",
    "HIT_VOID",
]

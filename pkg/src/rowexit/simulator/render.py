"""Pinhole ray rendering of the ground plane and crop-row billboards."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..headland import CameraIntrinsics
from ..imaging import DepthImage, GrayImage, RgbImage
from .noise import hash01, value_noise

HIT_SKY = 0
HIT_GROUND = 1
HIT_PLANT = 2
HIT_VOID = 3  # ground would continue but the world ends (reads as no return)
HIT_COVER = 4  # ground-cover tuft (grass blade / soil clod)

REGIME_CONTRAST = {"soil": 0.15, "verdant": 0.6}
REGIME_BASE_RGB = {"soil": (185.0, 155.0, 120.0), "verdant": (80.0, 120.0, 64.0)}
COVER_BASE_RGB = {"soil": (172.0, 142.0, 110.0), "verdant": (66.0, 128.0, 54.0)}
PLANT_BASE_RGB = (62.0, 134.0, 56.0)
PLANT_CONTRAST = 0.55
SKY_RGB = (186.0, 205.0, 222.0)
VOID_RGB = (104.0, 108.0, 96.0)

GROUND_WAVELENGTH_M = 0.05
GROUND_SHARPNESS = 2.8
PLANT_WAVELENGTH_M = 0.02
PLANT_SHARPNESS = 2.0

# ground cover: tufts live on this lattice, reaching up to COVER_HEIGHT_M,
# sampled as a stack of occupancy shells (top shell first along the ray).
# Vertical micro-structure is what keeps local features matchable while the
# camera advances; a bare plane foreshortens too fast for any descriptor.
COVER_CELL_M = 0.024
COVER_HEIGHT_M = 0.045
COVER_SHELLS = 5
COVER_DENSITY_TOP = 0.18
COVER_DENSITY_BOTTOM = 0.55

# plants beyond this camera distance are skipped (subtend well under a pixel)
PLANT_DRAW_LIMIT_M = 8.0


def _effective_amplitude(contrast: float) -> float:
    """Luminance modulation for a regime contrast value.

    Compressed with a 0.6 power so the low-contrast regime keeps a working
    (if much sparser) feature population instead of dropping below the
    detector floor entirely; calibrated so regime keypoint counts differ by
    roughly 4-6x.
    """
    return (contrast**0.6) * (0.6**0.4)


@dataclass(frozen=True)
class WorldConfig:
    """Crop-row world layout and ground texture regime.

    The ground plane carries one continuous texture; ``headland_texture``
    picks the regime (soil is low-contrast, verdant high-contrast).  Two
    rows of plant billboards flank the track until ``row_length``; the
    ground continues for ``headland_depth`` beyond the row end and then the
    world stops (depth sensors read nothing there).
    """

    row_length: float = 3.0
    plant_spacing: float = 0.15
    plant_height: float = 0.3
    headland_depth: float = 4.0
    headland_texture: str = "verdant"
    texture_seed: int = 0
    texture_contrast: float | None = None
    row_half_gap: float = 0.375
    plant_width: float = 0.12
    ground_cover: bool = True  # off gives a perfectly flat plane (analytic tests)

    def __post_init__(self):
        for name in ("row_length", "plant_spacing", "plant_height", "headland_depth",
                     "row_half_gap", "plant_width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.headland_texture not in REGIME_CONTRAST:
            raise ValueError(f"unknown texture regime {self.headland_texture!r}")
        if self.texture_contrast is not None and not 0.0 < self.texture_contrast <= 1.0:
            raise ValueError("texture_contrast must lie in (0, 1]")

    @property
    def contrast(self) -> float:
        if self.texture_contrast is not None:
            return self.texture_contrast
        return REGIME_CONTRAST[self.headland_texture]

    @property
    def eor_position(self) -> float:
        """Track coordinate of the end of the crop row."""
        return self.row_length

    @property
    def world_far_edge(self) -> float:
        return self.row_length + self.headland_depth

    def plant_positions(self) -> np.ndarray:
        return np.arange(self.plant_spacing, self.row_length + 1e-9, self.plant_spacing)


@dataclass(frozen=True)
class CameraPose:
    """Camera rig along the track: height, downward pitch, track position."""

    height_above_ground: float = 0.5
    pitch: float = math.radians(50.0)
    position_along_track: float = 0.0

    def __post_init__(self):
        if self.height_above_ground <= 0:
            raise ValueError("camera height must be positive")
        if not 0.0 < self.pitch < math.pi / 2:
            raise ValueError("pitch must lie in (0, pi/2)")

    def at(self, x: float) -> "CameraPose":
        return CameraPose(self.height_above_ground, self.pitch, x)


_DIR_CACHE: dict[tuple, np.ndarray] = {}


def ray_directions(intr: CameraIntrinsics, pitch: float) -> np.ndarray:
    """Unit world-frame ray directions (H, W, 3) for a pitched camera.

    World axes: x forward along the track, y left, z up.  Cached per
    (size, fov, pitch) since every frame of a trial shares them.
    """
    key = (intr.width, intr.height, round(intr.vertical_fov_alpha, 12), round(pitch, 12))
    cached = _DIR_CACHE.get(key)
    if cached is not None:
        return cached

    f = intr.focal_y
    us = (np.arange(intr.width, dtype=np.float64) - intr.center_x) / f
    vs = (intr.center_y - np.arange(intr.height, dtype=np.float64)) / f
    cp, sp = math.cos(pitch), math.sin(pitch)
    forward = np.array([cp, 0.0, -sp])
    right = np.array([0.0, -1.0, 0.0])
    up = np.array([sp, 0.0, cp])

    dirs = (
        forward[None, None, :]
        + us[None, :, None] * right[None, None, :]
        + vs[:, None, None] * up[None, None, :]
    )
    dirs /= np.linalg.norm(dirs, axis=2, keepdims=True)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    dirs.flags.writeable = False
    if len(_DIR_CACHE) > 8:
        _DIR_CACHE.clear()
    _DIR_CACHE[key] = dirs
    return dirs


def _shade_ground(
    world: WorldConfig, hx: np.ndarray, hy: np.ndarray, footprint: np.ndarray
) -> np.ndarray:
    n = value_noise(hx, hy, world.texture_seed, GROUND_WAVELENGTH_M,
                    sharpness=GROUND_SHARPNESS, footprint=footprint)
    factor = 1.0 + _effective_amplitude(world.contrast) * (2.0 * n - 1.0)
    base = np.array(REGIME_BASE_RGB[world.headland_texture])
    return np.clip(factor[..., None] * base[None, :], 0.0, 255.0)


def _shade_plant(
    world: WorldConfig, key_u: np.ndarray, key_v: np.ndarray, footprint: np.ndarray
) -> np.ndarray:
    n = value_noise(key_u, key_v, world.texture_seed + 67_777, PLANT_WAVELENGTH_M,
                    sharpness=PLANT_SHARPNESS, footprint=footprint)
    factor = 1.0 + _effective_amplitude(PLANT_CONTRAST) * (2.0 * n - 1.0)
    base = np.array(PLANT_BASE_RGB)
    return np.clip(factor[..., None] * base[None, :], 0.0, 255.0)


def render_frame_ex(world: WorldConfig, pose: CameraPose, intr: CameraIntrinsics):
    """Render one frame; returns (RgbImage, DepthImage, hit-kind map).

    Depth is the Euclidean camera-to-surface distance in millimeters with 0
    where nothing returns (sky, or ground beyond the world's far edge).
    """
    dirs = ray_directions(intr, pose.pitch)
    dx, dy, dz = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    cam_x = pose.position_along_track
    h = pose.height_above_ground

    depth = np.full((intr.height, intr.width), np.inf)
    kinds = np.full((intr.height, intr.width), HIT_SKY, dtype=np.uint8)
    rgb = np.empty((intr.height, intr.width, 3))
    rgb[:] = SKY_RGB

    below = dz < -1e-12
    inv_fall = np.where(below, 1.0 / np.where(below, -dz, 1.0), 0.0)

    # ground-cover shells, top shell first (nearest along a falling ray);
    # each lattice cell's tuft is a column whose height comes from one hash,
    # so the shells of one tuft stay coherent across viewpoints
    amp = _effective_amplitude(world.contrast)
    cover_base = np.array(COVER_BASE_RGB[world.headland_texture])
    cover_seed = world.texture_seed + 424_243
    unresolved = below.copy()
    for shell in reversed(range(COVER_SHELLS)):
        z_k = (shell + 0.5) / COVER_SHELLS * COVER_HEIGHT_M
        frac = z_k / COVER_HEIGHT_M
        density = COVER_DENSITY_BOTTOM + (COVER_DENSITY_TOP - COVER_DENSITY_BOTTOM) * frac
        t_k = (h - z_k) * inv_fall
        sx = cam_x + t_k * dx
        sy = t_k * dy
        ci = np.floor(sx / COVER_CELL_M).astype(np.int64)
        cj = np.floor(sy / COVER_CELL_M).astype(np.int64)
        occupied = (
            unresolved
            & (t_k > 1e-3)
            & (sx <= world.world_far_edge)
            & (hash01(ci, cj, cover_seed) < density)
        )
        if not occupied.any():
            continue
        depth[occupied] = t_k[occupied]
        kinds[occupied] = HIT_COVER
        tone = hash01(ci[occupied], cj[occupied], cover_seed + 7)
        shade = (1.0 + amp * (2.0 * tone - 1.0)) * (0.72 + 0.56 * frac)
        rgb[occupied] = np.clip(shade[:, None] * cover_base[None, :], 0.0, 255.0)
        unresolved &= ~occupied

    # bare ground plane z = 0, present up to the world's far edge
    t_g = np.where(below, h * inv_fall, np.inf)
    gx = cam_x + t_g * dx
    on_ground = unresolved & (gx <= world.world_far_edge)
    beyond = unresolved & below & ~(gx <= world.world_far_edge)
    depth[on_ground] = t_g[on_ground]
    kinds[on_ground] = HIT_GROUND
    kinds[beyond] = HIT_VOID
    rgb[beyond] = VOID_RGB
    if on_ground.any():
        gy = (t_g * dy)[on_ground]
        tg = t_g[on_ground]
        # vertical ground footprint of one pixel: t^2 / (f * camera height)
        footprint = tg * tg / (intr.focal_y * h)
        rgb[on_ground] = _shade_ground(world, gx[on_ground], gy, footprint)

    # crop-row billboards: vertical rectangles facing down-track
    ahead = dx > 1e-9
    safe_dx = np.where(ahead, dx, 1.0)
    for x_p in world.plant_positions():
        rel = x_p - cam_x
        if rel <= 1e-3 or rel > PLANT_DRAW_LIMIT_M:
            continue
        t_b = np.where(ahead, rel / safe_dx, np.inf)
        by = t_b * dy
        bz = h + t_b * dz
        for row_index, y_row in enumerate((-world.row_half_gap, world.row_half_gap)):
            hit = (
                ahead
                & (np.abs(by - y_row) <= 0.5 * world.plant_width)
                & (bz >= 0.0)
                & (bz <= world.plant_height)
                & (t_b < depth)
            )
            if not hit.any():
                continue
            depth[hit] = t_b[hit]
            kinds[hit] = HIT_PLANT
            # texture keyed by world-fixed billboard coordinates
            key_u = by[hit] + 13.7 * x_p + 31.1 * row_index
            key_v = bz[hit]
            rgb[hit] = _shade_plant(world, key_u, key_v, t_b[hit] / intr.focal_y)

    mm = np.where(np.isfinite(depth), np.rint(depth * 1000.0), 0.0)
    mm[(mm < 0.0) | (mm > 0xFFFF)] = 0.0
    return (
        RgbImage(np.rint(rgb).astype(np.uint8)),
        DepthImage(mm.astype(np.uint16)),
        kinds,
    )


def render_frame(world: WorldConfig, pose: CameraPose, intr: CameraIntrinsics):
    rgb, depth, _ = render_frame_ex(world, pose, intr)
    return rgb, depth


def project_track_point_row(pose: CameraPose, intr: CameraIntrinsics, x_world: float) -> float:
    """Image row (float) of a ground point on the track centerline."""
    d = x_world - pose.position_along_track
    cp, sp = math.cos(pose.pitch), math.sin(pose.pitch)
    f_comp = d * cp + pose.height_above_ground * sp
    u_comp = d * sp - pose.height_above_ground * cp
    if f_comp <= 1e-12:
        return math.inf
    return intr.center_y - intr.focal_y * (u_comp / f_comp)


def noise_texture_image(
    width: int,
    height: int,
    seed: int,
    contrast: float = 0.6,
    wavelength_px: float = 14.0,
) -> GrayImage:
    """Flat seeded texture image (no geometry); handy for feature tests."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    n = value_noise(xs, ys, seed, wavelength_px)
    lum = 0.5 * (1.0 + contrast * (2.0 * n - 1.0))
    return GrayImage(np.clip(lum, 0.0, 1.0))

"""Depth-image geometry for the start of the headland traversal stage.

Takes row medians of the depth frame, turns the near/far readings into the
ground span visible in the camera via the law of cosines, and derives the
crop mask whose rows stand for one robot length of ground.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import HeadlandTooShort, InsufficientDepth
from .imaging import CropMask, DepthImage

DEFAULT_VERTICAL_FOV_RAD = math.radians(58.0)

# a row needs at least this fraction of valid pixels for a usable median
MIN_VALID_FRACTION = 0.5


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole vertical geometry: FOV angle plus image size, square pixels."""

    width: int
    height: int
    vertical_fov_alpha: float = DEFAULT_VERTICAL_FOV_RAD

    def __post_init__(self):
        if not 0.0 < self.vertical_fov_alpha < math.pi:
            raise ValueError("vertical FOV must lie in (0, pi)")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")

    @property
    def focal_y(self) -> float:
        return (self.height / 2.0) / math.tan(self.vertical_fov_alpha / 2.0)

    @property
    def center_y(self) -> float:
        return (self.height - 1) / 2.0

    @property
    def center_x(self) -> float:
        return (self.width - 1) / 2.0

    def row_angle(self, y: float) -> float:
        """Elevation of the ray through row y relative to the optical axis.

        Positive above the axis (rows above center), negative below.
        """
        return math.atan2(self.center_y - y, self.focal_y)


@dataclass(frozen=True)
class HeadlandSpan:
    """Near/far row depths and the ground distance they subtend."""

    d1: float
    d2: float
    d_fov: float

    def __post_init__(self):
        if self.d1 <= 0 or self.d2 <= 0:
            raise ValueError("row depths must be positive")
        lo, hi = abs(self.d1 - self.d2), self.d1 + self.d2
        if not (lo - 1e-9 <= self.d_fov <= hi + 1e-9):
            raise ValueError(
                f"d_fov {self.d_fov} violates triangle bounds [{lo}, {hi}]"
            )


@dataclass(frozen=True)
class RobotGeometry:
    """Robot length and the scale factor applied to the target distance.

    ``camera_setback`` is how far the camera sits behind the robot's front
    edge; halt positions are reported at the front.
    """

    length_l: float
    scale_m: float = 1.0
    camera_setback: float = 0.15

    def __post_init__(self):
        if self.length_l <= 0:
            raise ValueError("robot length must be positive")
        if self.scale_m <= 0:
            raise ValueError("scale factor must be positive")
        if self.camera_setback < 0:
            raise ValueError("camera setback cannot be negative")

    @property
    def target_length(self) -> float:
        return self.scale_m * self.length_l


def row_median_depth(depth: DepthImage, row: int) -> float:
    """Median of the valid readings in one row, in meters.

    A reading is valid when nonzero and within the sensor range.  Raises
    InsufficientDepth when fewer than half the row's pixels are valid.
    """
    if not 0 <= row < depth.height:
        raise ValueError(f"row {row} outside image of height {depth.height}")
    values = depth.data[row]
    valid = values[(values > 0) & (values <= depth.max_range_mm)]
    if valid.size < MIN_VALID_FRACTION * values.size or valid.size == 0:
        raise InsufficientDepth(
            f"row {row}: {valid.size}/{values.size} valid depth pixels"
        )
    return float(np.median(valid)) / 1000.0


def estimate_dfov(d1: float, d2: float, alpha: float) -> float:
    """Ground distance subtended between two rays by the law of cosines."""
    if d1 <= 0 or d2 <= 0:
        raise ValueError("distances must be positive")
    if not 0.0 <= alpha < math.pi:
        raise ValueError("alpha must lie in [0, pi)")
    sq = d1 * d1 + d2 * d2 - 2.0 * d1 * d2 * math.cos(alpha)
    return math.sqrt(max(sq, 0.0))


def _usable_row(depth: DepthImage, row: int) -> bool:
    values = depth.data[row]
    valid = int(((values > 0) & (values <= depth.max_range_mm)).sum())
    return valid >= MIN_VALID_FRACTION * values.size and valid > 0


def estimate_span(depth: DepthImage, intr: CameraIntrinsics) -> HeadlandSpan:
    """Estimate the visible headland ground span from one depth frame.

    d1 comes from the bottom row, d2 from the top row.  When the top row has
    too few readings (sky), the highest usable row is taken instead and the
    FOV angle is shrunk to the angle actually spanned by the two rays.
    """
    if (depth.height, depth.width) != (intr.height, intr.width):
        raise ValueError("depth image does not match the camera intrinsics")

    bottom = depth.height - 1
    d1 = row_median_depth(depth, bottom)

    top = 0
    while top < bottom and not _usable_row(depth, top):
        top += 1
    if top >= bottom:
        raise InsufficientDepth("no usable row above the bottom row")
    d2 = row_median_depth(depth, top)

    if top == 0:
        alpha = intr.vertical_fov_alpha
    else:
        # spec formula gives theta(bottom) - theta(top), which is negative for
        # top rows above bottom rows; the subtended angle is its magnitude
        alpha = abs(intr.row_angle(top) - intr.row_angle(bottom))
    return HeadlandSpan(d1=d1, d2=d2, d_fov=estimate_dfov(d1, d2, alpha))


def stage2_mask(span: HeadlandSpan, robot: RobotGeometry, height: int) -> CropMask:
    """Rows whose ground footprint approximates one robot length.

    The bottom fraction length/d_fov of the image is kept, treating image
    rows as linear in ground distance (a documented approximation).  Raises
    HeadlandTooShort when the visible span cannot fit the robot.
    """
    if height <= 0:
        raise ValueError("image height must be positive")
    if span.d_fov < robot.length_l:
        raise HeadlandTooShort(
            f"visible span {span.d_fov:.3f} m < robot length {robot.length_l:.3f} m"
        )
    fraction = min(robot.length_l / span.d_fov, 1.0)
    row_start = int(math.floor((1.0 - fraction) * height))
    return CropMask(row_start, height)

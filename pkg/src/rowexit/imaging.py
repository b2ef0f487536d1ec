"""Pixel containers, color conversion, row cropping, and bit-exact file I/O.

Conventions:
  * grayscale data is float64 luminance in [0, 1]
  * RGB data is uint8, shape (H, W, 3)
  * depth data is uint16 millimeters, 0 meaning "no reading"; values above
    ``max_range_mm`` are treated as invalid by consumers
  * files are 8-bit RGB PNG and 16-bit grayscale PNG; PGM (P5) is accepted
    when loading grayscale fixtures

All containers are immutable values: the wrapped arrays are marked
read-only, so they are safe to share between threads.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import DecodeError, DimensionMismatch, InvalidMask, MissingFile

BT601_WEIGHTS = (0.299, 0.587, 0.114)

DEFAULT_MAX_RANGE_MM = 10000


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GrayImage:
    """Single-channel luminance image, values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"gray image must be 2-d, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("gray image contains non-finite values")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("gray image values must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class RgbImage:
    """8-bit RGB image, shape (H, W, 3)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"rgb image must have shape (H, W, 3), got {arr.shape}")
        if arr.dtype != np.uint8:
            if np.issubdtype(arr.dtype, np.integer) and arr.min() >= 0 and arr.max() <= 255:
                arr = arr.astype(np.uint8)
            else:
                raise ValueError("rgb image must be uint8")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class DepthImage:
    """16-bit depth image in millimeters; 0 marks an invalid pixel."""

    data: np.ndarray
    max_range_mm: int = DEFAULT_MAX_RANGE_MM

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"depth image must be 2-d, got shape {arr.shape}")
        if arr.dtype != np.uint16:
            if np.issubdtype(arr.dtype, np.integer) and arr.min() >= 0 and arr.max() <= 0xFFFF:
                arr = arr.astype(np.uint16)
            else:
                raise ValueError("depth image must be uint16 millimeters")
        if self.max_range_mm <= 0:
            raise ValueError("max_range_mm must be positive")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def valid_mask(self) -> np.ndarray:
        """Boolean mask of pixels carrying a usable reading."""
        return (self.data > 0) & (self.data <= self.max_range_mm)


@dataclass(frozen=True)
class CropMask:
    """Half-open row range [row_start, row_end) keeping the full width."""

    row_start: int
    row_end: int

    def __post_init__(self):
        if self.row_start < 0 or self.row_end <= self.row_start:
            raise InvalidMask(
                f"mask rows [{self.row_start}, {self.row_end}) are empty or negative"
            )

    def validate(self, height: int) -> None:
        if self.row_end > height:
            raise InvalidMask(
                f"mask rows [{self.row_start}, {self.row_end}) exceed image height {height}"
            )

    @property
    def rows(self) -> int:
        return self.row_end - self.row_start


def full_mask(height: int) -> CropMask:
    return CropMask(0, height)


def rgb_to_gray(img: RgbImage) -> GrayImage:
    """BT.601 luma: (0.299 R + 0.587 G + 0.114 B) / 255."""
    wr, wg, wb = BT601_WEIGHTS
    rgb = img.data.astype(np.float64)
    lum = (wr * rgb[:, :, 0] + wg * rgb[:, :, 1] + wb * rgb[:, :, 2]) / 255.0
    # weights sum to 1 so the result is already in [0, 1]; clip guards rounding
    return GrayImage(np.clip(lum, 0.0, 1.0))


def crop_rows(img, mask: CropMask):
    """Return the row span [row_start, row_end) of a gray or depth image.

    Output keeps the full width; pixel values are copied bit-exact.
    """
    mask.validate(img.height)
    sub = img.data[mask.row_start : mask.row_end, ...]
    if isinstance(img, GrayImage):
        return GrayImage(sub.copy())
    if isinstance(img, DepthImage):
        return DepthImage(sub.copy(), max_range_mm=img.max_range_mm)
    if isinstance(img, RgbImage):
        return RgbImage(sub.copy())
    raise TypeError(f"cannot crop {type(img).__name__}")


def _open_image(path: str) -> Image.Image:
    if not os.path.exists(path):
        raise MissingFile(path)
    try:
        img = Image.open(path)
        img.load()
    except Exception as exc:
        raise DecodeError(f"{path}: {exc}") from exc
    return img


def load_rgb(path: str) -> RgbImage:
    img = _open_image(path)
    if img.mode not in ("RGB", "L"):
        try:
            img = img.convert("RGB")
        except Exception as exc:
            raise DecodeError(f"{path}: cannot interpret mode {img.mode} as RGB") from exc
    if img.mode == "L":
        img = img.convert("RGB")
    return RgbImage(np.asarray(img, dtype=np.uint8))


def load_depth(path: str, max_range_mm: int = DEFAULT_MAX_RANGE_MM) -> DepthImage:
    img = _open_image(path)
    if img.mode not in ("I;16", "I", "L"):
        raise DecodeError(f"{path}: expected 16-bit grayscale depth, got mode {img.mode}")
    arr = np.asarray(img)
    if arr.min() < 0 or arr.max() > 0xFFFF:
        raise DecodeError(f"{path}: depth values exceed 16-bit range")
    return DepthImage(arr.astype(np.uint16), max_range_mm=max_range_mm)


def load_rgb_depth_pair(rgb_path: str, depth_path: str,
                        max_range_mm: int = DEFAULT_MAX_RANGE_MM) -> tuple[RgbImage, DepthImage]:
    """Load a recorded RGB/depth frame pair, insisting the sizes agree."""
    rgb = load_rgb(rgb_path)
    depth = load_depth(depth_path, max_range_mm=max_range_mm)
    if (rgb.height, rgb.width) != (depth.height, depth.width):
        raise DimensionMismatch(
            f"rgb {rgb.width}x{rgb.height} vs depth {depth.width}x{depth.height}"
        )
    return rgb, depth


def load_gray(path: str) -> GrayImage:
    """Load any supported image as luminance (PNG or PGM)."""
    img = _open_image(path)
    if img.mode == "RGB" or img.mode not in ("L", "I;16", "I"):
        return rgb_to_gray(load_rgb(path))
    arr = np.asarray(img)
    if img.mode == "L":
        return GrayImage(arr.astype(np.float64) / 255.0)
    if arr.max(initial=0) > 0xFFFF or arr.min(initial=0) < 0:
        raise DecodeError(f"{path}: gray values exceed 16-bit range")
    return GrayImage(arr.astype(np.float64) / 65535.0)


def save_rgb(path: str, img: RgbImage) -> None:
    Image.fromarray(img.data).save(path, format="PNG")


def save_depth(path: str, img: DepthImage) -> None:
    Image.fromarray(img.data).save(path, format="PNG")


def save_gray(path: str, img: GrayImage) -> None:
    """Store luminance as 16-bit grayscale PNG (values quantized to /65535)."""
    arr = np.round(img.data * 65535.0).astype(np.uint16)
    Image.fromarray(arr).save(path, format="PNG")

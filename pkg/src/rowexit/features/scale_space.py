"""Gaussian octave pyramid and its difference stacks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ImageTooSmall
from ..imaging import GrayImage
from .params import FeatureParams

# assumed blur of the raw camera image
CAMERA_SIGMA = 0.5

MIN_IMAGE_SIDE = 16


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-d Gaussian with kernel radius ceil(3*sigma)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    radius = int(math.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (xs / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with reflected borders.

    Runs in the input's dtype; the pyramid uses float32, which is plenty for
    DoG contrasts around 1e-2 and halves the memory traffic.
    """
    kernel = gaussian_kernel(sigma).astype(img.dtype)
    r = len(kernel) // 2
    h, w = img.shape

    padded = np.pad(img, ((0, 0), (r, r)), mode="reflect")
    out = np.zeros_like(img)
    for i, k in enumerate(kernel):
        out += k * padded[:, i : i + w]

    padded = np.pad(out, ((r, r), (0, 0)), mode="reflect")
    out = np.zeros_like(img)
    for i, k in enumerate(kernel):
        out += k * padded[i : i + h, :]
    return out


def _upsample2x(img: np.ndarray) -> np.ndarray:
    """Bilinear 2x upsample (pixel-doubling grid)."""
    h, w = img.shape
    ys = np.arange(2 * h) / 2.0
    xs = np.arange(2 * w) / 2.0
    y0 = np.clip(ys.astype(int), 0, h - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    x0 = np.clip(xs.astype(int), 0, w - 1)
    x1 = np.clip(x0 + 1, 0, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


@dataclass(frozen=True)
class ScaleSpace:
    """Per-octave Gaussian stacks, their DoG stacks, and scale bookkeeping.

    ``gaussians[o]`` has scales_per_octave + 3 levels; ``dogs[o]`` is the
    stacked difference array with one fewer level.  ``coord_scale`` maps
    octave coordinates back to input-image coordinates (0.5 when the input
    was upsampled, else 1.0).
    """

    gaussians: list[list[np.ndarray]]
    dogs: list[np.ndarray]
    params: FeatureParams
    coord_scale: float
    # per-level gradient arrays, filled lazily by the detector/descriptor
    grad_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def num_octaves(self) -> int:
        return len(self.gaussians)

    def sigma_of(self, octave: int, level: float) -> float:
        """Absolute scale of (octave, level) in input-image pixels."""
        spo = self.params.scales_per_octave
        return (
            self.params.base_sigma
            * (2.0 ** (octave + level / spo))
            * self.coord_scale
        )

    def relative_sigma(self, level: float) -> float:
        """Scale of a level in its own octave's pixel units."""
        return self.params.base_sigma * (2.0 ** (level / self.params.scales_per_octave))


def num_octaves_for(width: int, height: int, params: FeatureParams) -> int:
    n = int(math.floor(math.log2(min(width, height)))) - 2
    if params.max_octaves is not None:
        n = min(n, params.max_octaves)
    return max(n, 1)


def build_scale_space(img: GrayImage, params: FeatureParams | None = None) -> ScaleSpace:
    """Build the Gaussian pyramid and DoG stacks for one image."""
    params = params or FeatureParams()
    if min(img.width, img.height) < MIN_IMAGE_SIDE:
        raise ImageTooSmall(f"{img.width}x{img.height} below {MIN_IMAGE_SIDE} px")

    base = np.asarray(img.data, dtype=np.float32)
    coord_scale = 1.0
    assumed = CAMERA_SIGMA
    if params.upsample:
        base = _upsample2x(base)
        coord_scale = 0.5
        assumed = 2.0 * CAMERA_SIGMA

    spo = params.scales_per_octave
    # bring the base image up to base_sigma (in current pixel units)
    first_delta = math.sqrt(max(params.base_sigma**2 - assumed**2, 0.01))
    current = gaussian_blur(base, first_delta)

    # blur increments between consecutive levels within an octave
    k = 2.0 ** (1.0 / spo)
    level_sigmas = [params.base_sigma * k**s for s in range(spo + 3)]
    deltas = [
        math.sqrt(level_sigmas[s] ** 2 - level_sigmas[s - 1] ** 2)
        for s in range(1, spo + 3)
    ]

    octaves = num_octaves_for(img.width, img.height, params)
    gaussians: list[list[np.ndarray]] = []
    dogs: list[np.ndarray] = []
    for _ in range(octaves):
        stack = [current]
        for d in deltas:
            stack.append(gaussian_blur(stack[-1], d))
        gaussians.append(stack)
        dogs.append(np.stack([stack[s + 1] - stack[s] for s in range(spo + 2)]))
        # level spo has exactly twice the octave's base blur: halve it
        current = stack[spo][::2, ::2]

    return ScaleSpace(gaussians=gaussians, dogs=dogs, params=params, coord_scale=coord_scale)

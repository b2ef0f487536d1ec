"""Seeded procedural value noise over world coordinates.

The texture is a pure function of position and seed (no RNG state), so any
camera pose samples a consistent world: the same patch of ground renders
the same brightness from every viewpoint, which is exactly what feature
matching across frames relies on.
"""

from __future__ import annotations

import numpy as np

_M1 = np.uint64(0x9E3779B97F4A7C15)
_M2 = np.uint64(0xBF58476D1CE4E5B9)
_M3 = np.uint64(0x94D049BB133111EB)


def hash01(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    """Avalanche hash of integer lattice coordinates to [0, 1)."""
    with np.errstate(over="ignore"):
        h = ix.astype(np.uint64) * _M1
        h ^= iy.astype(np.uint64) * _M2
        h ^= np.uint64(seed & 0xFFFFFFFFFFFFFFFF) * _M3
        h ^= h >> np.uint64(30)
        h *= _M2
        h ^= h >> np.uint64(27)
        h *= _M3
        h ^= h >> np.uint64(31)
    return (h >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def _smoothstep(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


def _lattice_noise(x: np.ndarray, y: np.ndarray, seed: int) -> np.ndarray:
    """Bilinear value noise on the unit lattice."""
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = _smoothstep(x - x0)
    fy = _smoothstep(y - y0)
    ix = x0.astype(np.int64)
    iy = y0.astype(np.int64)
    v00 = hash01(ix, iy, seed)
    v10 = hash01(ix + 1, iy, seed)
    v01 = hash01(ix, iy + 1, seed)
    v11 = hash01(ix + 1, iy + 1, seed)
    top = v00 + (v10 - v00) * fx
    bot = v01 + (v11 - v01) * fx
    return top + (bot - top) * fy


def value_noise(
    x: np.ndarray,
    y: np.ndarray,
    seed: int,
    wavelength: float,
    octaves: int = 2,
    sharpness: float = 1.0,
    footprint: np.ndarray | float | None = None,
) -> np.ndarray:
    """Multi-octave value noise in [0, 1]; wavelength is the coarsest period.

    ``sharpness`` > 1 steepens the tone curve around mid-gray (clipping the
    tails), which turns the smooth field into the edge-rich speckle real
    ground shows; keypoint detectors see almost nothing in unsharpened
    value noise.

    ``footprint`` is the per-sample ground size one pixel covers; octaves
    the optics could not resolve fade out smoothly (anti-aliasing), so far
    ground goes featureless instead of shimmering.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    total = np.zeros(np.broadcast(x, y).shape)
    amp_sum = np.zeros_like(total)
    freq = 1.0 / wavelength
    lam = wavelength
    for octave in range(octaves):
        if footprint is None:
            w = 1.0
        else:
            # full weight when the octave spans >= 6 pixel footprints,
            # gone below 3 (matches how optics blur marginal detail)
            w = np.clip(lam / (3.0 * np.asarray(footprint, dtype=np.float64)) - 1.0, 0.0, 1.0)
        total += w * _lattice_noise(x * freq, y * freq, seed + 7919 * octave)
        amp_sum = amp_sum + w
        freq *= 2.0
        lam *= 0.5
    n = np.where(amp_sum > 1e-9, total / np.maximum(amp_sum, 1e-9), 0.5)
    if sharpness != 1.0:
        n = np.clip(0.5 + sharpness * (n - 0.5), 0.0, 1.0)
    return n

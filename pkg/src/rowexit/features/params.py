"""Parameter and keypoint records for the feature pipeline."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class FeatureParams:
    """Detector/descriptor tuning knobs.

    Defaults are the standard values for this family of detectors; they are
    exposed so the halt-control pipeline can be retuned without code edits.
    ``upsample`` doubles the input before octave 0 (off by default: the
    pipeline compares consecutive near-identical frames, so the finest-scale
    keypoints are not worth the 4x cost).
    """

    scales_per_octave: int = 3
    base_sigma: float = 1.6
    contrast_threshold: float = 0.03
    edge_ratio_threshold: float = 10.0
    max_octaves: int | None = None
    upsample: bool = False

    def __post_init__(self):
        if self.scales_per_octave < 1:
            raise ValueError("scales_per_octave must be >= 1")
        if self.base_sigma <= 0:
            raise ValueError("base_sigma must be positive")
        if self.contrast_threshold <= 0 or self.edge_ratio_threshold <= 0:
            raise ValueError("thresholds must be positive")
        if self.max_octaves is not None and self.max_octaves < 1:
            raise ValueError("max_octaves must be >= 1 when given")


@dataclass(frozen=True)
class Keypoint:
    """A refined scale-space extremum in original-image coordinates.

    ``sigma`` is the absolute scale; ``octave``/``level`` locate the pyramid
    slice the point was found in (needed to sample its descriptor window);
    ``orientation`` is radians in [0, 2pi); ``response`` is the interpolated
    DoG contrast magnitude.
    """

    x: float
    y: float
    sigma: float
    octave: int
    level: int
    orientation: float
    response: float

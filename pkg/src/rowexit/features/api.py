"""Top-level feature extraction entry points."""

from __future__ import annotations

import csv

import numpy as np

from ..imaging import GrayImage
from .describe import describe_keypoints
from .detect import KeypointTable, detect_keypoints, sort_and_dedup
from .params import FeatureParams, Keypoint
from .scale_space import build_scale_space


def _table_to_keypoints(table: KeypointTable) -> list[Keypoint]:
    return [
        Keypoint(
            x=float(table.x_img[i]),
            y=float(table.y_img[i]),
            sigma=float(table.sigma_abs[i]),
            octave=int(table.octave[i]),
            level=int(table.level[i]),
            orientation=float(table.orientation[i]),
            response=float(table.response[i]),
        )
        for i in range(len(table))
    ]


def detect_and_describe(
    img: GrayImage, params: FeatureParams | None = None
) -> list[tuple[Keypoint, np.ndarray]]:
    """Detect keypoints and compute their descriptors for one image.

    Results are sorted by (y, x, sigma, orientation) so repeated runs are
    bit-identical; keypoints without a usable descriptor window are dropped.
    """
    params = params or FeatureParams()
    space = build_scale_space(img, params)
    table = sort_and_dedup(detect_keypoints(space))
    if len(table) == 0:
        return []
    desc, ok = describe_keypoints(space, table)
    table = table.take(ok)
    desc = desc[ok]
    kps = _table_to_keypoints(table)
    return [(kp, desc[i]) for i, kp in enumerate(kps)]


def keypoints_to_csv(path: str, features: list[tuple[Keypoint, np.ndarray]]) -> None:
    """Debug dump: one keypoint per row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "sigma", "orientation", "response"])
        for kp, _ in features:
            writer.writerow(
                [f"{kp.x:.3f}", f"{kp.y:.3f}", f"{kp.sigma:.4f}",
                 f"{kp.orientation:.5f}", f"{kp.response:.6f}"]
            )

"""Local-feature similarity matching: exhaustive 2-NN plus the ratio test.

The similarity score is the raw count of ratio-test survivors between a
reference crop and the current crop; the halt rule downstream compares it
against a fixed threshold (default 20).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .features import FeatureParams, Keypoint, detect_and_describe
from .imaging import CropMask, GrayImage, crop_rows


@dataclass(frozen=True)
class MatcherConfig:
    """k is fixed at 2; ratio and halt threshold follow the field-tuned values."""

    k: int = 2
    ratio_threshold: float = 0.7
    sim_threshold: int = 20

    def __post_init__(self):
        if self.k != 2:
            raise ValueError("matcher is defined for k = 2 only")
        if not 0.0 < self.ratio_threshold < 1.0:
            raise ValueError("ratio_threshold must lie in (0, 1)")
        if self.sim_threshold < 0:
            raise ValueError("sim_threshold must be non-negative")


@dataclass(frozen=True)
class MatchPair:
    """Nearest and second-nearest candidate for one query descriptor."""

    query_index: int
    train_index: int
    distance: float
    second_distance: float

    def __post_init__(self):
        if self.distance > self.second_distance:
            raise ValueError("nearest distance exceeds second-nearest")


@dataclass(frozen=True)
class SimScore:
    """Count of ratio-test survivors driving the halt decision."""

    value: int

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("similarity score cannot be negative")


def _as_matrix(descriptors) -> np.ndarray:
    arr = np.asarray(descriptors, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 128)
    if arr.ndim != 2:
        raise ValueError("descriptors must form an (n, d) matrix")
    return arr


def knn_match(desc_a, desc_b, k: int = 2) -> list[MatchPair]:
    """Exhaustive two-nearest-neighbor match from desc_a into desc_b.

    Distances are Euclidean; ties break toward the lower train index.  With
    fewer than two candidates a query yields no pair at all, which drives
    the similarity score toward zero exactly when texture disappears.
    """
    if k != 2:
        raise ValueError("matcher is defined for k = 2 only")
    a = _as_matrix(desc_a)
    b = _as_matrix(desc_b)
    if a.shape[0] == 0 or b.shape[0] < 2:
        return []

    # squared distances via the expanded product; exact enough in float64
    # that ties against the scanning oracle are measure-zero
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.maximum(sq, 0.0, out=sq)

    first = np.argmin(sq, axis=1)
    rows = np.arange(a.shape[0])
    d1 = sq[rows, first]
    sq[rows, first] = np.inf
    second = np.argmin(sq, axis=1)
    d2 = sq[rows, second]

    return [
        MatchPair(
            query_index=int(i),
            train_index=int(first[i]),
            distance=float(np.sqrt(d1[i])),
            second_distance=float(np.sqrt(d2[i])),
        )
        for i in rows
    ]


def ratio_filter(matches: list[MatchPair], ratio_threshold: float = 0.7) -> list[MatchPair]:
    """Keep a pair iff distance < ratio * second_distance (strict).

    An exact zero distance is kept unconditionally, which also covers the
    degenerate second_distance = 0 case.
    """
    kept = []
    for m in matches:
        if m.distance == 0.0 or m.distance < ratio_threshold * m.second_distance:
            kept.append(m)
    return kept


def score_descriptors(desc_a, desc_b, cfg: MatcherConfig | None = None) -> SimScore:
    """Similarity score between two descriptor sets."""
    cfg = cfg or MatcherConfig()
    kept = ratio_filter(knn_match(desc_a, desc_b, cfg.k), cfg.ratio_threshold)
    return SimScore(len(kept))


def lfsm_score(
    img_ref: GrayImage,
    img_cur: GrayImage,
    mask: CropMask,
    params: FeatureParams | None = None,
    cfg: MatcherConfig | None = None,
) -> SimScore:
    """Score two frames: crop both with the same mask, describe, match, count."""
    score, _, _, _ = lfsm_match_details(img_ref, img_cur, mask, params, cfg)
    return score


def lfsm_match_details(
    img_ref: GrayImage,
    img_cur: GrayImage,
    mask: CropMask,
    params: FeatureParams | None = None,
    cfg: MatcherConfig | None = None,
):
    """As lfsm_score, also returning matches and both feature lists."""
    cfg = cfg or MatcherConfig()
    feats_ref = detect_and_describe(crop_rows(img_ref, mask), params)
    feats_cur = detect_and_describe(crop_rows(img_cur, mask), params)
    desc_ref = np.array([d for _, d in feats_ref]).reshape(len(feats_ref), -1)
    desc_cur = np.array([d for _, d in feats_cur]).reshape(len(feats_cur), -1)
    matches = knn_match(desc_ref, desc_cur, cfg.k)
    kept = ratio_filter(matches, cfg.ratio_threshold)
    kept_ids = {m.query_index for m in kept}
    return SimScore(len(kept)), matches, kept_ids, (feats_ref, feats_cur)


def matches_to_csv(path: str, matches: list[MatchPair], kept_ids: set[int]) -> None:
    """Debug dump of every 2-NN pair with its ratio-test outcome."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_index", "train_index", "distance", "second_distance", "kept"])
        for m in matches:
            writer.writerow(
                [m.query_index, m.train_index, f"{m.distance:.9f}",
                 f"{m.second_distance:.9f}", int(m.query_index in kept_ids)]
            )


__all__ = [
    "MatcherConfig",
    "MatchPair",
    "SimScore",
    "knn_match",
    "ratio_filter",
    "score_descriptors",
    "lfsm_score",
    "lfsm_match_details",
    "matches_to_csv",
    "Keypoint",
]

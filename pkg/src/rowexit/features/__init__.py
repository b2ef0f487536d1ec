"""Scale-invariant keypoint detection and descriptor computation.

Built from scratch on numpy: difference-of-Gaussian extrema over an octave
pyramid, quadratic subpixel refinement, gradient-histogram orientations, and
128-d orientation-normalized descriptors.
"""

from .params import FeatureParams, Keypoint
from .scale_space import ScaleSpace, build_scale_space, gaussian_blur, gaussian_kernel
from .detect import detect_keypoints
from .describe import compute_descriptor, describe_keypoints
from .api import detect_and_describe, keypoints_to_csv

__all__ = [
    "FeatureParams",
    "Keypoint",
    "ScaleSpace",
    "build_scale_space",
    "gaussian_blur",
    "gaussian_kernel",
    "detect_keypoints",
    "describe_keypoints",
    "compute_descriptor",
    "detect_and_describe",
    "keypoints_to_csv",
]

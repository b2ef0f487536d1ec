"""128-d gradient-histogram descriptors, rotation-normalized per keypoint.

A descriptor is a 4x4 spatial grid of 8-bin orientation histograms built
from the keypoint's Gaussian level, with Gaussian radial weighting and
trilinear vote splitting, clamped at 0.2 and renormalized to unit length.

Keypoints whose sampling window would leave the image (or whose window has
no gradient energy at all) are rejected rather than padded, so descriptor
invariants hold unconditionally.

The batch path works on compacted sample arrays: window geometry is computed
first, everything outside the rotated support is dropped, and gradient
gathers plus histogram votes run on flat arrays.  This is what keeps a full
frame within the pipeline's real-time budget.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import WindowOutOfBounds
from .detect import TWO_PI, KeypointTable, level_gradients
from .params import Keypoint
from .scale_space import ScaleSpace

GRID = 4  # spatial histogram cells per side
ORI_BINS = 8
SCALE_MULTIPLIER = 3.0  # histogram cell width in units of keypoint scale
CLAMP = 0.2

# half-extent of the valid (rotated) support per unit of cell width
_HALF_BINS = 0.5 * GRID + 0.5  # row/col bins live in (-1, GRID)

# cap on scratch elements per batch
_CHUNK_BUDGET = 2_000_000

_PADDED = GRID + 2  # histogram frame padded by one cell on each side


def _support_radius(hist_width: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Axis-aligned half-extent of the rotated square support, in pixels."""
    need = _HALF_BINS * hist_width * (np.abs(np.cos(theta)) + np.abs(np.sin(theta)))
    return np.ceil(need).astype(np.int64)


def _descriptor_batch(mag, ang, x0, y0, bb, hist_width, theta):
    """Descriptors for one (octave, level) group; all supports are in-bounds."""
    n = x0.size
    out = np.zeros((n, 128))
    h, w = mag.shape

    order = np.argsort(bb, kind="stable")
    pos = 0
    while pos < n:
        # grow the chunk while the padded grid stays within budget
        kmax = int(bb[order[pos]])
        end = pos
        while end < n:
            kmax = max(kmax, int(bb[order[end]]))
            count = end - pos + 1
            if count * (2 * kmax + 1) ** 2 > _CHUNK_BUDGET and end > pos:
                break
            end += 1
        sel = order[pos:end]
        pos = end

        m = sel.size
        side = 2 * kmax + 1
        grid = np.arange(-kmax, kmax + 1, dtype=np.float32)
        gy = grid[:, None]
        gx = grid[None, :]

        cos_t = np.cos(theta[sel]).astype(np.float32)[:, None, None]
        sin_t = np.sin(theta[sel]).astype(np.float32)[:, None, None]
        inv_hw = (1.0 / hist_width[sel]).astype(np.float32)[:, None, None]
        col_rot = (gx * cos_t + gy * sin_t) * inv_hw
        row_rot = (-gx * sin_t + gy * cos_t) * inv_hw

        row_bin = row_rot + np.float32(0.5 * GRID - 0.5)
        col_bin = col_rot + np.float32(0.5 * GRID - 0.5)
        valid = (
            (row_bin > -1.0)
            & (row_bin < GRID)
            & (col_bin > -1.0)
            & (col_bin < GRID)
        )

        flat_idx = np.nonzero(valid.ravel())[0]
        if flat_idx.size == 0:
            continue
        kp_of = flat_idx // (side * side)
        cell = flat_idx % (side * side)
        oy = cell // side - kmax
        ox = cell % side - kmax
        yy = y0[sel][kp_of] + oy
        xx = x0[sel][kp_of] + ox

        mg = np.asarray(mag[yy, xx], dtype=np.float32)
        an = np.asarray(ang[yy, xx], dtype=np.float32)

        rb = row_bin.ravel()[flat_idx]
        cb = col_bin.ravel()[flat_idx]
        rr = row_rot.ravel()[flat_idx]
        cr = col_rot.ravel()[flat_idx]
        ob = (
            np.mod(an - theta[sel].astype(np.float32)[kp_of], np.float32(TWO_PI))
            * np.float32(ORI_BINS / TWO_PI)
        )

        weight = np.exp((rr * rr + cr * cr) * np.float32(-0.5 / (0.5 * GRID) ** 2)) * mg

        rb0 = np.floor(rb)
        cb0 = np.floor(cb)
        ob0 = np.floor(ob)
        fr = (rb - rb0).astype(np.float64)
        fc = (cb - cb0).astype(np.float64)
        fo = (ob - ob0).astype(np.float64)
        rb0i = rb0.astype(np.int64) + 1  # into padded frame, range [0, GRID+1]
        cb0i = cb0.astype(np.int64) + 1
        ob0i = ob0.astype(np.int64) % ORI_BINS
        ob1i = (ob0i + 1) % ORI_BINS

        base = ((kp_of * _PADDED + rb0i) * _PADDED + cb0i) * ORI_BINS
        wgt = weight.astype(np.float64)
        w_r1 = wgt * fr
        w_r0 = wgt - w_r1
        size = m * _PADDED * _PADDED * ORI_BINS
        hist = np.zeros(size)
        for w_r, dr in ((w_r0, 0), (w_r1, 1)):
            w_rc1 = w_r * fc
            w_rc0 = w_r - w_rc1
            row_off = dr * (_PADDED * ORI_BINS)
            for w_rc, dc in ((w_rc0, 0), (w_rc1, 1)):
                w_rco1 = w_rc * fo
                w_rco0 = w_rc - w_rco1
                off = base + row_off + dc * ORI_BINS
                hist += np.bincount(off + ob0i, weights=w_rco0, minlength=size)
                hist += np.bincount(off + ob1i, weights=w_rco1, minlength=size)

        hist = hist.reshape(m, _PADDED, _PADDED, ORI_BINS)
        out[sel] = hist[:, 1 : GRID + 1, 1 : GRID + 1, :].reshape(m, 128)
    return out


def describe_keypoints(space: ScaleSpace, table: KeypointTable):
    """Descriptors for a keypoint table.

    Returns (descriptors, ok): rows of ``descriptors`` are valid only where
    ``ok`` is True (support fully inside the level and nonzero gradient).
    """
    n = len(table)
    desc = np.zeros((n, 128))
    ok = np.zeros(n, dtype=bool)

    hist_width_all = SCALE_MULTIPLIER * table.sigma_rel
    bb_all = _support_radius(hist_width_all, table.orientation)

    for octave in np.unique(table.octave):
        for level in np.unique(table.level[table.octave == octave]):
            sel = np.nonzero((table.octave == octave) & (table.level == level))[0]
            if sel.size == 0:
                continue
            mag, ang = level_gradients(space, int(octave), int(level))
            h, w = mag.shape
            x0 = np.rint(table.x_oct[sel]).astype(np.int64)
            y0 = np.rint(table.y_oct[sel]).astype(np.int64)
            bb = bb_all[sel]
            inside = (
                (x0 - bb >= 1)
                & (x0 + bb <= w - 2)
                & (y0 - bb >= 1)
                & (y0 + bb <= h - 2)
            )
            use = sel[inside]
            if use.size == 0:
                continue
            block = _descriptor_batch(
                mag,
                ang,
                x0[inside],
                y0[inside],
                bb[inside],
                hist_width_all[use],
                table.orientation[use],
            )
            norms = np.linalg.norm(block, axis=1)
            nonzero = norms > 1e-12
            clamped = np.minimum(block, CLAMP * norms[:, None])
            norms2 = np.linalg.norm(clamped, axis=1)
            nonzero &= norms2 > 1e-12
            safe = np.where(nonzero, norms2, 1.0)
            desc[use] = clamped / safe[:, None]
            ok[use] = nonzero
    return desc, ok


def compute_descriptor(space: ScaleSpace, kp: Keypoint) -> np.ndarray:
    """Descriptor for a single keypoint; raises WindowOutOfBounds if the
    sampling window is unavailable or carries no gradient signal."""
    pix = (2.0**kp.octave) * space.coord_scale
    table = KeypointTable(
        octave=np.array([kp.octave], dtype=np.int64),
        level=np.array([kp.level], dtype=np.int64),
        x_oct=np.array([kp.x / pix]),
        y_oct=np.array([kp.y / pix]),
        sigma_rel=np.array([kp.sigma / pix]),
        orientation=np.array([kp.orientation]),
        x_img=np.array([kp.x]),
        y_img=np.array([kp.y]),
        sigma_abs=np.array([kp.sigma]),
        response=np.array([kp.response]),
    )
    desc, ok = describe_keypoints(space, table)
    if not ok[0]:
        raise WindowOutOfBounds(
            f"keypoint at ({kp.x:.1f}, {kp.y:.1f}) octave {kp.octave}: "
            "descriptor window unavailable or empty"
        )
    return desc[0]

"""DoG extrema detection, subpixel refinement, and orientation assignment.

Everything operates on whole candidate batches as numpy arrays; per-pixel
Python loops would miss the pipeline's frame-rate budget by two orders of
magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import FeatureParams
from .scale_space import ScaleSpace

# pixels around the octave border where candidates are ignored
IMG_BORDER = 5

MAX_REFINE_STEPS = 5

ORI_BINS = 36
ORI_SIGMA_FACTOR = 1.5
ORI_RADIUS_FACTOR = 3.0
ORI_PEAK_RATIO = 0.8

TWO_PI = 2.0 * np.pi

# 26 neighbor offsets of a 3x3x3 cube (scale, row, col)
_NEIGHBOR_OFFSETS = [
    (ds, dy, dx)
    for ds in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dx in (-1, 0, 1)
    if (ds, dy, dx) != (0, 0, 0)
]

_CUBE_S, _CUBE_Y, _CUBE_X = np.meshgrid(
    np.arange(-1, 2), np.arange(-1, 2), np.arange(-1, 2), indexing="ij"
)


@dataclass
class KeypointTable:
    """Column-oriented keypoint batch (one row per oriented keypoint)."""

    octave: np.ndarray
    level: np.ndarray
    x_oct: np.ndarray
    y_oct: np.ndarray
    sigma_rel: np.ndarray
    orientation: np.ndarray
    x_img: np.ndarray
    y_img: np.ndarray
    sigma_abs: np.ndarray
    response: np.ndarray

    def __len__(self) -> int:
        return len(self.octave)

    def take(self, idx) -> "KeypointTable":
        return KeypointTable(
            octave=self.octave[idx],
            level=self.level[idx],
            x_oct=self.x_oct[idx],
            y_oct=self.y_oct[idx],
            sigma_rel=self.sigma_rel[idx],
            orientation=self.orientation[idx],
            x_img=self.x_img[idx],
            y_img=self.y_img[idx],
            sigma_abs=self.sigma_abs[idx],
            response=self.response[idx],
        )


def _empty_table() -> KeypointTable:
    f = lambda: np.empty(0, dtype=np.float64)  # noqa: E731
    i = lambda: np.empty(0, dtype=np.int64)  # noqa: E731
    return KeypointTable(i(), i(), f(), f(), f(), f(), f(), f(), f(), f())


def _concat_tables(tables: list[KeypointTable]) -> KeypointTable:
    if not tables:
        return _empty_table()
    return KeypointTable(
        *[
            np.concatenate([getattr(t, name) for t in tables])
            for name in (
                "octave",
                "level",
                "x_oct",
                "y_oct",
                "sigma_rel",
                "orientation",
                "x_img",
                "y_img",
                "sigma_abs",
                "response",
            )
        ]
    )


def _scan_extrema(dog: np.ndarray, pre_threshold: float):
    """Indices (s, y, x) of 26-neighborhood extrema above the prefilter.

    A cheap prescreen (own-level 8-neighborhood plus the two same-pixel
    scale neighbors) culls most candidates before the full gather pass.
    """
    n_levels, h, w = dog.shape
    if h <= 2 * IMG_BORDER + 2 or w <= 2 * IMG_BORDER + 2:
        return (np.empty(0, np.int64),) * 3

    ys = slice(IMG_BORDER, h - IMG_BORDER)
    xs = slice(IMG_BORDER, w - IMG_BORDER)
    center = dog[1 : n_levels - 1, ys, xs]
    strong = np.abs(center) > pre_threshold
    is_max = strong.copy()
    is_min = strong.copy()
    for ds, dy, dx in ((0, -1, -1), (0, -1, 0), (0, -1, 1), (0, 0, -1),
                       (0, 0, 1), (0, 1, -1), (0, 1, 0), (0, 1, 1),
                       (-1, 0, 0), (1, 0, 0)):
        nb = dog[
            1 + ds : n_levels - 1 + ds,
            IMG_BORDER + dy : h - IMG_BORDER + dy,
            IMG_BORDER + dx : w - IMG_BORDER + dx,
        ]
        is_max &= center >= nb
        is_min &= center <= nb
    ss, yy, xx = np.nonzero(is_max | is_min)
    if ss.size == 0:
        return (np.empty(0, np.int64),) * 3
    ss = ss + 1
    yy = yy + IMG_BORDER
    xx = xx + IMG_BORDER

    cval = dog[ss, yy, xx]
    is_max = np.ones(ss.shape, dtype=bool)
    is_min = np.ones(ss.shape, dtype=bool)
    for ds, dy, dx in _NEIGHBOR_OFFSETS:
        if ds == 0:
            continue  # own-level neighbors already checked above
        if (ds, dy, dx) in ((-1, 0, 0), (1, 0, 0)):
            continue
        neighbor = dog[ss + ds, yy + dy, xx + dx]
        is_max &= cval >= neighbor
        is_min &= cval <= neighbor
    keep = is_max | is_min
    return ss[keep], yy[keep], xx[keep]


def _solve_sym3(hxx, hyy, hss, hxy, hxs, hys, bx, by, bs):
    """Solve the symmetric 3x3 systems H d = b for batches; flags singularity."""
    c00 = hyy * hss - hys * hys
    c01 = hxs * hys - hxy * hss
    c02 = hxy * hys - hxs * hyy
    det = hxx * c00 + hxy * c01 + hxs * c02
    ok = np.abs(det) > 1e-30
    safe = np.where(ok, det, 1.0)
    c11 = hxx * hss - hxs * hxs
    c12 = hxy * hxs - hxx * hys
    c22 = hxx * hyy - hxy * hxy
    dx = (c00 * bx + c01 * by + c02 * bs) / safe
    dy = (c01 * bx + c11 * by + c12 * bs) / safe
    ds = (c02 * bx + c12 * by + c22 * bs) / safe
    return dx, dy, ds, ok


def _refine_extrema(dog: np.ndarray, ss, yy, xx, params: FeatureParams):
    """Iterated quadratic refinement; returns converged, filtered candidates.

    Offsets larger than half a pixel/level re-center the candidate (up to
    MAX_REFINE_STEPS times); candidates wandering out of bounds or failing
    the contrast/edge tests are dropped.
    """
    n_levels, h, w = dog.shape
    max_level = n_levels - 2

    n = ss.size
    s = ss.astype(np.int64).copy()
    y = yy.astype(np.int64).copy()
    x = xx.astype(np.int64).copy()
    off = np.zeros((n, 3))  # dx, dy, ds
    value = np.zeros(n)
    hess2 = np.zeros((n, 3))  # dxx, dyy, dxy at convergence
    good = np.zeros(n, dtype=bool)
    alive = np.ones(n, dtype=bool)

    for _ in range(MAX_REFINE_STEPS):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        si = s[idx, None, None, None] + _CUBE_S[None]
        yi = y[idx, None, None, None] + _CUBE_Y[None]
        xi = x[idx, None, None, None] + _CUBE_X[None]
        cube = dog[si, yi, xi].astype(np.float64)

        c = cube[:, 1, 1, 1]
        gx = 0.5 * (cube[:, 1, 1, 2] - cube[:, 1, 1, 0])
        gy = 0.5 * (cube[:, 1, 2, 1] - cube[:, 1, 0, 1])
        gs = 0.5 * (cube[:, 2, 1, 1] - cube[:, 0, 1, 1])
        hxx = cube[:, 1, 1, 2] - 2 * c + cube[:, 1, 1, 0]
        hyy = cube[:, 1, 2, 1] - 2 * c + cube[:, 1, 0, 1]
        hss = cube[:, 2, 1, 1] - 2 * c + cube[:, 0, 1, 1]
        hxy = 0.25 * (cube[:, 1, 2, 2] - cube[:, 1, 2, 0] - cube[:, 1, 0, 2] + cube[:, 1, 0, 0])
        hxs = 0.25 * (cube[:, 2, 1, 2] - cube[:, 2, 1, 0] - cube[:, 0, 1, 2] + cube[:, 0, 1, 0])
        hys = 0.25 * (cube[:, 2, 2, 1] - cube[:, 2, 0, 1] - cube[:, 0, 2, 1] + cube[:, 0, 0, 1])

        dx, dy, ds, solvable = _solve_sym3(hxx, hyy, hss, hxy, hxs, hys, -gx, -gy, -gs)

        converged = solvable & (np.abs(dx) <= 0.5) & (np.abs(dy) <= 0.5) & (np.abs(ds) <= 0.5)
        done = idx[converged]
        good[done] = True
        alive[done] = False
        off[done, 0] = dx[converged]
        off[done, 1] = dy[converged]
        off[done, 2] = ds[converged]
        value[done] = c[converged] + 0.5 * (
            gx[converged] * dx[converged]
            + gy[converged] * dy[converged]
            + gs[converged] * ds[converged]
        )
        hess2[done, 0] = hxx[converged]
        hess2[done, 1] = hyy[converged]
        hess2[done, 2] = hxy[converged]

        dead = idx[~solvable]
        alive[dead] = False

        moving = idx[solvable & ~converged]
        if moving.size == 0:
            continue
        mdx = np.rint(dx[solvable & ~converged]).astype(np.int64)
        mdy = np.rint(dy[solvable & ~converged]).astype(np.int64)
        mds = np.rint(ds[solvable & ~converged]).astype(np.int64)
        x[moving] += mdx
        y[moving] += mdy
        s[moving] += mds
        in_range = (
            (s[moving] >= 1)
            & (s[moving] <= max_level)
            & (y[moving] >= IMG_BORDER)
            & (y[moving] < h - IMG_BORDER)
            & (x[moving] >= IMG_BORDER)
            & (x[moving] < w - IMG_BORDER)
        )
        alive[moving[~in_range]] = False
    # anything still alive never converged

    keep = good & (np.abs(value) >= params.contrast_threshold)
    # principal-curvature (edge) filter on the spatial hessian
    tr = hess2[:, 0] + hess2[:, 1]
    det2 = hess2[:, 0] * hess2[:, 1] - hess2[:, 2] ** 2
    r = params.edge_ratio_threshold
    keep &= (det2 > 0) & (r * tr**2 < (r + 1.0) ** 2 * det2)

    return s[keep], y[keep], x[keep], off[keep], value[keep]


def level_gradients(space: ScaleSpace, octave: int, level: int):
    """Cached per-level gradient magnitude and angle arrays.

    Border pixels get zero magnitude so they never contribute weight.
    Angles follow the image frame (y down), in [0, 2pi).
    """
    key = (octave, level)
    cached = space.grad_cache.get(key)
    if cached is not None:
        return cached
    img = space.gaussians[octave][level]
    gdx = np.zeros_like(img)
    gdy = np.zeros_like(img)
    gdx[:, 1:-1] = img[:, 2:] - img[:, :-2]
    gdy[1:-1, :] = img[2:, :] - img[:-2, :]
    mag = np.hypot(gdx, gdy)
    mag[0, :] = mag[-1, :] = 0.0
    mag[:, 0] = mag[:, -1] = 0.0
    ang = np.mod(np.arctan2(gdy, gdx), TWO_PI)
    space.grad_cache[key] = (mag, ang)
    return mag, ang


def _orientation_histograms(mag, ang, y0, x0, radii, scales, chunk_kp):
    """36-bin weighted gradient histograms around rounded centers."""
    h, w = mag.shape
    n = y0.size
    hists = np.zeros((n, ORI_BINS))
    rmax = int(radii.max())
    grid = np.arange(-rmax, rmax + 1)
    gy = grid[:, None]
    gx = grid[None, :]
    dist2 = (gy**2 + gx**2).astype(np.float64)

    for start in range(0, n, chunk_kp):
        sl = slice(start, min(start + chunk_kp, n))
        yy = y0[sl, None, None] + gy[None]
        xx = x0[sl, None, None] + gx[None]
        inb = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
        yc = np.clip(yy, 0, h - 1)
        xc = np.clip(xx, 0, w - 1)
        m = mag[yc, xc]
        within = (np.abs(gy) <= radii[sl, None, None]) & (np.abs(gx) <= radii[sl, None, None])
        weight = np.exp(dist2[None] * (-0.5 / scales[sl, None, None] ** 2))
        weight = weight * m * (inb & within)
        bins = np.rint(ang[yc, xc] * (ORI_BINS / TWO_PI)).astype(np.int64) % ORI_BINS
        rows = np.arange(sl.start, sl.stop)[:, None, None] - sl.start
        flat = (rows * ORI_BINS + bins).ravel()
        hists[sl] = np.bincount(
            flat, weights=weight.ravel(), minlength=(sl.stop - sl.start) * ORI_BINS
        ).reshape(-1, ORI_BINS)
    return hists


def _smooth_histograms(hist: np.ndarray) -> np.ndarray:
    """Circular [1, 4, 6, 4, 1]/16 smoothing along the bin axis."""
    return (
        6 * hist
        + 4 * (np.roll(hist, 1, axis=1) + np.roll(hist, -1, axis=1))
        + np.roll(hist, 2, axis=1)
        + np.roll(hist, -2, axis=1)
    ) / 16.0


def _assign_orientations(hist: np.ndarray):
    """Peak bins >= 80% of each histogram's max, with parabolic refinement.

    Returns (row_index, orientation_radians) pairs; rows may repeat when a
    histogram carries several comparable peaks.
    """
    prev = np.roll(hist, 1, axis=1)
    nxt = np.roll(hist, -1, axis=1)
    peak_floor = ORI_PEAK_RATIO * hist.max(axis=1, keepdims=True)
    is_peak = (hist > prev) & (hist > nxt) & (hist >= peak_floor) & (hist > 0)
    rows, bins = np.nonzero(is_peak)
    if rows.size == 0:
        return rows, np.empty(0)
    left = hist[rows, (bins - 1) % ORI_BINS]
    center = hist[rows, bins]
    right = hist[rows, (bins + 1) % ORI_BINS]
    interp = (bins + 0.5 * (left - right) / (left - 2 * center + right)) % ORI_BINS
    orientation = np.mod(interp * (TWO_PI / ORI_BINS), TWO_PI)
    return rows, orientation


def detect_keypoints(space: ScaleSpace) -> KeypointTable:
    """Detect, refine, and orient keypoints across all octaves.

    Output is unsorted and may hold duplicates (handled by the caller).
    """
    params = space.params
    spo = params.scales_per_octave
    pre_threshold = 0.5 * params.contrast_threshold
    per_octave: list[KeypointTable] = []

    for octave, dog in enumerate(space.dogs):
        ss, yy, xx = _scan_extrema(dog, pre_threshold)
        if ss.size == 0:
            continue
        s, y, x, off, value = _refine_extrema(dog, ss, yy, xx, params)
        if s.size == 0:
            continue

        level_f = s + off[:, 2]
        sigma_rel = params.base_sigma * np.exp2(level_f / spo)
        x_oct = x + off[:, 0]
        y_oct = y + off[:, 1]

        scale_ori = ORI_SIGMA_FACTOR * sigma_rel
        radii = np.rint(ORI_RADIUS_FACTOR * scale_ori).astype(np.int64)

        oriented: list[KeypointTable] = []
        for level in range(1, spo + 1):
            in_level = s == level
            if not in_level.any():
                continue
            mag, ang = level_gradients(space, octave, level)
            y0 = np.rint(y_oct[in_level]).astype(np.int64)
            x0 = np.rint(x_oct[in_level]).astype(np.int64)
            hist = _orientation_histograms(
                mag, ang, y0, x0, radii[in_level], scale_ori[in_level], chunk_kp=512
            )
            hist = _smooth_histograms(hist)
            rows, orientation = _assign_orientations(hist)
            if rows.size == 0:
                continue

            src = np.nonzero(in_level)[0][rows]
            pix = (2.0**octave) * space.coord_scale
            oriented.append(
                KeypointTable(
                    octave=np.full(src.size, octave, dtype=np.int64),
                    level=np.full(src.size, level, dtype=np.int64),
                    x_oct=x_oct[src],
                    y_oct=y_oct[src],
                    sigma_rel=sigma_rel[src],
                    orientation=orientation,
                    x_img=x_oct[src] * pix,
                    y_img=y_oct[src] * pix,
                    sigma_abs=sigma_rel[src] * pix,
                    response=np.abs(value[src]),
                )
            )
        if oriented:
            per_octave.append(_concat_tables(oriented))

    return _concat_tables(per_octave)


def sort_and_dedup(table: KeypointTable) -> KeypointTable:
    """Deterministic output order: (y, x, sigma, orientation) ascending.

    Exact duplicates (same keys from neighboring refinement starts) collapse
    to one entry.
    """
    if len(table) == 0:
        return table
    order = np.lexsort(
        (
            table.response,
            table.level,
            table.octave,
            table.orientation,
            table.sigma_abs,
            table.x_img,
            table.y_img,
        )
    )
    t = table.take(order)
    keys = np.column_stack([t.y_img, t.x_img, t.sigma_abs, t.orientation])
    dup = np.zeros(len(t), dtype=bool)
    dup[1:] = np.all(keys[1:] == keys[:-1], axis=1)
    return t.take(~dup)

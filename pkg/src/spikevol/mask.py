"""Binary silhouette analytics: pixel area, thinning, main axis, and the
circular-cross-section volume integral.

The geometric pipeline runs: two-subiteration parallel thinning to a
skeleton, longest-path traversal from a deterministic start pixel, cubic
smoothing-spline fit of the path (smoothing chosen by generalized cross
validation), linear extension of the smoothed axis to the mask boundary,
orthogonal half-width profiling at 600 stations, and a trapezoidal
integral of pi * r(t)^2 over the axis length.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.interpolate import CubicSpline, make_smoothing_spline

from .errors import DataError

PROFILE_SAMPLES = 600

# neighbor order: N, NE, E, SE, S, SW, W, NW (fixed for deterministic ties)
_NBR = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


@dataclass
class BinaryMask:
    """Row-major boolean raster with its ground sampling distance (mm/px)."""

    bits: np.ndarray
    gsd: float = 0.05

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.ndim != 2 or self.bits.shape[0] < 1 or self.bits.shape[1] < 1:
            raise DataError("mask must be a 2D raster with positive dimensions")
        if self.gsd <= 0:
            raise DataError("gsd must be > 0")

    @property
    def height(self):
        return self.bits.shape[0]

    @property
    def width(self):
        return self.bits.shape[1]


@dataclass
class Skeleton:
    """Thinning fixed point; same raster dimensions as its source mask."""

    bits: np.ndarray
    gsd: float

    @property
    def pixel_count(self):
        return int(self.bits.sum())

    def pixels(self):
        """Skeleton coordinates as a set of (row, col) tuples."""
        return set(map(tuple, np.argwhere(self.bits)))


def pixel_area(mask):
    """Number of foreground pixels."""
    return int(mask.bits.sum())


def mean_area(masks):
    """Arithmetic mean pixel count across views (equal gsd required)."""
    masks = list(masks)
    if not masks:
        raise DataError("mean_area over an empty sequence")
    gsds = {m.gsd for m in masks}
    if len(gsds) > 1:
        raise DataError(f"masks mix ground sampling distances: {sorted(gsds)}")
    return float(np.mean([pixel_area(m) for m in masks]))


@njit(cache=True)
def _thin_pass(img, step):
    h, w = img.shape
    kill_r = np.empty(h * w, np.int64)
    kill_c = np.empty(h * w, np.int64)
    n = 0
    for r in range(1, h - 1):
        for c in range(1, w - 1):
            if img[r, c] == 0:
                continue
            p2 = img[r - 1, c]
            p3 = img[r - 1, c + 1]
            p4 = img[r, c + 1]
            p5 = img[r + 1, c + 1]
            p6 = img[r + 1, c]
            p7 = img[r + 1, c - 1]
            p8 = img[r, c - 1]
            p9 = img[r - 1, c - 1]
            b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
            if b < 2 or b > 6:
                continue
            a = (
                (1 if p2 == 0 and p3 == 1 else 0)
                + (1 if p3 == 0 and p4 == 1 else 0)
                + (1 if p4 == 0 and p5 == 1 else 0)
                + (1 if p5 == 0 and p6 == 1 else 0)
                + (1 if p6 == 0 and p7 == 1 else 0)
                + (1 if p7 == 0 and p8 == 1 else 0)
                + (1 if p8 == 0 and p9 == 1 else 0)
                + (1 if p9 == 0 and p2 == 1 else 0)
            )
            if a != 1:
                continue
            if step == 0:
                if p2 * p4 * p6 != 0 or p4 * p6 * p8 != 0:
                    continue
            else:
                if p2 * p4 * p8 != 0 or p2 * p6 * p8 != 0:
                    continue
            kill_r[n] = r
            kill_c[n] = c
            n += 1
    for i in range(n):
        img[kill_r[i], kill_c[i]] = 0
    return n


@njit(cache=True)
def _thin_to_fixed_point(img):
    while True:
        n1 = _thin_pass(img, 0)
        n2 = _thin_pass(img, 1)
        if n1 + n2 == 0:
            break
    return img


def thin(mask):
    """Two-subiteration parallel thinning, iterated to its fixed point.

    A pixel is deleted when it has 2..6 foreground neighbors, exactly one
    0->1 transition around its 8-neighborhood, and the subiteration's two
    directional products vanish.  Connectivity of each component is
    preserved; re-thinning the output changes nothing.
    """
    bits = mask.bits
    out = np.zeros_like(bits)
    rows = np.flatnonzero(bits.any(axis=1))
    if len(rows) == 0:
        return Skeleton(out, mask.gsd)
    cols = np.flatnonzero(bits.any(axis=0))
    r0, r1 = rows[0], rows[-1] + 1
    c0, c1 = cols[0], cols[-1] + 1
    work = np.zeros((r1 - r0 + 2, c1 - c0 + 2), np.uint8)
    work[1:-1, 1:-1] = bits[r0:r1, c0:c1]
    _thin_to_fixed_point(work)
    out[r0:r1, c0:c1] = work[1:-1, 1:-1].astype(bool)
    return Skeleton(out, mask.gsd)


def choose_start(skeleton):
    """Deterministic traversal start.

    The skeleton endpoint (exactly one skeleton neighbor) with smallest
    row, ties broken by smallest column; the topmost-leftmost pixel when
    no endpoint exists (cycles).
    """
    bits = skeleton.bits
    coords = np.argwhere(bits)
    if not len(coords):
        raise DataError("empty skeleton")
    padded = np.pad(bits.astype(np.uint8), 1)
    nbr_count = sum(
        padded[1 + dr : padded.shape[0] - 1 + dr, 1 + dc : padded.shape[1] - 1 + dc]
        for dr, dc in _NBR
    )
    ends = coords[nbr_count[coords[:, 0], coords[:, 1]] == 1]
    pool = ends if len(ends) else coords
    best = min(map(tuple, pool))
    return (int(best[0]), int(best[1]))


def main_axis(skeleton, start):
    """Longest continuous path through the skeleton from `start`.

    Each visited pixel consumes its whole 8-neighborhood before the
    traversal branches into every consumed neighbor independently (each
    branch sees only its ancestors' consumption); the longest resulting
    pixel sequence wins.  The recursion is realized with an explicit stack
    so long skeletons cannot overflow the interpreter stack.
    """
    start = (int(start[0]), int(start[1]))
    remaining = skeleton.pixels()
    if start not in remaining:
        raise DataError(f"start pixel {start} is not on the skeleton")

    def open_frame(p):
        remaining.discard(p)
        nbrs = [
            q
            for q in ((p[0] + dr, p[1] + dc) for dr, dc in _NBR)
            if q in remaining
        ]
        for q in nbrs:
            remaining.discard(q)
        return [p, nbrs, 0, []]

    stack = [open_frame(start)]
    result = []
    while stack:
        frame = stack[-1]
        p, nbrs, child, best = frame
        if child < len(nbrs):
            frame[2] += 1
            stack.append(open_frame(nbrs[child]))
        else:
            stack.pop()
            for q in nbrs:  # backtrack: siblings see only ancestor consumption
                remaining.add(q)
            path = [p] + best
            if stack:
                parent = stack[-1]
                if len(path) > len(parent[3]):
                    parent[3] = path
            else:
                result = path
    return result


@dataclass
class SmoothedAxis:
    """Sub-pixel polyline of the spike's central axis.

    points: (n, 2) float (row, col) in pixel coordinates; length_mm is the
    polyline arc length scaled by gsd.
    """

    points: np.ndarray
    gsd: float

    @property
    def length_mm(self):
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        return float(seg.sum()) * self.gsd


def _resample(points, n):
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    t = np.concatenate([[0.0], np.cumsum(seg)])
    if t[-1] <= 0:
        return np.repeat(points[:1], n, axis=0)
    tt = np.linspace(0.0, t[-1], n)
    return np.stack(
        [np.interp(tt, t, points[:, 0]), np.interp(tt, t, points[:, 1])], axis=1
    )


def smooth_axis(path, gsd, samples=PROFILE_SAMPLES):
    """Cubic smoothing spline through a pixel path, resampled evenly.

    The path is parameterized by cumulative chord length; each coordinate
    gets its own spline with GCV-selected smoothing.  Paths of exactly four
    pixels fall back to an interpolating cubic (GCV needs five points).
    """
    pts = np.asarray(path, float).reshape(-1, 2)
    if len(pts) < 4:
        raise DataError(f"axis path too short to smooth ({len(pts)} < 4 pixels)")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    t = np.concatenate([[0.0], np.cumsum(seg)])
    if np.any(seg <= 0):
        raise DataError("axis path repeats a pixel")
    if len(pts) >= 5:
        sr = make_smoothing_spline(t, pts[:, 0])
        sc = make_smoothing_spline(t, pts[:, 1])
    else:
        sr = CubicSpline(t, pts[:, 0])
        sc = CubicSpline(t, pts[:, 1])
    tt = np.linspace(0.0, t[-1], samples)
    out = np.stack([sr(tt), sc(tt)], axis=1)
    return SmoothedAxis(points=out, gsd=gsd)


def _inside(bits, pts):
    """Nearest-pixel foreground lookup; outside the raster counts as background."""
    r = np.rint(pts[:, 0]).astype(np.int64)
    c = np.rint(pts[:, 1]).astype(np.int64)
    ok = (r >= 0) & (r < bits.shape[0]) & (c >= 0) & (c < bits.shape[1])
    out = np.zeros(len(pts), bool)
    if ok.any():
        out[ok] = bits[r[ok], c[ok]]
    return out


def _march_to_boundary(bits, origin, direction, step=0.25):
    """Distance along `direction` from `origin` to the last foreground sample."""
    max_dist = float(np.hypot(*bits.shape)) + 2.0
    d = 0.0
    while d < max_dist:
        nxt = origin + direction * (d + step)
        if not _inside(bits, nxt[None, :])[0]:
            break
        d += step
    # bisection refine between last-inside and first-outside
    lo, hi = d, d + step
    for _ in range(12):
        mid = 0.5 * (lo + hi)
        if _inside(bits, (origin + direction * mid)[None, :])[0]:
            lo = mid
        else:
            hi = mid
    return lo


def _principal_direction(bits):
    coords = np.argwhere(bits).astype(float)
    centered = coords - coords.mean(axis=0)
    cov = centered.T @ centered / max(len(coords), 1)
    _, vecs = np.linalg.eigh(cov)
    v = vecs[:, -1]
    # deterministic sign: first nonzero component positive
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    return v


def extend_axis(mask, axis, samples=PROFILE_SAMPLES):
    """Prolong the smoothed axis linearly along its end tangents until it
    leaves the foreground, then resample evenly by arc length.

    Thinning retracts skeleton endpoints by roughly the local half-width,
    so the raw axis underestimates the silhouette length; the extension
    restores full span (a tube mask recovers its true length).
    """
    pts = np.asarray(axis.points, float)
    bits = mask.bits
    k = min(5, len(pts) - 1)
    ends = []
    for origin, ref in ((pts[0], pts[k]), (pts[-1], pts[-1 - k])):
        direction = origin - ref
        norm = np.linalg.norm(direction)
        if norm == 0:
            ends.append(None)
            continue
        direction /= norm
        if not _inside(bits, origin[None, :])[0]:
            ends.append(None)
            continue
        dist = _march_to_boundary(bits, origin, direction)
        ends.append(origin + direction * dist if dist > 0 else None)
    parts = []
    if ends[0] is not None:
        parts.append(ends[0][None, :])
    parts.append(pts)
    if ends[1] is not None:
        parts.append(ends[1][None, :])
    merged = np.vstack(parts)
    return SmoothedAxis(points=_resample(merged, samples), gsd=axis.gsd)


def spike_axis(mask, samples=PROFILE_SAMPLES):
    """Full axis pipeline: thin, traverse, smooth, extend to the boundary.

    Nearly isotropic silhouettes can thin to fewer than four pixels; the
    axis then falls back to a short segment through the foreground centroid
    along the principal direction before the boundary extension.
    """
    if not mask.bits.any():
        raise DataError("empty mask has no axis")
    skeleton = thin(mask)
    start = choose_start(skeleton)
    path = main_axis(skeleton, start)
    if len(path) >= 4:
        axis = smooth_axis(path, mask.gsd, samples=samples)
    else:
        center = np.argwhere(mask.bits).mean(axis=0)
        v = _principal_direction(mask.bits)
        seed = np.stack([center - v, center - v / 3, center + v / 3, center + v])
        axis = SmoothedAxis(points=_resample(seed, samples), gsd=mask.gsd)
    return extend_axis(mask, axis, samples=samples)


@dataclass
class RadiusProfile:
    """Radius function r(t) sampled along the axis, with half-widths kept."""

    length_mm: float
    t: np.ndarray
    radius_mm: np.ndarray
    left_mm: np.ndarray
    right_mm: np.ndarray
    off_axis: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.off_axis is None:
            self.off_axis = np.zeros(len(self.t), bool)


def radius_profile(mask, axis):
    """Orthogonal half-widths at every axis sample.

    At each station the mask is marched perpendicular to the axis in both
    senses until the foreground ends; radius is the mean of the two
    half-widths.  Stations whose center already sits on background record
    radius 0 and are flagged (spline smoothing can exit thin tips).
    """
    pts = np.asarray(axis.points, float)
    n = len(pts)
    grad = np.gradient(pts, axis=0)
    norms = np.linalg.norm(grad, axis=1)
    norms[norms == 0] = 1.0
    tangent = grad / norms[:, None]
    normal = np.stack([-tangent[:, 1], tangent[:, 0]], axis=1)

    bits = mask.bits
    on_fg = _inside(bits, pts)
    halves = []
    step = 0.25
    max_dist = float(np.hypot(*bits.shape)) + 2.0
    for sign in (1.0, -1.0):
        dist = np.zeros(n)
        alive = on_fg.copy()
        while alive.any():
            probe = pts[alive] + normal[alive] * (dist[alive] + step)[:, None] * sign
            inside = _inside(bits, probe)
            idx = np.flatnonzero(alive)
            dist[idx[inside]] += step
            alive[idx[~inside]] = False
            if dist.max() > max_dist:
                break
        lo = dist.copy()
        hi = dist + step
        for _ in range(12):
            mid = 0.5 * (lo + hi)
            probe = pts + normal * mid[:, None] * sign
            inside = _inside(bits, probe) & on_fg
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        halves.append(np.where(on_fg, lo, 0.0))

    left, right = halves
    radius = 0.5 * (left + right) * mask.gsd
    return RadiusProfile(
        length_mm=axis.length_mm,
        t=np.linspace(0.0, 1.0, n),
        radius_mm=radius,
        left_mm=left * mask.gsd,
        right_mm=right * mask.gsd,
        off_axis=~on_fg,
    )


def geometric_volume(profile):
    """Trapezoidal integral of pi * r(t)^2 along the axis length."""
    n = len(profile.radius_mm)
    if n < 2 or profile.length_mm <= 0:
        return 0.0
    integrand = np.pi * profile.radius_mm ** 2
    return float(np.trapezoid(integrand, dx=profile.length_mm / (n - 1)))


def mask_geometric_volume(mask):
    """Volume of a single silhouette through the full geometric pipeline."""
    axis = spike_axis(mask)
    return geometric_volume(radius_profile(mask, axis))


def geometric_estimate(masks):
    """Mean per-view geometric volume over the provided views."""
    masks = list(masks)
    if not masks:
        raise DataError("geometric_estimate over an empty sequence")
    return float(np.mean([mask_geometric_volume(m) for m in masks]))


def profile_csv(profile):
    """CSV dump (t, radius_mm, left_mm, right_mm) for plotting."""
    lines = ["t,radius_mm,left_mm,right_mm"]
    for t, r, l, rr in zip(
        profile.t, profile.radius_mm, profile.left_mm, profile.right_mm
    ):
        lines.append(f"{t!r},{r!r},{l!r},{rr!r}")
    return "\n".join(lines) + "\n"

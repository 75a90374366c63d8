"""Deterministic silhouette features standing in for a pretrained encoder.

Masks are resized to 256 x 341 (bilinear-style area averaging) and
center-cropped to 244 x 244, mirroring the capture pipeline's input
protocol.  The vector layout (length FEATURE_DIM = 384) is:

    [0:324]    18 x 18 occupancy grid (cell means of the crop)
    [324]      foreground fraction of the crop
    [325]      boundary-pixel fraction (4-neighbor transitions / crop width)
    [326:328]  bounding-box width and height fractions
    [328:330]  centroid (col, row) fractions
    [330:337]  scale-normalized central moments: mu11, mu20, mu02,
               mu21, mu12, mu30, mu03 (each mu_pq / mu00^(1+(p+q)/2))
    [337:384]  zero padding
"""

import cv2
import numpy as np

from .errors import DataError

FEATURE_DIM = 384
RESIZE_WH = (256, 341)
CROP = 244
GRID = 18


def _center_crop(img, size):
    h, w = img.shape
    r0 = (h - size) // 2
    c0 = (w - size) // 2
    return img[r0 : r0 + size, c0 : c0 + size]


def _block_means(img, grid):
    edges = np.round(np.linspace(0, img.shape[0], grid + 1)).astype(int)
    sums = np.add.reduceat(np.add.reduceat(img, edges[:-1], axis=0), edges[:-1], axis=1)
    areas = np.outer(np.diff(edges), np.diff(edges))
    return (sums / areas).ravel()


def extract_features(mask):
    """FEATURE_DIM-vector of occupancy and shape moments; deterministic."""
    if not mask.bits.any():
        raise DataError("cannot extract features from an empty mask")
    img = mask.bits.astype(np.float64)
    resized = cv2.resize(img, RESIZE_WH, interpolation=cv2.INTER_AREA)
    crop = _center_crop(resized, CROP)
    m00 = crop.sum()
    if m00 <= 0:
        raise DataError("mask foreground lies entirely outside the center crop")

    occupancy = _block_means(crop, GRID)

    rows = np.arange(CROP, dtype=np.float64)
    cols = np.arange(CROP, dtype=np.float64)
    row_mass = crop.sum(axis=1)
    col_mass = crop.sum(axis=0)
    cy = float(rows @ row_mass) / m00
    cx = float(cols @ col_mass) / m00
    dy = rows - cy
    dx = cols - cx

    def mu(p, q):
        return float((dx ** p) @ crop.T @ (dy ** q))

    def eta(p, q):
        return mu(p, q) / m00 ** (1.0 + (p + q) / 2.0)

    hard = crop > 0.5
    if hard.any():
        rr = np.flatnonzero(hard.any(axis=1))
        cc = np.flatnonzero(hard.any(axis=0))
        ext_w = (cc[-1] - cc[0] + 1) / CROP
        ext_h = (rr[-1] - rr[0] + 1) / CROP
        trans = np.count_nonzero(hard[1:] != hard[:-1]) + np.count_nonzero(
            hard[:, 1:] != hard[:, :-1]
        )
    else:
        ext_w = ext_h = 0.0
        trans = 0

    scalars = np.array([
        m00 / CROP ** 2,
        trans / CROP,
        ext_w,
        ext_h,
        cx / CROP,
        cy / CROP,
        eta(1, 1), eta(2, 0), eta(0, 2),
        eta(2, 1), eta(1, 2), eta(3, 0), eta(0, 3),
    ])
    vec = np.zeros(FEATURE_DIM)
    vec[: len(occupancy)] = occupancy
    vec[len(occupancy) : len(occupancy) + len(scalars)] = scalars
    return vec

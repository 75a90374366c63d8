"""Orthographic silhouette rendering of triangle meshes.

A pixel is foreground when the ray through its center along the view
direction hits the mesh, realized by rasterizing every projected triangle
(sub-pixel fixed-point coordinates).  Orthographic projection matches the
fixed-standoff capture geometry this pipeline models, and it keeps the
mask ground truth analytic for the test solids.
"""

from dataclasses import dataclass

import cv2
import numpy as np

from .errors import DataError
from .mask import BinaryMask

_SHIFT = 6  # fixed-point fractional bits for rasterization


@dataclass
class ViewSpec:
    """Camera on the azimuth/elevation sphere, looking at the mesh center.

    azimuth 0 is the side view (camera on +x); 90 the frontal view.
    image_size is (width, height) in pixels; gsd in mm/px.
    """

    azimuth: float = 0.0
    elevation: float = 0.0
    gsd: float = 0.05
    image_size: tuple = (512, 512)

    def __post_init__(self):
        if self.gsd <= 0:
            raise DataError("gsd must be > 0")
        if min(self.image_size) < 1:
            raise DataError("image_size must be positive")

    def basis(self):
        """(right, up) unit vectors of the image plane."""
        az = np.deg2rad(self.azimuth)
        el = np.deg2rad(self.elevation)
        cam = np.array(
            [np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)]
        )
        zhat = np.array([0.0, 0.0, 1.0])
        right = np.cross(zhat, cam)
        nr = np.linalg.norm(right)
        if nr < 1e-12:  # looking straight down/up: pick x as right
            right = np.array([1.0, 0.0, 0.0])
        else:
            right /= nr
        up = np.cross(cam, right)
        up /= np.linalg.norm(up)
        return right, up


def project_points(vertices, view):
    """Project vertices to centered pixel coordinates (col, row)."""
    right, up = view.basis()
    sx = vertices @ right
    sy = vertices @ up
    cx = 0.5 * (sx.min() + sx.max())
    cy = 0.5 * (sy.min() + sy.max())
    w, h = view.image_size
    col = (sx - cx) / view.gsd + (w - 1) / 2.0
    row = (h - 1) / 2.0 - (sy - cy) / view.gsd
    return np.stack([col, row], axis=1)


def render_mask(mesh, view):
    """Binary silhouette of the mesh, centered in the image.

    Raises when the centered footprint exceeds the image, reporting the
    pixel size that would fit.
    """
    if mesh.num_faces == 0:
        raise DataError("cannot render an empty mesh")
    pts = project_points(mesh.vertices, view)
    w, h = view.image_size
    margin = 2.0
    need_w = int(np.ceil(pts[:, 0].max() - pts[:, 0].min() + 2 * margin))
    need_h = int(np.ceil(pts[:, 1].max() - pts[:, 1].min() + 2 * margin))
    if need_w > w or need_h > h:
        raise DataError(
            f"mesh exceeds image footprint: needs at least "
            f"({need_w}, {need_h}) px at gsd {view.gsd}, got ({w}, {h})"
        )

    img = np.zeros((h, w), np.uint8)
    scale = float(1 << _SHIFT)
    tris = np.round(pts[mesh.faces] * scale).astype(np.int32)
    # front faces alone cover the full silhouette of a closed mesh
    area2 = (
        (tris[:, 1, 0] - tris[:, 0, 0]) * (tris[:, 2, 1] - tris[:, 0, 1])
        - (tris[:, 1, 1] - tris[:, 0, 1]) * (tris[:, 2, 0] - tris[:, 0, 0])
    )
    keep = tris[area2 <= 0]
    if not len(keep):
        keep = tris
    for tri in keep:
        cv2.fillConvexPoly(img, tri, 1, lineType=cv2.LINE_8, shift=_SHIFT)
    return BinaryMask(bits=img.astype(bool), gsd=view.gsd)


def fit_image_size(mesh, views, margin_frac=0.20, multiple=16):
    """Smallest (width, height) that fits the mesh in every view.

    margin_frac adds clear border on each side (the feature extractor
    center-crops about 15% of the resized height, so generated spikes keep
    at least 20%).  Dimensions round up to a multiple for tidy files.
    """
    best_w = best_h = 1
    for view in views:
        right, up = view.basis()
        sx = mesh.vertices @ right
        sy = mesh.vertices @ up
        w_px = (sx.max() - sx.min()) / view.gsd
        h_px = (sy.max() - sy.min()) / view.gsd
        best_w = max(best_w, w_px)
        best_h = max(best_h, h_px)
    w = int(np.ceil(best_w / (1 - 2 * margin_frac) / multiple)) * multiple
    h = int(np.ceil(best_h / (1 - 2 * margin_frac) / multiple)) * multiple
    return (w, h)


def salt_and_pepper(mask, rate, rng):
    """Flip a fraction of pixels to foreground (salt) and background (pepper).

    Models field-segmentation noise; applied only to field-domain masks.
    """
    bits = mask.bits.copy()
    h, w = bits.shape
    n = int(rate * h * w)
    if n > 0:
        rr = rng.integers(0, h, size=2 * n)
        cc = rng.integers(0, w, size=2 * n)
        bits[rr[:n], cc[:n]] = True
        bits[rr[n:], cc[n:]] = False
    return BinaryMask(bits=bits, gsd=mask.gsd)

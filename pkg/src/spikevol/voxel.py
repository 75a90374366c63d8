"""Voxel-counting volume oracle, independent of the analytic mesh volume.

A voxel counts if its center is inside the surface under parity ray
casting: rays go along +z through each (x, y) column of voxel centers,
crossings with all triangles are collected, and centers between odd/even
crossing pairs are inside.  The grid is jittered by a sub-voxel offset so
rays never hit triangle edges exactly.
"""

import numpy as np

from .errors import DataError, NumericError

_JITTER = 2.0 ** -0.5 * 1e-4  # fraction of one voxel


def voxel_volume(mesh, resolution):
    """Volume in mm^3 as (inside voxel count) * resolution^3."""
    if resolution <= 0:
        raise DataError("resolution must be > 0")
    if mesh.num_faces == 0:
        return 0.0
    lo, hi = mesh.bounds()
    extent = hi - lo
    if resolution > max(extent):
        raise DataError(
            f"resolution {resolution} exceeds mesh bounding box {extent.tolist()}"
        )
    res = float(resolution)
    origin = lo - res * (0.5 + _JITTER)

    tri = mesh.vertices[mesh.faces]  # (F, 3, 3)
    nx = int(np.floor((hi[0] - origin[0]) / res)) + 1
    ny = int(np.floor((hi[1] - origin[1]) / res)) + 1

    cols = []
    zs = []
    p0, p1, p2 = tri[:, 0], tri[:, 1], tri[:, 2]
    e1 = p1 - p0
    e2 = p2 - p0
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    for f in range(len(tri)):
        d = det[f]
        if d == 0.0:
            continue  # projects to a line; transversal rays cannot cross it
        xs = np.sort(tri[f, :, 0])
        ys = np.sort(tri[f, :, 1])
        i0 = max(int(np.ceil((xs[0] - origin[0]) / res - 0.5)), 0)
        i1 = min(int(np.floor((xs[2] - origin[0]) / res - 0.5)), nx - 1)
        j0 = max(int(np.ceil((ys[0] - origin[1]) / res - 0.5)), 0)
        j1 = min(int(np.floor((ys[2] - origin[1]) / res - 0.5)), ny - 1)
        if i1 < i0 or j1 < j0:
            continue
        ii = np.arange(i0, i1 + 1)
        jj = np.arange(j0, j1 + 1)
        cx = origin[0] + (ii + 0.5) * res
        cy = origin[1] + (jj + 0.5) * res
        gx, gy = np.meshgrid(cx, cy, indexing="ij")
        rx = gx - p0[f, 0]
        ry = gy - p0[f, 1]
        l1 = (rx * e2[f, 1] - ry * e2[f, 0]) / d
        l2 = (e1[f, 0] * ry - e1[f, 1] * rx) / d
        inside = (l1 >= 0.0) & (l2 >= 0.0) & (l1 + l2 <= 1.0)
        if not inside.any():
            continue
        z = p0[f, 2] + l1 * e1[f, 2] + l2 * e2[f, 2]
        gi, gj = np.meshgrid(ii, jj, indexing="ij")
        flat = (gi * ny + gj)[inside]
        cols.append(flat)
        zs.append(z[inside])

    if not cols:
        return 0.0
    cols = np.concatenate(cols)
    zs = np.concatenate(zs)
    order = np.lexsort((zs, cols))
    cols = cols[order]
    zs = zs[order]

    _, counts = np.unique(cols, return_counts=True)
    if np.any(counts % 2):
        raise NumericError(
            "odd crossing count in a ray column; mesh may not be watertight"
        )
    z_in = zs[0::2]
    z_out = zs[1::2]
    k_lo = np.ceil((z_in - origin[2]) / res - 0.5)
    k_hi = np.floor((z_out - origin[2]) / res - 0.5)
    inside_count = np.maximum(0.0, k_hi - k_lo + 1.0).sum()
    return float(inside_count) * res ** 3

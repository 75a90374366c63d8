"""Triangle meshes in millimeters: enclosed volume, cone removal, traits.

Volume uses the divergence theorem: the signed volumes of the tetrahedra
spanned by the origin and each face sum to the enclosed volume, exactly,
for any closed consistently oriented surface.  Scan-stand cones are located
from the vertex band at their known height and cut away by deleting the
geometry inside the cone solid and fan-capping the cut loops.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DataError


@dataclass
class TriangleMesh:
    """Indexed triangle surface.

    vertices: (V, 3) float array, mm.  faces: (F, 3) int array, indices
    counter-clockwise when viewed from outside.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if len(self.faces) and self.faces.max(initial=-1) >= len(self.vertices):
            raise DataError(
                f"face references vertex {int(self.faces.max())} "
                f"but mesh has {len(self.vertices)} vertices"
            )
        if len(self.faces) and self.faces.min(initial=0) < 0:
            raise DataError("negative vertex index in face list")

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_faces(self):
        return len(self.faces)

    def bounds(self):
        """(min_xyz, max_xyz) of the vertex cloud."""
        if not len(self.vertices):
            raise DataError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def translated(self, offset):
        return TriangleMesh(self.vertices + np.asarray(offset, float), self.faces.copy())

    def rotated(self, matrix):
        """Apply a 3x3 rotation matrix about the origin."""
        return TriangleMesh(self.vertices @ np.asarray(matrix, float).T, self.faces.copy())

    def scaled(self, factor):
        return TriangleMesh(self.vertices * float(factor), self.faces.copy())

    def flipped(self):
        """Reverse the orientation of every face."""
        return TriangleMesh(self.vertices.copy(), self.faces[:, ::-1].copy())


def concat_meshes(*meshes):
    """Concatenate closed meshes into one multi-component mesh."""
    verts = []
    faces = []
    offset = 0
    for m in meshes:
        verts.append(m.vertices)
        faces.append(m.faces + offset)
        offset += len(m.vertices)
    return TriangleMesh(np.vstack(verts), np.vstack(faces))


def boundary_edges(mesh):
    """Directed edges not matched by an opposite-direction twin.

    For a watertight, consistently oriented mesh every directed edge (a, b)
    is matched by exactly one (b, a); anything unmatched is returned.
    """
    f = mesh.faces
    ea = np.concatenate([f[:, 0], f[:, 1], f[:, 2]])
    eb = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    n = mesh.num_vertices + 1
    fwd = ea * n + eb
    rev = eb * n + ea
    fwd_sorted = np.sort(fwd)
    # each directed edge must appear exactly once and its reverse exactly once
    dup = fwd_sorted[1:][fwd_sorted[1:] == fwd_sorted[:-1]]
    if len(dup):
        a, b = divmod(int(dup[0]), n)
        raise DataError(f"edge ({a}, {b}) used twice with the same orientation")
    missing = ~np.isin(rev, fwd_sorted, assume_unique=False)
    bad = np.stack([ea[missing], eb[missing]], axis=1)
    return bad


def is_watertight(mesh):
    if not mesh.num_faces:
        return False
    return len(boundary_edges(mesh)) == 0


class MeshVolume(NamedTuple):
    """Unsigned enclosed volume plus the orientation of the input faces."""

    volume: float
    outward: bool


def mesh_signed_volume(mesh, check_watertight=True):
    """Enclosed volume of a watertight mesh, mm^3.

    Sums det(v0, v1, v2) / 6 over faces.  The sum is positive when faces
    are oriented outward; the magnitude is returned together with that
    orientation flag.
    """
    if check_watertight:
        bad = boundary_edges(mesh)
        if len(bad):
            a, b = bad[0]
            raise DataError(
                f"mesh is not watertight: boundary edge ({int(a)}, {int(b)})"
            )
    v = mesh.vertices
    f = mesh.faces
    signed = np.einsum(
        "ij,ij->i", v[f[:, 0]], np.cross(v[f[:, 1]], v[f[:, 2]])
    ).sum() / 6.0
    return MeshVolume(volume=abs(float(signed)), outward=bool(signed >= 0.0))


@dataclass
class ConeSpec:
    """Scan-stand cone solid: base disk at base_z, apex base_z + apex_height."""

    center_xy: tuple
    base_z: float
    apex_height: float
    base_radius: float

    def __post_init__(self):
        if self.apex_height <= 0:
            raise DataError("cone apex_height must be > 0")
        if self.base_radius < 0:
            raise DataError("cone base_radius must be >= 0")

    def contains(self, points, tol=1e-9):
        """Boolean mask of points inside the cone solid (with tolerance)."""
        p = np.asarray(points, float).reshape(-1, 3)
        u = (p[:, 2] - self.base_z) / self.apex_height
        r = np.hypot(p[:, 0] - self.center_xy[0], p[:, 1] - self.center_xy[1])
        allowed = self.base_radius * (1.0 - u)
        return (u >= -tol) & (u <= 1.0 + tol) & (r <= allowed + tol)


def locate_cone(mesh, base_z, z_band=2.0, apex_height=None, base_radius=None):
    """Recover the cone center from the vertex band at its fixed height.

    The cone sits at a known z in every scan; its x/y position is the
    midpoint of the min/max vertex extents inside [base_z, base_z + z_band].
    apex_height and base_radius come from the rig configuration.
    """
    v = mesh.vertices
    in_band = (v[:, 2] >= base_z) & (v[:, 2] <= base_z + z_band)
    if not in_band.any():
        raise DataError(
            f"no cone vertices in band [{base_z}, {base_z + z_band}]"
        )
    band = v[in_band]
    cx = 0.5 * (band[:, 0].min() + band[:, 0].max())
    cy = 0.5 * (band[:, 1].min() + band[:, 1].max())
    return ConeSpec(
        center_xy=(float(cx), float(cy)),
        base_z=float(base_z),
        apex_height=float(apex_height if apex_height is not None else z_band),
        base_radius=float(base_radius if base_radius is not None else 0.0),
    )


def _cap_loops(vertices, open_edges):
    """Fan-triangulate each boundary loop around its centroid.

    Boundary edges of the kept region run opposite to the deleted faces'
    winding, so fans built in edge direction keep the surface consistently
    oriented.
    """
    nxt = {}
    for a, b in open_edges:
        nxt[int(a)] = int(b)
    new_faces = []
    new_verts = []
    seen = set()
    for start in list(nxt):
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        cur = nxt[start]
        while cur != start:
            if cur in seen or cur not in nxt:
                raise DataError("cone cut produced a non-closed boundary loop")
            loop.append(cur)
            seen.add(cur)
            cur = nxt[cur]
        centroid = vertices[loop].mean(axis=0)
        ci = len(vertices) + len(new_verts)
        new_verts.append(centroid)
        for i in range(len(loop)):
            a = loop[i]
            b = loop[(i + 1) % len(loop)]
            new_faces.append((a, b, ci))
    return new_verts, new_faces


def remove_cone(mesh, cone, tol=1e-6):
    """Delete all geometry inside the cone solid and close the cut.

    Clip-and-cap stand-in for a boolean difference: faces whose vertices all
    lie inside the cone are dropped, faces straddling the surface are dropped
    too, and the resulting boundary loops are fan-capped.  Exact when the
    cone component is disjoint from the rest of the mesh; within cap-area
    error otherwise.
    """
    if cone.base_radius <= 0:
        return TriangleMesh(mesh.vertices.copy(), mesh.faces.copy())
    inside = cone.contains(mesh.vertices, tol=tol)
    if not inside.any():
        return TriangleMesh(mesh.vertices.copy(), mesh.faces.copy())
    face_inside = inside[mesh.faces]
    drop = face_inside.any(axis=1)
    keep_faces = mesh.faces[~drop]
    if not len(keep_faces):
        raise DataError("nothing remains: cone fully contains the mesh")

    # boundary of the kept region = edges that lost their twin
    ea = np.concatenate([keep_faces[:, 0], keep_faces[:, 1], keep_faces[:, 2]])
    eb = np.concatenate([keep_faces[:, 1], keep_faces[:, 2], keep_faces[:, 0]])
    n = mesh.num_vertices + 1
    fwd = ea * n + eb
    rev = eb * n + ea
    open_mask = ~np.isin(rev, fwd)
    open_edges = np.stack([eb[open_mask], ea[open_mask]], axis=1)

    verts = mesh.vertices
    if len(open_edges):
        new_verts, new_faces = _cap_loops(verts, open_edges)
        verts = np.vstack([verts] + [np.asarray(v).reshape(1, 3) for v in new_verts])
        keep_faces = np.vstack([keep_faces, np.asarray(new_faces, np.int64)])
    out = TriangleMesh(verts, keep_faces)
    # drop vertices that are no longer referenced
    used = np.zeros(len(verts), bool)
    used[out.faces.ravel()] = True
    remap = np.cumsum(used) - 1
    return TriangleMesh(verts[used], remap[out.faces])


@dataclass
class SpikeTraits:
    """Morphology summary of a spike mesh."""

    length: float
    width: float
    curvature: float

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise DataError("traits require positive length and width")
        if self.curvature < -1e-12:
            raise DataError("curvature must be non-negative")


def extract_traits(mesh, n_slices=60):
    """Length, width and curvature from z-slab vertex statistics.

    The mesh is sliced into equal z slabs; the per-slab vertex centroids
    form a polyline whose arc length is the spike length.  Width is twice
    the mean radial vertex distance over the central 50% of slabs, and
    curvature is (arc length / chord length) - 1 of the centroid curve.
    """
    v = mesh.vertices
    if not len(v):
        raise DataError("empty mesh")
    z0, z1 = v[:, 2].min(), v[:, 2].max()
    if z1 <= z0:
        raise DataError("mesh has no z extent")
    idx = np.clip(((v[:, 2] - z0) / (z1 - z0) * n_slices).astype(int), 0, n_slices - 1)
    centroids = []
    radii = []
    for k in range(n_slices):
        pts = v[idx == k]
        if len(pts) == 0:
            continue
        c = pts.mean(axis=0)
        centroids.append(c)
        radii.append(np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1]).mean())
    if len(centroids) < 3:
        raise DataError("fewer than 3 nonempty slices")
    centroids = np.asarray(centroids)
    radii = np.asarray(radii)
    seg = np.linalg.norm(np.diff(centroids, axis=0), axis=1)
    arc = float(seg.sum())
    chord = float(np.linalg.norm(centroids[-1] - centroids[0]))
    if chord <= 0:
        raise DataError("degenerate centroid curve")
    lo = len(radii) // 4
    hi = len(radii) - lo
    width = 2.0 * float(radii[lo:hi].mean())
    curvature = max(arc / chord - 1.0, 0.0)
    return SpikeTraits(length=arc, width=width, curvature=curvature)


def traits_csv_row(spike_id, traits, volume):
    """CSV row (spike_id, length_mm, width_mm, curvature, volume_mm3)."""
    return (
        f"{spike_id},{traits.length!r},{traits.width!r},"
        f"{traits.curvature!r},{volume!r}"
    )

"""Closed reference solids used by the generator and the test oracles."""

import numpy as np

from .mesh import TriangleMesh


def cube(side=1.0, center=(0.0, 0.0, 0.0)):
    """Axis-aligned cube as 12 outward-oriented triangles."""
    s = side / 2.0
    c = np.asarray(center, float)
    verts = np.array([
        [-s, -s, -s], [s, -s, -s], [s, s, -s], [-s, s, -s],
        [-s, -s, s], [s, -s, s], [s, s, s], [-s, s, s],
    ]) + c
    faces = np.array([
        [0, 2, 1], [0, 3, 2],          # bottom (z = -s), outward -z
        [4, 5, 6], [4, 6, 7],          # top
        [0, 1, 5], [0, 5, 4],          # y = -s
        [2, 3, 7], [2, 7, 6],          # y = +s
        [1, 2, 6], [1, 6, 5],          # x = +s
        [3, 0, 4], [3, 4, 7],          # x = -s
    ])
    return TriangleMesh(verts, faces)


def icosphere(radius=1.0, subdivisions=3, center=(0.0, 0.0, 0.0)):
    """Subdivided icosahedron projected onto the sphere."""
    t = (1.0 + 5.0 ** 0.5) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], float)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    vlist = [tuple(p) for p in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = np.asarray(vlist[a]) + np.asarray(vlist[b])
                m /= np.linalg.norm(m)
                vlist.append(tuple(m))
                cache[key] = len(vlist) - 1
            return cache[key]

        nxt = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            nxt += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = nxt
    verts = np.asarray(vlist) * radius + np.asarray(center, float)
    return TriangleMesh(verts, np.asarray(faces))


def _ring(n):
    ang = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.cos(ang), np.sin(ang)


def cylinder(radius=1.0, length=1.0, segments=64, axis="z", center=(0.0, 0.0, 0.0)):
    """Capped cylinder along the chosen axis, centered at `center`."""
    ca, sa = _ring(segments)
    h = length / 2.0
    bottom = np.stack([radius * ca, radius * sa, np.full(segments, -h)], axis=1)
    top = np.stack([radius * ca, radius * sa, np.full(segments, h)], axis=1)
    verts = np.vstack([bottom, top, [[0, 0, -h]], [[0, 0, h]]])
    cb, ct = 2 * segments, 2 * segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces += [(i, j, segments + j), (i, segments + j, segments + i)]
        faces += [(cb, j, i), (ct, segments + i, segments + j)]
    mesh = TriangleMesh(verts, np.asarray(faces))
    if axis == "x":
        rot = np.array([[0, 0, 1.0], [0, 1, 0], [-1, 0, 0]])
        mesh = mesh.rotated(rot)
    elif axis == "y":
        rot = np.array([[1.0, 0, 0], [0, 0, 1], [0, -1, 0]])
        mesh = mesh.rotated(rot)
    return mesh.translated(center)


def cone(base_radius=1.0, height=1.0, segments=64, base_center=(0.0, 0.0, 0.0)):
    """Closed cone: base polygon at z = 0, apex at z = height."""
    ca, sa = _ring(segments)
    base = np.stack([base_radius * ca, base_radius * sa, np.zeros(segments)], axis=1)
    verts = np.vstack([base, [[0, 0, 0]], [[0, 0, height]]])
    cb, apex = segments, segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces.append((cb, j, i))            # base, outward -z
        faces.append((i, j, apex))          # lateral
    mesh = TriangleMesh(verts, np.asarray(faces))
    return mesh.translated(base_center)


def bent_cylinder(radius, arc_radius, arc_angle, segments=48, rings=96):
    """Capped tube whose axis follows a circular arc in the x-z plane.

    The axis starts at the origin pointing +z and bends with the given
    arc radius through arc_angle radians.
    """
    ts = np.linspace(0.0, arc_angle, rings)
    centers = np.stack(
        [arc_radius * (1.0 - np.cos(ts)), np.zeros_like(ts), arc_radius * np.sin(ts)],
        axis=1,
    )
    tangents = np.stack([np.sin(ts), np.zeros_like(ts), np.cos(ts)], axis=1)
    side = np.array([0.0, 1.0, 0.0])
    ca, sa = _ring(segments)
    verts = []
    for c, t in zip(centers, tangents):
        u = np.cross(side, t)
        u /= np.linalg.norm(u)
        ring = c + radius * (np.outer(ca, u) + np.outer(sa, side))
        verts.append(ring)
    verts = np.vstack(verts + [centers[:1], centers[-1:]])
    c0, c1 = rings * segments, rings * segments + 1
    faces = []
    for r in range(rings - 1):
        for i in range(segments):
            j = (i + 1) % segments
            a, b = r * segments + i, r * segments + j
            c, d = (r + 1) * segments + i, (r + 1) * segments + j
            faces += [(a, b, d), (a, d, c)]
    for i in range(segments):
        j = (i + 1) % segments
        faces.append((c0, j, i))
        faces.append((c1, (rings - 1) * segments + i, (rings - 1) * segments + j))
    return TriangleMesh(np.asarray(verts), np.asarray(faces))

"""Minimal PLY mesh I/O: ASCII and binary little-endian, triangles out.

Reads any vertex element exposing x/y/z plus a face element with a vertex
index list; polygons with more than three vertices are fan-triangulated.
Parse failures report the byte offset of the offending token.
"""

import struct

import numpy as np

from .errors import PlyParseError
from .mesh import TriangleMesh

_SCALAR = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


class _Element:
    def __init__(self, name, count):
        self.name = name
        self.count = count
        self.props = []  # (name, kind) kind = dtype str or ("list", count_dt, item_dt)


def _parse_header(data):
    if not data.startswith(b"ply"):
        raise PlyParseError("missing 'ply' magic", 0)
    end = data.find(b"end_header")
    if end < 0:
        raise PlyParseError("missing end_header", len(data))
    nl = data.find(b"\n", end)
    if nl < 0:
        raise PlyParseError("unterminated end_header line", end)
    body_start = nl + 1
    fmt = None
    elements = []
    offset = 0
    for raw in data[:body_start].splitlines(keepends=True):
        line = raw.strip().decode("ascii", errors="replace")
        tokens = line.split()
        if not tokens or tokens[0] == "comment":
            offset += len(raw)
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] not in (
                "ascii", "binary_little_endian"
            ):
                raise PlyParseError(f"unsupported format line '{line}'", offset)
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3 or not tokens[2].isdigit():
                raise PlyParseError(f"malformed element line '{line}'", offset)
            elements.append(_Element(tokens[1], int(tokens[2])))
        elif tokens[0] == "property":
            if not elements:
                raise PlyParseError("property before any element", offset)
            if tokens[1] == "list":
                if len(tokens) != 5 or tokens[2] not in _SCALAR or tokens[3] not in _SCALAR:
                    raise PlyParseError(f"malformed list property '{line}'", offset)
                elements[-1].props.append(
                    (tokens[4], ("list", _SCALAR[tokens[2]], _SCALAR[tokens[3]]))
                )
            else:
                if len(tokens) != 3 or tokens[1] not in _SCALAR:
                    raise PlyParseError(f"unsupported property type '{line}'", offset)
                elements[-1].props.append((tokens[2], _SCALAR[tokens[1]]))
        offset += len(raw)
    if fmt is None:
        raise PlyParseError("header has no format line", 0)
    return fmt, elements, body_start


def _fan(indices):
    return [(indices[0], indices[i], indices[i + 1]) for i in range(1, len(indices) - 1)]


def _read_ascii(data, elements, offset):
    pos = offset
    out = {}
    for el in elements:
        rows = []
        for _ in range(el.count):
            nl = data.find(b"\n", pos)
            if nl < 0:
                nl = len(data)
            line = data[pos:nl]
            tokens = line.split()
            vals = []
            ti = 0
            for pname, kind in el.props:
                try:
                    if isinstance(kind, tuple):
                        n = int(tokens[ti]); ti += 1
                        items = [int(t) for t in tokens[ti:ti + n]]
                        if len(items) != n:
                            raise ValueError("short list")
                        ti += n
                        vals.append(items)
                    else:
                        vals.append(float(tokens[ti])); ti += 1
                except (ValueError, IndexError):
                    raise PlyParseError(
                        f"non-numeric or missing value for '{el.name}.{pname}'", pos
                    ) from None
            rows.append(vals)
            pos = nl + 1
        out[el.name] = rows
    return out


def _read_binary(data, elements, offset):
    pos = offset
    out = {}
    for el in elements:
        listy = any(isinstance(k, tuple) for _, k in el.props)
        if not listy:
            dt = np.dtype([(p, "<" + k) for p, k in el.props])
            need = dt.itemsize * el.count
            if pos + need > len(data):
                raise PlyParseError(f"truncated element '{el.name}'", pos)
            arr = np.frombuffer(data, dtype=dt, count=el.count, offset=pos)
            pos += need
            out[el.name] = arr
        else:
            rows = []
            for _ in range(el.count):
                vals = []
                for pname, kind in el.props:
                    if isinstance(kind, tuple):
                        _, cdt, idt = kind
                        csz = np.dtype(cdt).itemsize
                        if pos + csz > len(data):
                            raise PlyParseError("truncated list count", pos)
                        n = int(np.frombuffer(data, "<" + cdt, 1, pos)[0])
                        pos += csz
                        isz = np.dtype(idt).itemsize * n
                        if pos + isz > len(data):
                            raise PlyParseError("truncated list payload", pos)
                        vals.append(
                            np.frombuffer(data, "<" + idt, n, pos).astype(np.int64).tolist()
                        )
                        pos += isz
                    else:
                        sz = np.dtype(kind).itemsize
                        if pos + sz > len(data):
                            raise PlyParseError(f"truncated '{el.name}.{pname}'", pos)
                        vals.append(float(np.frombuffer(data, "<" + kind, 1, pos)[0]))
                        pos += sz
                rows.append(vals)
            out[el.name] = rows
    return out


def load_ply(path):
    """Read a PLY file and return a fan-triangulated TriangleMesh."""
    with open(path, "rb") as fh:
        data = fh.read()
    fmt, elements, body = _parse_header(data)

    names = [e.name for e in elements]
    if "vertex" not in names or "face" not in names:
        raise PlyParseError("file lacks vertex or face element", 0)

    if fmt == "ascii":
        parsed = _read_ascii(data, elements, body)
    else:
        parsed = _read_binary(data, elements, body)

    vel = elements[names.index("vertex")]
    pnames = [p for p, _ in vel.props]
    for need in ("x", "y", "z"):
        if need not in pnames:
            raise PlyParseError(f"vertex element lacks property '{need}'", 0)
    vdata = parsed["vertex"]
    if isinstance(vdata, np.ndarray):
        verts = np.stack([vdata["x"], vdata["y"], vdata["z"]], axis=1).astype(np.float64)
    else:
        ix, iy, iz = (pnames.index(n) for n in ("x", "y", "z"))
        verts = np.array([[r[ix], r[iy], r[iz]] for r in vdata], np.float64)
        verts = verts.reshape(-1, 3)

    fel = elements[names.index("face")]
    list_idx = next(
        (i for i, (_, k) in enumerate(fel.props) if isinstance(k, tuple)), None
    )
    if list_idx is None:
        raise PlyParseError("face element has no index list property", 0)
    tris = []
    for row in parsed["face"]:
        idx = row[list_idx]
        if len(idx) < 3:
            raise PlyParseError(f"face with {len(idx)} vertices", body)
        if max(idx) >= len(verts) or min(idx) < 0:
            raise PlyParseError(
                f"face index {max(idx)} out of range (vertex count {len(verts)})", body
            )
        tris.extend(_fan(idx))
    return TriangleMesh(verts, np.asarray(tris, np.int64).reshape(-1, 3))


def save_ply(mesh, path, binary=True):
    """Write a TriangleMesh as PLY (binary little-endian by default)."""
    v = np.asarray(mesh.vertices, np.float64)
    f = np.asarray(mesh.faces, np.int64)
    header = [
        "ply",
        "format binary_little_endian 1.0" if binary else "format ascii 1.0",
        f"element vertex {len(v)}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {len(f)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fh.write(v.astype("<f8").tobytes())
            rec = np.empty(len(f), dtype=[("n", "u1"), ("idx", "<i4", (3,))])
            rec["n"] = 3
            rec["idx"] = f.astype("<i4")
            fh.write(rec.tobytes())
        else:
            for p in v:
                fh.write(f"{p[0]!r} {p[1]!r} {p[2]!r}\n".encode("ascii"))
            for tri in f:
                fh.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n".encode("ascii"))
    return path

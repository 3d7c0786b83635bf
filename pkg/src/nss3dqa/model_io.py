"""Reading and writing colored 3D models.

Supports PLY (ascii / binary little-endian) for point clouds and meshes,
and OBJ with the 6-number vertex-color extension for meshes.  Coordinates
are held as float64 internally but serialized as 32-bit floats, which is
the common PLY convention; colors are 8-bit RGB.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelFormatError

# PLY scalar property types and their numpy equivalents.
_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


@dataclass
class ColoredPointCloud:
    """A set of 3D points with per-point 8-bit RGB colors."""

    positions: np.ndarray  # (N, 3) float64
    colors: np.ndarray     # (N, 3) uint8

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        self.colors = np.ascontiguousarray(self.colors, dtype=np.uint8)
        if self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise ModelFormatError("positions must be an (N, 3) array")
        if self.colors.shape != self.positions.shape:
            raise ModelFormatError("colors must match positions in shape")
        if len(self.positions) < 1:
            raise ModelFormatError("point cloud must contain at least one point")
        if not np.all(np.isfinite(self.positions)):
            raise ModelFormatError("positions contain non-finite coordinates")

    @property
    def count(self):
        return len(self.positions)

    def __eq__(self, other):
        if not isinstance(other, ColoredPointCloud):
            return NotImplemented
        return (np.array_equal(self.positions, other.positions)
                and np.array_equal(self.colors, other.colors))


@dataclass
class ColoredMesh:
    """A triangle mesh with per-vertex 8-bit RGB colors."""

    vertices: np.ndarray       # (V, 3) float64
    vertex_colors: np.ndarray  # (V, 3) uint8
    faces: np.ndarray          # (F, 3) int64, vertex indices

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.vertex_colors = np.ascontiguousarray(self.vertex_colors, dtype=np.uint8)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ModelFormatError("vertices must be a (V, 3) array")
        if self.vertex_colors.shape != self.vertices.shape:
            raise ModelFormatError("vertex_colors must match vertices in shape")
        if len(self.vertices) < 1:
            raise ModelFormatError("mesh must contain at least one vertex")
        if not np.all(np.isfinite(self.vertices)):
            raise ModelFormatError("vertices contain non-finite coordinates")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ModelFormatError("faces must be an (F, 3) index array")
        if len(self.faces):
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise ModelFormatError("face index out of range")
            a, b, c = self.faces.T
            if np.any(a == b) or np.any(b == c) or np.any(a == c):
                raise ModelFormatError("face repeats a vertex index")

    def __eq__(self, other):
        if not isinstance(other, ColoredMesh):
            return NotImplemented
        return (np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.vertex_colors, other.vertex_colors)
                and np.array_equal(self.faces, other.faces))


# A parsed model is one or the other.
Model = ColoredPointCloud | ColoredMesh


@dataclass
class _PlyElement:
    name: str
    count: int
    properties: list = field(default_factory=list)  # (name, kind) tuples
    # kind is a numpy type string or ("list", count_type, value_type)


def _parse_header(stream):
    magic = stream.readline()
    if magic.strip() != b"ply":
        raise ModelFormatError("not a PLY file: missing 'ply' magic line")
    fmt = None
    elements = []
    while True:
        raw = stream.readline()
        if not raw:
            raise ModelFormatError("malformed header: missing end_header")
        line = raw.decode("ascii", errors="replace").strip()
        if not line or line.startswith("comment"):
            continue
        parts = line.split()
        if parts[0] == "format":
            if len(parts) < 3:
                raise ModelFormatError("malformed format line")
            if parts[1] == "ascii":
                fmt = "ascii"
            elif parts[1] == "binary_little_endian":
                fmt = "binary_le"
            elif parts[1] == "binary_big_endian":
                raise ModelFormatError("unsupported format: binary_big_endian")
            else:
                raise ModelFormatError(f"unsupported format: {parts[1]}")
        elif parts[0] == "element":
            if len(parts) != 3:
                raise ModelFormatError(f"malformed element line: {line!r}")
            try:
                count = int(parts[2])
            except ValueError:
                raise ModelFormatError(f"malformed element count: {line!r}") from None
            if count < 0:
                raise ModelFormatError(f"negative element count: {line!r}")
            elements.append(_PlyElement(parts[1], count))
        elif parts[0] == "property":
            if not elements:
                raise ModelFormatError("property declared before any element")
            if parts[1] == "list":
                if len(parts) != 5:
                    raise ModelFormatError(f"malformed list property: {line!r}")
                ct, vt = parts[2], parts[3]
                if ct not in _PLY_TYPES or vt not in _PLY_TYPES:
                    raise ModelFormatError(f"unknown property type in: {line!r}")
                elements[-1].properties.append(
                    (parts[4], ("list", _PLY_TYPES[ct], _PLY_TYPES[vt])))
            else:
                if len(parts) != 3:
                    raise ModelFormatError(f"malformed property line: {line!r}")
                if parts[1] not in _PLY_TYPES:
                    raise ModelFormatError(f"unknown property type: {parts[1]}")
                elements[-1].properties.append((parts[2], _PLY_TYPES[parts[1]]))
        elif parts[0] == "end_header":
            break
        else:
            raise ModelFormatError(f"unrecognized header line: {line!r}")
    if fmt is None:
        raise ModelFormatError("malformed header: missing format line")
    return fmt, elements


def _vertex_layout(element):
    names = [p[0] for p in element.properties]
    for req, kinds in (("x", ("f4", "f8")), ("y", ("f4", "f8")),
                       ("z", ("f4", "f8"))):
        if req not in names:
            raise ModelFormatError(f"vertex element missing property {req!r}")
        kind = element.properties[names.index(req)][1]
        if kind not in kinds:
            raise ModelFormatError(f"vertex property {req!r} must be float typed")
    for req in ("red", "green", "blue"):
        if req not in names:
            raise ModelFormatError("vertex element missing color properties")
        kind = element.properties[names.index(req)][1]
        if kind != "u1":
            raise ModelFormatError(f"vertex color property {req!r} must be uchar")
    for name, kind in element.properties:
        if isinstance(kind, tuple):
            raise ModelFormatError("list property on vertex element not supported")
    return names


def _read_vertices_binary(stream, element):
    names = _vertex_layout(element)
    dtype = np.dtype([(n, "<" + k) for n, k in element.properties])
    raw = stream.read(dtype.itemsize * element.count)
    if len(raw) != dtype.itemsize * element.count:
        raise ModelFormatError("truncated body: vertex data ends early")
    rec = np.frombuffer(raw, dtype=dtype)
    pos = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float64)
    col = np.stack([rec["red"], rec["green"], rec["blue"]], axis=1)
    return pos, col.astype(np.uint8)


def _read_vertices_ascii(lines, element):
    names = _vertex_layout(element)
    ix, iy, iz = names.index("x"), names.index("y"), names.index("z")
    ir, ig, ib = names.index("red"), names.index("green"), names.index("blue")
    n_props = len(names)
    pos = np.empty((element.count, 3), dtype=np.float64)
    col = np.empty((element.count, 3), dtype=np.uint8)
    for i in range(element.count):
        try:
            tokens = next(lines)
        except StopIteration:
            raise ModelFormatError("truncated body: vertex data ends early") from None
        if len(tokens) != n_props:
            raise ModelFormatError(f"vertex line has {len(tokens)} values, "
                                   f"expected {n_props}")
        try:
            # Values pass through float32 so ascii and binary bodies agree.
            pos[i] = [np.float32(tokens[ix]), np.float32(tokens[iy]),
                      np.float32(tokens[iz])]
            r, g, b = int(tokens[ir]), int(tokens[ig]), int(tokens[ib])
        except ValueError:
            raise ModelFormatError("malformed vertex value") from None
        if not all(0 <= v <= 255 for v in (r, g, b)):
            raise ModelFormatError("color channel out of [0, 255]")
        col[i] = (r, g, b)
    return pos, col


def _face_layout(element):
    list_props = [(n, k) for n, k in element.properties if isinstance(k, tuple)]
    if len(element.properties) != 1 or len(list_props) != 1:
        raise ModelFormatError("face element must have a single list property")
    name, (_, count_t, value_t) = list_props[0]
    if name not in ("vertex_indices", "vertex_index"):
        raise ModelFormatError(f"unexpected face property name {name!r}")
    return count_t, value_t


def _read_faces_binary(stream, element):
    count_t, value_t = _face_layout(element)
    dtype = np.dtype([("n", "<" + count_t), ("idx", "<" + value_t, (3,))])
    raw = stream.read(dtype.itemsize * element.count)
    if len(raw) != dtype.itemsize * element.count:
        raise ModelFormatError("truncated body: face data ends early")
    rec = np.frombuffer(raw, dtype=dtype)
    if element.count and not np.all(rec["n"] == 3):
        raise ModelFormatError("non-triangle face: only triangles supported")
    return rec["idx"].astype(np.int64)


def _read_faces_ascii(lines, element):
    _face_layout(element)
    faces = np.empty((element.count, 3), dtype=np.int64)
    for i in range(element.count):
        try:
            tokens = next(lines)
        except StopIteration:
            raise ModelFormatError("truncated body: face data ends early") from None
        try:
            n = int(tokens[0])
            vals = [int(t) for t in tokens[1:]]
        except (ValueError, IndexError):
            raise ModelFormatError("malformed face line") from None
        if n != 3 or len(vals) != 3:
            raise ModelFormatError("non-triangle face: only triangles supported")
        faces[i] = vals
    return faces


def parse_ply(data: bytes) -> Model:
    """Parse PLY bytes into a ColoredPointCloud or ColoredMesh.

    A mesh is returned when a face element with at least one face is
    present, a point cloud otherwise.  Unknown vertex-level scalar
    properties are skipped; unsupported encodings raise ModelFormatError.
    """
    stream = io.BytesIO(data)
    fmt, elements = _parse_header(stream)
    vertex_el = next((e for e in elements if e.name == "vertex"), None)
    if vertex_el is None:
        raise ModelFormatError("missing vertex element")
    if vertex_el.count < 1:
        raise ModelFormatError("vertex element declares no vertices")
    face_el = next((e for e in elements if e.name == "face"), None)
    for e in elements:
        if e.name not in ("vertex", "face") and e.count > 0:
            raise ModelFormatError(f"unsupported element {e.name!r} with data")

    if fmt == "ascii":
        body = stream.read().decode("ascii", errors="replace")
        lines = iter([ln.split() for ln in body.splitlines() if ln.strip()])
        pos, col = _read_vertices_ascii(lines, vertex_el)
        faces = _read_faces_ascii(lines, face_el) if face_el else None
    else:
        pos, col = _read_vertices_binary(stream, vertex_el)
        faces = _read_faces_binary(stream, face_el) if face_el else None

    if faces is not None and len(faces) > 0:
        return ColoredMesh(pos, col, faces)
    return ColoredPointCloud(pos, col)


def parse_obj(data: bytes) -> ColoredMesh:
    """Parse OBJ bytes (with the vertex-color extension) into a mesh.

    Vertex colors are 6-number "v" lines with r, g, b in [0, 1], scaled
    to 0-255 by half-up rounding.  If no vertex carries color, all
    default to white; a mix of colored and uncolored vertices is an
    error.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ModelFormatError(f"OBJ is not valid UTF-8: {exc}") from None
    positions = []
    colors = []
    faces = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "v":
            vals = parts[1:]
            if len(vals) not in (3, 6):
                raise ModelFormatError(
                    f"line {lineno}: vertex must have 3 or 6 numbers")
            try:
                nums = [float(v) for v in vals]
            except ValueError:
                raise ModelFormatError(
                    f"line {lineno}: malformed vertex number") from None
            positions.append(nums[:3])
            if len(nums) == 6:
                rgb = nums[3:]
                if any(c < 0 or c > 1 for c in rgb):
                    raise ModelFormatError(
                        f"line {lineno}: vertex color outside [0, 1]")
                colors.append([int(np.floor(c * 255.0 + 0.5)) for c in rgb])
            else:
                colors.append(None)
        elif parts[0] == "f":
            idx = parts[1:]
            if len(idx) != 3:
                raise ModelFormatError(
                    f"line {lineno}: non-triangle face: only triangles supported")
            try:
                ids = [int(tok.split("/")[0]) for tok in idx]
            except ValueError:
                raise ModelFormatError(
                    f"line {lineno}: malformed face index") from None
            faces.append(ids)
        # Other directives (vn, vt, usemtl, ...) are ignored.
    if not positions:
        raise ModelFormatError("OBJ contains no vertices")
    n = len(positions)
    for f in faces:
        for i in f:
            if i < 1 or i > n:
                raise ModelFormatError(f"face index {i} out of range (1..{n})")
    has_color = [c is not None for c in colors]
    if any(has_color) and not all(has_color):
        raise ModelFormatError("mixed colored and uncolored vertices")
    if not any(has_color):
        colors = [[255, 255, 255]] * n
    faces_arr = (np.asarray(faces, dtype=np.int64) - 1 if faces
                 else np.empty((0, 3), dtype=np.int64))
    # Positions pass through float32 for parity with PLY round-trips.
    pos = np.asarray(positions, dtype=np.float32).astype(np.float64)
    return ColoredMesh(pos, np.asarray(colors, dtype=np.uint8), faces_arr)


def _f32_repr(v):
    return np.format_float_positional(np.float32(v), unique=True, trim="0")


def write_ply(model: Model, encoding: str = "binary_le") -> bytes:
    """Serialize a model as PLY.  encoding is 'ascii' or 'binary_le'.

    parse_ply(write_ply(m)) reproduces m exactly provided m's coordinates
    are representable as 32-bit floats (they are whenever m itself came
    from a parser or the synth generators).
    """
    if encoding not in ("ascii", "binary_le"):
        raise ModelFormatError(f"unknown encoding {encoding!r}")
    if isinstance(model, ColoredPointCloud):
        pos, col, faces = model.positions, model.colors, None
    elif isinstance(model, ColoredMesh):
        pos, col, faces = model.vertices, model.vertex_colors, model.faces
    else:
        raise ModelFormatError(f"cannot serialize object of type {type(model)}")
    if len(pos) < 1:
        raise ModelFormatError("refusing to write a model with no vertices")

    fmt_name = "ascii" if encoding == "ascii" else "binary_little_endian"
    header = [
        "ply",
        f"format {fmt_name} 1.0",
        f"element vertex {len(pos)}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
    ]
    if faces is not None:
        header += [
            f"element face {len(faces)}",
            "property list uchar int vertex_indices",
        ]
    header.append("end_header")
    out = io.BytesIO()
    out.write(("\n".join(header) + "\n").encode("ascii"))

    if encoding == "ascii":
        for p, c in zip(pos, col):
            out.write((f"{_f32_repr(p[0])} {_f32_repr(p[1])} {_f32_repr(p[2])} "
                       f"{c[0]} {c[1]} {c[2]}\n").encode("ascii"))
        if faces is not None:
            for f in faces:
                out.write(f"3 {f[0]} {f[1]} {f[2]}\n".encode("ascii"))
    else:
        dtype = np.dtype([("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                          ("red", "u1"), ("green", "u1"), ("blue", "u1")])
        rec = np.empty(len(pos), dtype=dtype)
        p32 = pos.astype(np.float32)
        rec["x"], rec["y"], rec["z"] = p32[:, 0], p32[:, 1], p32[:, 2]
        rec["red"], rec["green"], rec["blue"] = col[:, 0], col[:, 1], col[:, 2]
        out.write(rec.tobytes())
        if faces is not None:
            fdtype = np.dtype([("n", "u1"), ("idx", "<i4", (3,))])
            frec = np.empty(len(faces), dtype=fdtype)
            frec["n"] = 3
            frec["idx"] = faces.astype(np.int32)
            out.write(frec.tobytes())
    return out.getvalue()


def load_model(path) -> Model:
    """Load a model from a .ply or .obj file by extension."""
    path = str(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if path.lower().endswith(".obj"):
        return parse_obj(data)
    return parse_ply(data)

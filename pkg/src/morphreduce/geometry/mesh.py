"""Triangle surface data model and plain-text mesh I/O (OBJ, ASCII STL).

Vertices are stored as an (V, 3) float64 array and triangles as a (T, 3)
integer index array.  Meshes are immutable after construction: the arrays
are locked read-only, and field attachment returns a new mesh.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import MeshFormatError, ToolkitError

_FLOAT_FMT = "%.17g"  # round-trips IEEE doubles exactly


def _as_locked(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass
class TriMesh:
    """Indexed triangle surface with optional named per-vertex fields.

    scalar_fields maps a name to a (V,) array (e.g. pressure in Pa);
    vector_fields maps a name to a (V, 3) array.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    scalar_fields: dict = field(default_factory=dict)
    vector_fields: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshFormatError(
                f"triangle index out of range: indices must lie in [0, {len(v)})"
            )
        self.vertices = _as_locked(v)
        self.triangles = _as_locked(t)
        for name, f in list(self.scalar_fields.items()):
            f = np.asarray(f, dtype=float).reshape(-1)
            if len(f) != len(v):
                raise ToolkitError(
                    f"scalar field {name!r} has {len(f)} values for {len(v)} vertices"
                )
            self.scalar_fields[name] = _as_locked(f)
        for name, f in list(self.vector_fields.items()):
            f = np.asarray(f, dtype=float).reshape(-1, 3)
            if len(f) != len(v):
                raise ToolkitError(
                    f"vector field {name!r} has {len(f)} values for {len(v)} vertices"
                )
            self.vector_fields[name] = _as_locked(f)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def corner_coordinates(self):
        """Vertex coordinates of every triangle, as three (T, 3) arrays."""
        v, t = self.vertices, self.triangles
        return v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]

    def with_scalar_field(self, name: str, values) -> "TriMesh":
        fields = dict(self.scalar_fields)
        fields[name] = np.asarray(values, dtype=float)
        return TriMesh(self.vertices, self.triangles, fields, dict(self.vector_fields))

    def with_vertices(self, vertices) -> "TriMesh":
        """Same connectivity and fields, new vertex positions."""
        return TriMesh(vertices, self.triangles, dict(self.scalar_fields),
                       dict(self.vector_fields))

    def degenerate_triangles(self) -> np.ndarray:
        """Indices of triangles with repeated vertices or exactly zero area."""
        t = self.triangles
        if not len(t):
            return np.empty(0, dtype=np.int64)
        repeated = (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
        a, b, c = self.corner_coordinates()
        cross = np.cross(b - a, c - a)
        zero_area = (cross == 0.0).all(axis=1)
        return np.nonzero(repeated | zero_area)[0]


def _infer_format(path, fmt):
    if fmt is not None:
        if fmt not in ("obj", "stl-ascii"):
            raise ToolkitError(f"unknown mesh format {fmt!r} (expected obj or stl-ascii)")
        return fmt
    suffix = Path(path).suffix.lower()
    if suffix == ".obj":
        return "obj"
    if suffix == ".stl":
        return "stl-ascii"
    raise ToolkitError(f"cannot infer mesh format from {path!r}; pass fmt explicitly")


def load_mesh(path, fmt: str | None = None, validate: bool = True) -> TriMesh:
    """Load an OBJ or ASCII STL triangle mesh.

    With validate on, degenerate (zero-area) triangles are rejected with a
    report of the offending triangle indices.
    """
    fmt = _infer_format(path, fmt)
    text = Path(path).read_text()
    if fmt == "obj":
        mesh = _parse_obj(text, str(path))
    else:
        mesh = _parse_stl_ascii(text, str(path))
    if validate:
        bad = mesh.degenerate_triangles()
        if len(bad):
            raise MeshFormatError(
                f"{path}: {len(bad)} degenerate triangle(s): indices {bad[:10].tolist()}"
            )
    return mesh


def save_mesh(mesh: TriMesh, path, fmt: str | None = None) -> None:
    """Write a mesh as OBJ or ASCII STL.

    Non-finite vertex coordinates are refused; round-tripping through OBJ
    preserves coordinates exactly and connectivity verbatim.
    """
    fmt = _infer_format(path, fmt)
    if not np.isfinite(mesh.vertices).all():
        raise ToolkitError("refusing to write mesh with non-finite vertex coordinates")
    if fmt == "obj":
        _write_obj(mesh, path)
    else:
        _write_stl_ascii(mesh, path)


def _parse_obj(text: str, origin: str) -> TriMesh:
    vertices = []
    triangles = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshFormatError(f"{origin}:{lineno}: vertex record needs 3 coordinates")
            try:
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError as exc:
                raise MeshFormatError(f"{origin}:{lineno}: bad vertex coordinate ({exc})")
        elif tag == "f":
            if len(parts) != 4:
                raise MeshFormatError(
                    f"{origin}:{lineno}: only triangle faces are supported "
                    f"(got {len(parts) - 1} corners)"
                )
            idx = []
            for token in parts[1:]:
                # tolerate v/vt/vn references; only the vertex index is used
                head = token.split("/")[0]
                try:
                    i = int(head)
                except ValueError:
                    raise MeshFormatError(f"{origin}:{lineno}: bad face index {token!r}")
                if i < 1:
                    raise MeshFormatError(f"{origin}:{lineno}: face index {i} must be >= 1")
                idx.append(i - 1)
            triangles.append((lineno, idx))
        # other record types (vn, vt, o, g, s, usemtl, mtllib) are ignored
    if not vertices:
        raise MeshFormatError(f"{origin}: no vertex records found")
    nv = len(vertices)
    for lineno, idx in triangles:
        for i in idx:
            if i >= nv:
                raise MeshFormatError(
                    f"{origin}:{lineno}: face index {i + 1} out of range for {nv} vertices"
                )
    return TriMesh(np.array(vertices, dtype=float),
                   np.array([idx for _, idx in triangles], dtype=np.int64).reshape(-1, 3))


def _write_obj(mesh: TriMesh, path) -> None:
    lines = []
    for v in mesh.vertices:
        lines.append("v " + " ".join(_FLOAT_FMT % c for c in v))
    for t in mesh.triangles:
        lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def _parse_stl_ascii(text: str, origin: str) -> TriMesh:
    vertex_index: dict = {}
    vertices = []
    triangles = []
    current = []
    saw_solid = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts:
            continue
        tag = parts[0].lower()
        if tag in ("solid", "endsolid"):
            saw_solid = True
        elif tag == "facet":
            current = []
        elif tag == "vertex":
            if len(parts) < 4:
                raise MeshFormatError(f"{origin}:{lineno}: vertex record needs 3 coordinates")
            try:
                p = (float(parts[1]), float(parts[2]), float(parts[3]))
            except ValueError as exc:
                raise MeshFormatError(f"{origin}:{lineno}: bad vertex coordinate ({exc})")
            key = p
            if key not in vertex_index:
                vertex_index[key] = len(vertices)
                vertices.append(p)
            current.append(vertex_index[key])
        elif tag == "endfacet":
            if len(current) != 3:
                raise MeshFormatError(
                    f"{origin}:{lineno}: facet has {len(current)} vertices, expected 3"
                )
            triangles.append(current)
            current = []
        # "outer loop" / "endloop" / normal values carry no extra information
    if not saw_solid and not vertices:
        raise MeshFormatError(f"{origin}: no solid/vertex records found")
    return TriMesh(np.array(vertices, dtype=float).reshape(-1, 3),
                   np.array(triangles, dtype=np.int64).reshape(-1, 3))


def _write_stl_ascii(mesh: TriMesh, path) -> None:
    a, b, c = mesh.corner_coordinates()
    cross = np.cross(b - a, c - a)
    norms = np.linalg.norm(cross, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    normals = cross / safe[:, None]
    lines = ["solid mesh"]
    for i in range(mesh.num_triangles):
        lines.append("  facet normal " + " ".join(_FLOAT_FMT % x for x in normals[i]))
        lines.append("    outer loop")
        for corner in (a[i], b[i], c[i]):
            lines.append("      vertex " + " ".join(_FLOAT_FMT % x for x in corner))
        lines.append("    endloop")
        lines.append("  endfacet")
    lines.append("endsolid mesh")
    Path(path).write_text("\n".join(lines) + "\n")


def load_scalar_field(mesh: TriMesh, path, name: str) -> TriMesh:
    """Attach a per-vertex scalar field from a sidecar CSV.

    Expected layout: header ``vertex_index,value``, indices 0-based, one row
    per vertex.
    """
    values = np.full(mesh.num_vertices, np.nan)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["vertex_index", "value"]:
            raise ToolkitError(f"{path}: expected header 'vertex_index,value'")
        for row in reader:
            if not row:
                continue
            i = int(row[0])
            if not 0 <= i < mesh.num_vertices:
                raise ToolkitError(f"{path}: vertex index {i} out of range")
            values[i] = float(row[1])
    if np.isnan(values).any():
        missing = int(np.isnan(values).sum())
        raise ToolkitError(f"{path}: {missing} vertices have no field value")
    return mesh.with_scalar_field(name, values)


def save_scalar_field(mesh: TriMesh, name: str, path) -> None:
    if name not in mesh.scalar_fields:
        raise ToolkitError(f"mesh has no scalar field {name!r}")
    values = mesh.scalar_fields[name]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vertex_index", "value"])
        for i, v in enumerate(values):
            writer.writerow([i, _FLOAT_FMT % v])

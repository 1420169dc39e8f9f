"""Trivariate free-form deformation on a Bernstein control lattice.

The morphing map factors as back-map ∘ lattice-displacement ∘ reference-map:
a point is sent to the unit reference cube, displaced by a tensor-product
Bernstein blend of the control-point displacements, and mapped back.  Since
the back map is affine this reduces to p -> p + A @ D(s, t, u), which keeps
undisplaced points bit-identical.  Points whose reference coordinates fall
outside [0, 1]^3 are returned untouched.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from math import comb
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError
from .geometry import TriMesh

__all__ = [
    "FFDLattice", "BindingEntry", "ParameterBinding",
    "to_reference", "to_physical", "apply_parameters",
    "deform_point", "deform_points", "deform_mesh", "sample_parameters",
    "save_ffd_json", "load_ffd_json",
]


@dataclass
class FFDLattice:
    """Control-point lattice spanning the box origin + [0,1]^3 under axes.

    axes holds the three box edge vectors as rows; they need not be
    orthonormal but must be linearly independent.  displacements has shape
    (L, M, N, 3) and is expressed in lattice-local coordinates (fractions
    of the box edges).
    """

    origin: np.ndarray
    axes: np.ndarray
    counts: tuple
    displacements: np.ndarray = None

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        self.axes = np.asarray(self.axes, dtype=float).reshape(3, 3)
        self.counts = tuple(int(c) for c in self.counts)
        if any(c < 2 for c in self.counts):
            raise ConfigError(f"lattice needs >= 2 control points per direction, got {self.counts}")
        edge_scale = np.prod(np.linalg.norm(self.axes, axis=1))
        if edge_scale == 0.0 or abs(np.linalg.det(self.axes.T)) < 1e-12 * edge_scale:
            raise ConfigError("lattice axes are singular or numerically dependent")
        if self.displacements is None:
            self.displacements = np.zeros(self.counts + (3,))
        self.displacements = np.array(self.displacements, dtype=float)
        if self.displacements.shape != self.counts + (3,):
            raise ConfigError(
                f"displacement array shape {self.displacements.shape} does not match "
                f"counts {self.counts}"
            )
        for a in (self.origin, self.axes, self.displacements):
            a.flags.writeable = False

    @property
    def box_matrix(self) -> np.ndarray:
        """Columns are the box edge vectors: p = origin + box_matrix @ (s,t,u)."""
        return self.axes.T

    def with_displacements(self, displacements) -> "FFDLattice":
        return FFDLattice(self.origin, self.axes, self.counts, displacements)


@dataclass
class BindingEntry:
    parameter: int
    index: tuple
    axis: int
    weight: float = 1.0


@dataclass
class ParameterBinding:
    """Maps m scalar parameters onto control-point displacement components."""

    entries: list
    bounds: np.ndarray = None

    def __post_init__(self):
        self.entries = [
            e if isinstance(e, BindingEntry) else BindingEntry(*e) for e in self.entries
        ]
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        if len(self.bounds) < 1:
            raise ConfigError("binding needs at least one parameter")
        if (self.bounds[:, 1] < self.bounds[:, 0]).any():
            raise ConfigError("parameter bounds must satisfy lo <= hi")
        for e in self.entries:
            e.index = tuple(int(i) for i in e.index)
            if e.axis not in (0, 1, 2):
                raise ConfigError(f"binding axis must be 0, 1 or 2, got {e.axis}")
            if not 0 <= e.parameter < self.dimension:
                raise ConfigError(
                    f"binding entry references parameter {e.parameter} "
                    f"but dimension is {self.dimension}"
                )
        self.bounds.flags.writeable = False

    @property
    def dimension(self) -> int:
        return len(self.bounds)


def to_reference(lattice: FFDLattice, points) -> np.ndarray:
    """Map physical coordinates to lattice reference coordinates (s, t, u)."""
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    stu = np.linalg.solve(lattice.box_matrix, (p.reshape(-1, 3) - lattice.origin).T).T
    return stu[0] if single else stu


def to_physical(lattice: FFDLattice, stu) -> np.ndarray:
    """Inverse of to_reference."""
    r = np.asarray(stu, dtype=float)
    single = r.ndim == 1
    p = lattice.origin + r.reshape(-1, 3) @ lattice.box_matrix.T
    return p[0] if single else p


def apply_parameters(lattice: FFDLattice, binding: ParameterBinding,
                     mu) -> FFDLattice:
    """Return a lattice copy with weight * mu[j] added at every bound entry."""
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if len(mu) != binding.dimension:
        raise DomainError(
            f"parameter vector has length {len(mu)}, binding expects {binding.dimension}"
        )
    outside = (mu < binding.bounds[:, 0]) | (mu > binding.bounds[:, 1])
    if outside.any():
        warnings.warn(
            f"{int(outside.sum())} parameter(s) outside the binding bounds; "
            "evaluating anyway", stacklevel=2)
    disp = np.array(lattice.displacements)
    for e in binding.entries:
        if any(i >= c or i < 0 for i, c in zip(e.index, lattice.counts)):
            raise ConfigError(
                f"binding entry index {e.index} outside lattice counts {lattice.counts}"
            )
        disp[e.index + (e.axis,)] += e.weight * mu[e.parameter]
    return lattice.with_displacements(disp)


def _bernstein_matrix(degree: int, t: np.ndarray) -> np.ndarray:
    """All Bernstein polynomials of the given degree at points t: (len(t), degree+1)."""
    t = np.asarray(t, dtype=float)
    out = np.empty((len(t), degree + 1))
    for i in range(degree + 1):
        out[:, i] = comb(degree, i) * t ** i * (1.0 - t) ** (degree - i)
    return out


def basis_partition(lattice: FFDLattice, stu) -> np.ndarray:
    """Sum of the trivariate basis at reference points; identically 1 on the box."""
    stu = np.asarray(stu, dtype=float).reshape(-1, 3)
    L, M, N = lattice.counts
    bs = _bernstein_matrix(L - 1, stu[:, 0])
    bt = _bernstein_matrix(M - 1, stu[:, 1])
    bu = _bernstein_matrix(N - 1, stu[:, 2])
    return bs.sum(axis=1) * bt.sum(axis=1) * bu.sum(axis=1)


def deform_points(lattice: FFDLattice, points) -> np.ndarray:
    """Apply the deformation map to an array of points.

    Points outside the lattice box and points receiving an exactly zero
    displacement are returned bit-identical.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    out = pts.copy()
    stu = to_reference(lattice, pts)
    inside = ((stu >= 0.0) & (stu <= 1.0)).all(axis=1)
    if not inside.any():
        return out
    s = stu[inside]
    L, M, N = lattice.counts
    bs = _bernstein_matrix(L - 1, s[:, 0])
    bt = _bernstein_matrix(M - 1, s[:, 1])
    bu = _bernstein_matrix(N - 1, s[:, 2])
    local = np.einsum("pi,pj,pk,ijkc->pc", bs, bt, bu, lattice.displacements,
                      optimize=True)
    shift = local @ lattice.box_matrix.T
    moved = (shift != 0.0).any(axis=1)
    idx = np.nonzero(inside)[0][moved]
    out[idx] = pts[idx] + shift[moved]
    return out


def deform_point(lattice: FFDLattice, point) -> np.ndarray:
    return deform_points(lattice, np.asarray(point, dtype=float).reshape(1, 3))[0]


def deform_mesh(lattice: FFDLattice, mesh: TriMesh) -> TriMesh:
    """Deform every vertex; connectivity and attached fields are preserved."""
    return mesh.with_vertices(deform_points(lattice, mesh.vertices))


def sample_parameters(binding: ParameterBinding, n: int,
                      scheme: str = "latin-hypercube", seed: int = 0) -> np.ndarray:
    """Draw n parameter vectors inside the binding bounds, (n, m).

    uniform-random draws i.i.d. uniforms; latin-hypercube stratifies each
    coordinate into n equal slices.  Deterministic for a given seed.
    """
    if n < 1:
        raise DomainError(f"sample count must be >= 1, got {n}")
    m = binding.dimension
    rng = np.random.default_rng(seed)
    if scheme == "uniform-random":
        unit = rng.random((n, m))
    elif scheme == "latin-hypercube":
        unit = np.empty((n, m))
        for j in range(m):
            unit[:, j] = (rng.permutation(n) + rng.random(n)) / n
    else:
        raise ConfigError(f"unknown sampling scheme {scheme!r}")
    lo, hi = binding.bounds[:, 0], binding.bounds[:, 1]
    return lo + unit * (hi - lo)


def save_ffd_json(path, lattice: FFDLattice, binding: ParameterBinding | None = None) -> None:
    """Serialize lattice (and optional binding) as a single JSON document."""
    nz = np.argwhere((lattice.displacements != 0.0).any(axis=-1))
    doc = {
        "origin": lattice.origin.tolist(),
        "axes": lattice.axes.tolist(),
        "counts": list(lattice.counts),
        "displacements": [
            {"index": idx.tolist(), "value": lattice.displacements[tuple(idx)].tolist()}
            for idx in nz
        ],
    }
    if binding is not None:
        doc["binding"] = {
            "bounds": binding.bounds.tolist(),
            "entries": [
                {"parameter": e.parameter, "index": list(e.index),
                 "axis": e.axis, "weight": e.weight}
                for e in binding.entries
            ],
        }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_ffd_json(path):
    """Load (lattice, binding-or-None) from a JSON document."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})")
    try:
        counts = tuple(doc["counts"])
        disp = np.zeros(counts + (3,))
        for entry in doc.get("displacements", []):
            disp[tuple(entry["index"])] = entry["value"]
        lattice = FFDLattice(doc["origin"], doc["axes"], counts, disp)
        binding = None
        if "binding" in doc:
            b = doc["binding"]
            entries = [
                BindingEntry(e["parameter"], tuple(e["index"]), e["axis"],
                             e.get("weight", 1.0))
                for e in b["entries"]
            ]
            binding = ParameterBinding(entries, bounds=b["bounds"])
            for e in binding.entries:
                if any(i >= c or i < 0 for i, c in zip(e.index, counts)):
                    raise ConfigError(
                        f"{path}: binding index {e.index} outside lattice counts {counts}"
                    )
    except KeyError as exc:
        raise ConfigError(f"{path}: missing field {exc}")
    return lattice, binding

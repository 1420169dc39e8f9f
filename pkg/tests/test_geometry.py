import numpy as np
import pytest

from morphreduce.errors import DomainError, MeshFormatError, MeshTopologyError, ToolkitError
from morphreduce.geometry import (TriMesh, boundary_edge_count, enclosed_volume,
                                  icosphere, integrate_pressure_force, ittc57_drag,
                                  ittc57_friction_coefficient, load_mesh,
                                  load_scalar_field, max_edge_length, save_mesh,
                                  save_scalar_field, surface_area, unit_cube)

CUBE_OBJ = """\
# canonical unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 4 3
f 1 3 2
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 3 4 8
f 3 8 7
f 1 5 8
f 1 8 4
f 2 3 7
f 2 7 6
"""


def rotation_matrix(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]],
                  [axis[2], 0, -axis[0]],
                  [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


class TestMeshIO:
    def test_load_cube_obj(self, tmp_path):
        path = tmp_path / "cube.obj"
        path.write_text(CUBE_OBJ)
        mesh = load_mesh(path)
        assert mesh.num_vertices == 8
        assert mesh.num_triangles == 12

    def test_empty_file_is_parse_error(self, tmp_path):
        path = tmp_path / "empty.obj"
        path.write_text("")
        with pytest.raises(MeshFormatError):
            load_mesh(path)

    def test_out_of_range_index(self, tmp_path):
        path = tmp_path / "bad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")
        with pytest.raises(MeshFormatError, match="out of range"):
            load_mesh(path)

    def test_parse_error_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.obj"
        path.write_text("v 0 0 0\nv zero 0 0\n")
        with pytest.raises(MeshFormatError, match="bad.obj:2"):
            load_mesh(path)

    def test_obj_round_trip_is_lossless(self, tmp_path):
        mesh = icosphere(2, radius=1.7, center=(0.3, -0.2, 0.9))
        path = tmp_path / "sphere.obj"
        save_mesh(mesh, path)
        back = load_mesh(path)
        assert np.array_equal(mesh.vertices, back.vertices)
        assert np.array_equal(mesh.triangles, back.triangles)

    def test_stl_round_trip_preserves_geometry(self, tmp_path):
        mesh = icosphere(1)
        path = tmp_path / "sphere.stl"
        save_mesh(mesh, path)
        back = load_mesh(path)
        assert back.num_triangles == mesh.num_triangles
        # vertices may be renumbered by welding; triangle corners must match
        a0, b0, c0 = mesh.corner_coordinates()
        a1, b1, c1 = back.corner_coordinates()
        assert np.array_equal(a0, a1) and np.array_equal(b0, b1) and np.array_equal(c0, c1)
        again = tmp_path / "sphere2.stl"
        save_mesh(back, again)
        assert np.array_equal(load_mesh(again).vertices, back.vertices)

    def test_refuses_nan_vertex(self, tmp_path):
        mesh = TriMesh([[0, 0, 0], [1, 0, 0], [0, np.nan, 0]], [[0, 1, 2]])
        with pytest.raises(ToolkitError, match="non-finite"):
            save_mesh(mesh, tmp_path / "nan.obj")

    def test_zero_triangle_mesh_saves(self, tmp_path):
        mesh = TriMesh(np.zeros((3, 3)) + np.eye(3), np.empty((0, 3), dtype=int))
        path = tmp_path / "points.obj"
        save_mesh(mesh, path)
        back = load_mesh(path)
        assert back.num_triangles == 0
        assert back.num_vertices == 3

    def test_degenerate_triangle_rejected_when_validating(self, tmp_path):
        path = tmp_path / "degen.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n")
        with pytest.raises(MeshFormatError, match="degenerate"):
            load_mesh(path)
        mesh = load_mesh(path, validate=False)
        assert mesh.num_triangles == 1

    def test_non_triangle_face_rejected(self, tmp_path):
        path = tmp_path / "quad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        with pytest.raises(MeshFormatError, match="triangle"):
            load_mesh(path)


class TestScalarFields:
    def test_sidecar_round_trip(self, tmp_path):
        mesh = unit_cube()
        values = np.arange(8, dtype=float) * 1.5 - 2.0
        mesh = mesh.with_scalar_field("pressure", values)
        path = tmp_path / "pressure.csv"
        save_scalar_field(mesh, "pressure", path)
        back = load_scalar_field(unit_cube(), path, "pressure")
        assert np.array_equal(back.scalar_fields["pressure"], values)

    def test_missing_field_errors(self):
        with pytest.raises(ToolkitError, match="no scalar field"):
            integrate_pressure_force(unit_cube(), "pressure")

    def test_field_length_must_match(self):
        with pytest.raises(ToolkitError):
            unit_cube().with_scalar_field("p", np.zeros(5))


class TestPressureForce:
    def test_single_triangle_hand_value(self):
        # area 0.5 in the z=0 plane, p = 2 everywhere -> p * A * n = (0, 0, 1)
        mesh = TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
        mesh = mesh.with_scalar_field("p", [2.0, 2.0, 2.0])
        result = integrate_pressure_force(mesh, "p")
        np.testing.assert_allclose(result.force, [0.0, 0.0, 1.0], atol=1e-15)
        assert result.resistance == result.force[0]

    def test_closed_sphere_constant_pressure_vanishes_under_refinement(self):
        norms, floors = [], []
        for sub in (2, 3):
            mesh = icosphere(sub)
            mesh = mesh.with_scalar_field("p", np.full(mesh.num_vertices, 100.0))
            f = integrate_pressure_force(mesh, "p").force
            norms.append(np.linalg.norm(f))
            floors.append(1e-12 * 100.0 * mesh.num_triangles)
        h_coarse = max_edge_length(icosphere(2))
        assert norms[0] < 100.0 * h_coarse  # |F| <= C h with C ~ p
        # constant fields cancel exactly in this quadrature, so refinement
        # either reduces |F| or leaves it at the roundoff floor
        assert norms[1] < norms[0] or norms[1] <= floors[1]

    def test_cube_hydrostatic_buoyancy(self):
        # p = -rho g z on the cube below the waterline; the integral of p n dA
        # equals grad(p) V = -rho g V e_z, so the buoyancy magnitude is rho g V
        rho, g = 1000.0, 9.81
        mesh = unit_cube(origin=(0.0, 0.0, -1.0))
        mesh = mesh.with_scalar_field("p", -rho * g * mesh.vertices[:, 2])
        force = integrate_pressure_force(mesh, "p").force
        assert abs(abs(force[2]) - rho * g * 1.0) < 0.01 * rho * g
        assert abs(force[0]) < 1e-9 and abs(force[1]) < 1e-9

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        mesh = icosphere(2)
        p = rng.random(mesh.num_vertices)
        f0 = integrate_pressure_force(mesh.with_scalar_field("p", p), "p").force
        moved = mesh.with_vertices(mesh.vertices + [12.5, -3.0, 44.0])
        f1 = integrate_pressure_force(moved.with_scalar_field("p", p), "p").force
        np.testing.assert_allclose(f1, f0, rtol=1e-9, atol=1e-9 * np.abs(f0).max())

    def test_winding_check(self):
        mesh = unit_cube()
        open_mesh = TriMesh(mesh.vertices, mesh.triangles[:-1])
        open_mesh = open_mesh.with_scalar_field("p", np.zeros(8))
        with pytest.raises(MeshTopologyError):
            integrate_pressure_force(open_mesh, "p", check_winding=True)


class TestEnclosedVolume:
    def test_unit_cube_exact(self):
        assert enclosed_volume(unit_cube()) == 1.0

    def test_inward_cube_sign(self):
        assert enclosed_volume(unit_cube(inward=True)) == -1.0

    def test_icosphere_converges(self):
        exact = 4.0 * np.pi / 3.0
        vol = enclosed_volume(icosphere(3))
        assert abs(vol - exact) < 0.01 * exact

    def test_rotation_invariance(self):
        mesh = icosphere(2, radius=0.8)
        v0 = enclosed_volume(mesh)
        r = rotation_matrix([1.0, 2.0, -0.5], 1.234)
        v1 = enclosed_volume(mesh.with_vertices(mesh.vertices @ r.T))
        assert abs(v1 - v0) <= 1e-10 * abs(v0)

    def test_open_mesh_reports_boundary_edges(self):
        mesh = unit_cube()
        open_mesh = TriMesh(mesh.vertices, mesh.triangles[:-1])
        assert boundary_edge_count(open_mesh) == 3
        with pytest.raises(MeshTopologyError, match="3 boundary"):
            enclosed_volume(open_mesh)


class TestIttc57:
    def test_reference_point(self):
        assert ittc57_friction_coefficient(1e7) == 0.003
        assert ittc57_drag(1e7, density=1000.0, speed=1.0, wetted_area=1.0) == 1.5

    def test_higher_reynolds(self):
        assert ittc57_friction_coefficient(1e8) == pytest.approx(0.075 / 36.0, rel=1e-14)

    def test_low_reynolds_domain_error(self):
        with pytest.raises(DomainError):
            ittc57_friction_coefficient(50.0)

    def test_positivity_guards(self):
        with pytest.raises(DomainError):
            ittc57_drag(1e6, density=-1.0, speed=1.0, wetted_area=1.0)


def test_surface_area_of_cube():
    assert surface_area(unit_cube()) == pytest.approx(6.0, rel=1e-14)

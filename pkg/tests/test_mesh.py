import numpy as np
import pytest

from flbo import fixtures
from flbo.exceptions import MeshError
from flbo.mesh import TriangleMesh, load_mesh, write_obj, write_off


@pytest.mark.parametrize(
    "name, chi",
    [("icosphere2", 2), ("tetrahedron", 2), ("ellipsoid", 2), ("strip", 1), ("square", 1),
     ("disk", 1), ("cylinder", 0)],
)
def test_fixture_topology(name, chi):
    mesh = fixtures.fixture(name)
    assert mesh.euler_characteristic == chi
    assert mesh.is_closed == (chi == 2)


def test_icosphere_counts():
    mesh = fixtures.icosphere(4)
    assert (mesh.n_vertices, mesh.n_faces) == (2562, 5120)
    np.testing.assert_allclose(np.linalg.norm(mesh.vertices, axis=1), 1.0)


def test_unknown_fixture():
    with pytest.raises(MeshError, match="unknown fixture"):
        fixtures.fixture("teapot")


def test_edge_tables():
    mesh = fixtures.two_triangle_square()
    assert mesh.n_edges == 5
    ef = mesh.edge_faces
    assert (ef[:, 1] >= 0).sum() == 1
    assert len(mesh.boundary_edges) == 4
    assert mesh.boundary_vertices.all()


def test_areas_and_angles():
    mesh = fixtures.equilateral_pair()
    np.testing.assert_allclose(mesh.corner_angles, np.pi / 3)
    np.testing.assert_allclose(mesh.face_areas, np.sqrt(3) / 4)
    np.testing.assert_allclose(mesh.corner_angles.sum(axis=1), np.pi)


def test_outward_normals():
    mesh = fixtures.icosphere(2)
    centers = mesh.vertices[mesh.faces].mean(axis=1)
    assert np.all(np.einsum("fi,fi->f", mesh.face_normals, centers) > 0)


def test_components():
    mesh = fixtures.disjoint_union(fixtures.icosphere(0), fixtures.regular_tetrahedron())
    labels = mesh.connected_components
    assert len(np.unique(labels)) == 2


@pytest.mark.parametrize(
    "verts, faces, pattern",
    [
        ([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]], "face 0"),
        ([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 5]], "face 0"),
        ([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 1]], "face 0"),
        ([[0, 0, 0], [1, 0, 0], [0, 1, 0], [5, 5, 5]], [[0, 1, 2]], "vertex 3"),
        ([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], [[0, 1, 2], [0, 1, 3]], "orient"),
        ([[0, 0, np.nan], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]], "finite"),
    ],
)
def test_invalid_meshes(verts, faces, pattern):
    with pytest.raises(MeshError, match=pattern):
        TriangleMesh(np.array(verts, dtype=float), np.array(faces))


def test_non_manifold_edge():
    verts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1]]
    faces = [[0, 1, 2], [1, 0, 3], [0, 1, 4]]
    with pytest.raises(MeshError):
        TriangleMesh(np.array(verts, dtype=float), np.array(faces))


@pytest.mark.parametrize("writer, suffix", [(write_off, ".off"), (write_obj, ".obj")])
def test_round_trip(tmp_path, writer, suffix):
    mesh = fixtures.ellipsoid(2)
    path = tmp_path / f"m{suffix}"
    writer(mesh, path)
    back = load_mesh(path)
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    np.testing.assert_array_equal(back.faces, mesh.faces)


def test_off_quads_and_comments(tmp_path):
    path = tmp_path / "quad.off"
    path.write_text("OFF\n# a unit square\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n")
    mesh = load_mesh(path)
    assert mesh.n_faces == 2
    assert mesh.total_area == pytest.approx(1.0)


def test_obj_slashes_and_negative_indices(tmp_path):
    path = tmp_path / "t.obj"
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf -3/1 -2/1 -1/1\n")
    assert load_mesh(path).n_faces == 1


def test_unsupported_format(tmp_path):
    with pytest.raises(MeshError):
        load_mesh(tmp_path / "x.ply")


def test_rigid_transform_preserves_geometry():
    mesh = fixtures.ellipsoid(2)
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))
    moved = mesh.transformed(q, np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(moved.face_areas, mesh.face_areas, rtol=1e-12)
    np.testing.assert_allclose(moved.corner_angles, mesh.corner_angles, atol=1e-12)

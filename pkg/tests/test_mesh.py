import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import mesh_of
from ddrym.mesh import (
    MeshError,
    PolyMesh,
    generate_cubic_mesh,
    generate_tet_mesh,
    load_polymesh,
    mesh_from_spec,
    orientations,
    save_polymesh,
)

UNIT_CUBE = np.array(list(itertools.product((0.0, 1.0), repeat=3)))
CUBE_FACES = [[0, 1, 3, 2], [4, 6, 7, 5], [0, 4, 5, 1], [2, 3, 7, 6], [0, 2, 6, 4], [1, 5, 7, 3]]


def single_cube():
    return PolyMesh.from_arrays(UNIT_CUBE, CUBE_FACES, [list(range(6))])


@given(st.integers(1, 4))
@settings(max_examples=4, deadline=None)
def test_cubic_counts(n):
    m = mesh_of(f"cubic:{n}")
    assert m.n_vertices == (n + 1) ** 3
    assert m.n_edges == 3 * n * (n + 1) ** 2
    assert m.n_faces == 3 * n * n * (n + 1)
    assert m.n_cells == n**3
    assert len(m.boundary_faces) == 6 * n * n
    assert m.h == pytest.approx(np.sqrt(3) / n)


def test_cubic_examples():
    m2, m4 = mesh_of("cubic:2"), mesh_of("cubic:4")
    assert (m2.n_faces, m2.n_edges) == (36, 54)
    assert (m4.n_cells, len(m4.boundary_faces)) == (64, 96)


def test_tet_single_cube():
    m = mesh_of("tet:1")
    assert m.n_cells == 6
    assert all(len(cf) == 4 for cf in m.cell_faces)
    assert m.cell_volumes.sum() == pytest.approx(1.0, abs=1e-14)
    # faces shared between tetrahedra, recounted from the vertex sets alone
    tri = Counter()
    for verts in m.cell_vertices:
        for drop in itertools.combinations(sorted(verts), 3):
            tri[drop] += 1
    assert sum(1 for c in tri.values() if c == 2) == sum(1 for fc in m.face_cells if len(fc) == 2)
    assert len(tri) == m.n_faces


def test_generators_reject_zero():
    with pytest.raises(ValueError):
        generate_cubic_mesh(0)
    with pytest.raises(ValueError):
        generate_tet_mesh(0)


@pytest.mark.parametrize("spec", ["cubic:1", "cubic:2", "tet:1", "tet:2"])
def test_orientation_invariants(spec):
    m = mesh_of(spec)
    o = orientations(m)
    # omega_TF points away from the cell star point
    for t, cf in enumerate(m.cell_faces):
        s = np.einsum("ij,ij->i", m.face_points[cf] - m.cell_points[t], m.face_normals[cf])
        assert np.array_equal(np.sign(s), o.cell_face[t])
        # closed surface: sum omega_TF |F| n_F = 0
        flux = (o.cell_face[t] * m.face_areas[cf]) @ m.face_normals[cf]
        assert np.allclose(flux, 0.0, atol=1e-14)
    # omega_FE with n_FE = n_F x t_E pointing out of F; sum omega_FE |E| n_FE = 0
    for f, fe in enumerate(m.face_edges):
        nfe = np.cross(m.face_normals[f], m.edge_tangents[fe])
        out = np.einsum("ij,ij->i", nfe, m.edge_midpoints[fe] - m.face_points[f])
        assert np.array_equal(np.sign(out), o.face_edge[f])
        assert np.allclose((o.face_edge[f] * m.edge_lengths[fe]) @ nfe, 0.0, atol=1e-14)
        # det[t_E | n_FE | n_F] = +1 for every edge of the face
        frame = np.stack([m.edge_tangents[fe], nfe, np.broadcast_to(m.face_normals[f], nfe.shape)], axis=1)
        assert np.allclose(np.linalg.det(frame), 1.0)
    assert np.all(o.edge_vertex == [-1, 1])
    # frames: tau1 x tau2 = n_F
    assert np.allclose(np.cross(m.face_frames[:, 0], m.face_frames[:, 1]), m.face_normals)


@pytest.mark.parametrize("spec", ["cubic:2", "tet:1"])
def test_divergence_theorem(spec):
    # int_T div(x) = 3|T| = sum_F omega_TF int_F x . n_F
    m = mesh_of(spec)
    o = m.orientations
    for t, cf in enumerate(m.cell_faces):
        flux = sum(s * m.face_areas[f] * (m.face_centroids[f] @ m.face_normals[f]) for s, f in zip(o.cell_face[t], cf))
        assert flux == pytest.approx(3 * m.cell_volumes[t], rel=1e-13)


def test_geometry_single_cube():
    m = single_cube()
    assert m.n_edges == 12
    assert m.cell_volumes[0] == pytest.approx(1.0)
    assert np.allclose(m.cell_centroids[0], 0.5)
    assert m.cell_diameters[0] == pytest.approx(np.sqrt(3))
    assert np.allclose(m.face_areas, 1.0)
    assert m.regularity() == pytest.approx(0.5 / np.sqrt(3))


@pytest.mark.parametrize("spec", ["cubic:2", "tet:1"])
def test_round_trip(tmp_path, spec):
    m = mesh_of(spec)
    path = tmp_path / "mesh.json"
    save_polymesh(m, path)
    r = load_polymesh(path)
    assert np.array_equal(r.vertices, m.vertices)
    assert all(np.array_equal(a, b) for a, b in zip(r.face_loops, m.face_loops))
    assert all(np.array_equal(a, b) for a, b in zip(r.cell_faces, m.cell_faces))
    assert np.array_equal(r.edges, m.edges)
    assert np.allclose(r.face_normals, m.face_normals)
    assert mesh_from_spec(str(path)).n_cells == m.n_cells


def test_connected_components():
    m = mesh_of("cubic:2")
    assert np.all(m.connected_components() == 0)
    shifted = UNIT_CUBE + [3.0, 0.0, 0.0]
    verts = np.concatenate([UNIT_CUBE, shifted])
    faces = CUBE_FACES + [[v + 8 for v in f] for f in CUBE_FACES]
    two = PolyMesh.from_arrays(verts, faces, [list(range(6)), list(range(6, 12))])
    assert len(set(two.connected_components())) == 2


def test_non_manifold_face():
    with pytest.raises(MeshError, match="non-manifold"):
        m = single_cube()
        PolyMesh.from_arrays(m.vertices, CUBE_FACES, [list(range(6))] * 3)


@pytest.mark.parametrize(
    "faces,cells,match",
    [
        (CUBE_FACES, [[0, 0, 1, 2, 3, 4, 5]], "repeated face"),
        ([[0, 1]] + CUBE_FACES[1:], [list(range(6))], "fewer than 3"),
        ([[0, 1, 3, 3]] + CUBE_FACES[1:], [list(range(6))], "repeated vertex"),
        (CUBE_FACES[:5], [list(range(5))], "not closed|Euler"),
        (CUBE_FACES, [[0, 1, 2, 99]], "out of range"),
        ([[0, 1, 7, 2]] + CUBE_FACES[1:], [list(range(6))], "non-planar"),
    ],
)
def test_invalid_meshes(faces, cells, match):
    with pytest.raises(MeshError, match=match):
        PolyMesh.from_arrays(UNIT_CUBE, faces, cells)


def test_load_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(MeshError, match="parse error"):
        load_polymesh(bad)
    bad.write_text('{"vertices": []}')
    with pytest.raises(MeshError, match="parse error"):
        load_polymesh(bad)


def test_star_point_override():
    fp = single_cube().face_centroids.copy()
    cp = [[0.3, 0.4, 0.6]]
    m = PolyMesh.from_arrays(UNIT_CUBE, CUBE_FACES, [list(range(6))], face_points=fp, cell_points=cp)
    assert np.allclose(m.cell_points[0], cp[0])
    assert m.to_json_dict()["cell_points"] == cp
    with pytest.raises(MeshError, match="star point"):
        PolyMesh.from_arrays(UNIT_CUBE, CUBE_FACES, [list(range(6))], cell_points=[[2.0, 0.5, 0.5]])

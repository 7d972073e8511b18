import numpy as np
import pytest

from pfcip.mesh import MeshError, build_rect_mesh, flip_edge_orientation


def signed_area(mesh, c):
    v = mesh.vertices[mesh.cells[c]]
    a, b = v[1] - v[0], v[2] - v[0]
    return 0.5 * (a[0] * b[1] - a[1] * b[0])


def test_single_square():
    mesh = build_rect_mesh(1.0, 1.0, 1, 1)
    assert len(mesh.vertices) == 4
    assert len(mesh.cells) == 2
    assert len(mesh.edge_vertices) == 5
    assert np.sum(mesh.edge_cells[:, 1] >= 0) == 1  # one interior edge
    assert mesh.h_max == pytest.approx(np.sqrt(2.0), rel=1e-14)


def test_two_by_two_counts_and_euler():
    mesh = build_rect_mesh(1.0, 1.0, 2, 2)
    V, E, C = len(mesh.vertices), len(mesh.edge_vertices), len(mesh.cells)
    assert (V, E, C) == (9, 16, 8)
    assert V - E + (C + 1) == 2


@pytest.mark.parametrize("nx,ny", [(1, 1), (3, 2), (5, 5)])
def test_entity_counts_formula(nx, ny):
    mesh = build_rect_mesh(2.0, 1.0, nx, ny)
    assert len(mesh.vertices) == (nx + 1) * (ny + 1)
    assert len(mesh.cells) == 2 * nx * ny
    assert len(mesh.edge_vertices) == 3 * nx * ny + nx + ny


def test_large_mesh_scaling():
    mesh = build_rect_mesh(32.0, 32.0, 256, 256)
    assert mesh.h_max == pytest.approx((32.0 / 256) * np.sqrt(2.0), rel=1e-13)
    areas = [signed_area(mesh, c) for c in range(0, len(mesh.cells), 997)]
    assert min(areas) > 0
    total = sum(signed_area(mesh, c) for c in range(len(mesh.cells)))
    assert total == pytest.approx(1024.0, rel=1e-12)


def test_cells_ccw_and_area_sum():
    mesh = build_rect_mesh(3.0, 2.0, 4, 3)
    areas = np.array([signed_area(mesh, c) for c in range(len(mesh.cells))])
    assert np.all(areas > 0)
    assert areas.sum() == pytest.approx(6.0, rel=1e-12)


def test_edge_lengths_match_endpoints():
    mesh = build_rect_mesh(2.0, 1.0, 3, 3)
    p = mesh.vertices[mesh.edge_vertices]
    lengths = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
    assert np.allclose(lengths, mesh.edge_lengths, rtol=1e-14)


def test_interior_normals_point_minus_to_plus():
    mesh = build_rect_mesh(1.0, 1.0, 3, 3)
    centroids = mesh.vertices[mesh.cells].mean(axis=1)
    for e in range(len(mesh.edge_vertices)):
        km, kp = mesh.edge_cells[e]
        if kp < 0:
            continue
        d = centroids[kp] - centroids[km]
        assert d @ mesh.edge_normals[e] > 0


def test_boundary_normals_point_outward():
    mesh = build_rect_mesh(2.0, 3.0, 3, 4)
    center = np.array([1.0, 1.5])
    mids = mesh.vertices[mesh.edge_vertices].mean(axis=1)
    for e in range(len(mesh.edge_vertices)):
        if mesh.edge_cells[e, 1] >= 0:
            continue
        assert (mids[e] - center) @ mesh.edge_normals[e] > 0
        assert np.linalg.norm(mesh.edge_normals[e]) == pytest.approx(1.0)


def test_invalid_dimensions_rejected():
    with pytest.raises(MeshError):
        build_rect_mesh(0.0, 1.0, 2, 2)
    with pytest.raises(MeshError):
        build_rect_mesh(1.0, 1.0, 0, 2)
    with pytest.raises(MeshError):
        build_rect_mesh(1.0, -1.0, 2, 2)


def test_flip_twice_is_identity():
    mesh = build_rect_mesh(1.0, 1.0, 2, 2)
    interior = np.flatnonzero(mesh.edge_cells[:, 1] >= 0)
    e = int(interior[0])
    twice = flip_edge_orientation(flip_edge_orientation(mesh, e), e)
    assert np.array_equal(twice.edge_cells, mesh.edge_cells)
    assert np.array_equal(twice.edge_normals, mesh.edge_normals)


def test_flip_swaps_cells_and_negates_normal():
    mesh = build_rect_mesh(1.0, 1.0, 2, 2)
    interior = np.flatnonzero(mesh.edge_cells[:, 1] >= 0)
    e = int(interior[2])
    flipped = flip_edge_orientation(mesh, e)
    assert flipped.edge_cells[e, 0] == mesh.edge_cells[e, 1]
    assert flipped.edge_cells[e, 1] == mesh.edge_cells[e, 0]
    assert np.allclose(flipped.edge_normals[e], -mesh.edge_normals[e])


def test_flip_boundary_edge_rejected():
    mesh = build_rect_mesh(1.0, 1.0, 2, 2)
    boundary = np.flatnonzero(mesh.edge_cells[:, 1] < 0)
    with pytest.raises(MeshError):
        flip_edge_orientation(mesh, int(boundary[0]))


def test_locate_cell_on_centroids():
    mesh = build_rect_mesh(2.0, 1.0, 4, 2)
    centroids = mesh.vertices[mesh.cells].mean(axis=1)
    found = mesh.locate_cell(centroids)
    assert np.array_equal(found, np.arange(len(mesh.cells)))

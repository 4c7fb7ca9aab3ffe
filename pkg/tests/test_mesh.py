import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sldg.mesh import (Mesh, MeshError, bisect, build_crisscross, conformity_errors,
                       is_conforming, mesh_size, read_mesh, refine_uniform, write_mesh)


@pytest.mark.parametrize("n, cells, verts, facets, bfacets", [
    (1, 4, 5, 8, 4),
    (2, 16, 13, 28, 8),
    (3, 36, 25, 60, 12),
])
def test_crisscross_counts(n, cells, verts, facets, bfacets):
    m = build_crisscross(n)
    assert (m.n_cells, m.n_vertices, m.n_facets) == (cells, verts, facets)
    assert m.boundary_facet.sum() == bfacets
    assert is_conforming(m)


def test_crisscross_area_is_exactly_one():
    assert build_crisscross(1).areas().sum() == 1.0


@pytest.mark.parametrize("n", [0, -1, 1.5])
def test_crisscross_rejects_bad_n(n):
    with pytest.raises(MeshError):
        build_crisscross(n)


def test_crisscross_refinement_edge_is_longest():
    m = build_crisscross(3)
    L = m.edge_lengths()
    assert np.allclose(L[np.arange(m.n_cells), m.ref_edge], L.max(axis=1))


def test_facet_normals_point_out_of_first_cell():
    m = build_crisscross(2)
    c = m.centroids()[m.facet_cells[:, 0]]
    mid = m.vertices[m.facet_vertices].mean(axis=1)
    assert np.all(((mid - c) * m.facet_normal).sum(axis=1) > 0)
    assert np.allclose(np.linalg.norm(m.facet_normal, axis=1), 1.0)
    interior = ~m.boundary_facet
    assert np.all(m.facet_cells[interior, 0] < m.facet_cells[interior, 1])


def test_bisect_all_cells_of_crisscross1():
    m = bisect(build_crisscross(1), {0, 1, 2, 3})
    assert m.n_cells == 8
    assert np.all(m.generation == 1)
    assert is_conforming(m)


def test_bisect_empty_marking_is_identity():
    m0 = build_crisscross(2)
    m = bisect(m0, set())
    assert np.array_equal(m.cells, m0.cells)
    assert np.array_equal(m.vertices, m0.vertices)
    assert np.array_equal(m.ref_edge, m0.ref_edge)


def test_bisect_single_boundary_cell():
    # The refinement edge of cell 0 lies on the boundary, so no closure is needed.
    m = bisect(build_crisscross(1), {0})
    assert m.n_cells == 5
    assert not conformity_errors(m)


def test_bisect_interior_edge_triggers_closure():
    m0 = build_crisscross(2)
    # After one uniform step every refinement edge is a diagonal half; marking one
    # cell splits a shared edge and forces its neighbour to follow.
    m1 = refine_uniform(m0, 1)
    m2 = bisect(m1, [0])
    assert m2.n_cells > m1.n_cells + 1
    assert is_conforming(m2)


def test_bisect_rejects_out_of_range():
    m = build_crisscross(1)
    with pytest.raises(MeshError):
        bisect(m, {4})
    with pytest.raises(MeshError):
        bisect(m, [-1])


def test_parent_map_points_to_containing_cell():
    m0 = build_crisscross(2)
    m1 = refine_uniform(m0, 3)
    c = m1.centroids()
    for child, parent in enumerate(m1.parent):
        tri = m0.vertices[m0.cells[parent]]
        lam = np.linalg.solve(np.vstack([tri.T, np.ones(3)]), np.append(c[child], 1.0))
        assert np.all(lam > -1e-12)


def test_two_uniform_bisections_match_crisscross_2n():
    fine = refine_uniform(build_crisscross(2), 2)
    ref = build_crisscross(4)
    assert fine.n_cells == ref.n_cells
    # Compare the cell sets as sets of vertex-coordinate triples.
    a = {tuple(sorted(map(tuple, np.round(m, 12)))) for m in fine.vertices[fine.cells]}
    b = {tuple(sorted(map(tuple, np.round(m, 12)))) for m in ref.vertices[ref.cells]}
    assert a == b


def test_uniform_shape_regularity():
    m = build_crisscross(1)
    a0 = m.min_angles().min()
    for _ in range(12):
        m = refine_uniform(m, 1)
        assert m.min_angles().min() >= 0.9 * a0


@settings(max_examples=40, deadline=None, derandomize=True)
@given(st.lists(st.floats(0.05, 0.6), min_size=1, max_size=6), st.integers(0, 2**31 - 1))
def test_conformity_and_area_after_random_marking(fractions, seed):
    rng = np.random.default_rng(seed)
    m = build_crisscross(1 + seed % 2)
    for frac in fractions:
        k = max(1, int(frac * m.n_cells))
        m = bisect(m, rng.choice(m.n_cells, size=k, replace=False))
        assert conformity_errors(m) == []
        assert abs(m.areas().sum() - 1.0) <= 1e-12
        assert np.all(m.areas() > 0)


def test_conformity_checker_detects_hanging_node():
    # A square split into a triangle plus two triangles sharing a midpoint on the diagonal.
    verts = [[0, 0], [1, 0], [1, 1], [0, 1], [0.5, 0.5]]
    cells = [[0, 1, 2], [0, 4, 3], [4, 2, 3]]
    errs = conformity_errors(Mesh(verts, cells))
    assert any("hanging" in e for e in errs)


def test_conformity_checker_detects_negative_area():
    m = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]])
    assert any("area" in e for e in conformity_errors(m))


def test_mesh_size_examples():
    tri = Mesh([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])
    assert mesh_size(tri).h_cell[0] == pytest.approx(np.sqrt(2))
    assert np.allclose(mesh_size(tri).h_facet, np.sqrt(2))

    # Two cells of diameter 0.5 and 0.25 sharing the segment (0,0)-(0.25,0).
    depth = np.sqrt(0.25 - 0.125**2)
    verts = [[0, 0], [0.25, 0], [0.125, -depth], [0.125, 0.2]]
    m = Mesh(verts, [[0, 2, 1], [0, 1, 3]])
    h = mesh_size(m)
    assert h.h_cell[0] == pytest.approx(0.5)
    assert h.h_cell[1] == pytest.approx(0.25)
    interior = np.flatnonzero(~m.boundary_facet)
    assert len(interior) == 1
    assert h.h_facet[interior[0]] == pytest.approx(0.375)
    bnd0 = np.flatnonzero(m.boundary_facet & (m.facet_cells[:, 0] == 0))
    assert np.allclose(h.h_facet[bnd0], 0.5)


def test_mesh_size_interior_facets_average():
    m = bisect(build_crisscross(2), [0, 5, 9])
    h = mesh_size(m)
    fc = m.facet_cells
    interior = fc[:, 1] >= 0
    assert np.all(h.h_cell > 0)
    assert np.allclose(h.h_facet[interior], 0.5 * (h.h_cell[fc[interior, 0]] + h.h_cell[fc[interior, 1]]))


def test_mesh_is_read_only():
    m = build_crisscross(1)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 3.0


def test_mesh_file_round_trip(tmp_path):
    m = bisect(refine_uniform(build_crisscross(2), 1), [1, 7, 30])
    path = tmp_path / "mesh.txt"
    write_mesh(m, path)
    header = path.read_text().split("\n", 1)[0].split()
    assert header == [str(m.n_vertices), str(m.n_cells), str(m.n_facets)]
    back = read_mesh(path)
    assert np.array_equal(back.vertices, m.vertices)
    assert np.array_equal(back.cells, m.cells)
    assert np.array_equal(back.ref_edge, m.ref_edge)
    assert np.array_equal(back.generation, m.generation)
    assert np.array_equal(back.facet_cells, m.facet_cells)


def test_read_mesh_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("3 1 3\n0 0\n1 zero\n0 1\n0 1 2 0 0\n")
    with pytest.raises(MeshError):
        read_mesh(path)

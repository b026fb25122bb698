"""
Unit tests for uniform mesh generation.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vmspod.errors import InvalidArgumentError
from vmspod.mesh import DIAGONAL_ORIENTATION, build_uniform_mesh, on_boundary


def test_smallest_mesh_counts():
    """Test node, triangle and boundary counts of the nx=2 grid."""
    mesh = build_uniform_mesh(2)
    assert mesh.num_nodes == 9
    assert mesh.num_triangles == 8
    assert len(mesh.boundary_nodes) == 8
    assert 4 not in mesh.boundary_nodes


def test_reference_resolution():
    """Test that nx=100 gives h = 0.01 and 10201 nodes."""
    mesh = build_uniform_mesh(100)
    assert mesh.h == pytest.approx(0.01, abs=1e-15)
    assert mesh.num_nodes == 10201


@given(nx=st.integers(min_value=2, max_value=12))
@settings(max_examples=15, deadline=None)
def test_areas_positive_and_sum_to_one(nx):
    """Test that every triangle is counter-clockwise and the areas tile the square."""
    areas = build_uniform_mesh(nx).signed_areas()
    assert np.all(areas > 0)
    assert abs(areas.sum() - 1.0) <= 1e-14


@given(nx=st.integers(min_value=2, max_value=12))
@settings(max_examples=15, deadline=None)
def test_mesh_is_conforming(nx):
    """Test that interior edges are shared by two triangles and boundary edges by one."""
    mesh = build_uniform_mesh(nx)
    counts = mesh.edge_triangle_counts()
    assert set(np.unique(counts)) == {1, 2}

    edges = mesh.edges
    midpoints = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    outer = on_boundary(midpoints)
    assert np.all(counts[outer] == 1)
    assert np.all(counts[~outer] == 2)
    assert outer.sum() == 4 * nx


def test_boundary_nodes_match_coordinates():
    """Test that boundary_nodes is exactly the set of nodes on x or y in {0, 1}."""
    mesh = build_uniform_mesh(5)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    expected = np.flatnonzero((x == 0) | (x == 1) | (y == 0) | (y == 1))
    np.testing.assert_array_equal(mesh.boundary_nodes, expected)


def test_diagonal_orientation():
    """Test that every cell is split along the lower-left to upper-right diagonal."""
    mesh = build_uniform_mesh(3)
    assert mesh.diagonal == DIAGONAL_ORIENTATION == 'll-ur'
    first_cell = mesh.triangles[:2]
    diagonal = {0, 5}  # nodes (0,0) and (h,h)
    for tri in first_cell:
        assert diagonal <= set(tri.tolist())


def test_refinement_halves_h():
    """Test that doubling nx halves h and scales the counts accordingly."""
    coarse = build_uniform_mesh(4)
    fine = build_uniform_mesh(8)
    assert fine.h == pytest.approx(coarse.h / 2)
    assert fine.num_triangles == 4 * coarse.num_triangles
    assert fine.num_nodes == 81


@pytest.mark.parametrize('nx', [1, 0, -3, 2.5, True, '4'])
def test_invalid_nx(nx):
    """Test that meshes coarser than nx=2 or non-integer nx are rejected."""
    with pytest.raises(InvalidArgumentError):
        build_uniform_mesh(nx)

"""
Uniform triangular meshes of the unit square.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np

from .errors import InvalidArgumentError


logger = logging.getLogger('vmspod.mesh')

# Every grid cell is split along the lower-left to upper-right diagonal.
DIAGONAL_ORIENTATION = 'll-ur'

BOUNDARY_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class TriMesh:
    """
    Conforming triangulation of [0,1]².

    Attributes:
        nodes: (n_nodes, 2) vertex coordinates
        triangles: (n_triangles, 3) counter-clockwise vertex indices
        boundary_nodes: sorted indices of vertices on the boundary
        nx: subdivisions per side
        diagonal: orientation tag of the cell split
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray
    nx: int
    diagonal: str = DIAGONAL_ORIENTATION

    @property
    def h(self) -> float:
        """Mesh size (length of a cell side)."""
        return 1.0 / self.nx

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        """Signed area of every triangle (positive for counter-clockwise)."""
        p0 = self.nodes[self.triangles[:, 0]]
        p1 = self.nodes[self.triangles[:, 1]]
        p2 = self.nodes[self.triangles[:, 2]]
        e1 = p1 - p0
        e2 = p2 - p0
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def _edge_data(self) -> Tuple[np.ndarray, np.ndarray]:
        # Local edge k is opposite local vertex k.
        local = np.array([[1, 2], [2, 0], [0, 1]])
        pairs = np.sort(self.triangles[:, local], axis=2).reshape(-1, 2)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        return edges, inverse.reshape(-1, 3)

    @property
    def edges(self) -> np.ndarray:
        """(n_edges, 2) vertex pairs, lexicographically ordered."""
        return self._edge_data[0]

    @property
    def triangle_edges(self) -> np.ndarray:
        """(n_triangles, 3) global edge index of each local edge."""
        return self._edge_data[1]

    def edge_triangle_counts(self) -> np.ndarray:
        """Number of triangles sharing each edge (1 on the boundary, 2 inside)."""
        return np.bincount(self.triangle_edges.ravel(), minlength=len(self.edges))


def on_boundary(coords: np.ndarray, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """
    Flag points lying on the boundary of the unit square.

    Args:
        coords: (n, 2) point coordinates
        tol: absolute tolerance

    Returns:
        Boolean mask of length n
    """
    near_zero = np.abs(coords) <= tol
    near_one = np.abs(coords - 1.0) <= tol
    return np.any(near_zero | near_one, axis=1)


def build_uniform_mesh(nx: int) -> TriMesh:
    """
    Build a regular (nx+1)×(nx+1) grid on [0,1]² with two triangles per cell.

    Args:
        nx: subdivisions per side (at least 2)

    Returns:
        TriMesh with h = 1/nx
    """
    if isinstance(nx, bool) or not isinstance(nx, (int, np.integer)) or nx < 2:
        raise InvalidArgumentError(f"nx must be an integer >= 2, got {nx!r}")
    nx = int(nx)

    ticks = np.arange(nx + 1) / nx
    xs, ys = np.meshgrid(ticks, ticks)
    nodes = np.column_stack([xs.ravel(), ys.ravel()])

    # node (i, j) -> j*(nx+1) + i
    i, j = np.meshgrid(np.arange(nx), np.arange(nx))
    a = (j * (nx + 1) + i).ravel()
    b = a + 1
    c = a + nx + 2
    d = a + nx + 1
    lower = np.column_stack([a, b, c])
    upper = np.column_stack([a, c, d])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    boundary_nodes = np.flatnonzero(on_boundary(nodes))

    mesh = TriMesh(
        nodes=nodes,
        triangles=triangles.astype(np.int64),
        boundary_nodes=boundary_nodes,
        nx=nx,
    )
    logger.debug(
        f"Built uniform mesh nx={nx}: {mesh.num_nodes} nodes, "
        f"{mesh.num_triangles} triangles"
    )
    return mesh

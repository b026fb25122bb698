"""
Lagrange P1/P2 finite elements on TriMesh: DOF maps, quadrature, assembly of
mass, stiffness, convection and load vectors, and sparse direct solves.

Dirichlet conditions are homogeneous and enforced by restricting every
operator to the free (interior) DOFs.
"""

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as spla

from .errors import FactorizationError, InvalidArgumentError
from .mesh import TriMesh, on_boundary


logger = logging.getLogger('vmspod.fem')

SpaceTimeFunction = Callable[[np.ndarray, np.ndarray, float], np.ndarray]

SUPPORTED_DEGREES = (1, 2)


# Quadrature ==================================================================

@dataclass(frozen=True, eq=False)
class TriangleRule:
    """
    Quadrature rule on the reference triangle.

    Points are barycentric coordinates; weights sum to one, so the physical
    weight of a point on element K is |K| * weight.
    """

    bary: np.ndarray
    weights: np.ndarray
    degree: int
    refine: int = 1

    @property
    def num_points(self) -> int:
        return len(self.weights)


def _symmetric_orbit(a: float) -> np.ndarray:
    b = 1.0 - 2.0 * a
    return np.array([[b, a, a], [a, b, a], [a, a, b]])


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> TriangleRule:
    """
    Symmetric triangle rule exact for polynomials of the given degree.

    Args:
        degree: 2 (3 points) or 4 (6 points)

    Returns:
        TriangleRule
    """
    if degree == 2:
        bary = _symmetric_orbit(1.0 / 6.0)
        weights = np.full(3, 1.0 / 3.0)
    elif degree == 4:
        bary = np.vstack([
            _symmetric_orbit(0.44594849091596488632),
            _symmetric_orbit(0.09157621350977074346),
        ])
        weights = np.concatenate([
            np.full(3, 0.22338158967801146570),
            np.full(3, 0.10995174365532186764),
        ])
        weights = weights / weights.sum()
    else:
        raise InvalidArgumentError(f"No triangle rule of degree {degree}")
    return TriangleRule(bary=bary, weights=weights, degree=degree)


@lru_cache(maxsize=None)
def refined_rule(degree: int, refine: int) -> TriangleRule:
    """
    Composite rule: the reference triangle is split into refine² congruent
    sub-triangles and the base rule is applied on each.
    """
    base = triangle_rule(degree)
    if refine == 1:
        return base
    if refine < 1:
        raise InvalidArgumentError(f"refine must be >= 1, got {refine}")

    # Sub-triangle vertices in barycentric coordinates of the parent.
    def vertex(i: int, j: int) -> np.ndarray:
        xi, eta = i / refine, j / refine
        return np.array([1.0 - xi - eta, xi, eta])

    subs = []
    for j in range(refine):
        for i in range(refine - j):
            subs.append((vertex(i, j), vertex(i + 1, j), vertex(i, j + 1)))
            if i + j < refine - 1:
                subs.append((vertex(i + 1, j), vertex(i + 1, j + 1), vertex(i, j + 1)))

    corners = np.array(subs)                      # (n_sub, 3 vertices, 3 bary)
    bary = np.einsum('qv,svk->sqk', base.bary, corners).reshape(-1, 3)
    weights = np.tile(base.weights, len(subs)) / len(subs)
    return TriangleRule(bary=bary, weights=weights, degree=degree, refine=refine)


def default_rule_degree(element_degree: int) -> int:
    """Rule degree that integrates every mass/stiffness/convection integrand exactly."""
    return 2 if element_degree == 1 else 4


# Reference basis =============================================================

def basis_values(degree: int, bary: np.ndarray) -> np.ndarray:
    """Shape function values, (n_points, n_local)."""
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    if degree == 1:
        return bary.copy()
    return np.column_stack([
        l0 * (2 * l0 - 1),
        l1 * (2 * l1 - 1),
        l2 * (2 * l2 - 1),
        4 * l1 * l2,
        4 * l2 * l0,
        4 * l0 * l1,
    ])


def basis_bary_derivatives(degree: int, bary: np.ndarray) -> np.ndarray:
    """Derivatives of shape functions w.r.t. barycentric coordinates, (n_points, n_local, 3)."""
    n = len(bary)
    if degree == 1:
        return np.broadcast_to(np.eye(3), (n, 3, 3)).copy()

    d = np.zeros((n, 6, 3))
    for k in range(3):
        d[:, k, k] = 4 * bary[:, k] - 1
    # Local edge dofs 3, 4, 5 sit on edges (1,2), (2,0), (0,1).
    for local, (a, b) in zip((3, 4, 5), ((1, 2), (2, 0), (0, 1))):
        d[:, local, a] = 4 * bary[:, b]
        d[:, local, b] = 4 * bary[:, a]
    return d


# Function space ==============================================================

@dataclass(frozen=True, eq=False)
class FESpace:
    """
    Continuous Lagrange space of degree 1 or 2 on a TriMesh.

    Global numbering: vertices first, then (for P2) one DOF per mesh edge in
    the mesh's edge order.
    """

    mesh: TriMesh
    degree: int
    dof_coords: np.ndarray
    dof_map: np.ndarray
    free_dofs: np.ndarray
    boundary_dofs: np.ndarray

    @property
    def num_dofs(self) -> int:
        return len(self.dof_coords)

    @property
    def num_free(self) -> int:
        return len(self.free_dofs)

    @property
    def num_local(self) -> int:
        return self.dof_map.shape[1]

    @property
    def tag(self) -> str:
        """Identity string used to match artifacts to the space they came from."""
        return f"P{self.degree}-nx{self.mesh.nx}-{self.mesh.diagonal}"

    def restrict(self, full: np.ndarray) -> np.ndarray:
        """Free-DOF part of a full coefficient vector (or matrix of column vectors)."""
        return full[self.free_dofs]

    def extend(self, free: np.ndarray) -> np.ndarray:
        """Full coefficient vector with zero Dirichlet values."""
        shape = (self.num_dofs,) + free.shape[1:]
        full = np.zeros(shape, dtype=free.dtype)
        full[self.free_dofs] = free
        return full

    def interpolate(self, func: SpaceTimeFunction, t: float = 0.0) -> np.ndarray:
        """Nodal interpolant of func(·, t) on all DOFs."""
        return np.asarray(
            func(self.dof_coords[:, 0], self.dof_coords[:, 1], t), dtype=float
        ) * np.ones(self.num_dofs)

    @cached_property
    def _table_cache(self) -> Dict[int, 'ElementTables']:
        return {}

    def tables(self, refine: int = 1) -> 'ElementTables':
        """Quadrature tables for this space (cached per refinement level)."""
        if refine not in self._table_cache:
            self._table_cache[refine] = _element_tables(self, refine)
        return self._table_cache[refine]


def build_fespace(mesh: TriMesh, degree: int) -> FESpace:
    """
    Build the DOF maps of the P1 or P2 space on a mesh.

    Args:
        mesh: triangulation
        degree: polynomial degree, 1 or 2

    Returns:
        FESpace
    """
    if degree not in SUPPORTED_DEGREES:
        raise InvalidArgumentError(f"Unsupported element degree {degree!r}; expected 1 or 2")

    if degree == 1:
        dof_map = mesh.triangles.copy()
        dof_coords = mesh.nodes.copy()
    else:
        edges = mesh.edges
        midpoints = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
        dof_map = np.hstack([mesh.triangles, mesh.num_nodes + mesh.triangle_edges])
        dof_coords = np.vstack([mesh.nodes, midpoints])

    mask = on_boundary(dof_coords)
    space = FESpace(
        mesh=mesh,
        degree=degree,
        dof_coords=dof_coords,
        dof_map=dof_map,
        free_dofs=np.flatnonzero(~mask),
        boundary_dofs=np.flatnonzero(mask),
    )
    logger.debug(f"Built {space.tag}: {space.num_dofs} DOFs, {space.num_free} free")
    return space


# Element tables ==============================================================

@dataclass(frozen=True, eq=False)
class ElementTables:
    """
    Per-element quadrature data.

    Attributes:
        rule: quadrature rule on the reference triangle
        phi: (nq, nloc) shape function values
        grads: (nt, nq, nloc, 2) physical shape function gradients
        points: (nt, nq, 2) physical quadrature points
        wdet: (nt, nq) physical quadrature weights
    """

    space: FESpace
    rule: TriangleRule
    phi: np.ndarray
    grads: np.ndarray
    points: np.ndarray
    wdet: np.ndarray

    def values(self, coeffs: np.ndarray) -> np.ndarray:
        """Values of a full-DOF coefficient vector at the quadrature points, (nt, nq)."""
        local = coeffs[self.space.dof_map]
        return local @ self.phi.T

    def gradients(self, coeffs: np.ndarray) -> np.ndarray:
        """Gradients of a full-DOF coefficient vector at the quadrature points, (nt, nq, 2)."""
        local = coeffs[self.space.dof_map]
        return np.einsum('ti,tqid->tqd', local, self.grads)

    def evaluate(self, func: SpaceTimeFunction, t: float) -> np.ndarray:
        """Values of func(·, t) at the quadrature points, (nt, nq)."""
        x = self.points[..., 0]
        y = self.points[..., 1]
        return np.asarray(func(x, y, t), dtype=float) * np.ones_like(x)

    def scatter(self, local: np.ndarray) -> np.ndarray:
        """Sum (nt, nloc) element contributions into a full-DOF vector."""
        return np.bincount(
            self.space.dof_map.ravel(),
            weights=local.ravel(),
            minlength=self.space.num_dofs,
        )


def _element_tables(space: FESpace, refine: int) -> ElementTables:
    mesh = space.mesh
    rule = refined_rule(default_rule_degree(space.degree), refine)

    p = mesh.nodes[mesh.triangles]                  # (nt, 3, 2)
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns are edge vectors
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    area = 0.5 * det

    # Rows of J^{-1} are the gradients of lambda_1 and lambda_2.
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1] / det
    inv[:, 0, 1] = -jac[:, 0, 1] / det
    inv[:, 1, 0] = -jac[:, 1, 0] / det
    inv[:, 1, 1] = jac[:, 0, 0] / det
    grad_bary = np.empty((mesh.num_triangles, 3, 2))
    grad_bary[:, 1] = inv[:, 0]
    grad_bary[:, 2] = inv[:, 1]
    grad_bary[:, 0] = -inv[:, 0] - inv[:, 1]

    phi = basis_values(space.degree, rule.bary)
    dphi = basis_bary_derivatives(space.degree, rule.bary)
    grads = np.einsum('qik,tkd->tqid', dphi, grad_bary)
    points = np.einsum('qk,tkd->tqd', rule.bary, p)
    wdet = area[:, None] * rule.weights[None, :]

    return ElementTables(
        space=space, rule=rule, phi=phi, grads=grads, points=points, wdet=wdet
    )


# Assembly ====================================================================

def _scatter_matrix(space: FESpace, local: np.ndarray, restrict: bool) -> sparse.csr_matrix:
    dof_map = space.dof_map
    nloc = space.num_local
    rows = np.repeat(dof_map, nloc, axis=1).ravel()
    cols = np.tile(dof_map, (1, nloc)).ravel()
    matrix = sparse.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(space.num_dofs, space.num_dofs)
    ).tocsr()
    if restrict:
        free = space.free_dofs
        matrix = matrix[free][:, free]
    matrix.sum_duplicates()
    return matrix.tocsr()


def _symmetrize(matrix: sparse.csr_matrix) -> sparse.csr_matrix:
    return (0.5 * (matrix + matrix.T)).tocsr()


def assemble_mass(space: FESpace, restrict: bool = True) -> sparse.csr_matrix:
    """
    Mass matrix (φ_j, φ_i).

    Args:
        space: FE space
        restrict: drop Dirichlet rows/columns

    Returns:
        Sparse symmetric positive definite matrix
    """
    tab = space.tables()
    local = np.einsum('tq,qi,qj->tij', tab.wdet, tab.phi, tab.phi)
    return _symmetrize(_scatter_matrix(space, local, restrict))


def assemble_stiffness(space: FESpace, restrict: bool = True) -> sparse.csr_matrix:
    """Stiffness matrix (∇φ_j, ∇φ_i)."""
    tab = space.tables()
    local = np.einsum('tq,tqid,tqjd->tij', tab.wdet, tab.grads, tab.grads)
    return _symmetrize(_scatter_matrix(space, local, restrict))


def assemble_convection(space: FESpace, b: Sequence[float], restrict: bool = True) -> sparse.csr_matrix:
    """Convection matrix (b·∇φ_j, φ_i) for a constant field b; row i is the test function."""
    b = np.asarray(b, dtype=float)
    if b.shape != (2,):
        raise InvalidArgumentError(f"b must be a 2-vector, got shape {b.shape}")
    tab = space.tables()
    directional = tab.grads @ b                      # (nt, nq, nloc)
    local = np.einsum('tq,qi,tqj->tij', tab.wdet, tab.phi, directional)
    return _scatter_matrix(space, local, restrict)


def function_moments(
    space: FESpace,
    func: SpaceTimeFunction,
    t: float,
    refine: int = 1,
    restrict: bool = True,
) -> Tuple[np.ndarray, float]:
    """
    Moments (func(·,t), φ_i) and the squared L2 norm of func(·,t), both under
    the same quadrature rule.

    Args:
        space: FE space
        func: vectorised function of (x, y, t)
        t: time
        refine: sub-triangle refinement of the rule
        restrict: keep only free DOFs

    Returns:
        Tuple of (moment vector, squared norm)
    """
    tab = space.tables(refine)
    values = tab.evaluate(func, t)
    weighted = tab.wdet * values
    moments = tab.scatter(weighted @ tab.phi)
    if restrict:
        moments = space.restrict(moments)
    return moments, float(np.sum(weighted * values))


def assemble_load(
    space: FESpace,
    forcing: SpaceTimeFunction,
    t: float,
    refine: int = 1,
    restrict: bool = True,
) -> np.ndarray:
    """Load vector (f(·,t), φ_i)."""
    return function_moments(space, forcing, t, refine=refine, restrict=restrict)[0]


def assemble_loads(
    space: FESpace,
    forcing: SpaceTimeFunction,
    times: Sequence[float],
    refine: int = 1,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Free-DOF load vectors at every time instance, stored column-wise, and the
    quadrature L2 norms of the forcing at the same instances.
    """
    loads = np.empty((space.num_free, len(times)))
    norms = np.empty(len(times))
    for n, t in enumerate(times):
        loads[:, n], norm_sq = function_moments(space, forcing, t, refine=refine)
        norms[n] = np.sqrt(norm_sq)
    return loads, norms


def l2_error(
    space: FESpace,
    coeffs: np.ndarray,
    func: SpaceTimeFunction,
    t: float,
    refine: int = 1,
) -> float:
    """
    ‖func(·,t) − u_h‖_{L2} by element quadrature.

    Args:
        coeffs: full-DOF coefficient vector of u_h
    """
    tab = space.tables(refine)
    diff = tab.evaluate(func, t) - tab.values(coeffs)
    return float(np.sqrt(np.sum(tab.wdet * diff * diff)))


def l2_norm(mass: sparse.spmatrix, coeffs: np.ndarray) -> float:
    """Discrete L2 norm sqrt(cᵀ M c)."""
    return float(np.sqrt(max(coeffs @ (mass @ coeffs), 0.0)))


@dataclass(frozen=True, eq=False)
class FEOperators:
    """Free-DOF mass, stiffness and convection matrices of one space and field b."""

    space: FESpace
    mass: sparse.csr_matrix
    stiffness: sparse.csr_matrix
    convection: sparse.csr_matrix
    b: Tuple[float, float]

    @property
    def dimension(self) -> int:
        return self.mass.shape[0]


def assemble_operators(space: FESpace, b: Sequence[float]) -> FEOperators:
    """Assemble every operator the DNS and the ROMs need."""
    ops = FEOperators(
        space=space,
        mass=assemble_mass(space),
        stiffness=assemble_stiffness(space),
        convection=assemble_convection(space, b),
        b=(float(b[0]), float(b[1])),
    )
    logger.info(
        f"Assembled {space.tag} operators: dimension {ops.dimension}, "
        f"{ops.stiffness.nnz} stiffness nonzeros"
    )
    return ops


# Linear solves ===============================================================

class LinearSolver:
    """
    Sparse LU factorisation reused across right-hand sides.

    Every solve is checked against the residual bound
    ‖Ax − b‖ ≤ rtol·(‖A‖·‖x‖ + ‖b‖).
    """

    def __init__(self, matrix: sparse.spmatrix, rtol: float = 1e-10):
        matrix = sparse.csc_matrix(matrix)
        if matrix.shape[0] != matrix.shape[1]:
            raise InvalidArgumentError(f"Matrix must be square, got {matrix.shape}")
        self.matrix = matrix
        self.rtol = rtol
        self.norm = float(spla.norm(matrix))
        try:
            self._lu = spla.splu(matrix)
        except RuntimeError as e:
            raise FactorizationError(f"Sparse LU failed: {e}") from e

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        x = self._lu.solve(rhs)
        if not np.all(np.isfinite(x)):
            raise FactorizationError("Solve produced non-finite values; matrix is singular")
        residual = np.linalg.norm(self.matrix @ x - rhs)
        bound = self.rtol * (self.norm * np.linalg.norm(x) + np.linalg.norm(rhs))
        if residual > bound:
            raise FactorizationError(
                f"Residual {residual:.3e} exceeds {bound:.3e}; matrix is ill-conditioned"
            )
        return x


def solve_sparse(matrix: sparse.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """Factor and solve a single sparse system."""
    return LinearSolver(matrix).solve(rhs)

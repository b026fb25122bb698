"""
Unit tests for finite element spaces, quadrature, assembly and sparse solves.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import sparse

from vmspod.errors import FactorizationError, InvalidArgumentError
from vmspod.fem import (
    LinearSolver,
    assemble_convection,
    assemble_load,
    assemble_mass,
    assemble_stiffness,
    build_fespace,
    l2_error,
    l2_norm,
    refined_rule,
    solve_sparse,
    triangle_rule,
)
from vmspod.mesh import build_uniform_mesh
from vmspod.problem import ProblemSpec, TanhFrontSolution


def space_of(nx, degree):
    return build_fespace(build_uniform_mesh(nx), degree)


def test_dof_counts_smallest_mesh():
    """Test free DOF counts on the nx=2 grid."""
    assert space_of(2, 1).num_free == 1
    p2 = space_of(2, 2)
    assert p2.num_free == 9
    assert p2.num_dofs == 9 + 16


def test_p2_dof_count_reference_resolution():
    """Test that P2 on nx=100 has (2nx+1)² DOFs."""
    assert space_of(100, 2).num_dofs == 40401


@pytest.mark.parametrize('degree', [1, 2])
def test_free_dofs_are_interior(degree):
    """Test that free DOFs exclude every DOF on the boundary."""
    space = space_of(4, degree)
    coords = space.dof_coords[space.free_dofs]
    assert np.all((coords > 0) & (coords < 1))
    assert space.num_free + len(space.boundary_dofs) == space.num_dofs


def test_unsupported_degree():
    """Test that only P1 and P2 are available."""
    with pytest.raises(InvalidArgumentError):
        space_of(2, 3)


@pytest.mark.parametrize('degree', [2, 4])
def test_rule_weights_sum_to_one(degree):
    """Test base and composite rules on the reference triangle."""
    assert triangle_rule(degree).weights.sum() == pytest.approx(1.0, abs=1e-15)
    composite = refined_rule(degree, 3)
    assert composite.num_points == 9 * triangle_rule(degree).num_points
    assert composite.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(composite.bary.sum(axis=1), 1.0)


@pytest.mark.parametrize('degree', [1, 2])
def test_stiffness_annihilates_constants(degree):
    """Test that the unrestricted stiffness matrix maps the ones vector to zero."""
    space = space_of(5, degree)
    full = assemble_stiffness(space, restrict=False)
    assert np.max(np.abs(full @ np.ones(space.num_dofs))) <= 1e-12


def test_p1_center_entries():
    """Test the single interior mass and unit load entries of P1 on nx=2."""
    space = space_of(2, 1)
    mass = assemble_mass(space)
    assert mass.shape == (1, 1)
    # Six incident triangles of area 1/8: Σ|K|/6 for mass, Σ|K|/3 for the unit load.
    assert mass[0, 0] == pytest.approx(0.125, abs=1e-15)
    load = assemble_load(space, lambda x, y, t: 1.0, 0.0)
    assert load[0] == pytest.approx(0.25, abs=1e-15)


def test_unit_load_is_third_of_support():
    """Test that the P1 load of f ≡ 1 is one third of each node's support area."""
    space = space_of(4, 1)
    load = assemble_load(space, lambda x, y, t: 1.0, 0.0)
    # Every interior node of this mesh has six incident triangles of area 1/32.
    np.testing.assert_allclose(load, 6 * (1 / 32) / 3, rtol=1e-14)


def test_zero_load():
    """Test that zero forcing gives a zero load vector."""
    space = space_of(4, 2)
    assert not np.any(assemble_load(space, lambda x, y, t: 0.0 * x, 0.3))


def test_zero_convection():
    """Test that b = 0 gives a zero convection matrix."""
    convection = assemble_convection(space_of(4, 2), (0.0, 0.0))
    assert abs(convection).max() == 0.0


def test_convection_rejects_bad_field():
    """Test that b must be a 2-vector."""
    with pytest.raises(InvalidArgumentError):
        assemble_convection(space_of(2, 1), (1.0, 2.0, 3.0))


@pytest.mark.parametrize('degree', [1, 2])
def test_mass_stiffness_symmetric_and_mass_spd(degree):
    """Test symmetry of mass and stiffness and definiteness of mass."""
    space = space_of(4, degree)
    mass = assemble_mass(space)
    stiffness = assemble_stiffness(space)
    for matrix in (mass, stiffness):
        assert abs(matrix - matrix.T).max() <= 1e-12 * abs(matrix).max()
    assert np.linalg.eigvalsh(mass.toarray()).min() > 0


def test_convection_skew_on_free_dofs():
    """Test that (b·∇u, u) vanishes for zero boundary values."""
    convection = assemble_convection(space_of(4, 2), (0.5, 0.8))
    assert abs(convection + convection.T).max() <= 1e-13


def test_bilinear_forms_exact_for_quadratics():
    """Test the assembled forms against exact integrals of two global quadratics."""
    space = space_of(3, 2)
    x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
    u = x ** 2 + x * y
    v = y ** 2 - x

    stiffness = assemble_stiffness(space, restrict=False)
    mass = assemble_mass(space, restrict=False)
    convection = assemble_convection(space, (1.0, 2.0), restrict=False)

    # ∫∇u·∇v = −1, ∫uv = −13/72, ∫(b·∇u)v = −2/3 on the unit square
    assert v @ (stiffness @ u) == pytest.approx(-1.0, abs=1e-12)
    assert v @ (mass @ u) == pytest.approx(-13 / 72, abs=1e-12)
    assert v @ (convection @ u) == pytest.approx(-2 / 3, abs=1e-12)


def test_interpolant_of_quadratic_has_zero_error():
    """Test that a P2 space reproduces a global quadratic exactly."""
    space = space_of(3, 2)

    def quad(x, y, t):
        return 1 + x * y - 2 * y ** 2 + t

    coeffs = space.interpolate(quad, t=0.5)
    assert l2_error(space, coeffs, quad, 0.5) <= 1e-12


def _subdivided_load(space, forcing, t, refine):
    # Physical sub-triangles of each element, three-point rule on each.
    nodes = space.mesh.nodes
    base = np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]])
    load = np.zeros(space.num_dofs)
    for tri in space.mesh.triangles:
        p = nodes[tri]
        jac = np.column_stack([p[1] - p[0], p[2] - p[0]])

        def point(i, j):
            return p[0] + jac @ np.array([i / refine, j / refine])

        subs = []
        for j in range(refine):
            for i in range(refine - j):
                subs.append((point(i, j), point(i + 1, j), point(i, j + 1)))
                if i + j < refine - 1:
                    subs.append((point(i + 1, j), point(i + 1, j + 1), point(i, j + 1)))
        for corners in subs:
            corners = np.array(corners)
            e1, e2 = corners[1] - corners[0], corners[2] - corners[0]
            area = 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
            for weights in base:
                q = weights @ corners
                xi, eta = np.linalg.solve(jac, q - p[0])
                hats = np.array([1 - xi - eta, xi, eta])
                load[tri] += area / 3 * forcing(q[0], q[1], t) * hats
    return space.restrict(load)


def test_manufactured_load_matches_subdivided_oracle():
    """Test the composite-rule load against explicit sub-triangle quadrature."""
    space = space_of(4, 1)
    problem = ProblemSpec(epsilon=1e-4, b=(0.5, 0.866), g=1.0, T=1.0, dt=0.1, exact=TanhFrontSolution())
    for refine in (1, 3):
        load = assemble_load(space, problem.forcing, 0.0, refine=refine)
        oracle = _subdivided_load(space, problem.forcing, 0.0, refine)
        np.testing.assert_allclose(load, oracle, rtol=1e-10, atol=1e-12 * np.abs(oracle).max())


def test_composite_rule_agrees_on_polynomials():
    """Test that refinement leaves exactly integrated loads unchanged."""
    space = space_of(3, 2)

    def forcing(x, y, t):
        return x * x - 3 * x * y + y

    coarse = assemble_load(space, forcing, 0.0)
    fine = assemble_load(space, forcing, 0.0, refine=3)
    np.testing.assert_allclose(coarse, fine, rtol=1e-12, atol=1e-15)


def test_l2_norm_matches_quadrature():
    """Test that sqrt(cᵀMc) equals the element quadrature norm of u_h."""
    space = space_of(4, 2)
    coeffs = space.interpolate(lambda x, y, t: np.sin(np.pi * x) * np.sin(np.pi * y))
    mass = assemble_mass(space, restrict=False)
    zero = l2_error(space, coeffs, lambda x, y, t: 0.0 * x, 0.0)
    assert l2_norm(mass, coeffs) == pytest.approx(zero, rel=1e-12)


def test_solve_zero_rhs():
    """Test that a zero right-hand side gives a zero solution."""
    mass = assemble_mass(space_of(4, 1))
    assert not np.any(solve_sparse(3.0 * mass, np.zeros(mass.shape[0])))


@given(seed=st.integers(min_value=0, max_value=2 ** 32 - 1))
@settings(max_examples=25, deadline=None)
def test_random_spd_matches_dense_solve(seed):
    """Test sparse LU against a dense solve on random SPD systems."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((5, 5))
    matrix = a @ a.T + 5 * np.eye(5)
    rhs = rng.standard_normal(5)
    x = solve_sparse(sparse.csr_matrix(matrix), rhs)
    expected = np.linalg.solve(matrix, rhs)
    assert np.max(np.abs(x - expected)) <= 1e-12 * max(1.0, np.max(np.abs(expected)))


def test_factorization_reused(rng):
    """Test that repeated solves with one factorisation match fresh factorisations."""
    space = space_of(4, 2)
    matrix = assemble_mass(space) + 1e-3 * assemble_stiffness(space)
    solver = LinearSolver(matrix)
    for _ in range(3):
        rhs = rng.standard_normal(solver.dimension)
        np.testing.assert_array_equal(solver.solve(rhs), solve_sparse(matrix, rhs))


def test_singular_matrix_raises():
    """Test that a singular matrix fails to factor."""
    singular = sparse.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(FactorizationError):
        solve_sparse(singular, np.array([1.0, 0.0]))


def test_non_square_matrix_raises():
    """Test that only square systems are accepted."""
    with pytest.raises(InvalidArgumentError):
        LinearSolver(sparse.csr_matrix(np.ones((2, 3))))

"""
Proper orthogonal decomposition by the method of snapshots.

The snapshot set is extended with the difference quotients of the states
(or, on request, left as the states alone), the N_s × N_s correlation matrix is formed in the chosen inner product, and the
modes are recombinations of the snapshots that are orthonormal in that inner
product.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as la
from scipy import sparse

from .dns import SnapshotSet
from .errors import EmptyBasisError, InvalidArgumentError
from .fem import FEOperators


logger = logging.getLogger('vmspod.pod')

DEFAULT_RANK_TOL = 1e-12


class InnerProduct(Enum):
    """Inner product the POD modes are orthonormal in."""

    L2 = 'l2'
    H1_FULL = 'h1'          # (u,v) + (∇u,∇v)
    H1_SEMI = 'h1-semi'     # (∇u,∇v)

    @classmethod
    def parse(cls, value: str) -> 'InnerProduct':
        try:
            return cls(value)
        except ValueError:
            choices = ', '.join(ip.value for ip in cls)
            raise InvalidArgumentError(f"Unknown inner product {value!r} (choose from {choices})")


def gram_operator(ops: FEOperators, ip: InnerProduct) -> sparse.csr_matrix:
    """FE matrix of the inner product on free DOFs."""
    if ip is InnerProduct.L2:
        return ops.mass
    if ip is InnerProduct.H1_SEMI:
        return ops.stiffness
    return (ops.mass + ops.stiffness).tocsr()


def build_correlation(
    snapshots: SnapshotSet,
    ip: InnerProduct,
    ops: FEOperators,
    quotients: bool = True,
) -> np.ndarray:
    """
    Correlation matrix K_ij = (1/N_s) (w_j, w_i)_X of the snapshot set.

    Args:
        snapshots: states and difference quotients
        ip: inner product X
        ops: FE operators of the snapshot space
        quotients: include the difference quotients (N_s = 2N+1) or use the
            states alone (N_s = N+1)

    Returns:
        Dense symmetric (N_s, N_s) matrix
    """
    if snapshots.states.shape[1] == 0:
        raise InvalidArgumentError("snapshot set is empty")
    w = snapshots.pod_vectors(quotients)
    count = w.shape[1]
    corr = w.T @ (gram_operator(ops, ip) @ w) / count
    return 0.5 * (corr + corr.T)


@dataclass(frozen=True, eq=False)
class PodBasis:
    """
    Attributes:
        modes: (n_free, d) FE coefficient vectors, X-orthonormal
        eigenvalues: (d,) positive, descending
        inner_product: X
        snapshot_count: N_s
        discarded_energy: sum of the eigenvalues dropped by the rank threshold
        quotients: whether the snapshot set carried the difference quotients
    """

    modes: np.ndarray
    eigenvalues: np.ndarray
    inner_product: InnerProduct
    snapshot_count: int
    discarded_energy: float = 0.0
    quotients: bool = True

    @property
    def rank(self) -> int:
        return len(self.eigenvalues)

    def leading(self, r: int) -> np.ndarray:
        """Φ_r, the first r modes."""
        check_truncation(self, r)
        return self.modes[:, :r]


def check_truncation(basis: PodBasis, r: int, allow_zero: bool = False) -> None:
    low = 0 if allow_zero else 1
    if not low <= r <= basis.rank:
        raise InvalidArgumentError(
            f"truncation level {r} outside [{low}, {basis.rank}] (rank of the snapshot set is {basis.rank})"
        )


def _orthonormalize(modes: np.ndarray, gram: sparse.spmatrix) -> np.ndarray:
    # Cholesky QR in the X inner product, twice; keeps nested spans.
    for _ in range(2):
        g = modes.T @ (gram @ modes)
        chol = la.cholesky(0.5 * (g + g.T), lower=True)
        modes = la.solve_triangular(chol, modes.T, lower=True).T
    return modes


def compute_basis(
    snapshots: SnapshotSet,
    correlation: np.ndarray,
    ops: FEOperators,
    ip: InnerProduct = InnerProduct.H1_FULL,
    tol_rank: float = DEFAULT_RANK_TOL,
    quotients: bool = True,
) -> PodBasis:
    """
    Eigendecompose the correlation matrix and build the modes

        φ_k = (1/√(λ_k N_s)) Σ_j (v_k)_j w_j.

    Eigenpairs with λ_k ≤ tol_rank·λ_1 are discarded. Each mode is signed so
    that its largest-magnitude component is positive. `quotients` must match
    the snapshot set the correlation matrix was built from.

    Returns:
        PodBasis of rank d
    """
    w = snapshots.pod_vectors(quotients)
    if correlation.shape != (w.shape[1], w.shape[1]):
        raise InvalidArgumentError(
            f"correlation matrix of shape {correlation.shape} does not match {w.shape[1]} snapshots"
        )
    eigenvalues, vectors = la.eigh(correlation)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    vectors = vectors[:, order]

    if eigenvalues.size == 0 or eigenvalues[0] <= 0:
        raise EmptyBasisError("snapshot set has no energy; every eigenvalue is zero")
    keep = eigenvalues > tol_rank * eigenvalues[0]
    rank = int(np.count_nonzero(keep))

    count = correlation.shape[0]
    lam = eigenvalues[:rank]
    modes = (w @ vectors[:, :rank]) / np.sqrt(lam * count)
    modes = _orthonormalize(modes, gram_operator(ops, ip))

    pivots = np.argmax(np.abs(modes), axis=0)
    signs = np.sign(modes[pivots, np.arange(rank)])
    signs[signs == 0] = 1.0
    modes = modes * signs

    discarded = float(np.sum(np.clip(eigenvalues[rank:], 0.0, None)))
    logger.info(
        f"POD in {ip.value}: rank {rank} of {count} snapshots, "
        f"lambda_1={lam[0]:.4e}, lambda_d={lam[-1]:.4e}"
    )
    return PodBasis(
        modes=modes,
        eigenvalues=lam,
        inner_product=ip,
        snapshot_count=count,
        discarded_energy=discarded,
        quotients=quotients,
    )


def tail_sum(basis: PodBasis, k: int) -> float:
    """Σ_{j=k+1}^{d} λ_j."""
    check_truncation(basis, k, allow_zero=True)
    return float(np.sum(basis.eigenvalues[k:]))


def energy_fraction(basis: PodBasis, r: int) -> float:
    """Share of the snapshot energy captured by the first r modes."""
    total = tail_sum(basis, 0)
    return 1.0 - tail_sum(basis, r) / total


def projection_error(snapshots: SnapshotSet, basis: PodBasis, r: int, ops: FEOperators) -> float:
    """
    (1/N_s) Σ_i ‖w_i − Σ_{j≤r} (w_i, φ_j)_X φ_j‖_X² over the snapshot set the
    basis was built from, computed directly from the snapshots.
    """
    gram = gram_operator(ops, basis.inner_product)
    w = snapshots.pod_vectors(basis.quotients)
    phi = basis.leading(r)
    residual = w - phi @ (phi.T @ (gram @ w))
    return float(np.sum(residual * (gram @ residual)) / w.shape[1])


@dataclass(frozen=True, eq=False)
class ReducedMatrices:
    """
    Congruence projections Φ_rᵀ (·) Φ_r of the FE operators.

    Attributes:
        mass: M_r, (φ_j, φ_i)
        stiffness: H_r, (∇φ_j, ∇φ_i)
        gram: S_r, (φ_j, φ_i)_{H1}
        convection: (b·∇φ_j, φ_i)
        convection_reaction: B_r = convection + g M_r
    """

    r: int
    mass: np.ndarray
    stiffness: np.ndarray
    gram: np.ndarray
    convection: np.ndarray
    convection_reaction: np.ndarray
    mass_norm: float = field(init=False)
    inverse_mass_norm: float = field(init=False)
    stiffness_norm: float = field(init=False)
    gram_norm: float = field(init=False)
    inverse_gram_norm: float = field(init=False)

    def __post_init__(self):
        # Spectral norms of the small symmetric matrices, used by the POD inverse estimates.
        mass_eigs = la.eigvalsh(self.mass)
        gram_eigs = la.eigvalsh(self.gram)
        object.__setattr__(self, 'mass_norm', float(mass_eigs[-1]))
        object.__setattr__(self, 'inverse_mass_norm', float(1.0 / mass_eigs[0]))
        object.__setattr__(self, 'stiffness_norm', float(la.eigvalsh(self.stiffness)[-1]))
        object.__setattr__(self, 'gram_norm', float(gram_eigs[-1]))
        object.__setattr__(self, 'inverse_gram_norm', float(1.0 / gram_eigs[0]))


@dataclass(frozen=True, eq=False)
class ProjectedOperators:
    """All FE operators projected onto the full d-dimensional POD space."""

    mass: np.ndarray
    stiffness: np.ndarray
    convection: np.ndarray

    @property
    def rank(self) -> int:
        return self.mass.shape[0]

    def truncate(self, r: int, g: float) -> ReducedMatrices:
        """Leading r×r blocks, with the reaction g folded into B_r."""
        if not 1 <= r <= self.rank:
            raise InvalidArgumentError(f"truncation level {r} outside [1, {self.rank}]")
        mass = self.mass[:r, :r].copy()
        stiffness = self.stiffness[:r, :r].copy()
        convection = self.convection[:r, :r].copy()
        return ReducedMatrices(
            r=r,
            mass=mass,
            stiffness=stiffness,
            gram=mass + stiffness,
            convection=convection,
            convection_reaction=convection + g * mass,
        )


def _congruence(modes: np.ndarray, matrix: sparse.spmatrix, symmetric: bool) -> np.ndarray:
    projected = modes.T @ (matrix @ modes)
    return 0.5 * (projected + projected.T) if symmetric else projected


def project_operators(basis: PodBasis, ops: FEOperators) -> ProjectedOperators:
    """Φᵀ M Φ, Φᵀ A Φ and Φᵀ C Φ for all d modes."""
    return ProjectedOperators(
        mass=_congruence(basis.modes, ops.mass, symmetric=True),
        stiffness=_congruence(basis.modes, ops.stiffness, symmetric=True),
        convection=_congruence(basis.modes, ops.convection, symmetric=False),
    )


def reduced_matrices(basis: PodBasis, r: int, ops: FEOperators, g: float) -> ReducedMatrices:
    """
    Reduced mass, stiffness, H1 Gram and convection-reaction matrices of the
    first r modes.
    """
    check_truncation(basis, r)
    phi = basis.modes[:, :r]
    mass = _congruence(phi, ops.mass, symmetric=True)
    stiffness = _congruence(phi, ops.stiffness, symmetric=True)
    convection = _congruence(phi, ops.convection, symmetric=False)
    return ReducedMatrices(
        r=r,
        mass=mass,
        stiffness=stiffness,
        gram=mass + stiffness,
        convection=convection,
        convection_reaction=convection + g * mass,
    )

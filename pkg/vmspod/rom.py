"""
Reduced-order models on a POD basis: plain POD-Galerkin and VMS-POD.

VMS-POD adds the artificial viscosity term α (P'_R ∇u_r, P'_R ∇v_r), where
P'_R is the identity minus the L2 projection onto span{∇φ_1, ..., ∇φ_R}. Only
the scales beyond the first R modes feel it.
"""

import logging
import time
import warnings
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import TYPE_CHECKING, Optional

import numpy as np
import scipy.linalg as la
from scipy import sparse

from .dns import ExactMoments, StabilityMonitor
from .errors import FactorizationError, InvalidArgumentError, RankDeficiencyError
from .fem import FEOperators
from .pod import PodBasis, ProjectedOperators, ReducedMatrices, check_truncation, reduced_matrices

if TYPE_CHECKING:
    from .experiments import ErrorReport


logger = logging.getLogger('vmspod.rom')

# Relative pivot size below which the coarse gradient Gram matrix is rank deficient.
GRAM_RANK_TOL = 1e-12


class ModelKind(Enum):
    POD_G = 'pod-g'
    VMS_POD = 'vms-pod'

    @classmethod
    def parse(cls, value: str) -> 'ModelKind':
        try:
            return cls(value)
        except ValueError:
            choices = ', '.join(kind.value for kind in cls)
            raise InvalidArgumentError(f"Unknown model {value!r} (choose from {choices})")


@dataclass(frozen=True, eq=False)
class VmsTerm:
    """
    Attributes:
        R: number of coarse modes
        matrix: r×r symmetric PSD matrix (P'_R ∇φ_j, P'_R ∇φ_i)
        condition: 2-norm condition number of the coarse gradient Gram block
    """

    R: int
    matrix: np.ndarray
    condition: float = 1.0

    @property
    def r(self) -> int:
        return self.matrix.shape[0]


def _dependent_modes(gram: np.ndarray) -> list:
    # Columns a pivoted QR pushes to the end with negligible pivots.
    _, rfac, perm = la.qr(gram, pivoting=True)
    pivots = np.abs(np.diag(rfac))
    small = pivots <= GRAM_RANK_TOL * pivots[0]
    return sorted(int(k) + 1 for k in perm[small])


def build_vms_term(reduced: ReducedMatrices, R: int) -> VmsTerm:
    """
    Fluctuation viscosity matrix for L^R = span{∇φ_1, ..., ∇φ_R}.

    With G = H[:R,:R] the Gram matrix of the coarse gradients, the L2
    projection of ∇φ_i onto L^R has coefficients G⁻¹ H[:R, i], so

        S = H − H[:, :R] G⁻¹ H[:R, :]

    Rows and columns of the coarse modes vanish identically; only the
    fine-fine Schur complement H22 − H21 G⁻¹ H12 remains.

    Raises:
        InvalidArgumentError: R outside [0, r]
        RankDeficiencyError: the coarse gradients are linearly dependent
    """
    r = reduced.r
    if not 0 <= R <= r:
        raise InvalidArgumentError(f"coarse mode count R={R} outside [0, {r}]")
    stiffness = reduced.stiffness

    if R == 0:
        return VmsTerm(R=0, matrix=stiffness.copy())
    if R == r:
        return VmsTerm(R=R, matrix=np.zeros((r, r)))

    gram = stiffness[:R, :R]
    eigs = la.eigvalsh(gram)
    if eigs[0] <= GRAM_RANK_TOL * eigs[-1]:
        raise RankDeficiencyError(
            f"gradients of the first {R} POD modes are linearly dependent "
            f"(smallest Gram eigenvalue {eigs[0]:.3e})",
            _dependent_modes(gram),
        )
    condition = float(eigs[-1] / eigs[0])
    try:
        factor = la.cho_factor(gram, lower=True)
    except la.LinAlgError as e:
        raise RankDeficiencyError(
            f"coarse gradient Gram matrix of order {R} is not positive definite: {e}",
            _dependent_modes(gram),
        )

    coupling = stiffness[:R, R:]
    schur = stiffness[R:, R:] - coupling.T @ la.cho_solve(factor, coupling)
    matrix = np.zeros((r, r))
    matrix[R:, R:] = 0.5 * (schur + schur.T)

    logger.debug(f"VMS term r={r}, R={R}: coarse gradient Gram condition {condition:.3e}")
    return VmsTerm(R=R, matrix=matrix, condition=condition)


def project(basis: PodBasis, reduced: ReducedMatrices, mass: sparse.spmatrix, u: np.ndarray) -> np.ndarray:
    """
    L2 projection onto X^r in reduced coordinates, M_r⁻¹ Φ_rᵀ M u.

    Args:
        u: FE coefficient vector(s) on free DOFs, shape (n_free,) or (n_free, k)
    """
    phi = basis.leading(reduced.r)
    return la.cho_solve(la.cho_factor(reduced.mass), phi.T @ (mass @ u))


@dataclass(frozen=True, eq=False)
class RomOperators:
    """
    Everything needed to advance a reduced model.

    Attributes:
        reduced: M_r, H_r, S_r, B_r
        vms: fluctuation viscosity term (None for POD-G)
        alpha: artificial viscosity coefficient
        epsilon: diffusion coefficient
        dt: time step of the reduced model (the snapshot spacing)
        projected_loads: r×(N+1), column n is Φ_rᵀ F^n
        a0: projected initial condition
        kind: model kind
    """

    reduced: ReducedMatrices
    vms: Optional[VmsTerm]
    alpha: float
    epsilon: float
    dt: float
    projected_loads: np.ndarray
    a0: np.ndarray
    kind: ModelKind = ModelKind.VMS_POD

    @property
    def r(self) -> int:
        return self.reduced.r

    @property
    def R(self) -> Optional[int]:
        return self.vms.R if self.vms is not None else None

    @property
    def num_steps(self) -> int:
        return self.projected_loads.shape[1] - 1

    @cached_property
    def system_matrix(self) -> np.ndarray:
        """M_r/Δt + εH_r + B_r + α S_vms."""
        reduced = self.reduced
        system = reduced.mass / self.dt + self.epsilon * reduced.stiffness + reduced.convection_reaction
        if self.vms is not None and self.alpha != 0.0:
            system = system + self.alpha * self.vms.matrix
        return system


def build_rom_operators(
    basis: PodBasis,
    r: int,
    R: Optional[int],
    alpha: float,
    loads: np.ndarray,
    u0: np.ndarray,
    ops: FEOperators,
    epsilon: float,
    g: float,
    dt: float,
    kind: ModelKind = ModelKind.VMS_POD,
    projected: Optional[ProjectedOperators] = None,
) -> RomOperators:
    """
    Assemble the reduced operators of one model.

    Args:
        basis: POD basis
        r: number of modes
        R: coarse mode count (ignored for POD-G)
        alpha: artificial viscosity (ignored for POD-G)
        loads: (n_free, N+1) stored FE load vectors
        u0: FE initial condition on free DOFs
        ops: FE operators of the snapshot space
        epsilon, g: PDE coefficients
        dt: reduced time step
        kind: POD-G or VMS-POD
        projected: d×d projections of the FE operators, to slice instead of re-projecting

    Returns:
        RomOperators
    """
    check_truncation(basis, r)
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if loads.shape[0] != basis.modes.shape[0]:
        raise InvalidArgumentError(
            f"load vectors have {loads.shape[0]} rows, the basis has {basis.modes.shape[0]}"
        )

    if projected is not None:
        reduced = projected.truncate(r, g)
    else:
        reduced = reduced_matrices(basis, r, ops, g)

    if kind is ModelKind.VMS_POD:
        if R is None:
            raise InvalidArgumentError("VMS-POD needs a coarse mode count R")
        if alpha < 0 or not np.isfinite(alpha):
            raise InvalidArgumentError(f"alpha must be a non-negative number, got {alpha}")
        vms = build_vms_term(reduced, R)
    else:
        vms = None
        alpha = 0.0

    phi = basis.modes[:, :r]
    return RomOperators(
        reduced=reduced,
        vms=vms,
        alpha=float(alpha),
        epsilon=float(epsilon),
        dt=float(dt),
        projected_loads=phi.T @ loads,
        a0=project(basis, reduced, ops.mass, u0),
        kind=kind,
    )


@dataclass(frozen=True, eq=False)
class RomTrajectory:
    """Reduced coordinates a^0..a^N as columns of an r×(N+1) matrix."""

    coeffs: np.ndarray
    model_kind: ModelKind
    stability: Optional[StabilityMonitor] = None

    @property
    def num_steps(self) -> int:
        return self.coeffs.shape[1] - 1


def _reduced_norm(mass: np.ndarray, a: np.ndarray) -> float:
    return float(np.sqrt(max(a @ (mass @ a), 0.0)))


def rom_solve(ops: RomOperators, load_norms: Optional[np.ndarray] = None) -> RomTrajectory:
    """
    Backward Euler on the reduced system

        (M_r/Δt + εH_r + B_r + α S_vms) a^{n+1} = M_r a^n/Δt + F_r^{n+1},

    with the r×r matrix LU-factored once.

    Args:
        ops: reduced operators
        load_norms: ‖f(t_n)‖ at the same instances as the loads; when given,
            the discrete stability bound is tracked along the trajectory

    Raises:
        FactorizationError: the reduced system matrix is singular
    """
    num_steps = ops.num_steps
    mass = ops.reduced.mass
    with warnings.catch_warnings():
        warnings.simplefilter('error', la.LinAlgWarning)
        try:
            factor = la.lu_factor(ops.system_matrix)
        except (la.LinAlgError, la.LinAlgWarning, ValueError) as e:
            raise FactorizationError(f"reduced system of order {ops.r} cannot be factored: {e}")
    pivots = np.abs(np.diag(factor[0]))
    if not np.all(np.isfinite(pivots)) or pivots.min() == 0.0:
        raise FactorizationError(f"reduced system of order {ops.r} is singular")

    monitor = None
    if load_norms is not None:
        if len(load_norms) != num_steps + 1:
            raise InvalidArgumentError(
                f"{len(load_norms)} load norms for {num_steps + 1} time instances"
            )
        monitor = StabilityMonitor(_reduced_norm(mass, ops.a0), ops.dt, label=ops.kind.value)

    started = time.perf_counter()
    coeffs = np.empty((ops.r, num_steps + 1))
    a = ops.a0.copy()
    coeffs[:, 0] = a
    for n in range(1, num_steps + 1):
        a = la.lu_solve(factor, mass @ a / ops.dt + ops.projected_loads[:, n])
        coeffs[:, n] = a
        if monitor is not None:
            monitor.update(n, _reduced_norm(mass, a), load_norms[n])

    logger.debug(
        f"{ops.kind.value} r={ops.r} R={ops.R} alpha={ops.alpha:.4e}: "
        f"{num_steps} steps in {time.perf_counter() - started:.2f}s"
    )
    return RomTrajectory(coeffs=coeffs, model_kind=ops.kind, stability=monitor)


def reconstruct(basis: PodBasis, trajectory: RomTrajectory, n: int) -> np.ndarray:
    """FE coefficients Φ_r a^n of the reduced solution at instance n."""
    if not 0 <= n <= trajectory.num_steps:
        raise InvalidArgumentError(f"time index {n} outside [0, {trajectory.num_steps}]")
    r = trajectory.coeffs.shape[0]
    return basis.leading(r) @ trajectory.coeffs[:, n]


def rom_errors(trajectory: RomTrajectory, modal_moments: ExactMoments, reduced: ReducedMatrices) -> np.ndarray:
    """L2 error against the exact solution at every instance, from reduced coordinates."""
    return modal_moments.errors(trajectory.coeffs, reduced.mass)


@dataclass(frozen=True, eq=False)
class RomRun:
    """One reduced simulation: its operators, trajectory and per-instance errors."""

    operators: RomOperators
    trajectory: RomTrajectory
    errors: np.ndarray
    report: Optional['ErrorReport'] = None

    @property
    def average_error(self) -> float:
        """(1/(N+1)) Σ_n ‖u(t_n) − u_r^n‖."""
        return float(np.mean(self.errors))


def run_rom(
    ops: RomOperators,
    modal_moments: ExactMoments,
    load_norms: Optional[np.ndarray] = None,
) -> RomRun:
    """Integrate a reduced model and measure it against the exact solution."""
    trajectory = rom_solve(ops, load_norms=load_norms)
    errors = rom_errors(trajectory, modal_moments, ops.reduced)
    if trajectory.stability is not None and not trajectory.stability.ok:
        logger.warning(
            f"{ops.kind.value} r={ops.r}: stability bound violated at "
            f"{len(trajectory.stability.violations)} steps"
        )
    return RomRun(operators=ops, trajectory=trajectory, errors=errors)

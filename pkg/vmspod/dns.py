"""
Backward-Euler "truth" simulation of the full finite element system and
snapshot capture.
"""

import logging
import time
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np
from scipy import sparse

from .errors import InvalidArgumentError, InvalidConfigurationError, StabilityError
from .fem import (
    FEOperators,
    FESpace,
    LinearSolver,
    SpaceTimeFunction,
    assemble_mass,
    assemble_operators,
    build_fespace,
    function_moments,
    l2_norm,
)
from .mesh import build_uniform_mesh
from .problem import ProblemSpec


logger = logging.getLogger('vmspod.dns')


class StabilityMonitor:
    """
    Tracks the discrete stability bound

        ‖u^n‖ ≤ ‖u^0‖ + Δt Σ_{k=1}^{n} ‖f^k‖

    along a trajectory. Violations beyond a relative slack are recorded and
    logged; a strict monitor raises StabilityError on the first one instead.
    `strict=None` follows the class-wide default.
    """

    strict_default = False

    def __init__(
        self,
        initial_norm: float,
        dt: float,
        rtol: float = 1e-10,
        label: str = 'run',
        strict: Optional[bool] = None,
    ):
        self.dt = dt
        self.rtol = rtol
        self.label = label
        self.strict = self.strict_default if strict is None else strict
        self.bound = float(initial_norm)
        self.norms: List[float] = [float(initial_norm)]
        self.bounds: List[float] = [self.bound]
        self.violations: List[int] = []

    def update(self, step: int, norm: float, load_norm: float) -> None:
        self.bound += self.dt * float(load_norm)
        self.norms.append(float(norm))
        self.bounds.append(self.bound)
        if norm > self.bound * (1.0 + self.rtol):
            self.violations.append(step)
            if self.strict:
                raise StabilityError(self.label, step, norm, self.bound)
            logger.warning(
                f"[{self.label}] stability bound violated at step {step}: "
                f"{norm:.6e} > {self.bound:.6e}"
            )

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def max_ratio(self) -> float:
        """Largest ‖u^n‖ / bound_n over the trajectory (≤ 1 when stable)."""
        norms = np.asarray(self.norms)
        bounds = np.asarray(self.bounds)
        mask = bounds > 0
        return float(np.max(norms[mask] / bounds[mask])) if mask.any() else 0.0


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """
    FE coefficient vectors (free DOFs) at the snapshot instances t_0..t_N.

    Attributes:
        states: (n_free, N+1) matrix, column n is u_h(t_n)
        dt: spacing of the snapshot instances
        space_tag: identity of the FE space the states live in
        loads: (n_free, N+1) stored load vectors at the snapshot instances
        load_norms: (N+1,) quadrature L2 norms of the forcing at the same instances
        stability: monitor of the run that produced the states, if any
    """

    states: np.ndarray
    dt: float
    space_tag: str
    loads: np.ndarray
    load_norms: np.ndarray
    stability: Optional[StabilityMonitor] = None

    @cached_property
    def diff_quotients(self) -> np.ndarray:
        """(n_free, N) matrix, column n−1 is (u(t_n) − u(t_{n−1}))/dt."""
        return np.diff(self.states, axis=1) / self.dt

    @property
    def num_steps(self) -> int:
        return self.states.shape[1] - 1

    @property
    def count(self) -> int:
        """Size of the extended snapshot set, 2N+1."""
        return 2 * self.num_steps + 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.num_steps + 1) * self.dt

    def extended(self) -> np.ndarray:
        """States followed by difference quotients, (n_free, 2N+1)."""
        return np.hstack([self.states, self.diff_quotients])

    def pod_vectors(self, quotients: bool = True) -> np.ndarray:
        """The extended set, or the states alone when `quotients` is false."""
        return self.extended() if quotients else self.states


@dataclass(frozen=True, eq=False)
class ExactMoments:
    """
    Moments (u(t_n), ψ_i) and squared norms ‖u(t_n)‖² of an exact solution,
    for some family ψ (FE basis functions, or POD modes after `project`).

    With them ‖u(t_n) − Σ c_i ψ_i‖² = ‖u‖² − 2 cᵀm + cᵀGc for the Gram matrix
    G of ψ, all under one quadrature rule.
    """

    moments: np.ndarray
    norms_sq: np.ndarray

    @classmethod
    def build(
        cls,
        space: FESpace,
        exact: SpaceTimeFunction,
        times: Sequence[float],
        refine: int = 1,
    ) -> 'ExactMoments':
        moments = np.empty((space.num_free, len(times)))
        norms_sq = np.empty(len(times))
        for n, t in enumerate(times):
            moments[:, n], norms_sq[n] = function_moments(space, exact, t, refine=refine)
        return cls(moments=moments, norms_sq=norms_sq)

    def project(self, modes: np.ndarray) -> 'ExactMoments':
        """Moments against the columns of `modes` (FE coefficient vectors)."""
        return ExactMoments(moments=modes.T @ self.moments, norms_sq=self.norms_sq)

    def errors(self, coeffs: np.ndarray, gram) -> np.ndarray:
        """
        L2 error at every instance.

        Args:
            coeffs: (k, N+1) coefficients in the first k members of the family
            gram: (k, k) Gram matrix of those members (sparse or dense)

        Returns:
            (N+1,) array of errors
        """
        k = coeffs.shape[0]
        cross = np.einsum('in,in->n', self.moments[:k], coeffs)
        energy = np.einsum('in,in->n', coeffs, gram @ coeffs)
        return np.sqrt(np.maximum(self.norms_sq - 2.0 * cross + energy, 0.0))


def _check_stride(num_steps: int, stride: int) -> None:
    if stride < 1 or num_steps % stride:
        raise InvalidArgumentError(
            f"snapshot stride {stride} must divide the step count {num_steps}"
        )


def dns_solve(
    problem: ProblemSpec,
    space: FESpace,
    ops: Optional[FEOperators] = None,
    refine: int = 1,
    stride: int = 1,
) -> SnapshotSet:
    """
    Integrate the FE system with backward Euler,

        (M/Δt + εA + C + gM) u^{n+1} = M u^n/Δt + F^{n+1},

    factoring the system matrix once.

    Args:
        problem: PDE data and time grid
        space: FE space
        ops: pre-assembled operators (assembled here when omitted)
        refine: quadrature refinement for the load vectors
        stride: keep every stride-th step as a snapshot

    Returns:
        SnapshotSet on the snapshot grid (spacing stride·Δt)
    """
    num_steps = problem.num_steps
    _check_stride(num_steps, stride)
    if ops is None:
        ops = assemble_operators(space, problem.b)
    dt = problem.dt
    mass = ops.mass

    system = mass / dt + problem.epsilon * ops.stiffness + ops.convection + problem.g * mass
    started = time.perf_counter()
    solver = LinearSolver(system)
    logger.info(f"Factored DNS system of dimension {solver.dimension}")

    u = space.restrict(space.interpolate(problem.initial_condition))
    load, load_norm_sq = function_moments(space, problem.forcing, 0.0, refine=refine)

    kept = num_steps // stride + 1
    states = np.empty((space.num_free, kept))
    loads = np.empty((space.num_free, kept))
    load_norms = np.empty(kept)
    states[:, 0] = u
    loads[:, 0] = load
    load_norms[0] = np.sqrt(load_norm_sq)

    monitor = StabilityMonitor(l2_norm(mass, u), dt, label='dns')
    report_every = max(num_steps // 10, 1)

    for n in range(1, num_steps + 1):
        t = n * dt
        load, load_norm_sq = function_moments(space, problem.forcing, t, refine=refine)
        u = solver.solve(mass @ u / dt + load)
        load_norm = np.sqrt(load_norm_sq)
        monitor.update(n, l2_norm(mass, u), load_norm)

        if n % stride == 0:
            k = n // stride
            states[:, k] = u
            loads[:, k] = load
            load_norms[k] = load_norm

        if n % report_every == 0:
            logger.info(f"DNS step {n}/{num_steps} (t={t:.4f})")

    logger.info(
        f"DNS finished: {num_steps} steps, {kept} snapshots in "
        f"{time.perf_counter() - started:.1f}s"
    )
    if not monitor.ok:
        logger.warning(f"DNS stability bound violated at {len(monitor.violations)} steps")

    return SnapshotSet(
        states=states,
        dt=dt * stride,
        space_tag=space.tag,
        loads=loads,
        load_norms=load_norms,
        stability=monitor,
    )


def average_l2_error(
    snapshots: SnapshotSet,
    space: FESpace,
    exact: SpaceTimeFunction,
    mass: Optional[sparse.spmatrix] = None,
    refine: int = 1,
) -> float:
    """
    (1/(N+1)) Σ_n ‖u(t_n) − u_h^n‖_{L2} over the snapshot instances.
    """
    if snapshots.states.shape[1] == 0:
        raise InvalidArgumentError("snapshot set is empty")
    if snapshots.space_tag != space.tag:
        raise InvalidArgumentError(
            f"snapshots belong to {snapshots.space_tag}, not {space.tag}"
        )
    if mass is None:
        mass = assemble_mass(space)
    moments = ExactMoments.build(space, exact, snapshots.times, refine=refine)
    return float(np.mean(moments.errors(snapshots.states, mass)))


@dataclass(frozen=True)
class ConvergenceResult:
    """Errors of a mesh refinement study and the fitted L2 rate."""

    mesh_sizes: List[float]
    errors: List[float]
    slope: float


def log_log_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Ordinary least-squares slope of log y against log x."""
    if len(x) < 2:
        raise InvalidConfigurationError("a slope needs at least two points")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def convergence_study(
    problem: ProblemSpec,
    nx_values: Sequence[int],
    degree: int = 2,
    refine: int = 2,
) -> ConvergenceResult:
    """
    Manufactured-solution refinement study: average L2 DNS error on each mesh
    and the least-squares rate with respect to h.
    """
    sizes, errors = [], []
    for nx in nx_values:
        space = build_fespace(build_uniform_mesh(nx), degree)
        ops = assemble_operators(space, problem.b)
        snapshots = dns_solve(problem, space, ops=ops, refine=refine)
        error = average_l2_error(snapshots, space, problem.exact, mass=ops.mass, refine=refine)
        logger.info(f"Convergence study nx={nx}: average L2 error {error:.4e}")
        sizes.append(1.0 / nx)
        errors.append(error)
    return ConvergenceResult(mesh_sizes=sizes, errors=errors, slope=log_log_slope(sizes, errors))

"""
Error studies on the travelling-front benchmark.

A Study builds the pipeline (DNS, exact moments, POD, projected operators)
lazily and once; the table runners sweep reduced models over it. Sweep
cells are independent and run concurrently, and every table is assembled
in configuration-key order.
"""

import asyncio
import logging
import math
import time
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from .config import RunConfig
from .dns import (
    ExactMoments,
    SnapshotSet,
    convergence_study,
    dns_solve,
    log_log_slope,
)
from .errors import InvalidArgumentError, InvalidConfigurationError, MismatchedMeshError
from .fem import FEOperators, FESpace, assemble_operators, build_fespace
from .mesh import TriMesh, build_uniform_mesh
from .pod import (
    PodBasis,
    ProjectedOperators,
    ReducedMatrices,
    build_correlation,
    compute_basis,
    energy_fraction,
    project_operators,
    tail_sum,
)
from .problem import ProblemSpec, TanhFrontSolution
from .rom import ModelKind, RomRun, build_rom_operators, reconstruct, run_rom
from .utils import format_seconds, write_csv


logger = logging.getLogger('vmspod.experiments')

REPORT_FIELDS = ('model', 'h', 'm', 'dt', 'N', 'r', 'R', 'epsilon', 'alpha', 'e', 'e1', 'e2', 'e3')

TABLE_FIELDS: Dict[str, Tuple[str, ...]] = {
    'table1': ('r', 'e'),
    'table2': ('R', 'e3', 'e', 'dominant'),
    'table3': ('r', 'R', 'alpha_star', 'e_podg', 'alpha_low', 'e_low', 'e_star', 'alpha_high', 'e_high', 'best'),
    'table4': ('epsilon', 'dns_error', 'podg_error', 'alpha', 'vms_error'),
    'e3_regression': ('log10_e3', 'log10_e'),
    'convergence': ('nx', 'h', 'e'),
    'final_solution': ('x', 'y', 'exact', 'dns', 'podg', 'vms'),
}

# Multipliers of α* compared in the sensitivity table.
ALPHA_SCALES = (('low', 0.01), ('star', 1.0), ('high', 100.0))

# Factor by which the automatic e3-study viscosity puts e3 above e1 and e2.
DOMINANCE_MARGIN = 2.0


@dataclass(frozen=True)
class ReportConfig:
    """Discretization and model parameters an error report was produced with."""

    h: float
    m: int
    dt: float
    N: int
    r: int
    R: Optional[int]
    epsilon: float


@dataclass(frozen=True)
class ErrorReport:
    """
    Average error of a reduced run and the measurable terms of its error bound.

    Attributes:
        e: (1/(N+1)) Σ_n ‖u(t_n) − u_r^n‖
        e1: ‖M_r⁻¹‖^{1/2} h^{m+1}
        e2: ‖M_r⁻¹‖^{1/2} (Σ_{j>r} λ_j)^{1/2}
        e3: α^{1/2} (Σ_{j>R} λ_j)^{1/2}, zero for POD-G
        alpha_used: artificial viscosity of the run
    """

    model: ModelKind
    e: float
    e1: float
    e2: float
    e3: float
    alpha_used: float
    config: ReportConfig

    def row(self) -> Dict[str, Any]:
        c = self.config
        return {
            'model': self.model.value,
            'h': c.h,
            'm': c.m,
            'dt': c.dt,
            'N': c.N,
            'r': c.r,
            'R': c.R,
            'epsilon': c.epsilon,
            'alpha': self.alpha_used,
            'e': self.e,
            'e1': self.e1,
            'e2': self.e2,
            'e3': self.e3,
        }


def error_components(
    basis: PodBasis,
    reduced: ReducedMatrices,
    h: float,
    m: int,
    alpha: float,
    R: Optional[int],
) -> Tuple[float, float, float]:
    """(e1, e2, e3) for r = reduced.r; e3 is zero without a VMS term."""
    scale = math.sqrt(reduced.inverse_mass_norm)
    e1 = scale * h ** (m + 1)
    e2 = scale * math.sqrt(tail_sum(basis, reduced.r))
    e3 = math.sqrt(alpha) * math.sqrt(tail_sum(basis, R)) if R is not None else 0.0
    return e1, e2, e3


def alpha_tilde(h: float, m: int, eigenvalues: Sequence[float], r: int, R: int) -> float:
    """
    Viscosity minimizing the right-hand side of the error bound,

        α̃ = (h^{m+1} + √T_r) / (2h^m + √T_r + √T_R),   T_k = Σ_{j>k} λ_j.

    Raises:
        InvalidArgumentError: unless 0 ≤ R < r ≤ d
        InvalidConfigurationError: the denominator underflows
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if not 0 <= R < r <= lam.size:
        raise InvalidArgumentError(f"alpha selection needs 0 <= R < r <= d, got R={R}, r={r}, d={lam.size}")
    tail_r = math.sqrt(max(float(np.sum(lam[r:])), 0.0))
    tail_R = math.sqrt(max(float(np.sum(lam[R:])), 0.0))
    numerator = h ** (m + 1) + tail_r
    denominator = 2.0 * h ** m + tail_r + tail_R
    if not math.isfinite(denominator) or denominator <= np.finfo(float).tiny:
        raise InvalidConfigurationError(
            f"alpha selection denominator underflows (h={h}, m={m}, T_r={tail_r ** 2}, T_R={tail_R ** 2})"
        )
    return numerator / denominator


def alpha_star(alpha_tilde_value: float, h: float) -> float:
    """Clip the selected viscosity from below: max(α̃, h/2)."""
    if not (alpha_tilde_value > 0 and h > 0):
        raise InvalidArgumentError(f"alpha_tilde and h must be positive, got {alpha_tilde_value}, {h}")
    return max(alpha_tilde_value, h / 2.0)


class Study:
    """
    Lazily built pipeline for one configuration: problem → mesh → space →
    operators → DNS → exact moments → POD → projected operators.

    Archived snapshots and bases can be attached instead of being recomputed.
    """

    def __init__(self, config: RunConfig, epsilon: Optional[float] = None):
        self.config = config
        self.problem: ProblemSpec = config.problem(epsilon)
        self._snapshots: Optional[SnapshotSet] = None
        self._basis: Optional[PodBasis] = None
        self._projected: Optional[ProjectedOperators] = None
        self.timings: Dict[str, float] = {}

    def attach(
        self,
        snapshots: Optional[SnapshotSet] = None,
        basis: Optional[PodBasis] = None,
        projected: Optional[ProjectedOperators] = None,
    ) -> 'Study':
        """Reuse archived artifacts; they must live on this study's FE space."""
        if snapshots is not None:
            if snapshots.space_tag != self.space.tag:
                raise MismatchedMeshError(
                    f"snapshots belong to {snapshots.space_tag}, the study runs on {self.space.tag}"
                )
            self._snapshots = snapshots
        if basis is not None:
            if basis.modes.shape[0] != self.space.num_free:
                raise MismatchedMeshError(
                    f"basis modes have {basis.modes.shape[0]} rows, {self.space.tag} has {self.space.num_free} free DOFs"
                )
            self._basis = basis
            self._projected = projected
        return self

    @cached_property
    def mesh(self) -> TriMesh:
        return build_uniform_mesh(self.config.nx)

    @cached_property
    def space(self) -> FESpace:
        return build_fespace(self.mesh, self.config.degree)

    @cached_property
    def operators(self) -> FEOperators:
        return assemble_operators(self.space, self.problem.b)

    @property
    def snapshots(self) -> SnapshotSet:
        if self._snapshots is None:
            started = time.perf_counter()
            self._snapshots = dns_solve(
                self.problem,
                self.space,
                ops=self.operators,
                refine=self.config.quad_refine,
                stride=self.config.stride,
            )
            self.timings['dns'] = time.perf_counter() - started
            logger.info(f"DNS (eps={self.problem.epsilon:g}) took {format_seconds(self.timings['dns'])}")
        return self._snapshots

    @cached_property
    def exact_moments(self) -> ExactMoments:
        return ExactMoments.build(
            self.space, self.problem.exact, self.snapshots.times, refine=self.config.quad_refine
        )

    @cached_property
    def dns_error(self) -> float:
        """Average L2 error of the DNS against the exact solution."""
        return float(np.mean(self.exact_moments.errors(self.snapshots.states, self.operators.mass)))

    @property
    def basis(self) -> PodBasis:
        if self._basis is None:
            started = time.perf_counter()
            ip = self.config.inner_product_kind
            quotients = self.config.quotients
            correlation = build_correlation(self.snapshots, ip, self.operators, quotients=quotients)
            self._basis = compute_basis(
                self.snapshots, correlation, self.operators,
                ip=ip, tol_rank=self.config.rank_tol, quotients=quotients,
            )
            self.timings['pod'] = time.perf_counter() - started
            logger.info(f"POD took {format_seconds(self.timings['pod'])}")
        return self._basis

    @property
    def projected(self) -> ProjectedOperators:
        if self._projected is None:
            self._projected = project_operators(self.basis, self.operators)
        return self._projected

    @cached_property
    def modal_moments(self) -> ExactMoments:
        return self.exact_moments.project(self.basis.modes)

    @property
    def rank(self) -> int:
        return self.basis.rank

    def prepare(self) -> 'Study':
        """Build every shared piece up front so concurrent cells only read."""
        _ = self.dns_error, self.projected, self.modal_moments
        logger.info(
            f"Study ready: {self.space.tag}, {self.space.num_free} free DOFs, "
            f"N={self.snapshots.num_steps}, POD rank {self.rank}"
        )
        return self

    def reduced(self, r: int) -> ReducedMatrices:
        return self.projected.truncate(r, self.problem.g)

    def select_alpha(self, r: int, R: int) -> float:
        """α* for (r, R) on this study's spectrum."""
        h = self.mesh.h
        tilde = alpha_tilde(h, self.config.degree, self.basis.eigenvalues, r, R)
        return alpha_star(tilde, h)

    def run(self, kind: ModelKind, r: int, R: Optional[int] = None, alpha: float = 0.0) -> RomRun:
        """Integrate one reduced model and attach its error report."""
        snapshots = self.snapshots
        ops = build_rom_operators(
            self.basis,
            r,
            R,
            alpha,
            snapshots.loads,
            snapshots.states[:, 0],
            self.operators,
            epsilon=self.problem.epsilon,
            g=self.problem.g,
            dt=snapshots.dt,
            kind=kind,
            projected=self.projected,
        )
        result = run_rom(ops, self.modal_moments, load_norms=snapshots.load_norms)
        e1, e2, e3 = error_components(self.basis, ops.reduced, self.mesh.h, self.config.degree, ops.alpha, ops.R)
        report = ErrorReport(
            model=kind,
            e=result.average_error,
            e1=e1,
            e2=e2,
            e3=e3,
            alpha_used=ops.alpha,
            config=ReportConfig(
                h=self.mesh.h,
                m=self.config.degree,
                dt=snapshots.dt,
                N=snapshots.num_steps,
                r=r,
                R=ops.R,
                epsilon=self.problem.epsilon,
            ),
        )
        logger.debug(f"{kind.value} r={r} R={ops.R} alpha={ops.alpha:.4e}: e={report.e:.4e}")
        return RomRun(operators=ops, trajectory=result.trajectory, errors=result.errors, report=report)


async def _gather_cells(cells: Dict[Hashable, Callable[[], Any]], concurrency: int) -> List[Tuple[Hashable, Any]]:
    semaphore = asyncio.Semaphore(concurrency)
    loop = asyncio.get_running_loop()

    async def run_cell(key, work):
        async with semaphore:
            return key, await loop.run_in_executor(None, work)

    return await asyncio.gather(*(run_cell(key, work) for key, work in cells.items()))


def run_cells(cells: Dict[Hashable, Callable[[], Any]], concurrency: int = 1) -> Dict[Hashable, Any]:
    """
    Evaluate independent sweep cells, at most `concurrency` at a time.

    Returns:
        Results keyed like `cells`, in ascending key order
    """
    if concurrency <= 1 or len(cells) <= 1:
        results = [(key, work()) for key, work in cells.items()]
    else:
        results = asyncio.run(_gather_cells(cells, concurrency))
    return dict(sorted(results, key=lambda item: item[0]))


def _usable_r(study: Study, r_values: Sequence[int]) -> List[int]:
    usable = [r for r in r_values if 1 <= r <= study.rank]
    for r in r_values:
        if r not in usable:
            logger.warning(f"Skipping r={r}: the snapshot set has rank {study.rank}")
    return usable


def run_table_podg(study: Study, r_values: Sequence[int], concurrency: int = 1) -> List[Dict[str, Any]]:
    """POD-G average error for each r: rows (r, e)."""
    study.prepare()
    cells = {r: (lambda r=r: study.run(ModelKind.POD_G, r)) for r in _usable_r(study, r_values)}
    rows = []
    for r, run in run_cells(cells, concurrency).items():
        rows.append({'r': r, 'e': run.report.e})
        logger.info(
            f"POD-G r={r}: e={run.report.e:.4e} "
            f"(captures {100 * energy_fraction(study.basis, r):.4f}% of the snapshot energy)"
        )
    return rows


@dataclass
class E3Study:
    """
    Rows (R, e3, e, dominant), the fixed e1/e2 and the log-log slope fitted
    over the dominant rows only.
    """

    r: int
    alpha: float
    rows: List[Dict[str, Any]] = field(default_factory=list)
    e1: float = 0.0
    e2: float = 0.0
    slope: float = float('nan')

    @property
    def dominant_rows(self) -> List[Dict[str, Any]]:
        return [row for row in self.rows if row['dominant']]

    def plot_rows(self) -> List[Dict[str, float]]:
        return [
            {'log10_e3': math.log10(row['e3']), 'log10_e': math.log10(row['e'])}
            for row in self.dominant_rows
        ]


def default_e3_rank(study: Study) -> int:
    r = study.config.e3_r or min(60, study.rank - 5)
    if r < 2:
        raise InvalidConfigurationError(f"POD rank {study.rank} is too small for the e3 study")
    return min(r, study.rank)


def dominant_alpha(study: Study, r: int, R_values: Sequence[int], margin: float = DOMINANCE_MARGIN) -> float:
    """
    Smallest α with e3 ≥ margin·max(e1, e2) at every R in R_values.

    e3 falls with R, so the largest R sets the value.
    """
    e1, e2, _ = error_components(study.basis, study.reduced(r), study.mesh.h, study.config.degree, 0.0, None)
    R_max = max(R_values)
    tail = tail_sum(study.basis, R_max)
    if tail <= 0:
        raise InvalidConfigurationError(f"no POD energy beyond R={R_max}; e3 vanishes for every alpha")
    return (margin * max(e1, e2)) ** 2 / tail


def run_e3_study(
    study: Study,
    alpha_fixed: Optional[float],
    R_values: Sequence[int],
    r: Optional[int] = None,
    concurrency: int = 1,
) -> E3Study:
    """
    VMS-POD with fixed α over a range of R, and the least-squares slope of
    log e against log e3 over the rows where e3 dominates e1 and e2.

    Args:
        alpha_fixed: artificial viscosity; None picks dominant_alpha
        R_values: coarse mode counts, those outside [0, r) are dropped
        r: mode count, default_e3_rank when omitted

    Raises:
        InvalidConfigurationError: fewer than three usable R values, or e3
            dominating at fewer than three of them
    """
    study.prepare()
    r = default_e3_rank(study) if r is None else r
    usable = sorted({R for R in R_values if 0 <= R < r})
    if len(usable) < 3:
        raise InvalidConfigurationError(
            f"the e3 regression needs at least 3 values of R below r={r}, got {list(R_values)}"
        )
    alpha = dominant_alpha(study, r, usable) if alpha_fixed is None else alpha_fixed

    e1, e2, _ = error_components(study.basis, study.reduced(r), study.mesh.h, study.config.degree, 0.0, None)
    floor = max(e1, e2)
    dominant = {R: math.sqrt(alpha * tail_sum(study.basis, R)) > floor for R in usable}
    if sum(dominant.values()) < 3:
        needed = dominant_alpha(study, r, usable[:3], margin=1.0)
        raise InvalidConfigurationError(
            f"e3 dominates e1={e1:.3e}, e2={e2:.3e} at {sum(dominant.values())} of R={usable} "
            f"with alpha={alpha:.3e}; alpha above {needed:.3e} is needed"
        )
    for R in usable:
        if not dominant[R]:
            logger.warning(f"R={R}: e3 does not dominate e1={e1:.3e}, e2={e2:.3e}; left out of the fit")

    cells = {R: (lambda R=R: study.run(ModelKind.VMS_POD, r, R, alpha)) for R in usable}
    result = E3Study(r=r, alpha=alpha, e1=e1, e2=e2)
    for R, run in run_cells(cells, concurrency).items():
        result.rows.append({'R': R, 'e3': run.report.e3, 'e': run.report.e, 'dominant': dominant[R]})

    fitted = result.dominant_rows
    result.slope = log_log_slope([row['e3'] for row in fitted], [row['e'] for row in fitted])
    logger.info(
        f"e vs e3 slope at r={r}, alpha={alpha:.3e} over {len(fitted)} dominant rows: {result.slope:.3f}"
    )
    return result


def default_R_values(r: int) -> List[int]:
    """R from 5 to r−5 in steps of 5."""
    return list(range(5, r - 4, 5))


def run_alpha_sensitivity(
    study: Study,
    r_values: Sequence[int],
    R_values: Optional[Sequence[int]] = None,
    concurrency: int = 1,
) -> List[Dict[str, Any]]:
    """
    VMS-POD at 0.01α*, α* and 100α* for every (r, R), with the POD-G error
    as α = 0 control and the name of the best α column.
    """
    study.prepare()
    pairs = []
    for r in _usable_r(study, r_values):
        candidates = default_R_values(r) if R_values is None else [R for R in R_values if 0 <= R < r]
        pairs.extend((r, R) for R in candidates)
    if not pairs:
        raise InvalidConfigurationError(f"no (r, R) pairs with R < r among r={list(r_values)}")

    alphas = {(r, R): study.select_alpha(r, R) for r, R in pairs}
    cells: Dict[Hashable, Callable[[], Any]] = {}
    for r in sorted({r for r, _ in pairs}):
        cells[(r, -1, 'podg')] = lambda r=r: study.run(ModelKind.POD_G, r)
    for (r, R), a_star in alphas.items():
        for label, scale in ALPHA_SCALES:
            cells[(r, R, label)] = (
                lambda r=r, R=R, a=scale * a_star: study.run(ModelKind.VMS_POD, r, R, a)
            )
    results = run_cells(cells, concurrency)

    rows = []
    for r, R in pairs:
        a_star = alphas[(r, R)]
        errors = {label: results[(r, R, label)].report.e for label, _ in ALPHA_SCALES}
        best = min(errors, key=errors.get)
        rows.append({
            'r': r,
            'R': R,
            'alpha_star': a_star,
            'e_podg': results[(r, -1, 'podg')].report.e,
            'alpha_low': 0.01 * a_star,
            'e_low': errors['low'],
            'e_star': errors['star'],
            'alpha_high': 100.0 * a_star,
            'e_high': errors['high'],
            'best': best,
        })
        logger.info(
            f"r={r} R={R} alpha*={a_star:.3e}: e(0.01a*)={errors['low']:.3e} "
            f"e(a*)={errors['star']:.3e} e(100a*)={errors['high']:.3e} best={best}"
        )
    return rows


def _epsilon_row(config: RunConfig, epsilon: float) -> Dict[str, Any]:
    study = Study(config, epsilon=epsilon).prepare()
    podg = study.run(ModelKind.POD_G, config.r)
    alpha = config.alpha_value
    if alpha is None:
        alpha = study.select_alpha(config.r, config.R)
    vms = study.run(ModelKind.VMS_POD, config.r, config.R, alpha)
    logger.info(
        f"eps={epsilon:g}: DNS {study.dns_error:.3e}, POD-G {podg.report.e:.3e}, "
        f"VMS-POD {vms.report.e:.3e} (alpha={alpha:.3e})"
    )
    return {
        'epsilon': epsilon,
        'dns_error': study.dns_error,
        'podg_error': podg.report.e,
        'alpha': alpha,
        'vms_error': vms.report.e,
    }


def run_epsilon_sweep(config: RunConfig, eps_values: Sequence[float], concurrency: int = 1) -> List[Dict[str, Any]]:
    """Full pipeline (DNS, POD, POD-G, VMS-POD) for each diffusion coefficient."""
    cells = {-eps: (lambda eps=eps: _epsilon_row(config, eps)) for eps in eps_values}
    return list(run_cells(cells, concurrency).values())


def run_convergence(config: RunConfig) -> Tuple[List[Dict[str, Any]], float]:
    """Manufactured-solution rate study on the smooth front; rows (nx, h, e) and the slope."""
    problem = ProblemSpec(
        epsilon=config.epsilon,
        b=config.b,
        g=config.g,
        T=config.convergence_T,
        dt=config.convergence_dt,
        exact=TanhFrontSolution(width=config.convergence_width),
    )
    result = convergence_study(problem, config.convergence_nx, degree=config.degree, refine=max(2, config.quad_refine))
    rows = [
        {'nx': nx, 'h': h, 'e': e}
        for nx, h, e in zip(config.convergence_nx, result.mesh_sizes, result.errors)
    ]
    logger.info(f"Observed L2 rate {result.slope:.3f} (expected {config.degree + 1})")
    return rows, result.slope


def run_final_solution(
    study: Study,
    r: int,
    R: int,
    alpha: Optional[float] = None,
) -> List[Dict[str, float]]:
    """
    Exact, DNS, POD-G and VMS-POD fields at the final instance, one row per
    FE degree of freedom (boundary DOFs included).

    Args:
        alpha: VMS-POD viscosity, α* when omitted
    """
    study.prepare()
    alpha = study.select_alpha(r, R) if alpha is None else alpha
    podg = study.run(ModelKind.POD_G, r)
    vms = study.run(ModelKind.VMS_POD, r, R, alpha)

    space = study.space
    n = study.snapshots.num_steps
    t = float(study.snapshots.times[n])
    values = {
        'exact': space.interpolate(study.problem.exact, t),
        'dns': space.extend(study.snapshots.states[:, n]),
        'podg': space.extend(reconstruct(study.basis, podg.trajectory, n)),
        'vms': space.extend(reconstruct(study.basis, vms.trajectory, n)),
    }
    logger.info(
        f"Fields at t={t:g}: POD-G e={podg.report.e:.3e}, VMS-POD e={vms.report.e:.3e} (alpha={alpha:.3e})"
    )
    x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
    return [
        {'x': float(x[i]), 'y': float(y[i]), **{name: float(vector[i]) for name, vector in values.items()}}
        for i in range(space.num_dofs)
    ]


@dataclass
class ExperimentResult:
    """CSV tables an experiment produced, keyed by table name, and headline numbers."""

    name: str
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    summary: Dict[str, float] = field(default_factory=dict)

    def write(self, directory: Path) -> List[Path]:
        written = []
        for table, rows in self.tables.items():
            path = write_csv(directory / f"{table}.csv", TABLE_FIELDS[table], rows)
            logger.info(f"Wrote {path}")
            written.append(path)
        return written


EXPERIMENT_NAMES = ('table1', 'table2', 'table3', 'table4', 'e3-regression', 'convergence', 'final-solution')


def run_experiment(name: str, config: RunConfig, study: Optional[Study] = None) -> ExperimentResult:
    """
    Run one named experiment.

    Args:
        name: one of EXPERIMENT_NAMES
        config: validated run configuration
        study: pipeline to reuse (built from config when omitted)
    """
    if name not in EXPERIMENT_NAMES:
        raise InvalidArgumentError(f"Unknown experiment {name!r} (choose from {', '.join(EXPERIMENT_NAMES)})")
    result = ExperimentResult(name=name)
    concurrency = config.concurrency

    if name == 'table4':
        result.tables['table4'] = run_epsilon_sweep(config, config.eps_values, concurrency)
        return result
    if name == 'convergence':
        rows, slope = run_convergence(config)
        result.tables['convergence'] = rows
        result.summary['slope'] = slope
        return result

    study = study or Study(config)
    if name == 'table1':
        result.tables['table1'] = run_table_podg(study, config.table1_r, concurrency)
    elif name == 'final-solution':
        result.tables['final_solution'] = run_final_solution(study, config.r, config.R, config.alpha_value)
    elif name == 'table3':
        result.tables['table3'] = run_alpha_sensitivity(study, config.table3_r, concurrency=concurrency)
        rows = result.tables['table3']
        result.summary['alpha_star_best_fraction'] = sum(row['best'] == 'star' for row in rows) / len(rows)
    else:
        e3 = run_e3_study(study, config.e3_alpha_value, config.e3_R, concurrency=concurrency)
        result.tables['table2'] = e3.rows
        result.summary.update({
            'r': e3.r, 'alpha': e3.alpha, 'e1': e3.e1, 'e2': e3.e2,
            'dominant_rows': len(e3.dominant_rows), 'slope': e3.slope,
        })
        if name == 'e3-regression':
            result.tables['e3_regression'] = e3.plot_rows()
    return result

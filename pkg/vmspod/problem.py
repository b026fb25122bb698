"""
Convection-diffusion-reaction problems with manufactured exact solutions.

    u_t − ε Δu + b·∇u + g u = f   in Ω = [0,1]², u = 0 on ∂Ω
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Tuple, Union

import numpy as np

from .errors import InvalidArgumentError


logger = logging.getLogger('vmspod.problem')

ArrayLike = Union[float, np.ndarray]

TIME_GRID_TOL = 1e-12


@dataclass(frozen=True)
class TanhFrontSolution:
    """
    Travelling internal layer

        u = A sin(πx) sin(πy) [tanh((x + y − t − c)/w) + 1]

    with A = 0.5, c = 0.5. The layer width w is 0.04 in the reference
    experiments; w = 0.2 gives a smooth solution for convergence studies.
    """

    width: float = 0.04
    amplitude: float = 0.5
    offset: float = 0.5
    name: str = 'tanh-front'

    def _front(self, x: ArrayLike, y: ArrayLike, t: float):
        th = np.tanh((x + y - t - self.offset) / self.width)
        sech2 = 1.0 - th * th
        return th + 1.0, sech2 / self.width, -2.0 * th * sech2 / self.width ** 2

    @staticmethod
    def _envelope(x: ArrayLike, y: ArrayLike):
        sx, sy = np.sin(math.pi * x), np.sin(math.pi * y)
        cx, cy = np.cos(math.pi * x), np.cos(math.pi * y)
        return sx * sy, math.pi * cx * sy, math.pi * sx * cy

    def __call__(self, x: ArrayLike, y: ArrayLike, t: float) -> ArrayLike:
        return self.value(x, y, t)

    def value(self, x: ArrayLike, y: ArrayLike, t: float) -> ArrayLike:
        s, _, _ = self._envelope(x, y)
        q, _, _ = self._front(x, y, t)
        return self.amplitude * s * q

    def gradient(self, x: ArrayLike, y: ArrayLike, t: float) -> Tuple[ArrayLike, ArrayLike]:
        s, sx, sy = self._envelope(x, y)
        q, dq, _ = self._front(x, y, t)
        return (
            self.amplitude * (sx * q + s * dq),
            self.amplitude * (sy * q + s * dq),
        )

    def laplacian(self, x: ArrayLike, y: ArrayLike, t: float) -> ArrayLike:
        s, sx, sy = self._envelope(x, y)
        q, dq, d2q = self._front(x, y, t)
        # Δ(sq) = qΔs + 2∇s·∇q + sΔq, with ∂q/∂x = ∂q/∂y
        return self.amplitude * (
            -2.0 * math.pi ** 2 * s * q
            + 2.0 * (sx + sy) * dq
            + 2.0 * s * d2q
        )

    def time_derivative(self, x: ArrayLike, y: ArrayLike, t: float) -> ArrayLike:
        s, _, _ = self._envelope(x, y)
        _, dq, _ = self._front(x, y, t)
        return -self.amplitude * s * dq


@dataclass(frozen=True)
class ZeroSolution:
    """u ≡ 0 (zero forcing, zero initial condition)."""

    name: str = 'zero'

    @staticmethod
    def _zeros(x: ArrayLike, y: ArrayLike) -> ArrayLike:
        return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    def __call__(self, x: ArrayLike, y: ArrayLike, t: float) -> ArrayLike:
        return self._zeros(x, y)

    def value(self, x: ArrayLike, y: ArrayLike, t: float) -> ArrayLike:
        return self._zeros(x, y)

    def gradient(self, x: ArrayLike, y: ArrayLike, t: float) -> Tuple[ArrayLike, ArrayLike]:
        return self._zeros(x, y), self._zeros(x, y)

    def laplacian(self, x: ArrayLike, y: ArrayLike, t: float) -> ArrayLike:
        return self._zeros(x, y)

    def time_derivative(self, x: ArrayLike, y: ArrayLike, t: float) -> ArrayLike:
        return self._zeros(x, y)


ExactSolution = Union[TanhFrontSolution, ZeroSolution]


def exact_solution_by_name(name: str, width: float = 0.04) -> ExactSolution:
    """Look up an exact solution by its configuration name."""
    if name == 'tanh-front':
        return TanhFrontSolution(width=width)
    if name == 'zero':
        return ZeroSolution()
    raise InvalidArgumentError(f"Unknown exact solution {name!r}")


@dataclass(frozen=True)
class ProblemSpec:
    """
    PDE coefficients, exact solution and time grid.

    Attributes:
        epsilon: diffusion coefficient
        b: constant convection field
        g: reaction coefficient
        T: final time
        dt: time step
        exact: manufactured solution; the forcing is derived from it
    """

    epsilon: float
    b: Tuple[float, float]
    g: float
    T: float
    dt: float
    exact: ExactSolution = field(default_factory=TanhFrontSolution)

    def __post_init__(self):
        object.__setattr__(self, 'b', (float(self.b[0]), float(self.b[1])))
        if self.epsilon < 0:
            raise InvalidArgumentError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.T <= 0 or self.dt <= 0:
            raise InvalidArgumentError(f"T and dt must be positive, got T={self.T}, dt={self.dt}")
        if self.coercivity_margin <= 0:
            logger.warning(
                f"g - div(b)/2 = {self.coercivity_margin} is not positive; "
                f"the stability and error bounds do not apply"
            )

    @property
    def coercivity_margin(self) -> float:
        """g − ½∇·b, which is just g for a constant field."""
        return self.g

    @property
    def num_steps(self) -> int:
        """Number of time steps N with N·dt = T."""
        steps = int(round(self.T / self.dt))
        if steps < 1 or abs(steps * self.dt - self.T) > TIME_GRID_TOL:
            raise InvalidArgumentError(
                f"dt={self.dt} does not divide T={self.T} within {TIME_GRID_TOL}"
            )
        return steps

    @property
    def times(self) -> np.ndarray:
        """t_0..t_N."""
        return np.arange(self.num_steps + 1) * self.dt

    def forcing(self, x: ArrayLike, y: ArrayLike, t: float) -> ArrayLike:
        """f = u_t − εΔu + b·∇u + g u of the exact solution."""
        ux, uy = self.exact.gradient(x, y, t)
        return (
            self.exact.time_derivative(x, y, t)
            - self.epsilon * self.exact.laplacian(x, y, t)
            + self.b[0] * ux
            + self.b[1] * uy
            + self.g * self.exact.value(x, y, t)
        )

    def initial_condition(self, x: ArrayLike, y: ArrayLike, t: float = 0.0) -> ArrayLike:
        return self.exact.value(x, y, 0.0)

    def with_epsilon(self, epsilon: float) -> 'ProblemSpec':
        return replace(self, epsilon=epsilon)


def reference_problem(
    epsilon: float = 1e-4,
    dt: float = 1e-4,
    T: float = 1.0,
    width: float = 0.04,
) -> ProblemSpec:
    """
    The reference benchmark: b = (cos π/3, sin π/3), g = 1, T = 1, with the
    travelling tanh front as exact solution.
    """
    return ProblemSpec(
        epsilon=epsilon,
        b=(math.cos(math.pi / 3), math.sin(math.pi / 3)),
        g=1.0,
        T=T,
        dt=dt,
        exact=TanhFrontSolution(width=width),
    )

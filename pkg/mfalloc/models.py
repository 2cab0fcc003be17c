"""Built-in low/high-fidelity model pairs and synthetic recovery instances.

Burgers: steady viscous Burgers on (-1, 1) with a perturbed left boundary,
coarse (40 interior points) vs. fine (256) grids.
Pendulum: theta_2 time series of a double pendulum, linearized model at
dt = 0.25 vs. nonlinear model at dt = 0.01, both to T = 15.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import linalg as sla

from .bifidelity import Ensemble
from .selectors import random_generator

logger = logging.getLogger(__name__)

BLOWUP_ANGLE = 1e3


class ModelName(str, Enum):
    BURGERS = "burgers"
    PENDULUM = "pendulum"


class Fidelity(str, Enum):
    LOW = "low"
    HIGH = "high"


class SolverFailure(RuntimeError):
    """A flagged solve inside an ensemble build; names the parameter point."""

    def __init__(self, model: str, point: Sequence[float], detail: str):
        formatted = ", ".join(f"{value:.17g}" for value in point)
        super().__init__(f"{model} solve failed at parameter point ({formatted}): {detail}")
        self.model = model
        self.point = tuple(float(value) for value in point)
        self.detail = detail


# ---------------------------------------------------------------------------
# Burgers
# ---------------------------------------------------------------------------


class BurgersSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    viscosity: float = Field(gt=0)
    delta: float = Field(default=0.0, ge=0)
    n_x: int = Field(default=40, ge=8)
    tolerance: float = Field(default=1e-10, gt=0)
    max_steps: int = Field(default=10_000, ge=1)
    cfl: float = Field(default=0.4, gt=0)


@dataclass(frozen=True)
class BurgersSolution:
    x: np.ndarray
    profile: np.ndarray
    converged: bool
    steps: int
    change: float
    residual: float


def _engquist_osher(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    return 0.5 * np.maximum(left, 0.0) ** 2 + 0.5 * np.minimum(right, 0.0) ** 2


def _burgers_residual(u: np.ndarray, nu: float, h: float) -> np.ndarray:
    flux = _engquist_osher(u[:-1], u[1:])
    convection = (flux[1:] - flux[:-1]) / h
    diffusion = nu * (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h**2
    return diffusion - convection


def burgers_steady(spec: BurgersSpec) -> BurgersSolution:
    """March the viscous Burgers equation in pseudo-time to its steady state.

    Conservative upwind (Engquist-Osher) convection and central diffusion on
    ``n_x`` interior points. Steps are linearized backward Euler; the first step
    is the CFL step and later steps grow with the residual decrease, so the
    march ends in Newton iterations on the steady equations.
    """

    n = spec.n_x
    nu = spec.viscosity
    h = 2.0 / (n + 1)
    x = np.linspace(-1.0, 1.0, n + 2)
    left, right = 1.0 + spec.delta, -1.0

    u = left + (right - left) * (x + 1.0) / 2.0
    u[0], u[-1] = left, right
    residual = _burgers_residual(u, nu, h)
    residual_norm = float(np.linalg.norm(residual, np.inf))
    dt = spec.cfl * h / max(float(np.abs(u).max()), 1e-12)
    change = math.inf
    banded = np.zeros((3, n))

    for step in range(1, spec.max_steps + 1):
        interior = u[1:-1]
        lower = np.maximum(u[:-2], 0.0) / h + nu / h**2
        upper = -np.minimum(u[2:], 0.0) / h + nu / h**2
        diagonal = -np.abs(interior) / h - 2.0 * nu / h**2

        banded[0, 1:] = -upper[:-1]
        banded[1, :] = 1.0 / dt - diagonal
        banded[2, :-1] = -lower[1:]
        increment = sla.solve_banded((1, 1), banded, residual)
        if not np.all(np.isfinite(increment)):
            logger.warning("burgers pseudo-time march produced non-finite values at step %d", step)
            break

        trial = u.copy()
        trial[1:-1] += increment
        trial_residual = _burgers_residual(trial, nu, h)
        trial_norm = float(np.linalg.norm(trial_residual, np.inf))
        change = float(np.abs(increment).max())
        if trial_norm > 2.0 * residual_norm and change >= spec.tolerance and dt > spec.cfl * h:
            dt *= 0.25
            continue

        growth = residual_norm / trial_norm if trial_norm > 0 else 10.0
        u, residual, residual_norm = trial, trial_residual, trial_norm
        if change < spec.tolerance:
            return BurgersSolution(x, u, True, step, change, residual_norm)

        # residual decrease drives the step toward Newton
        dt = min(dt * min(max(growth, 2.0), 10.0) if growth > 1.0 else dt * 0.5, 1e12)

    logger.warning(
        "burgers did not converge: nu=%g delta=%g n_x=%d change=%.3g", nu, spec.delta, n, change
    )
    return BurgersSolution(x, u, False, spec.max_steps, change, residual_norm)


def transition_location(solution: BurgersSolution) -> float:
    """Zero crossing of the steady profile (linear interpolation)."""

    u = solution.profile
    crossing = np.flatnonzero((u[:-1] > 0) & (u[1:] <= 0))
    if crossing.size == 0:
        raise ValueError("profile has no zero crossing")
    i = int(crossing[0])
    return float(solution.x[i] + (solution.x[i + 1] - solution.x[i]) * u[i] / (u[i] - u[i + 1]))


# ---------------------------------------------------------------------------
# Double pendulum
# ---------------------------------------------------------------------------


class PendulumSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    m1: float = Field(default=1.0, gt=0)
    m2: float = Field(default=0.5, gt=0)
    l1: float = Field(default=1.0, gt=0)
    l2: float = Field(default=1.0, gt=0)
    g: float = Field(default=9.8, gt=0)
    theta1: float = math.pi / 4
    theta2: float = math.pi / 4
    dt: float = Field(default=1e-2, gt=0)
    horizon: float = Field(default=15.0, gt=0)

    @model_validator(mode="after")
    def _step_fits_horizon(self):
        if self.dt > self.horizon:
            raise ValueError(f"dt={self.dt} exceeds the horizon T={self.horizon}")
        return self

    @property
    def n_samples(self) -> int:
        return int(math.floor(self.horizon / self.dt + 1e-9)) + 1


@dataclass(frozen=True)
class PendulumSolution:
    times: np.ndarray
    series: np.ndarray
    ok: bool
    detail: str = ""


def _nonlinear_rhs(spec: PendulumSpec) -> Callable[[np.ndarray], np.ndarray]:
    m1, m2, l1, l2, g = spec.m1, spec.m2, spec.l1, spec.l2, spec.g

    def rhs(state: np.ndarray) -> np.ndarray:
        th1, th2, w1, w2 = state
        d = th2 - th1
        sin_d, cos_d = math.sin(d), math.cos(d)
        den1 = (m1 + m2) * l1 - m2 * l1 * cos_d**2
        den2 = (l2 / l1) * den1
        dw1 = (
            m2 * l1 * w1**2 * sin_d * cos_d
            + m2 * g * math.sin(th2) * cos_d
            + m2 * l2 * w2**2 * sin_d
            - (m1 + m2) * g * math.sin(th1)
        ) / den1
        dw2 = (
            -m2 * l2 * w2**2 * sin_d * cos_d
            + (m1 + m2) * (g * math.sin(th1) * cos_d - l1 * w1**2 * sin_d - g * math.sin(th2))
        ) / den2
        return np.array([w1, w2, dw1, dw2])

    return rhs


def linear_system(spec: PendulumSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Mass and stiffness matrices of the small-angle double pendulum."""

    m1, m2, l1, l2, g = spec.m1, spec.m2, spec.l1, spec.l2, spec.g
    mass = np.array([[(m1 + m2) * l1**2, m2 * l1 * l2], [m2 * l1 * l2, m2 * l2**2]])
    stiffness = np.diag([(m1 + m2) * g * l1, m2 * g * l2])
    return mass, stiffness


def linear_energy(spec: PendulumSpec, state: np.ndarray) -> float:
    mass, stiffness = linear_system(spec)
    theta, omega = np.asarray(state[:2]), np.asarray(state[2:])
    return float(0.5 * omega @ mass @ omega + 0.5 * theta @ stiffness @ theta)


def _linear_rhs(spec: PendulumSpec) -> Callable[[np.ndarray], np.ndarray]:
    mass, stiffness = linear_system(spec)
    acceleration = -np.linalg.solve(mass, stiffness)

    def rhs(state: np.ndarray) -> np.ndarray:
        return np.concatenate([state[2:], acceleration @ state[:2]])

    return rhs


def rk4_integrate(rhs: Callable[[np.ndarray], np.ndarray], state0, dt: float, steps: int) -> np.ndarray:
    """Classical four-stage Runge-Kutta; returns the trajectory including ``state0``."""

    trajectory = np.empty((steps + 1, len(state0)))
    state = np.asarray(state0, dtype=np.float64)
    trajectory[0] = state
    for i in range(steps):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * dt * k1)
        k3 = rhs(state + 0.5 * dt * k2)
        k4 = rhs(state + dt * k3)
        state = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        trajectory[i + 1] = state
        if not np.all(np.isfinite(state[:2])) or np.abs(state[:2]).max() > BLOWUP_ANGLE:
            trajectory[i + 2 :] = np.nan
            break
    return trajectory


def pendulum_trajectory(spec: PendulumSpec, fidelity: str = "nonlinear") -> np.ndarray:
    if fidelity == "nonlinear":
        rhs = _nonlinear_rhs(spec)
    elif fidelity == "linear":
        rhs = _linear_rhs(spec)
    else:
        raise ValueError(f"pendulum fidelity must be 'nonlinear' or 'linear', got {fidelity!r}")
    state0 = np.array([spec.theta1, spec.theta2, 0.0, 0.0])
    return rk4_integrate(rhs, state0, spec.dt, spec.n_samples - 1)


def pendulum_series(spec: PendulumSpec, fidelity: str = "nonlinear") -> PendulumSolution:
    """theta_2 sampled every ``dt`` from 0 to ``horizon``; blow-up is flagged."""

    trajectory = pendulum_trajectory(spec, fidelity)
    series = trajectory[:, 1]
    times = spec.dt * np.arange(spec.n_samples)
    if not np.all(np.isfinite(series)) or np.abs(trajectory[:, :2]).max() > BLOWUP_ANGLE:
        return PendulumSolution(times, series, False, f"angle exceeded {BLOWUP_ANGLE:g} rad")
    return PendulumSolution(times, series, True)


# ---------------------------------------------------------------------------
# Parameter grids and ensembles
# ---------------------------------------------------------------------------


class GridAxis(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    low: float
    high: float
    count: int = Field(ge=1)

    @model_validator(mode="after")
    def _ordered(self):
        if self.high < self.low:
            raise ValueError(f"axis {self.name}: high {self.high} is below low {self.low}")
        return self

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.low])
        return np.linspace(self.low, self.high, self.count)


class ParameterGrid(BaseModel):
    """Tensor grid with inclusive endpoints, enumerated row-major (last axis fastest)."""

    model_config = ConfigDict(frozen=True)

    axes: Tuple[GridAxis, ...]

    @property
    def size(self) -> int:
        return math.prod(axis.count for axis in self.axes)

    def points(self) -> np.ndarray:
        values = [axis.values() for axis in self.axes]
        return np.array(list(itertools.product(*values)), dtype=np.float64).reshape(self.size, len(self.axes))


def burgers_grid(n_delta: int = 20, n_viscosity: int = 20) -> ParameterGrid:
    return ParameterGrid(
        axes=(
            GridAxis(name="delta", low=0.0, high=0.1, count=n_delta),
            GridAxis(name="viscosity", low=0.1, high=1.0, count=n_viscosity),
        )
    )


def pendulum_grid(n_m2: int = 20, n_l2: int = 20) -> ParameterGrid:
    return ParameterGrid(
        axes=(
            GridAxis(name="m2", low=0.25, high=0.75, count=n_m2),
            GridAxis(name="l2", low=0.25, high=4.0, count=n_l2),
        )
    )


DEFAULT_GRIDS: Dict[ModelName, Callable[[], ParameterGrid]] = {
    ModelName.BURGERS: burgers_grid,
    ModelName.PENDULUM: pendulum_grid,
}

BURGERS_RESOLUTION = {Fidelity.LOW: 40, Fidelity.HIGH: 256}
PENDULUM_SETTINGS = {Fidelity.LOW: ("linear", 0.25), Fidelity.HIGH: ("nonlinear", 1e-2)}


def _burgers_column(point: np.ndarray, fidelity: Fidelity) -> Tuple[np.ndarray, bool, str]:
    delta, viscosity = point
    solution = burgers_steady(
        BurgersSpec(viscosity=viscosity, delta=delta, n_x=BURGERS_RESOLUTION[fidelity])
    )
    detail = "" if solution.converged else f"no convergence after {solution.steps} steps (change {solution.change:.3g})"
    return solution.profile, solution.converged, detail


def _pendulum_column(point: np.ndarray, fidelity: Fidelity) -> Tuple[np.ndarray, bool, str]:
    m2, l2 = point
    kind, dt = PENDULUM_SETTINGS[fidelity]
    solution = pendulum_series(PendulumSpec(m2=m2, l2=l2, dt=dt), kind)
    return solution.series, solution.ok, solution.detail


_SOLVERS = {
    ModelName.BURGERS: _burgers_column,
    ModelName.PENDULUM: _pendulum_column,
}


def build_ensemble(model, grid: Optional[ParameterGrid], fidelity, workers: int = 1) -> Ensemble:
    """Evaluate ``model`` at every grid point; column ``j`` is grid point ``j``."""

    model = ModelName(model)
    fidelity = Fidelity(fidelity)
    grid = grid if grid is not None else DEFAULT_GRIDS[model]()
    if len(grid.axes) != 2:
        raise ValueError(f"{model.value} takes 2 parameters, grid has {len(grid.axes)} axes")

    points = grid.points()
    solver = _SOLVERS[model]

    def solve(point: np.ndarray) -> np.ndarray:
        column, ok, detail = solver(point, fidelity)
        if not ok:
            raise SolverFailure(model.value, point, detail)
        return column

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            columns = list(executor.map(solve, points))
    else:
        columns = [solve(point) for point in points]

    logger.info("built %s/%s ensemble: %d columns", model.value, fidelity.value, len(columns))
    return Ensemble(
        snapshots=np.column_stack(columns),
        parameters=points,
        fidelity_label=fidelity.value,
        model_id=model.value,
    )


# ---------------------------------------------------------------------------
# Synthetic recovery instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RecoveryInstance:
    matrix: np.ndarray
    basis: Tuple[int, ...]
    expansion: np.ndarray

    def __iter__(self):
        return iter((self.matrix, list(self.basis), self.expansion))


def synthetic_recovery_instance(
    d: int,
    basis_size: int,
    n: int,
    coeff_bound: float,
    noise_sigma: float = 0.0,
    seed: int = 0,
    min_eigenvalue: float = 0.1,
    max_attempts: int = 100,
) -> RecoveryInstance:
    """Matrix whose non-basis columns are sparse-mass combinations of planted basis columns.

    Returns ``(A, S_g, D)``: basis columns are unit norm and well conditioned,
    non-basis column ``j`` is ``A_Sg @ D[:, j] + noise`` with ``||D[:, j]||_1 <= coeff_bound``.
    ``D`` lists the non-basis columns in increasing index order. Non-basis columns
    are not renormalized.
    """

    if not 1 <= basis_size <= d:
        raise ValueError(f"basis_size must satisfy 1 <= basis_size <= d={d}, got {basis_size}")
    if n < basis_size:
        raise ValueError(f"n={n} is smaller than basis_size={basis_size}")
    if not 0.0 < coeff_bound < 1.0:
        raise ValueError(f"coeff_bound must lie in (0, 1), got {coeff_bound}")
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be non-negative, got {noise_sigma}")

    rng = random_generator(seed)
    for attempt in range(1, max_attempts + 1):
        basis = rng.standard_normal((d, basis_size))
        basis /= np.linalg.norm(basis, axis=0)
        if float(sla.eigvalsh(basis.T @ basis)[0]) >= min_eigenvalue:
            break
    else:
        raise ValueError(f"no basis with smallest Gram eigenvalue >= {min_eigenvalue} in {max_attempts} attempts")
    logger.debug("synthetic basis accepted after %d attempt(s)", attempt)

    planted = np.sort(rng.choice(n, size=basis_size, replace=False))
    others = np.setdiff1d(np.arange(n), planted)

    weights = rng.uniform(-1.0, 1.0, size=(basis_size, others.size))
    mass = rng.uniform(0.5 * coeff_bound, coeff_bound, size=others.size)
    expansion = weights / np.abs(weights).sum(axis=0) * mass

    A = np.empty((d, n))
    A[:, planted] = basis
    A[:, others] = basis @ expansion
    if noise_sigma > 0:
        A[:, others] += noise_sigma * rng.standard_normal((d, others.size))
    return RecoveryInstance(A, tuple(int(i) for i in planted), expansion)

"""Least-squares position solving shared by the radar and emitter chains.

Residuals are worked in meters (delays times c) so the normal equations stay well scaled; fixes
report their residual back in seconds.
"""
import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from uavtwin.exceptions import DegenerateGeometryException
from uavtwin.scene import C, Position3

LOG = logging.getLogger('solver')

CONDITION_LIMIT = 1e10
MAX_DAMPING = 1e12


@dataclass(frozen=True)
class PositionFix:
    """Solved position; `error` is position minus ground truth once known."""
    position: Position3
    residual_norm: float
    iterations: int
    timestamp: float = 0.0
    converged: bool = True
    error: Optional[Tuple[float, float, float]] = None

    def with_truth(self, truth: npt.ArrayLike) -> 'PositionFix':
        error = np.asarray(self.position) - np.asarray(truth, dtype=float)
        return replace(self, error=tuple(float(e) for e in error))

    @property
    def horizontal_error(self) -> Optional[float]:
        return None if self.error is None else float(np.hypot(self.error[0], self.error[1]))

    @property
    def error_3d(self) -> Optional[float]:
        return None if self.error is None else float(np.linalg.norm(self.error))


@dataclass(frozen=True)
class SolverResult:
    x: np.ndarray
    cost_history: Tuple[float, ...]
    iterations: int
    converged: bool


def damped_gauss_newton(residual_fn: Callable[[np.ndarray], np.ndarray],
                        jacobian_fn: Callable[[np.ndarray], np.ndarray],
                        x0: npt.ArrayLike,
                        max_iterations: int = 50,
                        step_tolerance: float = 1e-3,
                        initial_damping: float = 1e-3,
                        gradient_tolerance: float = 1e-6) -> SolverResult:
    """Levenberg-Marquardt with diagonal scaling of the damping term.

    A step is accepted only if it does not increase the sum of squared residuals, so the cost
    history is non-increasing. Converged means the last accepted step was shorter than
    `step_tolerance`. When no step lowers the cost any more the last iterate is returned,
    converged only if the gradient vanishes there (relative to the residual norm).
    """
    x = np.asarray(x0, dtype=float).copy()
    residual = residual_fn(x)
    cost = float(residual @ residual)
    history = [cost]
    damping = initial_damping
    converged = False
    iterations = 0
    while iterations < max_iterations:
        iterations += 1
        jacobian = jacobian_fn(x)
        singular = np.linalg.svd(jacobian, compute_uv=False)
        if singular[-1] == 0 or singular[0] / singular[-1] > CONDITION_LIMIT:
            condition = np.inf if singular[-1] == 0 else singular[0] / singular[-1]
            raise DegenerateGeometryException(float(condition))
        normal = jacobian.T @ jacobian
        gradient = jacobian.T @ residual
        scaling = np.diag(np.diag(normal))
        while True:
            step = np.linalg.solve(normal + damping * scaling, -gradient)
            candidate = x + step
            candidate_residual = residual_fn(candidate)
            candidate_cost = float(candidate_residual @ candidate_residual)
            if candidate_cost <= cost:
                break
            damping *= 10
            if damping > MAX_DAMPING:
                stationary = np.linalg.norm(gradient) <= gradient_tolerance * (1.0 + np.sqrt(cost))
                LOG.debug('No descent step left after %d iterations, gradient %.3g', iterations,
                          np.linalg.norm(gradient))
                return SolverResult(x, tuple(history), iterations, bool(stationary))
        x, residual, cost = candidate, candidate_residual, candidate_cost
        history.append(cost)
        damping = max(damping / 10, 1e-12)
        LOG.debug('Iteration %d: cost %.6g, step %.3g', iterations, cost, np.linalg.norm(step))
        if np.linalg.norm(step) < step_tolerance:
            converged = True
            break
    return SolverResult(x, tuple(history), iterations, converged)


def solve_position(residual_fn: Callable[[np.ndarray], np.ndarray],
                   jacobian_fn: Callable[[np.ndarray], np.ndarray],
                   initial_guess: npt.ArrayLike,
                   altitude_constraint: Optional[float] = None,
                   max_iterations: int = 50,
                   timestamp: float = 0.0) -> PositionFix:
    """Solve for a 3-D point, or for east/north at a fixed altitude.

    `residual_fn` and `jacobian_fn` take a 3-D point and return residuals in meters and their
    derivatives with respect to the three coordinates.
    """
    guess = np.asarray(initial_guess, dtype=float)
    if altitude_constraint is None:
        result = damped_gauss_newton(residual_fn, jacobian_fn, guess, max_iterations)
        point = result.x
    else:

        def lift(x):
            return np.array([x[0], x[1], altitude_constraint])

        result = damped_gauss_newton(lambda x: residual_fn(lift(x)), lambda x: jacobian_fn(lift(x))[:, :2], guess[:2],
                                     max_iterations)
        point = lift(result.x)
    residual = residual_fn(point)
    if not result.converged:
        LOG.warning('Fix at t=%.3f s did not converge in %d iterations', timestamp, result.iterations)
    return PositionFix(position=Position3.from_array(point),
                       residual_norm=float(np.sqrt(np.mean(residual**2)) / C),
                       iterations=result.iterations,
                       timestamp=timestamp,
                       converged=result.converged)


def unit_vectors(point: np.ndarray, origins: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Distances from every origin to the point and the unit vectors pointing at it."""
    offsets = point - origins
    distances = np.linalg.norm(offsets, axis=-1)
    return distances, offsets / np.maximum(distances, 1e-12)[..., None]


def grid_points(bounds: Sequence[Tuple[float, float]], step: float) -> Sequence[np.ndarray]:
    return [np.arange(low, high + step / 2, step) for low, high in bounds]


def grid_search(cost_fn: Callable[[np.ndarray], np.ndarray], bounds: Sequence[Tuple[float, float]],
                step: float) -> Tuple[np.ndarray, float]:
    """Exhaustive search of a regular grid.

    `cost_fn` takes an (M, d) array of points and returns M costs. Returns the best grid point
    and its cost.
    """
    axes = grid_points(bounds, step)
    rest = np.stack([a.ravel() for a in np.meshgrid(*axes[1:], indexing='ij')], axis=-1) if len(axes) > 1 else None
    best_point, best_cost = None, np.inf
    # one slab per value of the first coordinate keeps memory bounded
    for first in axes[0]:
        if rest is None:
            chunk = np.array([[first]])
        else:
            chunk = np.column_stack([np.full(len(rest), first), rest])
        costs = cost_fn(chunk)
        i = int(np.argmin(costs))
        if costs[i] < best_cost:
            best_point, best_cost = chunk[i], float(costs[i])
    return best_point, best_cost


def coarse_grid_guess(cost_fn: Callable[[np.ndarray], np.ndarray],
                      bounds: Sequence[Tuple[float, float]],
                      step: float,
                      altitude_constraint: Optional[float] = None) -> np.ndarray:
    """Best cell of a coarse grid as a 3-D starting point.

    With an altitude constraint only east and north are searched and `cost_fn` receives
    two-column points.
    """
    if altitude_constraint is None:
        point, _ = grid_search(cost_fn, bounds, step)
        return point
    point, _ = grid_search(cost_fn, bounds[:2], step)
    return np.array([point[0], point[1], altitude_constraint])

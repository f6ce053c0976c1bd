import numpy as np
import pytest

from uavtwin.exceptions import DegenerateGeometryException
from uavtwin.scene import Position3
from uavtwin.solver import (PositionFix, coarse_grid_guess, damped_gauss_newton, grid_points, grid_search,
                            solve_position, unit_vectors)

ANCHORS = np.array([[0.0, 0.0, 0.0], [100.0, 0.0, 5.0], [0.0, 100.0, 10.0], [100.0, 100.0, 50.0]])


def range_residuals(target):
    measured = np.linalg.norm(ANCHORS - target, axis=-1)

    def residual_fn(x):
        return np.linalg.norm(ANCHORS - x, axis=-1) - measured

    def jacobian_fn(x):
        _, directions = unit_vectors(x, ANCHORS)
        return directions

    return residual_fn, jacobian_fn


class TestDampedGaussNewton:
    def test_linear(self):
        a = np.array([[2.0, 1.0], [1.0, 3.0], [0.0, 1.0]])
        b = np.array([1.0, 2.0, 3.0])
        result = damped_gauss_newton(lambda x: a @ x - b, lambda x: a, [10.0, -10.0])
        expected, *_ = np.linalg.lstsq(a, b, rcond=None)
        assert np.allclose(result.x, expected, atol=1e-6)
        assert result.converged

    def test_rosenbrock(self):
        result = damped_gauss_newton(lambda x: np.array([10 * (x[1] - x[0]**2), 1 - x[0]]),
                                     lambda x: np.array([[-20 * x[0], 10.0], [-1.0, 0.0]]), [-1.2, 1.0])
        assert np.allclose(result.x, [1.0, 1.0], atol=1e-3)
        assert all(b <= a for a, b in zip(result.cost_history, result.cost_history[1:]))

    def test_degenerate(self):
        with pytest.raises(DegenerateGeometryException):
            damped_gauss_newton(lambda x: np.array([x[0] - 1, x[0] + 1]), lambda x: np.array([[1.0, 0.0], [1.0, 0.0]]),
                                [0.0, 0.0])

    def test_iteration_limit(self):
        result = damped_gauss_newton(lambda x: np.array([10 * (x[1] - x[0]**2), 1 - x[0]]),
                                     lambda x: np.array([[-20 * x[0], 10.0], [-1.0, 0.0]]), [-1.2, 1.0],
                                     max_iterations=1)
        assert result.iterations == 1
        assert not result.converged

    def test_no_descent_is_not_converged(self):
        result = damped_gauss_newton(lambda x: np.array([x[0] - 1.0]), lambda x: np.array([[-1.0]]), [0.0])
        assert not result.converged
        assert result.cost_history == (1.0,)
        assert result.x[0] == 0.0

    def test_stationary_start_is_converged(self):
        result = damped_gauss_newton(lambda x: np.array([x[0] - 1.0, x[0] + 1.0]), lambda x: np.array([[1.0], [1.0]]),
                                     [0.0])
        assert result.converged
        assert result.x[0] == pytest.approx(0.0, abs=1e-12)


class TestSolvePosition:
    def test_3d(self):
        target = np.array([30.0, 60.0, 20.0])
        residual_fn, jacobian_fn = range_residuals(target)
        fix = solve_position(residual_fn, jacobian_fn, target + [8.0, -6.0, 5.0], timestamp=4.0)
        assert np.allclose(np.asarray(fix.position), target, atol=1e-6)
        assert fix.converged
        assert fix.timestamp == 4.0
        assert fix.residual_norm < 1e-12

    def test_altitude_constraint(self):
        target = np.array([30.0, 60.0, 20.0])
        residual_fn, jacobian_fn = range_residuals(target)
        fix = solve_position(residual_fn, jacobian_fn, [20.0, 50.0, 0.0], altitude_constraint=20.0)
        assert fix.position.up == 20.0
        assert np.allclose(np.asarray(fix.position), target, atol=1e-6)


class TestPositionFix:
    def test_errors(self):
        fix = PositionFix(Position3(3.0, 4.0, 12.0), 0.0, 3)
        assert fix.horizontal_error is None
        fix = fix.with_truth([0.0, 0.0, 0.0])
        assert fix.error == (3.0, 4.0, 12.0)
        assert fix.horizontal_error == pytest.approx(5.0)
        assert fix.error_3d == pytest.approx(13.0)


class TestGridSearch:
    def test_points(self):
        axes = grid_points([(0.0, 1.0), (-1.0, 1.0)], 0.5)
        assert np.allclose(axes[0], [0.0, 0.5, 1.0])
        assert np.allclose(axes[1], [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_quadratic(self):
        center = np.array([20.0, -30.0, 40.0])
        point, cost = grid_search(lambda p: np.sum((p - center)**2, axis=-1), [(-100, 100), (-100, 100), (0, 100)],
                                  10.0)
        assert np.allclose(point, center)
        assert cost == pytest.approx(0.0)

    def test_guess_with_altitude(self):
        center = np.array([20.0, -30.0])
        guess = coarse_grid_guess(lambda p: np.sum((p - center)**2, axis=-1), [(-100, 100), (-100, 100), (0, 100)],
                                  10.0, altitude_constraint=30.0)
        assert np.allclose(guess, [20.0, -30.0, 30.0])

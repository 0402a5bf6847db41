import math

import numpy as np
import pytest

from epsctl.alphasearch import AlphaSearchConfig, local_minima, minimize_over_alpha, scan
from epsctl.errors import InvalidConfig, NumericalFailure
from epsctl.timegrid import QuadratureConfig, TimeGrid, decay_horizon


def test_config_validation():
    with pytest.raises(InvalidConfig):
        AlphaSearchConfig(grid_min=0.0)
    with pytest.raises(InvalidConfig):
        AlphaSearchConfig(grid_min=2.0, grid_max=1.0)
    with pytest.raises(InvalidConfig):
        AlphaSearchConfig(grid_points=4)


def test_minimize_refines_between_grid_points():
    cfg = AlphaSearchConfig(grid_points=50)
    result = minimize_over_alpha(lambda a: (math.log(a) - math.log(0.37)) ** 2 + 1.0, cfg, 1e-3, 1e3)
    assert result.alpha == pytest.approx(0.37, rel=1e-4)
    assert result.value == pytest.approx(1.0, abs=1e-8)
    assert not result.at_upper
    assert not result.at_lower
    assert len(result.curve) == 50


def test_decreasing_objective_flags_upper_boundary():
    result = minimize_over_alpha(lambda a: 1.0 / a, AlphaSearchConfig(), 1e-3, 1e3)
    assert result.at_upper
    assert result.alpha == pytest.approx(1e3, rel=1e-2)


def test_failed_points_are_skipped():
    def objective(a):
        if a < 1.0:
            raise NumericalFailure("no solution")
        return a

    result = minimize_over_alpha(objective, AlphaSearchConfig(), 1e-2, 1e2)
    assert result.alpha >= 1.0
    assert all(a >= 1.0 for a, _ in result.curve)


def test_nowhere_finite_objective_fails():
    with pytest.raises(NumericalFailure):
        minimize_over_alpha(lambda a: math.inf, AlphaSearchConfig(), 1e-2, 1e2)


def test_local_minima_finds_both_wells():
    curve = scan(lambda a: math.sin(3.0 * math.log(a)) + 2.0, 1e-2, 1e2, 400)
    minima = local_minima(curve)
    assert len(minima) >= 2
    for alpha in minima:
        assert math.sin(3.0 * math.log(alpha)) == pytest.approx(-1.0, abs=1e-3)


def test_decay_horizon_and_integration():
    a = np.array([[-1.0]])
    horizon = decay_horizon(a, 1e-12)
    assert math.exp(-horizon) <= 1e-12 * 1.0001
    grid = TimeGrid.build(a, None, QuadratureConfig())
    h = grid.response(np.ones((1, 1)), np.ones((1, 1)))[:, 0, 0]
    assert float(grid.integrate(h)) == pytest.approx(1.0, rel=1e-9)


def test_peak_is_refined_off_grid():
    grid = TimeGrid.build(np.array([[-1.0]]), 10.0, QuadratureConfig(intervals=16))

    def f(t):
        return -((t - 1.3) ** 2)

    value, t = grid.peak(np.array([f(t) for t in grid.times]), f)
    assert t == pytest.approx(1.3, abs=1e-6)
    assert value == pytest.approx(0.0, abs=1e-10)


def test_quadrature_config_rejects_odd_intervals():
    with pytest.raises(InvalidConfig):
        QuadratureConfig(intervals=15)

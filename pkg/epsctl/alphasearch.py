"""Global log-grid scan plus local refinement over the ellipsoid parameter alpha."""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import EpsctlError, InvalidConfig, NumericalFailure

logger = logging.getLogger(__name__)

TIE_TOL = 1e-9


@dataclass(frozen=True)
class AlphaSearchConfig:
    grid_min: float = 1e-3
    grid_max: float = 1e3
    grid_points: int = 200
    refine_tol: float = 1e-6

    def __post_init__(self):
        if not self.grid_min > 0.0:
            raise InvalidConfig(f"alpha grid minimum must be positive, got {self.grid_min}")
        if not self.grid_min < self.grid_max:
            raise InvalidConfig(f"alpha grid minimum {self.grid_min} must be below maximum {self.grid_max}")
        if self.grid_points < 16:
            raise InvalidConfig(f"alpha grid needs at least 16 points, got {self.grid_points}")
        if not self.refine_tol > 0.0:
            raise InvalidConfig("refine_tol must be positive")


@dataclass
class AlphaSearchResult:
    alpha: float
    value: float
    curve: list[tuple[float, float]] = field(default_factory=list)
    at_upper: bool = False
    at_lower: bool = False

    @property
    def local_minima(self) -> list[float]:
        return local_minima(self.curve)


def _safe(objective: Callable[[float], float], alpha: float) -> float:
    try:
        value = float(objective(alpha))
    except EpsctlError as e:
        logger.debug("objective failed at alpha=%.6g: %s", alpha, e)
        return math.inf
    if not math.isfinite(value):
        return math.inf
    return value


def scan(objective: Callable[[float], float], lo: float, hi: float, points: int) -> list[tuple[float, float]]:
    """Evaluate on a log grid; failed or non-finite points are omitted."""
    curve = []
    for alpha in np.geomspace(lo, hi, points):
        value = _safe(objective, float(alpha))
        if math.isfinite(value):
            curve.append((float(alpha), value))
    return curve


def minimize_over_alpha(objective: Callable[[float], float], cfg: AlphaSearchConfig, lo: float, hi: float) -> AlphaSearchResult:
    """Minimize objective(alpha) on [lo, hi]: log-grid scan, then bounded Brent refinement.

    Grid values that agree within a relative 1e-9 resolve to the smaller alpha.
    """
    if not 0.0 < lo < hi:
        raise InvalidConfig(f"invalid alpha range [{lo:.6g}, {hi:.6g}]")

    grid = np.geomspace(lo, hi, cfg.grid_points)
    values = np.array([_safe(objective, float(a)) for a in grid])
    finite = np.isfinite(values)
    if not finite.any():
        raise NumericalFailure(f"objective is not finite anywhere on the alpha grid [{lo:.3g}, {hi:.3g}]")

    best_value = float(values[finite].min())
    i = int(np.flatnonzero(values <= best_value + TIE_TOL * abs(best_value))[0])
    alpha = float(grid[i])
    value = float(values[i])

    left = float(grid[max(i - 1, 0)])
    right = float(grid[min(i + 1, len(grid) - 1)])
    res = minimize_scalar(
        lambda a: _safe(objective, a),
        bounds=(left, right),
        method="bounded",
        options={"xatol": cfg.refine_tol * alpha},
    )
    if res.success and math.isfinite(res.fun) and res.fun < value:
        alpha = float(res.x)
        value = float(res.fun)

    curve = [(float(a), float(v)) for a, v in zip(grid, values, strict=True) if math.isfinite(v)]
    at_upper = alpha >= float(grid[-2])
    at_lower = alpha <= float(grid[1])
    if at_upper:
        logger.info("alpha minimizer %.6g sits at the upper end of the grid (%.3g)", alpha, hi)
    if at_lower:
        logger.info("alpha minimizer %.6g sits at the lower end of the grid (%.3g)", alpha, lo)
    logger.debug("alpha search on [%.3g, %.3g]: %d/%d finite, best %.9g at %.6g", lo, hi, int(finite.sum()), len(grid), value, alpha)
    return AlphaSearchResult(alpha=alpha, value=value, curve=curve, at_upper=at_upper, at_lower=at_lower)


def local_minima(curve: list[tuple[float, float]]) -> list[float]:
    """Interior grid points strictly below the left neighbour and not above the right one."""
    found = []
    for j in range(1, len(curve) - 1):
        if curve[j][1] < curve[j - 1][1] and curve[j][1] <= curve[j + 1][1]:
            found.append(curve[j][0])
    return found

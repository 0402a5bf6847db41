"""Uniform time grids of e^{At} for the quadrature-based set and gain oracles.

Samples of e^{At} are produced by repeated multiplication with one Pade
exponential of the step; integrals use composite Simpson, maxima are refined
with a bounded Brent search on exact exponentials.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import minimize_scalar

from .errors import InvalidConfig, NumericalFailure, SolverDegenerate
from .linmat import matexp, spectral_abscissa

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureConfig:
    intervals: int = 16384
    decay_tol: float = 1e-12
    max_horizon: float = 1e5

    def __post_init__(self):
        if self.intervals < 2 or self.intervals % 2:
            raise InvalidConfig(f"quadrature intervals must be a positive even number, got {self.intervals}")
        if not 0.0 < self.decay_tol < 1.0:
            raise InvalidConfig(f"decay tolerance must lie in (0, 1), got {self.decay_tol}")
        if self.max_horizon <= 0.0:
            raise InvalidConfig("max_horizon must be positive")


def decay_horizon(a, tol: float = 1e-12, max_horizon: float = 1e5) -> float:
    """Smallest tested T with ||e^{AT}|| <= tol, starting from ln(1/tol) / (-r)."""
    r = spectral_abscissa(a)
    if r >= 0.0:
        raise SolverDegenerate(f"no decay horizon for an unstable system (spectral abscissa {r:.6g})")
    horizon = math.log(1.0 / tol) / (-r)
    # non-normal transients: the Schur coupling constant only shows up in the computed norm
    for _ in range(60):
        if horizon >= max_horizon:
            logger.warning("decay horizon capped at %.3g (spectral abscissa %.3g)", max_horizon, r)
            return max_horizon
        if np.linalg.norm(matexp(a, horizon), 2) <= tol:
            break
        horizon *= 1.25
    return horizon


@dataclass(frozen=True, eq=False)
class TimeGrid:
    times: np.ndarray
    step: float
    transitions: np.ndarray  # e^{A t_j}, shape (len(times), n, n)

    @classmethod
    def build(cls, a, horizon: Optional[float] = None, cfg: Optional[QuadratureConfig] = None) -> "TimeGrid":
        cfg = cfg or QuadratureConfig()
        a = np.asarray(a, dtype=float)
        if horizon is None:
            horizon = decay_horizon(a, cfg.decay_tol, cfg.max_horizon)
        if not horizon > 0.0:
            raise InvalidConfig(f"horizon must be positive, got {horizon}")

        n = a.shape[0]
        step = horizon / cfg.intervals
        phi = matexp(a, step)
        transitions = np.empty((cfg.intervals + 1, n, n))
        transitions[0] = np.eye(n)
        for j in range(cfg.intervals):
            transitions[j + 1] = transitions[j] @ phi
        if not np.all(np.isfinite(transitions)):
            raise NumericalFailure(f"state transition samples overflowed on [0, {horizon:.6g}]")
        times = np.linspace(0.0, horizon, cfg.intervals + 1)
        return cls(times=times, step=step, transitions=transitions)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def response(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        """Samples of left e^{At} right, shape (len(times), rows(left), cols(right))."""
        return left @ self.transitions @ right

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Composite Simpson along the time axis (axis 0)."""
        return simpson(values, dx=self.step, axis=0)

    def peak(self, values: np.ndarray, exact: Callable[[float], float]) -> tuple[float, float]:
        """Maximum of sampled values, refined around the best sample with exact evaluations.

        Returns (value, time).
        """
        j = int(np.argmax(values))
        best = float(values[j])
        t_best = float(self.times[j])
        lo = float(self.times[max(j - 1, 0)])
        hi = float(self.times[min(j + 1, len(self.times) - 1)])
        if hi > lo:
            res = minimize_scalar(lambda t: -exact(t), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * max(1.0, hi)})
            if res.success and -res.fun > best:
                best = float(-res.fun)
                t_best = float(res.x)
        return best, t_best

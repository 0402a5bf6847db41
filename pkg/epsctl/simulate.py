"""Fixed-step RK4 simulation under bounded disturbances and empirical ellipsoid invariance."""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ellipsoids import MEMBERSHIP_SLACK, Ellipsoid
from .errors import InvalidConfig, InvalidModel, NumericalFailure
from .linmat import spectral_abscissa
from .models import EllipsoidForm, InvarianceReport, PolicyKind, TrajectoryMeta
from .sysmodel import LtiSystem

logger = logging.getLogger(__name__)

Policy = Callable[[float, np.ndarray], np.ndarray]

ZERO_DIRECTION = 1e-12
MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class SimulationConfig:
    t_end: float = 30.0
    dt: Optional[float] = None
    dt_scale: float = 1e-3  # default dt = dt_scale / (-r)
    seed: int = 0

    def __post_init__(self):
        if not self.t_end > 0.0:
            raise InvalidConfig(f"t_end must be positive, got {self.t_end}")
        if self.dt is not None and not self.dt > 0.0:
            raise InvalidConfig(f"dt must be positive, got {self.dt}")
        if not self.dt_scale > 0.0:
            raise InvalidConfig("dt_scale must be positive")


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    v_values: np.ndarray
    meta: Optional[TrajectoryMeta] = None


# --- Policies ----------------------------------------------------------------


def _normalize(w: np.ndarray) -> np.ndarray:
    size = float(np.linalg.norm(w))
    if size < ZERO_DIRECTION:
        return np.zeros_like(w)
    return w / size


def zero_policy(m: int) -> Policy:
    w = np.zeros(m)
    return lambda t, x: w


def constant_policy(direction) -> Policy:
    w = _normalize(np.atleast_1d(np.asarray(direction, dtype=float)))
    return lambda t, x: w


def random_policy(m: int, seed: int = 0) -> Policy:
    """A fresh uniform direction on the unit sphere at every call."""
    rng = np.random.default_rng(seed)

    def policy(t: float, x: np.ndarray) -> np.ndarray:
        return _normalize(rng.standard_normal(m))

    return policy


def worst_case_policy(ellipsoid: Ellipsoid, sys: LtiSystem) -> Policy:
    """w(x) = B' shape^-1 x / |B' shape^-1 x|: the steepest ascent of x' shape^-1 x."""
    if ellipsoid.form != EllipsoidForm.P:
        raise InvalidModel("the worst-case policy needs a P-form ellipsoid")
    if ellipsoid.n != sys.n:
        raise InvalidModel(f"ellipsoid dimension {ellipsoid.n} does not match the system ({sys.n})")
    inverse = np.linalg.inv(ellipsoid.shape)

    def policy(t: float, x: np.ndarray) -> np.ndarray:
        return _normalize(sys.b.T @ inverse @ x)

    return policy


def make_policy(kind: PolicyKind, sys: LtiSystem, seed: int = 0, ellipsoid: Optional[Ellipsoid] = None, direction=None) -> Policy:
    if kind == PolicyKind.ZERO:
        return zero_policy(sys.m)
    if kind == PolicyKind.CONSTANT:
        if direction is None:
            direction = np.ones(sys.m)
        return constant_policy(direction)
    if kind == PolicyKind.RANDOM:
        return random_policy(sys.m, seed)
    if kind == PolicyKind.WORST:
        if ellipsoid is None:
            raise InvalidConfig("the worst-case policy needs a reference ellipsoid")
        return worst_case_policy(ellipsoid, sys)
    raise InvalidConfig(f"unknown policy: {kind}")


# --- Integration -------------------------------------------------------------


def default_step(sys: LtiSystem, scale: float = 1e-3) -> float:
    r = spectral_abscissa(sys.a)
    if r >= 0.0:
        raise InvalidConfig(f"no default step for an unstable system (spectral abscissa {r:.3g}); pass dt explicitly")
    return scale / (-r)


def integrate(
    sys: LtiSystem,
    policy: Policy,
    x0,
    t_end: float,
    dt: Optional[float] = None,
    reference: Optional[Ellipsoid] = None,
) -> Trajectory:
    """Classical RK4 with the disturbance held constant over each step."""
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape != (sys.n,):
        raise InvalidModel(f"x0 has {x.size} entries, the system has {sys.n} states")
    if not t_end > 0.0:
        raise InvalidConfig(f"t_end must be positive, got {t_end}")
    if dt is None:
        dt = default_step(sys)
    if not dt > 0.0:
        raise InvalidConfig(f"dt must be positive, got {dt}")

    steps = max(1, math.ceil(t_end / dt - 1e-9))
    h = t_end / steps
    times = np.linspace(0.0, t_end, steps + 1)
    states = np.empty((steps + 1, sys.n))
    states[0] = x
    a, b = sys.a, sys.b
    for j in range(steps):
        w = np.asarray(policy(times[j], x), dtype=float)
        if np.linalg.norm(w) > 1.0 + 1e-12:
            raise InvalidConfig(f"disturbance policy returned |w| = {np.linalg.norm(w):.6g} > 1")
        bw = b @ w
        k1 = a @ x + bw
        k2 = a @ (x + 0.5 * h * k1) + bw
        k3 = a @ (x + 0.5 * h * k2) + bw
        k4 = a @ (x + h * k3) + bw
        x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NumericalFailure(f"state became non-finite at t={times[j + 1]:.6g}")
        states[j + 1] = x

    outputs = states @ sys.c.T
    if reference is not None:
        v = reference.quadratic_form(states)
    else:
        v = np.sum(states * states, axis=1)
    logger.debug("integrated %d RK4 steps of %.3g up to t=%.6g", steps, h, t_end)
    return Trajectory(times=times, states=states, outputs=outputs, v_values=np.asarray(v, dtype=float))


def invariance_report(traj: Trajectory, e: Ellipsoid) -> InvarianceReport:
    """Largest membership form after the first entry into the ellipsoid."""
    if traj.states.shape[1] != e.n:
        raise InvalidModel(f"trajectory has {traj.states.shape[1]} states, ellipsoid dimension is {e.n}")
    v = np.asarray(e.quadratic_form(traj.states), dtype=float)
    inside = np.flatnonzero(v <= 1.0 + MEMBERSHIP_SLACK)
    monotone = bool(np.all(np.diff(v) <= MONOTONE_SLACK * np.maximum(1.0, v[:-1])))
    if len(inside) == 0:
        return InvarianceReport(max_v=float(v[-1]), first_entry_time=float(traj.times[-1]), entered=False, monotone=monotone)
    first = int(inside[0])
    return InvarianceReport(max_v=float(np.max(v[first:])), first_entry_time=float(traj.times[first]), entered=True, monotone=monotone)


@dataclass
class SimulationRun:
    trajectory: Trajectory
    report: Optional[InvarianceReport] = None


def simulate(
    sys: LtiSystem,
    kind: PolicyKind,
    x0,
    cfg: Optional[SimulationConfig] = None,
    ellipsoid: Optional[Ellipsoid] = None,
) -> SimulationRun:
    """One run with metadata and, when a reference ellipsoid is given, its invariance report."""
    cfg = cfg or SimulationConfig()
    policy = make_policy(kind, sys, cfg.seed, ellipsoid)
    dt = cfg.dt
    if dt is None:
        dt = default_step(sys, cfg.dt_scale)
    traj = integrate(sys, policy, x0, cfg.t_end, dt, reference=ellipsoid)
    report = None
    if ellipsoid is not None:
        report = invariance_report(traj, ellipsoid)
    seed = None
    if kind == PolicyKind.RANDOM:
        seed = cfg.seed
    alpha = None
    if ellipsoid is not None:
        alpha = ellipsoid.alpha
    meta = TrajectoryMeta(
        policy=kind,
        seed=seed,
        dt=float(traj.times[1] - traj.times[0]),
        t_end=cfg.t_end,
        alpha=alpha,
        x0=[float(v) for v in np.asarray(x0, dtype=float).reshape(-1)],
        invariance=report,
    )
    traj = Trajectory(times=traj.times, states=traj.states, outputs=traj.outputs, v_values=traj.v_values, meta=meta)
    return SimulationRun(trajectory=traj, report=report)

"""alpha-parameterized invariant ellipsoids and sampled oracles for reachable / observable sets.

P_alpha solves (A + a/2 I) P + P (A + a/2 I)' + B B'/a = 0 and bounds the states
reachable under unit-peak disturbances; Q_alpha is the dual object whose
ellipsoid lies inside the set of initial states with unit output integral.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import AlphaOutOfRange, InvalidConfig, InvalidModel, SolverDegenerate
from .linmat import as_matrix, is_spd, lyap_solve, matexp, spectral_abscissa, sym
from .models import EllipsoidForm, SetKind, SignalNorm
from .sysmodel import LtiSystem
from .timegrid import QuadratureConfig, TimeGrid, decay_horizon

logger = logging.getLogger(__name__)

MEMBERSHIP_SLACK = 1e-9
UNOBSERVABLE_TOL = 1e-12
_CHUNK = 128


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """P form: {x : x' shape^-1 x <= 1}. Q form: {x : x' shape x <= 1}."""

    shape: np.ndarray
    form: EllipsoidForm
    alpha: Optional[float] = None
    _factor: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        shape = sym(as_matrix(self.shape, "ellipsoid shape"))
        if shape.shape[0] != shape.shape[1]:
            raise InvalidModel(f"ellipsoid shape must be square, got {shape.shape}")
        if not is_spd(shape, 1e-12):
            raise InvalidModel("ellipsoid shape matrix is not positive definite")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "_factor", linalg.cholesky(shape, lower=True))

    @property
    def n(self) -> int:
        return self.shape.shape[0]

    def quadratic_form(self, x) -> np.ndarray:
        """Membership form for one point (returns a 0-d array) or a batch of rows."""
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if pts.shape[1] != self.n:
            raise InvalidModel(f"point dimension {pts.shape[1]} does not match ellipsoid dimension {self.n}")
        if self.form == EllipsoidForm.P:
            y = linalg.solve_triangular(self._factor, pts.T, lower=True)
        else:
            y = self._factor.T @ pts.T
        values = np.sum(y * y, axis=0)
        if np.ndim(x) == 1:
            return values[0]
        return values

    def boundary_points(self, directions: np.ndarray) -> np.ndarray:
        """Radially scale nonzero directions (rows) onto the ellipsoid surface."""
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        return directions / np.sqrt(self.quadratic_form(directions))[:, None]


@dataclass(frozen=True, eq=False)
class SetPolygon:
    kind: SetKind
    vertices: np.ndarray
    horizon: float
    label: str = ""

    def __post_init__(self):
        if not self.label:
            object.__setattr__(self, "label", str(self.kind))


# --- alpha family ------------------------------------------------------------


def alpha_window(sys: LtiSystem) -> tuple[float, float]:
    """Admissible open interval (0, -2r) for the analysis equations."""
    r = spectral_abscissa(sys.a)
    if r >= 0.0:
        raise SolverDegenerate(f"system is unstable (spectral abscissa {r:.6g}); the alpha window is empty")
    return 0.0, -2.0 * r


def check_alpha(sys: LtiSystem, alpha: float) -> None:
    lo, hi = alpha_window(sys)
    if not lo < alpha < hi:
        raise AlphaOutOfRange(f"alpha={alpha:.6g} outside the admissible window (0, {hi:.6g})")


def p_matrix(sys: LtiSystem, alpha: float) -> np.ndarray:
    check_alpha(sys, alpha)
    shifted = sys.a + 0.5 * alpha * np.eye(sys.n)
    return lyap_solve(shifted, sys.b @ sys.b.T / alpha)


def q_matrix(sys: LtiSystem, alpha: float) -> np.ndarray:
    check_alpha(sys, alpha)
    shifted = sys.a.T + 0.5 * alpha * np.eye(sys.n)
    return lyap_solve(shifted, sys.c.T @ sys.c / alpha)


def p_alpha(sys: LtiSystem, alpha: float) -> Ellipsoid:
    return Ellipsoid(p_matrix(sys, alpha), EllipsoidForm.P, alpha)


def q_alpha(sys: LtiSystem, alpha: float) -> Ellipsoid:
    return Ellipsoid(q_matrix(sys, alpha), EllipsoidForm.Q, alpha)


def contains(e: Ellipsoid, x, slack: float = MEMBERSHIP_SLACK) -> bool:
    return bool(e.quadratic_form(x) <= 1.0 + slack)


# --- Set oracles -------------------------------------------------------------


def _unit_rows(vectors) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(vectors, dtype=float))
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0.0):
        raise InvalidConfig("directions must be nonzero")
    return rows / norms[:, None]


def _signal_norms(grid: TimeGrid, samples: np.ndarray, dirs: np.ndarray, integral: bool, exact) -> np.ndarray:
    """Integral (or peak) over time of |samples(t) d| for each row d of dirs.

    samples has shape (len(times), p, n); exact(t, d) evaluates |M e^{At} N d| directly.
    """
    out = np.empty(len(dirs))
    for start in range(0, len(dirs), _CHUNK):
        chunk = dirs[start : start + _CHUNK]
        values = np.linalg.norm(np.einsum("jpn,dn->jdp", samples, chunk), axis=2)
        if integral:
            out[start : start + len(chunk)] = grid.integrate(values)
        else:
            for i, d in enumerate(chunk):
                out[start + i], _ = grid.peak(values[:, i], lambda t, d=d: exact(t, d))
    return out


def reach_supports(sys: LtiSystem, kind: SignalNorm, horizon: Optional[float], etas, cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
    """Support function of R_p(T) in each direction eta (rows).

    INF (unit-peak inputs): integral of |B' e^{A's} eta|; ONE (unit-integral inputs): its maximum over s.
    """
    etas = _unit_rows(etas)
    grid = TimeGrid.build(sys.a, horizon, cfg)
    # |B' e^{A's} eta| = |(e^{As} B)' eta|
    samples = np.transpose(grid.transitions @ sys.b, (0, 2, 1))

    def exact(t: float, eta: np.ndarray) -> float:
        return float(np.linalg.norm(sys.b.T @ matexp(sys.a.T, t) @ eta))

    return _signal_norms(grid, samples, etas, kind == SignalNorm.INF, exact)


def reach_support(sys: LtiSystem, kind: SignalNorm, horizon: Optional[float], eta, cfg: Optional[QuadratureConfig] = None) -> float:
    return float(reach_supports(sys, kind, horizon, [eta], cfg)[0])


def reach_boundary_points(sys: LtiSystem, horizon: Optional[float], etas, cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
    """Points of R_inf(T) attaining the support in each direction (unit-peak bang-bang inputs)."""
    etas = _unit_rows(etas)
    grid = TimeGrid.build(sys.a, horizon, cfg)
    g = grid.transitions @ sys.b  # e^{As} B, shape (N, n, m)
    points = np.empty((len(etas), sys.n))
    for i, eta in enumerate(etas):
        w = np.einsum("jnm,n->jm", g, eta)
        size = np.linalg.norm(w, axis=1)
        direction = np.zeros_like(w)
        live = size > 0.0
        direction[live] = w[live] / size[live, None]
        points[i] = grid.integrate(np.einsum("jnm,jm->jn", g, direction))
    return points


def obs_norms(sys: LtiSystem, kind: SignalNorm, points, horizon: Optional[float] = None, cfg: Optional[QuadratureConfig] = None) -> np.ndarray:
    """Output norm of the free response from each initial state (rows).

    ONE: integral of |C e^{At} x|; INF: its maximum over t.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    grid = TimeGrid.build(sys.a, horizon, cfg)
    samples = sys.c @ grid.transitions

    def exact(t: float, x: np.ndarray) -> float:
        return float(np.linalg.norm(sys.c @ matexp(sys.a, t) @ x))

    return _signal_norms(grid, samples, pts, kind == SignalNorm.ONE, exact)


def obs_radius(sys: LtiSystem, kind: SignalNorm, direction, cfg: Optional[QuadratureConfig] = None) -> float:
    """Distance to the boundary of O_q along a unit direction; +inf when the direction is unobservable."""
    d = _unit_rows(direction)
    value = float(obs_norms(sys, kind, d, None, cfg)[0])
    if value < UNOBSERVABLE_TOL:
        return float("inf")
    return 1.0 / value


# --- Polygons ----------------------------------------------------------------


def _circle(n_dirs: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(n_dirs) / n_dirs
    return np.column_stack([np.cos(theta), np.sin(theta)])


def set_polygon(
    sys: LtiSystem,
    kind: SetKind,
    horizon: Optional[float] = None,
    n_dirs: int = 360,
    ellipsoid: Optional[Ellipsoid] = None,
    cfg: Optional[QuadratureConfig] = None,
) -> SetPolygon:
    """Boundary polygon of a planar reachable/observable set or ellipse.

    Reach kinds intersect consecutive support lines (an outer polygon);
    observable kinds place one radial boundary point per direction.
    """
    if sys.n != 2:
        raise InvalidModel(f"set polygons need a 2-state system, got n={sys.n}")
    if n_dirs < 8:
        raise InvalidConfig(f"n_dirs must be at least 8, got {n_dirs}")

    dirs = _circle(n_dirs)
    used_horizon = horizon
    if used_horizon is None and kind != SetKind.ELLIPSE:
        qc = cfg or QuadratureConfig()
        used_horizon = decay_horizon(sys.a, qc.decay_tol, qc.max_horizon)

    if kind in (SetKind.REACH_INF, SetKind.REACH_ONE):
        signal = SignalNorm.INF
        if kind == SetKind.REACH_ONE:
            signal = SignalNorm.ONE
        h = reach_supports(sys, signal, used_horizon, dirs, cfg)
        h_next = np.roll(h, -1)
        d_next = np.roll(dirs, -1, axis=0)
        det = np.sin(2.0 * np.pi / n_dirs)
        x = (h * d_next[:, 1] - dirs[:, 1] * h_next) / det
        y = (dirs[:, 0] * h_next - d_next[:, 0] * h) / det
        return _checked(SetPolygon(kind, np.column_stack([x, y]), float(used_horizon)))

    if kind in (SetKind.OBS_ONE, SetKind.OBS_INF):
        signal = SignalNorm.ONE
        if kind == SetKind.OBS_INF:
            signal = SignalNorm.INF
        values = obs_norms(sys, signal, dirs, used_horizon, cfg)
        bounded = values >= UNOBSERVABLE_TOL
        if not bounded.all():
            logger.warning("%d of %d directions are unobservable; the set is unbounded there", int((~bounded).sum()), n_dirs)
        vertices = dirs[bounded] / values[bounded, None]
        return _checked(SetPolygon(kind, vertices, float(used_horizon)))

    if ellipsoid is None:
        raise InvalidConfig("an ellipsoid is required for ellipse boundaries")
    return SetPolygon(SetKind.ELLIPSE, ellipse_boundary(ellipsoid, n_dirs), 0.0)


def _checked(polygon: SetPolygon) -> SetPolygon:
    if not is_convex(polygon.vertices):
        logger.warning("sampled %s boundary is not convex; increase n_dirs or the quadrature grid", polygon.kind)
    return polygon


def ellipse_boundary(e: Ellipsoid, n_dirs: int = 360) -> np.ndarray:
    if e.n != 2:
        raise InvalidModel(f"ellipse boundaries need a 2-D ellipsoid, got n={e.n}")
    return e.boundary_points(_circle(n_dirs))


def is_convex(vertices: np.ndarray, tol: float = 1e-6) -> bool:
    """Consecutive edge cross products share one sign up to tol * max|v|^2."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return True
    edges = np.roll(v, -1, axis=0) - v
    nxt = np.roll(edges, -1, axis=0)
    cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
    scale = float(np.max(np.sum(v * v, axis=1)))
    return bool(np.all(cross >= -tol * scale) or np.all(cross <= tol * scale))


def reach_inclusion(polygon: SetPolygon, e: Ellipsoid) -> float:
    """Largest membership form over polygon vertices (<= 1 means inside)."""
    return float(np.max(e.quadratic_form(polygon.vertices)))


def obs_inclusion(sys: LtiSystem, kind: SignalNorm, e: Ellipsoid, directions, cfg: Optional[QuadratureConfig] = None) -> float:
    """Largest output norm over ellipsoid boundary samples (<= 1 means the ellipsoid lies in O_q)."""
    return float(np.max(obs_norms(sys, kind, e.boundary_points(directions), None, cfg)))

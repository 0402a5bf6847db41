"""Log-barrier solver for the LMI norms omega, circ and circ'.

The decision variable is the Lyapunov right-hand side R: the witness
P~ = L(R) solves A P~ + P~ A' + R = 0, so the stability constraint becomes
R > 0 and every remaining constraint is affine in R. Coordinates are taken
in the Frobenius-orthonormal basis of symmetric matrices. Q-side problems
are P-side problems of the dual system.
"""

import logging
import math
import warnings
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .errors import InfeasibleLmi, InvalidConfig, NumericalFailure
from .linmat import is_stable, lambda_max, lambda_min, lyap_solve, matexp, sym
from .models import EllipsoidForm
from .sysmodel import LtiSystem

logger = logging.getLogger(__name__)

ARMIJO = 0.25
LINE_SEARCH_HALVINGS = 60
BRACKET_PAD = 1e-9
SIDE_AGREEMENT = 1e-3
MAX_BISECTION = 80
UNBOUNDED = 1e12


@dataclass(frozen=True)
class BarrierConfig:
    mu0: float = 1.0
    mu_shrink: float = 0.2
    strict_margin: float = 1e-6  # relative to ||B B'||
    inner_tol: float = 1e-8
    max_outer: int = 30
    max_newton: int = 100
    gap_tol: float = 1e-9
    bisection_tol: float = 1e-4

    def __post_init__(self):
        if not self.mu0 > 0.0:
            raise InvalidConfig(f"mu0 must be positive, got {self.mu0}")
        if not 0.0 < self.mu_shrink < 1.0:
            raise InvalidConfig(f"mu_shrink must lie in (0, 1), got {self.mu_shrink}")
        if not self.strict_margin > 0.0:
            raise InvalidConfig(f"strict_margin must be positive, got {self.strict_margin}")
        if not self.inner_tol > 0.0 or not self.gap_tol > 0.0:
            raise InvalidConfig("barrier tolerances must be positive")
        if self.max_outer < 1 or self.max_newton < 1:
            raise InvalidConfig("iteration limits must be at least 1")
        if not 0.0 < self.bisection_tol < 1.0:
            raise InvalidConfig(f"bisection_tol must lie in (0, 1), got {self.bisection_tol}")


@dataclass(frozen=True, eq=False)
class LmiSolution:
    r: np.ndarray
    witness: np.ndarray
    objective: float
    kkt_residual: float  # duality gap nu / t at the returned point
    strictly_feasible: bool
    side: EllipsoidForm
    margins: tuple[float, ...] = ()
    history: tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class OmegaResult:
    value: float
    p_side: LmiSolution
    q_side: LmiSolution


# --- Symmetric coordinates ---------------------------------------------------


def sym_basis(n: int) -> np.ndarray:
    """Orthonormal basis of symmetric n x n matrices, shape (n(n+1)/2, n, n)."""
    basis = []
    for i in range(n):
        for j in range(i, n):
            e = np.zeros((n, n))
            if i == j:
                e[i, i] = 1.0
            else:
                e[i, j] = e[j, i] = 1.0 / math.sqrt(2.0)
            basis.append(e)
    return np.array(basis)


def svec(m: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.tensordot(basis, m, axes=([1, 2], [0, 1]))


def smat(x: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return np.tensordot(x, basis, axes=1)


# --- Generic barrier ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LmiBlock:
    """const + sum_i x_i coeffs[i], required to be positive definite."""

    const: np.ndarray
    coeffs: np.ndarray

    def at(self, x: np.ndarray) -> np.ndarray:
        return self.const + np.tensordot(x, self.coeffs, axes=1)


@dataclass
class BarrierPath:
    x: np.ndarray
    t: float
    gap: float
    history: list[float] = field(default_factory=list)
    newton_steps: int = 0
    stopped: bool = False
    converged: bool = False


def _newton_direction(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Solve h dx = -g; least squares when h is singular or ill-conditioned."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", linalg.LinAlgWarning)
        try:
            return linalg.solve(h, -g, assume_a="pos")
        except (linalg.LinAlgError, linalg.LinAlgWarning) as e:
            logger.debug("Newton system: %s; using least squares", e)
    return linalg.lstsq(h, -g)[0]


class LogBarrier:
    """minimize c'x subject to every block being positive definite, following the central path."""

    def __init__(self, c: np.ndarray, blocks: list[LmiBlock]):
        self.c = np.asarray(c, dtype=float)
        self.blocks = blocks

    @property
    def nu(self) -> int:
        return sum(b.const.shape[0] for b in self.blocks)

    def _factors(self, x: np.ndarray) -> Optional[list[np.ndarray]]:
        factors = []
        for b in self.blocks:
            try:
                factors.append(linalg.cholesky(sym(b.at(x)), lower=True))
            except (linalg.LinAlgError, ValueError):
                return None
        return factors

    def feasible(self, x: np.ndarray) -> bool:
        return self._factors(x) is not None

    def _logdet(self, x: np.ndarray) -> float:
        factors = self._factors(x)
        if factors is None:
            return -math.inf
        return float(sum(2.0 * np.sum(np.log(np.diag(f))) for f in factors))

    def value(self, x: np.ndarray, t: float) -> float:
        logdet = self._logdet(x)
        if logdet == -math.inf:
            return math.inf
        return t * float(self.c @ x) - logdet

    def derivatives(self, x: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Gradient and Hessian of value(., t); Hessian entries are tr(M^-1 D_i M^-1 D_k)."""
        factors = self._factors(x)
        if factors is None:
            raise NumericalFailure("barrier derivatives requested at an infeasible point")
        g = t * self.c.copy()
        h = np.zeros((len(x), len(x)))
        for b, f in zip(self.blocks, factors, strict=True):
            # W_i = F^-1 D_i F^-T with M = F F'
            w = np.array([linalg.solve_triangular(f, linalg.solve_triangular(f, d, lower=True).T, lower=True) for d in b.coeffs])
            g -= np.trace(w, axis1=1, axis2=2)
            flat = w.reshape(len(w), -1)
            h += flat @ flat.T
        return g, h

    def centre(self, x: np.ndarray, t: float, cfg: BarrierConfig, early: Optional[Callable[[np.ndarray], bool]] = None) -> tuple[np.ndarray, int, bool]:
        """Damped Newton with backtracking. Returns (x, steps, stopped_early)."""
        scale = 1.0 + float(np.linalg.norm(x))
        logdet = self._logdet(x)
        for steps in range(1, cfg.max_newton + 1):
            g, h = self.derivatives(x, t)
            dx = _newton_direction(h, g)
            decrement = float(-g @ dx)
            if decrement / 2.0 <= cfg.inner_tol:
                return x, steps, False

            # change in value computed without the large t * c'x term
            slope = t * float(self.c @ dx)
            step = 1.0
            for _ in range(LINE_SEARCH_HALVINGS):
                candidate = x + step * dx
                new_logdet = self._logdet(candidate)
                if new_logdet > -math.inf and step * slope - (new_logdet - logdet) <= -ARMIJO * step * decrement:
                    break
                step *= 0.5
            else:
                logger.debug("line search exhausted at t=%.3g (decrement %.3g); accepting the current centre", t, decrement)
                return x, steps, False

            x, logdet = candidate, new_logdet
            if not np.all(np.isfinite(x)):
                raise NumericalFailure("barrier iterate became non-finite")
            if np.linalg.norm(x) > UNBOUNDED * scale:
                raise NumericalFailure("barrier problem is unbounded below; (C, A) must be observable for P-side problems")
            if early is not None and early(x):
                return x, steps, True
        logger.debug("centring hit %d Newton steps at t=%.3g", cfg.max_newton, t)
        return x, cfg.max_newton, False

    def solve(
        self,
        x0: np.ndarray,
        cfg: BarrierConfig,
        early: Optional[Callable[[np.ndarray], bool]] = None,
        stop: Optional[Callable[[np.ndarray, float], bool]] = None,
    ) -> BarrierPath:
        """Outer loop: t starts at nu / (mu0 |c'x0|) and grows by 1 / mu_shrink per step."""
        if not self.feasible(x0):
            raise InfeasibleLmi("barrier starting point is not strictly feasible")
        tiny = np.finfo(float).tiny
        t = self.nu / (cfg.mu0 * max(abs(float(self.c @ x0)), tiny))
        x = x0
        path = BarrierPath(x=x, t=t, gap=self.nu / t)
        for outer in range(cfg.max_outer):
            x, steps, stopped = self.centre(x, t, cfg, early)
            path.newton_steps += steps
            path.x, path.t, path.gap = x, t, self.nu / t
            if stopped:
                path.stopped = True
                return path
            objective = float(self.c @ x)
            path.history.append(objective)
            logger.debug("barrier outer %d: objective %.12g, gap %.3g, %d Newton steps", outer, objective, path.gap, steps)
            if stop is not None and stop(x, t):
                path.stopped = True
                return path
            if path.gap <= cfg.gap_tol * max(abs(objective), tiny):
                path.converged = True
                return path
            t /= cfg.mu_shrink
        return path


# --- Lyapunov-parameterized problems ------------------------------------------


class LyapunovLmi:
    """R - eps I > 0 and L(R) - B B' - eps I > 0, optionally level I - C L(R) C' > 0."""

    def __init__(self, sys: LtiSystem, cfg: BarrierConfig):
        if not is_stable(sys.a):
            raise InfeasibleLmi("no strictly feasible R exists: A is not stable")
        self.sys = sys
        self.cfg = cfg
        self.basis = sym_basis(sys.n)
        self.images = np.array([lyap_solve(sys.a, e) for e in self.basis])
        self.bbt = sys.b @ sys.b.T
        size = float(np.linalg.norm(self.bbt, 2))
        if size == 0.0:
            size = 1.0
        self.eps = cfg.strict_margin * size
        self.outputs = np.array([sys.c @ f @ sys.c.T for f in self.images])
        self.cost = np.trace(self.outputs, axis1=1, axis2=2)

    def lyap(self, r: np.ndarray) -> np.ndarray:
        return lyap_solve(self.sys.a, r)

    def blocks(self, level: Optional[float] = None, phase_one: bool = False) -> list[LmiBlock]:
        eye = np.eye(self.sys.n)
        blocks = [LmiBlock(-self.eps * eye, self.basis), LmiBlock(-self.bbt - self.eps * eye, self.images)]
        if level is not None:
            blocks.append(LmiBlock(level * np.eye(self.sys.k), -self.outputs))
        if phase_one:
            blocks = [LmiBlock(b.const, np.concatenate([b.coeffs, np.eye(len(b.const))[None]])) for b in blocks]
        return blocks

    def start(self) -> np.ndarray:
        """R = gamma I with gamma L(I) > B B' + eps I."""
        n = self.sys.n
        base = self.lyap(np.eye(n))
        rho = float(linalg.eigh(self.bbt + self.eps * np.eye(n), base, eigvals_only=True)[-1])
        gamma = 2.0 * max(rho, self.eps) + self.eps
        return svec(gamma * np.eye(n), self.basis)

    def solution(self, x: np.ndarray, path: BarrierPath, side: EllipsoidForm, level: Optional[float] = None) -> LmiSolution:
        r = sym(smat(x, self.basis))
        witness = sym(np.tensordot(x, self.images, axes=1))
        output = self.sys.c @ witness @ self.sys.c.T
        margins = [lambda_min(r), lambda_min(witness - self.bbt)]
        objective = float(np.trace(output))
        if level is not None:
            margins.append(level - lambda_max(output))
            objective = lambda_max(output)
        strictly = all(m >= self.eps / 2.0 for m in margins[:2]) and all(m > 0.0 for m in margins[2:])
        return LmiSolution(
            r=r,
            witness=witness,
            objective=objective,
            kkt_residual=path.gap,
            strictly_feasible=strictly,
            side=side,
            margins=tuple(margins),
            history=tuple(path.history),
        )

    def level_point(self, level: float, x_start: np.ndarray) -> Optional[np.ndarray]:
        """Phase I: minimize s with every block shifted by s I; a negative s certifies feasibility."""
        blocks = self.blocks(level, phase_one=True)
        c = np.zeros(len(x_start) + 1)
        c[-1] = 1.0
        barrier = LogBarrier(c, blocks)
        lowest = min(lambda_min(b.at(np.append(x_start, 0.0))) for b in blocks)
        s0 = 1.1 * max(0.0, -lowest) + 0.1 * max(level, self.eps)
        nu = barrier.nu
        path = barrier.solve(
            np.append(x_start, s0),
            self.cfg,
            early=lambda x: x[-1] < 0.0,
            stop=lambda x, t: x[-1] - nu / t > 0.0,
        )
        if path.x[-1] < 0.0:
            return path.x[:-1]
        if not path.stopped:
            logger.debug("phase I undecided at level %.9g after %d outer steps; treating as infeasible", level, self.cfg.max_outer)
        return None


def _min_trace(sys: LtiSystem, cfg: BarrierConfig, side: EllipsoidForm) -> LmiSolution:
    problem = LyapunovLmi(sys, cfg)
    barrier = LogBarrier(problem.cost, problem.blocks())
    path = barrier.solve(problem.start(), cfg)
    if not path.converged:
        logger.warning("%s-side trace problem stopped with duality gap %.3g after %d outer steps", side, path.gap, cfg.max_outer)
    solution = problem.solution(path.x, path, side)
    logger.info("min trace (%s side) %.9g, gap %.3g, %d Newton steps", side, solution.objective, path.gap, path.newton_steps)
    return solution


def min_trace_p(sys: LtiSystem, cfg: Optional[BarrierConfig] = None) -> LmiSolution:
    """min tr(C P~ C') over P~ > B B' with A P~ + P~ A' < 0 (circ-norm squared)."""
    return _min_trace(sys, cfg or BarrierConfig(), EllipsoidForm.P)


def min_trace_q(sys: LtiSystem, cfg: Optional[BarrierConfig] = None) -> LmiSolution:
    """min tr(B' Q~ B) over Q~ > C'C with Q~ A + A' Q~ < 0 (circ'-norm squared)."""
    return _min_trace(sys.dual(), cfg or BarrierConfig(), EllipsoidForm.Q)


def _min_level(sys: LtiSystem, cfg: BarrierConfig, side: EllipsoidForm, start: Optional[LmiSolution]) -> LmiSolution:
    """Bisection on the level of lambda_max(C P~ C') between lambda_max(C B B' C') and the trace witness."""
    problem = LyapunovLmi(sys, cfg)
    if start is None:
        start = _min_trace(sys, cfg, side)
    x_hi = svec(start.r, problem.basis)
    hi = lambda_max(sys.c @ start.witness @ sys.c.T) * (1.0 + BRACKET_PAD)
    lo = lambda_max(sys.c @ problem.bbt @ sys.c.T)
    path = BarrierPath(x=x_hi, t=math.inf, gap=start.kkt_residual)

    for step in range(MAX_BISECTION):
        if hi - lo <= cfg.bisection_tol * hi:
            break
        mid = 0.5 * (lo + hi)
        x = problem.level_point(mid, x_hi)
        if x is None:
            lo = mid
        else:
            hi, x_hi = mid, x
        logger.debug("%s-side bisection %d: [%.9g, %.9g]", side, step, lo, hi)

    path.x = x_hi
    path.gap = hi - lo
    return problem.solution(x_hi, path, side, level=hi)


def omega_norm(
    sys: LtiSystem,
    cfg: Optional[BarrierConfig] = None,
    circ: Optional[LmiSolution] = None,
    circ_prime: Optional[LmiSolution] = None,
) -> OmegaResult:
    """sqrt(min lambda_max(C P~ C')) from both sides; the two values must agree within 1e-3.

    circ / circ_prime are optional trace-problem solutions used as starting brackets.
    """
    cfg = cfg or BarrierConfig()
    p_side = _min_level(sys, cfg, EllipsoidForm.P, circ)
    q_side = _min_level(sys.dual(), cfg, EllipsoidForm.Q, circ_prime)
    p_value = math.sqrt(max(p_side.objective, 0.0))
    q_value = math.sqrt(max(q_side.objective, 0.0))
    if abs(p_value - q_value) > SIDE_AGREEMENT * max(p_value, q_value):
        raise NumericalFailure(f"omega sides disagree: P side {p_value:.9g}, Q side {q_value:.9g}")
    logger.info("omega-norm %.9g (P side %.9g, Q side %.9g)", min(p_value, q_value), p_value, q_value)
    return OmegaResult(value=min(p_value, q_value), p_side=p_side, q_side=q_side)


def witness_bound_gap(sys: LtiSystem, witness: LmiSolution, t_samples) -> float:
    """Largest eigenvalue of e^{A't} C'C e^{At} - Q~ (or e^{At} B B' e^{A't} - P~) over the samples."""
    worst = -math.inf
    for t in t_samples:
        e = matexp(sys.a, float(t))
        if witness.side == EllipsoidForm.Q:
            bound = e.T @ sys.c.T @ sys.c @ e
        else:
            bound = e @ sys.b @ sys.b.T @ e.T
        worst = max(worst, lambda_max(bound - witness.witness))
    return worst

"""eps-norm optimal synthesis: state feedback, filtering and output feedback.

For a fixed alpha each problem reduces to one (or two dual) algebraic Riccati
equations of the system shifted by alpha/2, solved by Newton-Kleinman
iteration; alpha itself is chosen by a global grid scan plus refinement.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import linalg

from .alphasearch import AlphaSearchConfig, AlphaSearchResult, minimize_over_alpha
from .errors import EpsctlError, InvalidConfig, InvalidModel, NumericalFailure
from .linmat import eig_sym, is_spd, lyap_solve, spectral_abscissa, sym
from .models import PlantKind, Realization, SeparationReport, SubproblemSummary, SynthesisResult
from .norms import eps_norm
from .sysmodel import MAX_CONDITION, FilterPlant, LtiSystem, OfPlant, SfPlant, ensure_valid

logger = logging.getLogger(__name__)

POLISH_STEPS = 2
PSD_TOL = 1e-9

StateFeedbackPlant = Union[SfPlant, OfPlant]
FilteringPlant = Union[FilterPlant, OfPlant]


@dataclass(frozen=True)
class SynthesisConfig:
    search: AlphaSearchConfig = field(default_factory=AlphaSearchConfig)
    residual_tol: float = 1e-10
    residual_fail: float = 1e-9
    max_iter: int = 50
    identity_warn: float = 1e-8
    identity_fail: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.residual_tol <= self.residual_fail:
            raise InvalidConfig("need 0 < residual_tol <= residual_fail")
        if self.max_iter < 1:
            raise InvalidConfig(f"max_iter must be at least 1, got {self.max_iter}")
        if not 0.0 < self.identity_warn <= self.identity_fail:
            raise InvalidConfig("need 0 < identity_warn <= identity_fail")


@dataclass(frozen=True, eq=False)
class RiccatiSolution:
    x: np.ndarray
    alpha: float
    residual: float
    stabilizing: bool
    iterations: int = 0


# --- Riccati -----------------------------------------------------------------


def _weight_factor(r: np.ndarray, name: str):
    cond = np.linalg.cond(r)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise InvalidModel(f"{name} is singular or ill-conditioned (condition number {cond:.3g})")
    return linalg.cho_factor(r, lower=True)


def _riccati_residual(a: np.ndarray, g: np.ndarray, w: np.ndarray, x: np.ndarray) -> float:
    """Relative residual of A'X + XA - XGX + W = 0."""
    res = a.T @ x + x @ a - x @ g @ x + w
    scale = 2.0 * np.linalg.norm(a) * np.linalg.norm(x) + np.linalg.norm(x) ** 2 * np.linalg.norm(g) + np.linalg.norm(w)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(res) / scale)


def solve_alpha_riccati(a, b, c, d, alpha: float, cfg: Optional[SynthesisConfig] = None) -> RiccatiSolution:
    """Solve X A + A'X + alpha X - alpha X B (D'D)^-1 B' X + C'C / alpha = 0.

    This is the standard Riccati equation of (A + alpha/2 I, sqrt(alpha) B) with
    weights C'C / alpha and D'D; the solution comes from Newton-Kleinman steps,
    polished past the convergence tolerance. The returned X is stabilizing and
    positive semidefinite, otherwise NumericalFailure is raised.
    """
    cfg = cfg or SynthesisConfig()
    if not alpha > 0.0:
        raise InvalidConfig(f"alpha must be positive, got {alpha}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    d = np.asarray(d, dtype=float)
    n = a.shape[0]

    r = d.T @ d
    rc = _weight_factor(r, "D'D")
    at = a + 0.5 * alpha * np.eye(n)
    bt = math.sqrt(alpha) * b
    w = c.T @ c / alpha
    g = bt @ linalg.cho_solve(rc, bt.T)

    x = None
    residual = math.inf
    iterations = 0
    f = _initial_gain(at, bt, rc, g)
    if f is not None:
        try:
            x, residual, iterations = _newton_kleinman(at, bt, rc, r, g, w, f, cfg)
        except EpsctlError as e:
            logger.debug("Newton-Kleinman failed at alpha=%.6g: %s", alpha, e)
            x = None
    if x is None or residual > cfg.residual_tol or not _admissible(at, g, x):
        logger.warning("falling back to the Schur-based Riccati solver at alpha=%.6g", alpha)
        x, residual = _schur_solution(at, bt, w, r, g, rc, cfg, alpha, x, residual)

    if not np.all(np.isfinite(x)) or residual > cfg.residual_fail:
        raise NumericalFailure(f"Riccati iteration did not converge at alpha={alpha:.6g} (residual {residual:.3g})")
    if spectral_abscissa(at - g @ x) >= 0.0:
        raise NumericalFailure(f"Riccati solution at alpha={alpha:.6g} is not stabilizing")
    lowest = float(eig_sym(x)[0][0])
    if lowest < -PSD_TOL * max(float(np.linalg.norm(x, 2)), np.finfo(float).tiny):
        raise NumericalFailure(f"Riccati solution at alpha={alpha:.6g} is indefinite (smallest eigenvalue {lowest:.3g})")
    if residual > cfg.residual_tol:
        logger.warning("Riccati residual %.3g at alpha=%.6g is above %.0e", residual, alpha, cfg.residual_tol)
    return RiccatiSolution(x=x, alpha=alpha, residual=residual, stabilizing=True, iterations=iterations)


def _newton_kleinman(at, bt, rc, r, g, w, f, cfg: SynthesisConfig) -> tuple[np.ndarray, float, int]:
    """Kleinman iteration from a stabilizing gain; after convergence POLISH_STEPS more steps keep the best iterate."""
    best_x = None
    best = math.inf
    previous = math.inf
    polished = 0
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        try:
            x = lyap_solve((at - bt @ f).T, w + f.T @ r @ f)
        except EpsctlError:
            if best <= cfg.residual_tol:
                break
            raise
        f = linalg.cho_solve(rc, bt.T @ x)
        residual = _riccati_residual(at, g, w, x)
        if residual < best:
            best_x, best = x, residual
        if best <= cfg.residual_tol:
            polished += 1
            if polished > POLISH_STEPS:
                break
        elif iterations > 2 and residual >= previous:
            break
        previous = residual
    logger.debug("Newton-Kleinman: %d iterations, residual %.3g", iterations, best)
    if best_x is None:
        raise NumericalFailure("Newton-Kleinman produced no iterate")
    return best_x, best, iterations


def _schur_solution(at, bt, w, r, g, rc, cfg: SynthesisConfig, alpha: float, x_nk, res_nk) -> tuple[np.ndarray, float]:
    """scipy's Schur-based solver, polished by Newton steps; the Kleinman result wins when it is better and admissible."""
    try:
        x = sym(linalg.solve_continuous_are(at, bt, w, r))
    except (linalg.LinAlgError, ValueError) as e:
        if x_nk is not None and _admissible(at, g, x_nk):
            return x_nk, res_nk
        raise NumericalFailure(f"Riccati equation has no stabilizing solution at alpha={alpha:.6g}: {e}") from e
    residual = _riccati_residual(at, g, w, x)
    if np.all(np.isfinite(x)) and spectral_abscissa(at - g @ x) < 0.0:
        try:
            polished, res_polished, _ = _newton_kleinman(at, bt, rc, r, g, w, linalg.cho_solve(rc, bt.T @ x), cfg)
        except EpsctlError:
            polished = None
        if polished is not None and res_polished < residual and _admissible(at, g, polished):
            x, residual = polished, res_polished
    if x_nk is not None and res_nk < residual and _admissible(at, g, x_nk):
        return x_nk, res_nk
    return x, residual


def _admissible(at: np.ndarray, g: np.ndarray, x: np.ndarray) -> bool:
    """Finite, stabilizing and positive semidefinite up to PSD_TOL."""
    if not np.all(np.isfinite(x)):
        return False
    if spectral_abscissa(at - g @ x) >= 0.0:
        return False
    lowest = float(eig_sym(x)[0][0])
    return lowest >= -PSD_TOL * max(float(np.linalg.norm(x, 2)), np.finfo(float).tiny)


def _initial_gain(at: np.ndarray, bt: np.ndarray, rc, g: np.ndarray) -> Optional[np.ndarray]:
    """Zero when A is already stable, otherwise the Bass gain R^-1 B' Z^-1 if it stabilizes."""
    n = at.shape[0]
    if spectral_abscissa(at) < 0.0:
        return np.zeros((bt.shape[1], n))
    beta = float(np.linalg.norm(at)) + 1.0
    # (A + beta I) Z + Z (A + beta I)' = 2 G
    try:
        z = lyap_solve(-(at + beta * np.eye(n)), 2.0 * g)
    except EpsctlError:
        return None
    if not is_spd(z, 1e-12):
        return None
    f = linalg.cho_solve(rc, bt.T @ np.linalg.inv(z))
    if spectral_abscissa(at - bt @ f) >= 0.0:
        return None
    return f


def ric_q(plant: StateFeedbackPlant, alpha: float, cfg: Optional[SynthesisConfig] = None) -> RiccatiSolution:
    sf = _as_sf(plant)
    return solve_alpha_riccati(sf.a, sf.b, sf.c, sf.d, alpha, cfg)


def ric_p(plant: FilteringPlant, alpha: float, cfg: Optional[SynthesisConfig] = None) -> RiccatiSolution:
    """Filter Riccati: the state-feedback equation of the transposed data (A', C', B', D')."""
    fp = _as_filter(plant)
    return solve_alpha_riccati(fp.a.T, fp.c.T, fp.b.T, fp.d.T, alpha, cfg)


def _as_sf(plant: StateFeedbackPlant) -> SfPlant:
    if isinstance(plant, OfPlant):
        return plant.state_feedback_part()
    if isinstance(plant, SfPlant):
        return plant
    raise InvalidModel(f"expected a state-feedback or output-feedback plant, got {type(plant).__name__}")


def _as_filter(plant: FilteringPlant) -> FilterPlant:
    if isinstance(plant, OfPlant):
        return plant.filter_part()
    if isinstance(plant, FilterPlant):
        return plant
    raise InvalidModel(f"expected a filtering or output-feedback plant, got {type(plant).__name__}")


def sf_gain(sol: RiccatiSolution, plant: StateFeedbackPlant) -> np.ndarray:
    """K = -alpha (D'D)^-1 B' Q."""
    sf = _as_sf(plant)
    return -sol.alpha * np.linalg.solve(sf.d.T @ sf.d, sf.b.T @ sol.x)


def filter_gain(sol: RiccatiSolution, plant: FilteringPlant) -> np.ndarray:
    """L = -alpha P C' (D D')^-1."""
    fp = _as_filter(plant)
    return -sol.alpha * np.linalg.solve(fp.d @ fp.d.T, fp.c @ sol.x).T


# --- Closed loops ------------------------------------------------------------


def state_feedback_loop(plant: SfPlant, k: np.ndarray) -> LtiSystem:
    """S_K: w -> z under u = K x."""
    k = np.asarray(k, dtype=float)
    return LtiSystem(plant.a + plant.b @ k, plant.bw, plant.c + plant.d @ k, name=plant.name)


def filter_error_system(plant: FilterPlant, l: np.ndarray) -> LtiSystem:
    """S_L: w -> Cz e for the estimation error e = x - x_hat."""
    l = np.asarray(l, dtype=float)
    return LtiSystem(plant.a + l @ plant.c, plant.b + l @ plant.d, plant.cz, name=plant.name)


def closed_loop(plant: OfPlant, k, l, realization: Realization = Realization.STATE_ERROR) -> LtiSystem:
    """Observer-based output feedback u = K x_hat, in (x, e) or (x_hat, e) coordinates."""
    k = np.asarray(k, dtype=float)
    l = np.asarray(l, dtype=float)
    n = plant.n
    if k.shape != (plant.b2.shape[1], n) or l.shape != (n, plant.c1.shape[0]):
        raise InvalidModel(f"gain shapes K{k.shape}, L{l.shape} do not fit the plant")
    a, b1, b2, c1, c2, d1, d2 = plant.a, plant.b1, plant.b2, plant.c1, plant.c2, plant.d1, plant.d2
    zero = np.zeros((n, n))
    error_a = a + l @ c1
    error_b = b1 + l @ d1
    if realization == Realization.STATE_ERROR:
        big_a = np.block([[a + b2 @ k, -b2 @ k], [zero, error_a]])
        big_b = np.vstack([b1, error_b])
        big_c = np.hstack([c2 + d2 @ k, -d2 @ k])
    elif realization == Realization.ESTIMATE_ERROR:
        big_a = np.block([[a + b2 @ k, -l @ c1], [zero, error_a]])
        big_b = np.vstack([-l @ d1, error_b])
        big_c = np.hstack([c2 + d2 @ k, c2])
    else:
        raise InvalidModel(f"unknown realization: {realization}")
    return LtiSystem(big_a, big_b, big_c, name=plant.name)


# --- Synthesis ---------------------------------------------------------------


def _root(squared: float, alpha: float) -> float:
    if not squared >= 0.0:
        raise NumericalFailure(f"negative squared norm {squared:.3g} at alpha={alpha:.6g}")
    return math.sqrt(squared)


def _search(objective, cfg: SynthesisConfig) -> AlphaSearchResult:
    s = cfg.search
    result = minimize_over_alpha(objective, s, s.grid_min, s.grid_max)
    if result.at_upper:
        logger.warning("optimal alpha %.6g sits at the upper grid bound; the minimizer may be at infinity", result.alpha)
    if result.at_lower:
        logger.warning("optimal alpha %.6g sits at the lower grid bound", result.alpha)
    return result


def synth_state_feedback(plant: SfPlant, cfg: Optional[SynthesisConfig] = None) -> SynthesisResult:
    cfg = cfg or SynthesisConfig()
    ensure_valid(plant)

    def objective(alpha: float) -> float:
        q = ric_q(plant, alpha, cfg).x
        return _root(float(np.trace(plant.bw.T @ q @ plant.bw)), alpha)

    search = _search(objective, cfg)
    sol = ric_q(plant, search.alpha, cfg)
    k = sf_gain(sol, plant)
    abscissa = spectral_abscissa(plant.a + plant.b @ k)
    if abscissa >= 0.0:
        raise NumericalFailure(f"state feedback gain does not stabilize (spectral abscissa {abscissa:.3g})")
    logger.info("state feedback: eps-norm %.9g at alpha %.6g", search.value, search.alpha)
    return SynthesisResult(
        kind=PlantKind.SF,
        k=k.tolist(),
        alpha_hat=search.alpha,
        eps_norm=search.value,
        boundary_flag=search.at_upper,
        low_boundary_flag=search.at_lower,
        curve=search.curve,
        local_minima=search.local_minima,
        closed_loop_abscissa=abscissa,
    )


def synth_filter(plant: FilterPlant, cfg: Optional[SynthesisConfig] = None) -> SynthesisResult:
    cfg = cfg or SynthesisConfig()
    ensure_valid(plant)

    def objective(alpha: float) -> float:
        p = ric_p(plant, alpha, cfg).x
        return _root(float(np.trace(plant.cz @ p @ plant.cz.T)), alpha)

    search = _search(objective, cfg)
    sol = ric_p(plant, search.alpha, cfg)
    l = filter_gain(sol, plant)
    abscissa = spectral_abscissa(plant.a + l @ plant.c)
    if abscissa >= 0.0:
        raise NumericalFailure(f"filter gain does not stabilize the error dynamics (spectral abscissa {abscissa:.3g})")
    logger.info("filter: eps-norm %.9g at alpha %.6g", search.value, search.alpha)
    return SynthesisResult(
        kind=PlantKind.FILTER,
        l=l.tolist(),
        alpha_hat=search.alpha,
        eps_norm=search.value,
        boundary_flag=search.at_upper,
        low_boundary_flag=search.at_lower,
        curve=search.curve,
        local_minima=search.local_minima,
        closed_loop_abscissa=abscissa,
    )


@dataclass(frozen=True, eq=False)
class OutputFeedbackPoint:
    """Gains and both trace forms of the closed-loop eps(alpha)-norm at one alpha."""

    alpha: float
    k: np.ndarray
    l: np.ndarray
    form_a: float
    form_b: float

    @property
    def gap(self) -> float:
        return abs(self.form_a - self.form_b) / max(abs(self.form_a), np.finfo(float).tiny)


def output_feedback_point(plant: OfPlant, alpha: float, cfg: Optional[SynthesisConfig] = None) -> OutputFeedbackPoint:
    cfg = cfg or SynthesisConfig()
    q = ric_q(plant, alpha, cfg)
    p = ric_p(plant, alpha, cfg)
    k = sf_gain(q, plant)
    l = filter_gain(p, plant)
    d2k = plant.d2 @ k
    ld1 = l @ plant.d1
    form_a = float(np.trace(plant.b1.T @ q.x @ plant.b1) + np.trace(d2k @ p.x @ d2k.T))
    form_b = float(np.trace(plant.c2 @ p.x @ plant.c2.T) + np.trace(ld1.T @ q.x @ ld1))
    point = OutputFeedbackPoint(alpha=alpha, k=k, l=l, form_a=form_a, form_b=form_b)
    if point.gap > cfg.identity_fail:
        raise NumericalFailure(f"trace forms disagree at alpha={alpha:.6g}: {form_a:.12g} vs {form_b:.12g}")
    if point.gap > cfg.identity_warn:
        logger.warning("trace forms differ by %.3g at alpha=%.6g", point.gap, alpha)
    return point


def synth_output_feedback(plant: OfPlant, cfg: Optional[SynthesisConfig] = None) -> SynthesisResult:
    cfg = cfg or SynthesisConfig()
    ensure_valid(plant)
    gaps: list[float] = []

    def objective(alpha: float) -> float:
        point = output_feedback_point(plant, alpha, cfg)
        gaps.append(point.gap)
        return _root(point.form_a, alpha)

    search = _search(objective, cfg)
    best = output_feedback_point(plant, search.alpha, cfg)
    gaps.append(best.gap)
    loop = closed_loop(plant, best.k, best.l)
    abscissa = spectral_abscissa(loop.a)
    if abscissa >= 0.0:
        raise NumericalFailure(f"output feedback loop is not stable (spectral abscissa {abscissa:.3g})")
    logger.info("output feedback: eps-norm %.9g at alpha %.6g (identity gap %.3g)", search.value, search.alpha, max(gaps))
    return SynthesisResult(
        kind=PlantKind.OF,
        k=best.k.tolist(),
        l=best.l.tolist(),
        alpha_hat=search.alpha,
        eps_norm=search.value,
        boundary_flag=search.at_upper,
        low_boundary_flag=search.at_lower,
        curve=search.curve,
        local_minima=search.local_minima,
        norm_form_a=best.form_a,
        norm_form_b=best.form_b,
        identity_gap=max(gaps),
        closed_loop_abscissa=abscissa,
    )


def synthesize(plant, cfg: Optional[SynthesisConfig] = None) -> SynthesisResult:
    if isinstance(plant, OfPlant):
        return synth_output_feedback(plant, cfg)
    if isinstance(plant, SfPlant):
        return synth_state_feedback(plant, cfg)
    if isinstance(plant, FilterPlant):
        return synth_filter(plant, cfg)
    raise InvalidModel(f"cannot synthesize for {type(plant).__name__}")


def separation_gap(plant: OfPlant, cfg: Optional[SynthesisConfig] = None, analysis: Optional[AlphaSearchConfig] = None) -> SeparationReport:
    """Compare the jointly optimal loop with one built from separately optimal K and L."""
    cfg = cfg or SynthesisConfig()
    sf = synth_state_feedback(plant.state_feedback_part(), cfg)
    fl = synth_filter(plant.filter_part(), cfg)
    joint = synth_output_feedback(plant, cfg)

    mixed_loop = closed_loop(plant, sf.k, fl.l)
    if spectral_abscissa(mixed_loop.a) >= 0.0:
        raise NumericalFailure("separately designed gains do not stabilize the loop")
    mixed = eps_norm(mixed_loop, analysis or AlphaSearchConfig())
    gap = mixed.value - joint.eps_norm
    if gap < -1e-9 * joint.eps_norm:
        logger.warning("separately designed loop beats the joint optimum by %.3g", -gap)
    return SeparationReport(
        state_feedback=SubproblemSummary(alpha_hat=sf.alpha_hat, eps_norm=sf.eps_norm, boundary_flag=sf.boundary_flag),
        filtering=SubproblemSummary(alpha_hat=fl.alpha_hat, eps_norm=fl.eps_norm, boundary_flag=fl.boundary_flag),
        joint=SubproblemSummary(alpha_hat=joint.alpha_hat, eps_norm=joint.eps_norm, boundary_flag=joint.boundary_flag),
        mixed_alpha_hat=mixed.alpha,
        mixed_eps_norm=mixed.value,
        gap=gap,
    )

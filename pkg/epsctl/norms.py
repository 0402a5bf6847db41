"""System norms: H2, energy-to-peak, impulse-to-energy, eps(alpha), eps, star, star'.

Also the time-domain oracles for the four gains bounded by those norms and the
sum / series compositions of two systems.
"""

import logging
import math
from typing import Optional

import numpy as np

from .alphasearch import AlphaSearchConfig, AlphaSearchResult, minimize_over_alpha
from .ellipsoids import p_matrix, q_matrix
from .errors import InvalidModel, NumericalFailure
from .linmat import lambda_max, matexp, spectral_abscissa
from .lmi import BarrierConfig, min_trace_p, min_trace_q, omega_norm
from .models import ChainCheck, GainEstimates, GainKind, NormReport
from .sysmodel import LtiSystem, gramians
from .timegrid import QuadratureConfig, TimeGrid

logger = logging.getLogger(__name__)

TRACE_WARN_TOL = 1e-9
TRACE_FAIL_TOL = 1e-6
WINDOW_FRACTION = 0.999
ORACLE_SLACK = 1e-3
CIRCLE_DIRECTIONS = 256
SPHERE_DIRECTIONS = 2048
RANDOM_DIRECTIONS = 4096
_CHUNK = 64


def h2_norm(sys: LtiSystem) -> float:
    p, q = gramians(sys)
    value = float(np.trace(sys.c @ p @ sys.c.T))
    _check_trace_identity(value, float(np.trace(sys.b.T @ q @ sys.b)), "H2")
    return math.sqrt(max(value, 0.0))


def peak_norms(sys: LtiSystem) -> tuple[float, float]:
    """(energy-to-peak, impulse-to-energy) from the largest eigenvalues of C P C' and B' Q B."""
    p, q = gramians(sys)
    e2p = lambda_max(sys.c @ p @ sys.c.T)
    i2e = lambda_max(sys.b.T @ q @ sys.b)
    return math.sqrt(max(e2p, 0.0)), math.sqrt(max(i2e, 0.0))


def _check_trace_identity(from_p: float, from_q: float, label: str) -> None:
    gap = abs(from_p - from_q) / max(abs(from_p), np.finfo(float).tiny)
    if gap > TRACE_FAIL_TOL:
        raise NumericalFailure(f"{label} trace identity broken: tr(CPC')={from_p:.12g}, tr(B'QB)={from_q:.12g}")
    if gap > TRACE_WARN_TOL:
        logger.warning("%s trace identity gap %.3g above %.0e", label, gap, TRACE_WARN_TOL)


def eps_alpha(sys: LtiSystem, alpha: float) -> float:
    """sqrt(tr C P_alpha C'), cross-checked against sqrt(tr B' Q_alpha B)."""
    p = p_matrix(sys, alpha)
    q = q_matrix(sys, alpha)
    value = float(np.trace(sys.c @ p @ sys.c.T))
    _check_trace_identity(value, float(np.trace(sys.b.T @ q @ sys.b)), f"eps(alpha={alpha:.6g})")
    return math.sqrt(max(value, 0.0))


def analysis_range(sys: LtiSystem, cfg: AlphaSearchConfig) -> tuple[float, float]:
    """Scan range for the analysis family: [grid_min, min(grid_max, 0.999 * (-2r))]."""
    r = spectral_abscissa(sys.a)
    if r >= 0.0:
        raise InvalidModel(f"system is unstable (spectral abscissa {r:.6g})")
    hi = min(cfg.grid_max, WINDOW_FRACTION * (-2.0 * r))
    lo = cfg.grid_min
    if lo >= hi:
        lo = hi * 1e-4
        logger.warning("alpha window (0, %.3g) is below the configured grid minimum; scanning from %.3g", -2.0 * r, lo)
    return lo, hi


def eps_norm(sys: LtiSystem, cfg: Optional[AlphaSearchConfig] = None) -> AlphaSearchResult:
    cfg = cfg or AlphaSearchConfig()
    lo, hi = analysis_range(sys, cfg)
    result = minimize_over_alpha(lambda a: eps_alpha(sys, a), cfg, lo, hi)
    logger.info("eps-norm %.9g at alpha %.6g", result.value, result.alpha)
    return result


def star_norms(sys: LtiSystem, cfg: Optional[AlphaSearchConfig] = None) -> tuple[AlphaSearchResult, AlphaSearchResult]:
    """Independent alpha searches for sqrt(min lambda_max(C P_a C')) and sqrt(min lambda_max(B' Q_a B))."""
    cfg = cfg or AlphaSearchConfig()
    lo, hi = analysis_range(sys, cfg)

    def star(alpha: float) -> float:
        return math.sqrt(max(lambda_max(sys.c @ p_matrix(sys, alpha) @ sys.c.T), 0.0))

    def star_prime(alpha: float) -> float:
        return math.sqrt(max(lambda_max(sys.b.T @ q_matrix(sys, alpha) @ sys.b), 0.0))

    return minimize_over_alpha(star, cfg, lo, hi), minimize_over_alpha(star_prime, cfg, lo, hi)


# --- Gain oracles ------------------------------------------------------------


def unit_directions(dim: int, seed: int = 0) -> np.ndarray:
    """Sample of the unit sphere in R^dim, rows; exactly [[1]] in one dimension."""
    if dim == 1:
        return np.ones((1, 1))
    if dim == 2:
        # antipodal directions give the same norms
        theta = np.pi * np.arange(CIRCLE_DIRECTIONS) / CIRCLE_DIRECTIONS
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if dim == 3:
        i = np.arange(SPHERE_DIRECTIONS) + 0.5
        z = 1.0 - 2.0 * i / SPHERE_DIRECTIONS
        rho = np.sqrt(1.0 - z * z)
        phi = np.pi * (1.0 + math.sqrt(5.0)) * i
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((RANDOM_DIRECTIONS, dim))
    return dirs / np.linalg.norm(dirs, axis=1)[:, None]


def oracle_is_sampled(sys: LtiSystem, kind: GainKind) -> bool:
    """True when the oracle maximizes over a finite sample of directions (a lower bound)."""
    if kind == GainKind.PEAK_TO_PEAK:
        return sys.k > 1
    if kind == GainKind.IMPULSE_TO_INTEGRAL:
        return sys.m > 1
    return False


def _max_integral(grid: TimeGrid, h: np.ndarray, dirs: np.ndarray) -> float:
    """max over rows d of dirs of the integral of |h(t) d|; h has shape (N, p, dim)."""
    best = 0.0
    for start in range(0, len(dirs), _CHUNK):
        chunk = dirs[start : start + _CHUNK]
        values = np.linalg.norm(np.einsum("jpn,dn->jdp", h, chunk), axis=2)
        best = max(best, float(np.max(grid.integrate(values))))
    return best


def gain_oracle(sys: LtiSystem, kind: GainKind, cfg: Optional[QuadratureConfig] = None, seed: int = 0) -> float:
    """Time-domain value of one of the four gains from the impulse response h(t) = C e^{At} B."""
    grid = TimeGrid.build(sys.a, None, cfg)
    h = grid.response(sys.c, sys.b)

    if kind == GainKind.PEAK_TO_PEAK:
        # max over |zeta| = 1 of the integral of |h(t)' zeta|
        return _max_integral(grid, np.transpose(h, (0, 2, 1)), unit_directions(sys.k, seed))
    if kind == GainKind.IMPULSE_TO_INTEGRAL:
        return _max_integral(grid, h, unit_directions(sys.m, seed))
    if kind in (GainKind.INTEGRAL_TO_PEAK, GainKind.IMPULSE_TO_PEAK):
        sigma = np.linalg.norm(h, ord=2, axis=(1, 2))
        value, t_peak = grid.peak(sigma, lambda t: float(np.linalg.norm(sys.c @ matexp(sys.a, t) @ sys.b, 2)))
        logger.debug("%s gain %.9g at t=%.6g", kind, value, t_peak)
        return value
    raise InvalidModel(f"unknown gain kind: {kind}")


def gain_estimates(sys: LtiSystem, cfg: Optional[QuadratureConfig] = None, seed: int = 0) -> GainEstimates:
    return GainEstimates(
        peak_to_peak=gain_oracle(sys, GainKind.PEAK_TO_PEAK, cfg, seed),
        impulse_to_integral=gain_oracle(sys, GainKind.IMPULSE_TO_INTEGRAL, cfg, seed),
        integral_to_peak=gain_oracle(sys, GainKind.INTEGRAL_TO_PEAK, cfg, seed),
        impulse_to_peak=gain_oracle(sys, GainKind.IMPULSE_TO_PEAK, cfg, seed),
        peak_to_peak_sampled=oracle_is_sampled(sys, GainKind.PEAK_TO_PEAK),
        impulse_to_integral_sampled=oracle_is_sampled(sys, GainKind.IMPULSE_TO_INTEGRAL),
    )


# --- Compositions ------------------------------------------------------------


def sum_system(s1: LtiSystem, s2: LtiSystem) -> LtiSystem:
    """Parallel connection: shared input, summed outputs."""
    if s1.m != s2.m or s1.k != s2.k:
        raise InvalidModel(f"sum needs equal input/output dimensions, got ({s1.m}, {s1.k}) and ({s2.m}, {s2.k})")
    a = np.block([[s1.a, np.zeros((s1.n, s2.n))], [np.zeros((s2.n, s1.n)), s2.a]])
    return LtiSystem(a, np.vstack([s1.b, s2.b]), np.hstack([s1.c, s2.c]))


def sum_cross_term(s1: LtiSystem, s2: LtiSystem, alpha: float) -> float:
    """2 tr(C1 P12 C2') with P12 the coupling block of P_alpha for the sum.

    eps_alpha(sum)^2 = eps_alpha(s1)^2 + eps_alpha(s2)^2 + this term.
    """
    p = p_matrix(sum_system(s1, s2), alpha)
    p12 = p[: s1.n, s1.n :]
    return float(2.0 * np.trace(s1.c @ p12 @ s2.c.T))


def series_system(s2: LtiSystem, s1: LtiSystem, d1: Optional[np.ndarray] = None, d2: Optional[np.ndarray] = None) -> LtiSystem:
    """Cascade S2 S1 (s1 first). Optional feedthroughs d1, d2 must satisfy d2 d1 = 0."""
    if s1.k != s2.m:
        raise InvalidModel(f"series needs s1 outputs ({s1.k}) to match s2 inputs ({s2.m})")
    if d1 is None:
        d1 = np.zeros((s1.k, s1.m))
    if d2 is None:
        d2 = np.zeros((s2.k, s2.m))
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if d1.shape != (s1.k, s1.m) or d2.shape != (s2.k, s2.m):
        raise InvalidModel(f"feedthrough shapes {d1.shape}, {d2.shape} do not match the systems")
    if np.linalg.norm(d2 @ d1) > 0.0:
        raise InvalidModel("series product has a direct feedthrough (d2 d1 != 0)")
    a = np.block([[s1.a, np.zeros((s1.n, s2.n))], [s2.b @ s1.c, s2.a]])
    b = np.vstack([s1.b, s2.b @ d1])
    c = np.hstack([d2 @ s1.c, s2.c])
    return LtiSystem(a, b, c)


# --- Report ------------------------------------------------------------------


def _chain(name: str, lhs: float, rhs: float, slack: float = 0.0) -> ChainCheck:
    holds = lhs <= rhs * (1.0 + 1e-12) + slack
    if not holds:
        logger.warning("estimate chain %s fails: %.9g > %.9g + %.1g", name, lhs, rhs, slack)
    return ChainCheck(name=name, lhs=lhs, rhs=rhs, slack=slack, holds=holds)


def build_report(
    sys: LtiSystem,
    cfg: Optional[AlphaSearchConfig] = None,
    quad: Optional[QuadratureConfig] = None,
    with_lmi: bool = True,
    with_gains: bool = True,
    barrier: Optional[BarrierConfig] = None,
    seed: int = 0,
) -> NormReport:
    """Every analysis norm of a stable system plus the evaluated estimate chains."""
    cfg = cfg or AlphaSearchConfig()
    h2 = h2_norm(sys)
    e2p, i2e = peak_norms(sys)
    eps = eps_norm(sys, cfg)
    star, star_prime = star_norms(sys, cfg)

    checks = [
        _chain("energy_to_peak <= h2", e2p, h2),
        _chain("impulse_to_energy <= h2", i2e, h2),
        _chain("star <= eps", star.value, eps.value),
        _chain("star_prime <= eps", star_prime.value, eps.value),
    ]

    omega = circ = circ_prime = None
    if with_lmi:
        barrier = barrier or BarrierConfig()
        p_trace = min_trace_p(sys, barrier)
        q_trace = min_trace_q(sys, barrier)
        circ = math.sqrt(p_trace.objective)
        circ_prime = math.sqrt(q_trace.objective)
        omega = omega_norm(sys, barrier, circ=p_trace, circ_prime=q_trace).value
        checks.append(_chain("omega <= circ", omega, circ, ORACLE_SLACK))
        checks.append(_chain("omega <= circ_prime", omega, circ_prime, ORACLE_SLACK))

    gains = None
    if with_gains:
        gains = gain_estimates(sys, quad, seed)
        checks.append(_chain("peak_to_peak <= star", gains.peak_to_peak, star.value, ORACLE_SLACK))
        checks.append(_chain("impulse_to_integral <= star_prime", gains.impulse_to_integral, star_prime.value, ORACLE_SLACK))
        if omega is not None:
            checks.append(_chain("integral_to_peak <= omega", gains.integral_to_peak, omega, ORACLE_SLACK))
            checks.append(_chain("impulse_to_peak <= omega", gains.impulse_to_peak, omega, ORACLE_SLACK))

    return NormReport(
        h2=h2,
        energy_to_peak=e2p,
        impulse_to_energy=i2e,
        eps=eps.value,
        alpha_hat=eps.alpha,
        boundary_flag=eps.at_upper,
        eps_alpha_curve=eps.curve,
        star=star.value,
        star_prime=star_prime.value,
        omega=omega,
        circ=circ,
        circ_prime=circ_prime,
        gains=gains,
        chain_checks=checks,
    )

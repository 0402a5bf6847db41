"""Dense real linear algebra: Schur forms, Lyapunov solves, symmetric eigenproblems, exponentials.

Thin wrappers over scipy.linalg that add the finiteness and stability checks the
rest of the package relies on, and translate LAPACK failures into epsctl errors.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import InvalidModel, NumericalFailure, SolverDegenerate

logger = logging.getLogger(__name__)

# Relative distance from the imaginary axis below which a Lyapunov operator is treated as singular.
STABILITY_MARGIN = 1e-13


@dataclass(frozen=True, eq=False)
class SchurForm:
    """m = q t q' with q orthogonal and t quasi-upper-triangular."""

    q: np.ndarray
    t: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        return block_eigenvalues(self.t)


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float array."""
    arr = np.array(m, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InvalidModel(f"{name} must be a non-empty 2-D matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidModel(f"{name} has non-finite entries")
    return arr


def sym(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2.0


def _require_square(m: np.ndarray, name: str) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidModel(f"{name} must be square, got shape {m.shape}")


def real_schur(m) -> SchurForm:
    m = np.asarray(m, dtype=float)
    _require_square(m, "matrix")
    if not np.all(np.isfinite(m)):
        raise NumericalFailure("cannot decompose a matrix with non-finite entries")
    try:
        t, q = linalg.schur(m, output="real")
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalFailure(f"real Schur decomposition did not converge: {e}") from e
    return SchurForm(q=q, t=t)


def block_eigenvalues(t: np.ndarray) -> np.ndarray:
    """Eigenvalues read off the 1x1 and 2x2 diagonal blocks of a real Schur factor."""
    n = t.shape[0]
    eig: list[complex] = []
    i = 0
    while i < n:
        if i + 1 < n and t[i + 1, i] != 0.0:
            tr = t[i, i] + t[i + 1, i + 1]
            det = t[i, i] * t[i + 1, i + 1] - t[i, i + 1] * t[i + 1, i]
            root = np.sqrt(complex(tr * tr / 4.0 - det))
            eig.extend([tr / 2.0 + root, tr / 2.0 - root])
            i += 2
        else:
            eig.append(complex(t[i, i]))
            i += 1
    return np.array(eig)


def spectral_abscissa(a) -> float:
    """Largest real part among the eigenvalues of a."""
    return float(np.max(real_schur(a).eigenvalues().real))


def is_stable(a) -> bool:
    a = np.asarray(a, dtype=float)
    return spectral_abscissa(a) < -STABILITY_MARGIN * max(1.0, float(np.linalg.norm(a, 1)))


def lyap_solve(a, w) -> np.ndarray:
    """Solve a X + X a' + w = 0 for stable a (Bartels-Stewart, one refinement step)."""
    a = np.asarray(a, dtype=float)
    w = sym(np.asarray(w, dtype=float))
    _require_square(a, "a")
    if w.shape != a.shape:
        raise InvalidModel(f"right-hand side shape {w.shape} does not match a {a.shape}")

    r = spectral_abscissa(a)
    if r >= -STABILITY_MARGIN * max(1.0, float(np.linalg.norm(a, 1))):
        raise SolverDegenerate(f"Lyapunov operator is singular: a is not stable (spectral abscissa {r:.6g})")

    try:
        x = sym(linalg.solve_continuous_lyapunov(a, -w))
        residual = a @ x + x @ a.T + w
        x = sym(x + linalg.solve_continuous_lyapunov(a, -residual))
    except (linalg.LinAlgError, ValueError) as e:
        raise SolverDegenerate(f"Lyapunov solve failed: {e}") from e

    if not np.all(np.isfinite(x)):
        raise NumericalFailure("Lyapunov solution has non-finite entries")
    rel = lyap_residual(a, x, w)
    if rel > 1e-8:
        logger.warning("Lyapunov residual %.3g exceeds 1e-8 (spectral abscissa %.3g)", rel, r)
    return x


def lyap_residual(a, x, w) -> float:
    """Relative residual of a X + X a' + w = 0 in the Frobenius norm."""
    scale = np.linalg.norm(a) * np.linalg.norm(x) + np.linalg.norm(w)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(a @ x + x @ a.T + w) / scale)


def eig_sym(s) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors of a symmetric matrix."""
    s = np.asarray(s, dtype=float)
    _require_square(s, "matrix")
    try:
        return linalg.eigh(sym(s))
    except (linalg.LinAlgError, ValueError) as e:
        raise NumericalFailure(f"symmetric eigensolver failed: {e}") from e


def lambda_max(s) -> float:
    return float(eig_sym(s)[0][-1])


def lambda_min(s) -> float:
    return float(eig_sym(s)[0][0])


def matexp(a, t: float) -> np.ndarray:
    """e^{a t} by scaling and squaring with a degree-13 Pade approximant."""
    a = np.asarray(a, dtype=float)
    _require_square(a, "a")
    try:
        with np.errstate(over="raise"):
            result = linalg.expm(a * t)
    except (FloatingPointError, OverflowError, ValueError) as e:
        raise NumericalFailure(f"matrix exponential overflowed at t={t:.6g}") from e
    if not np.all(np.isfinite(result)):
        raise NumericalFailure(f"matrix exponential overflowed at t={t:.6g}")
    return result


def is_spd(s, tol: float = 1e-12) -> bool:
    """True iff Cholesky succeeds with every pivot above tol * ||s||."""
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        return False
    scale = float(np.linalg.norm(s, 2))
    if scale == 0.0:
        return False
    try:
        chol = linalg.cholesky(sym(s), lower=True)
    except linalg.LinAlgError:
        return False
    return bool(np.all(np.diag(chol) ** 2 > tol * scale))

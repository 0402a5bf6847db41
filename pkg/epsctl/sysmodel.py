"""LTI systems, partitioned plants, structural checks, Gramians and impulse responses."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from pydantic import ValidationError

from .errors import InvalidModel
from .linmat import as_matrix, lyap_solve, matexp
from .models import (
    FilterPlantFile,
    OfPlantFile,
    PlantKind,
    SfPlantFile,
    StructureCheck,
    StructureReport,
    SystemFile,
)

logger = logging.getLogger(__name__)

PBH_TOL = 1e-8
ORTHOGONALITY_TOL = 1e-9
RANK_TOL = 1e-10
MAX_CONDITION = 1e12


def _shape_error(name: str, got: tuple, want: tuple) -> InvalidModel:
    return InvalidModel(f"{name} has shape {got}, expected {want}")


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """Strictly proper system x' = A x + B w, y = C x.

    Only dimensions and finiteness are enforced here; rank and stability
    are properties reported by validate().
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    name: Optional[str] = None

    def __post_init__(self):
        a = as_matrix(self.a, "A")
        n = a.shape[0]
        if a.shape != (n, n):
            raise _shape_error("A", a.shape, (n, n))
        b = as_matrix(self.b, "B")
        if b.shape[0] != n:
            raise _shape_error("B", b.shape, (n, b.shape[1]))
        c = as_matrix(self.c, "C")
        if c.shape[1] != n:
            raise _shape_error("C", c.shape, (c.shape[0], n))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def k(self) -> int:
        return self.c.shape[0]

    @property
    def kind(self) -> PlantKind:
        return PlantKind.SYSTEM

    def dual(self) -> "LtiSystem":
        """(A', C', B'): swaps the roles of reachability and observability."""
        return LtiSystem(self.a.T, self.c.T, self.b.T, name=self.name)

    def transformed(self, t: np.ndarray) -> "LtiSystem":
        """Similarity transform x -> T x."""
        t_inv = np.linalg.inv(t)
        return LtiSystem(t @ self.a @ t_inv, t @ self.b, self.c @ t_inv, name=self.name)


@dataclass(frozen=True, eq=False)
class SfPlant:
    """x' = A x + B u + Bw w, z = C x + D u."""

    a: np.ndarray
    b: np.ndarray
    bw: np.ndarray
    c: np.ndarray
    d: np.ndarray
    name: Optional[str] = None

    def __post_init__(self):
        a = as_matrix(self.a, "A")
        n = a.shape[0]
        if a.shape != (n, n):
            raise _shape_error("A", a.shape, (n, n))
        b = as_matrix(self.b, "B")
        bw = as_matrix(self.bw, "Bw")
        c = as_matrix(self.c, "C")
        d = as_matrix(self.d, "D")
        if b.shape[0] != n:
            raise _shape_error("B", b.shape, (n, b.shape[1]))
        if bw.shape[0] != n:
            raise _shape_error("Bw", bw.shape, (n, bw.shape[1]))
        if c.shape[1] != n:
            raise _shape_error("C", c.shape, (c.shape[0], n))
        if d.shape != (c.shape[0], b.shape[1]):
            raise _shape_error("D", d.shape, (c.shape[0], b.shape[1]))
        for attr, value in (("a", a), ("b", b), ("bw", bw), ("c", c), ("d", d)):
            object.__setattr__(self, attr, value)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def kind(self) -> PlantKind:
        return PlantKind.SF


@dataclass(frozen=True, eq=False)
class FilterPlant:
    """x' = A x + B w, y = C x + D w, estimation error output z = Cz (x - x_hat)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    cz: np.ndarray
    name: Optional[str] = None

    def __post_init__(self):
        a = as_matrix(self.a, "A")
        n = a.shape[0]
        if a.shape != (n, n):
            raise _shape_error("A", a.shape, (n, n))
        b = as_matrix(self.b, "B")
        c = as_matrix(self.c, "C")
        d = as_matrix(self.d, "D")
        cz = as_matrix(self.cz, "Cz")
        if b.shape[0] != n:
            raise _shape_error("B", b.shape, (n, b.shape[1]))
        if c.shape[1] != n:
            raise _shape_error("C", c.shape, (c.shape[0], n))
        if d.shape != (c.shape[0], b.shape[1]):
            raise _shape_error("D", d.shape, (c.shape[0], b.shape[1]))
        if cz.shape[1] != n:
            raise _shape_error("Cz", cz.shape, (cz.shape[0], n))
        for attr, value in (("a", a), ("b", b), ("c", c), ("d", d), ("cz", cz)):
            object.__setattr__(self, attr, value)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def kind(self) -> PlantKind:
        return PlantKind.FILTER


@dataclass(frozen=True, eq=False)
class OfPlant:
    """x' = A x + B1 w + B2 u, y = C1 x + D1 w, z = C2 x + D2 u."""

    a: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    name: Optional[str] = None

    def __post_init__(self):
        a = as_matrix(self.a, "A")
        n = a.shape[0]
        if a.shape != (n, n):
            raise _shape_error("A", a.shape, (n, n))
        b1 = as_matrix(self.b1, "B1")
        b2 = as_matrix(self.b2, "B2")
        c1 = as_matrix(self.c1, "C1")
        c2 = as_matrix(self.c2, "C2")
        d1 = as_matrix(self.d1, "D1")
        d2 = as_matrix(self.d2, "D2")
        if b1.shape[0] != n:
            raise _shape_error("B1", b1.shape, (n, b1.shape[1]))
        if b2.shape[0] != n:
            raise _shape_error("B2", b2.shape, (n, b2.shape[1]))
        if c1.shape[1] != n:
            raise _shape_error("C1", c1.shape, (c1.shape[0], n))
        if c2.shape[1] != n:
            raise _shape_error("C2", c2.shape, (c2.shape[0], n))
        if d1.shape != (c1.shape[0], b1.shape[1]):
            raise _shape_error("D1", d1.shape, (c1.shape[0], b1.shape[1]))
        if d2.shape != (c2.shape[0], b2.shape[1]):
            raise _shape_error("D2", d2.shape, (c2.shape[0], b2.shape[1]))
        for attr, value in (("a", a), ("b1", b1), ("b2", b2), ("c1", c1), ("c2", c2), ("d1", d1), ("d2", d2)):
            object.__setattr__(self, attr, value)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def kind(self) -> PlantKind:
        return PlantKind.OF

    def state_feedback_part(self) -> SfPlant:
        """Full-information subproblem (A, B2, B1, C2, D2)."""
        return SfPlant(self.a, self.b2, self.b1, self.c2, self.d2, name=self.name)

    def filter_part(self) -> FilterPlant:
        """Estimation subproblem (A, B1, C1, D1, C2)."""
        return FilterPlant(self.a, self.b1, self.c1, self.d1, self.c2, name=self.name)


Plant = Union[LtiSystem, SfPlant, FilterPlant, OfPlant]


# --- Structural checks -------------------------------------------------------


def _pbh(a: np.ndarray, b: np.ndarray, tol: float, unstable_only: bool) -> tuple[bool, float]:
    """Eigenvalue-wise rank test of [lambda I - A, B] scaled by ||[A B]||."""
    n = a.shape[0]
    scale = float(np.linalg.norm(np.hstack([a, b]), 2))
    if scale == 0.0:
        scale = 1.0
    worst = 1.0
    for lam in np.linalg.eigvals(a):
        if unstable_only and lam.real < -tol * scale:
            continue
        pencil = np.hstack([lam * np.eye(n) - a, b.astype(complex)])
        sigma = np.linalg.svd(pencil, compute_uv=False)[-1]
        worst = min(worst, float(sigma) / scale)
    return worst > tol, worst


def _pbh_check(name: str, detail: str, a, b, tol: float, unstable_only: bool, required: bool) -> StructureCheck:
    holds, margin = _pbh(a, b, tol, unstable_only)
    return StructureCheck(name=name, detail=detail, holds=holds, margin=margin, required=required)


def _orthogonality_check(detail: str, x: np.ndarray, y: np.ndarray) -> StructureCheck:
    """x' y = 0 within a relative tolerance."""
    scale = float(np.linalg.norm(x) * np.linalg.norm(y))
    residual = 0.0
    if scale > 0.0:
        residual = float(np.linalg.norm(x.T @ y)) / scale
    return StructureCheck(name="orthogonality", detail=detail, holds=residual <= ORTHOGONALITY_TOL, margin=residual)


def _invertibility_check(detail: str, r: np.ndarray) -> StructureCheck:
    cond = float(np.linalg.cond(r))
    margin = 0.0
    if np.isfinite(cond) and cond > 0.0:
        margin = 1.0 / cond
    return StructureCheck(name="invertibility", detail=detail, holds=bool(np.isfinite(cond) and cond <= MAX_CONDITION), margin=margin)


def _rank_check(detail: str, m: np.ndarray, columns: bool) -> StructureCheck:
    sv = np.linalg.svd(m, compute_uv=False)
    full = m.shape[0]
    if columns:
        full = m.shape[1]
    margin = 0.0
    if sv[0] > 0.0 and len(sv) >= full:
        margin = float(sv[full - 1] / sv[0])
    return StructureCheck(name="full rank", detail=detail, holds=margin > RANK_TOL, margin=margin, required=True)


def _stability_check(a: np.ndarray) -> StructureCheck:
    r = float(np.max(np.linalg.eigvals(a).real))
    margin = max(0.0, -r) / max(1.0, float(np.linalg.norm(a, 1)))
    return StructureCheck(name="stability", detail="A Hurwitz", holds=r < 0.0, margin=margin, required=False)


def validate(plant: Plant, tol: float = PBH_TOL) -> StructureReport:
    """Run the PBH, orthogonality, invertibility and rank checks appropriate for the plant kind."""
    checks: list[StructureCheck] = []

    if isinstance(plant, LtiSystem):
        checks.append(_rank_check("B full column rank", plant.b, columns=True))
        checks.append(_rank_check("C full row rank", plant.c, columns=False))
        checks.append(_stability_check(plant.a))
        checks.append(_pbh_check("controllability", "(A, B)", plant.a, plant.b, tol, unstable_only=False, required=False))
        checks.append(_pbh_check("observability", "(C, A)", plant.a.T, plant.c.T, tol, unstable_only=False, required=False))
    elif isinstance(plant, SfPlant):
        checks.append(_orthogonality_check("C'D = 0", plant.c, plant.d))
        checks.append(_invertibility_check("D'D", plant.d.T @ plant.d))
        checks.append(_pbh_check("stabilizability", "(A, B)", plant.a, plant.b, tol, unstable_only=True, required=True))
        checks.append(_pbh_check("detectability", "(C, A)", plant.a.T, plant.c.T, tol, unstable_only=True, required=True))
        checks.append(_pbh_check("observability", "(C, A)", plant.a.T, plant.c.T, tol, unstable_only=False, required=False))
    elif isinstance(plant, FilterPlant):
        checks.append(_orthogonality_check("B D' = 0", plant.b.T, plant.d.T))
        checks.append(_invertibility_check("D D'", plant.d @ plant.d.T))
        checks.append(_pbh_check("detectability", "(C, A)", plant.a.T, plant.c.T, tol, unstable_only=True, required=True))
        checks.append(_pbh_check("stabilizability", "(A, B)", plant.a, plant.b, tol, unstable_only=True, required=True))
        checks.append(_pbh_check("controllability", "(A, B)", plant.a, plant.b, tol, unstable_only=False, required=False))
    elif isinstance(plant, OfPlant):
        checks.append(_orthogonality_check("B1 D1' = 0", plant.b1.T, plant.d1.T))
        checks.append(_orthogonality_check("C2'D2 = 0", plant.c2, plant.d2))
        checks.append(_invertibility_check("D1 D1'", plant.d1 @ plant.d1.T))
        checks.append(_invertibility_check("D2'D2", plant.d2.T @ plant.d2))
        checks.append(_pbh_check("stabilizability", "(A, B2)", plant.a, plant.b2, tol, unstable_only=True, required=True))
        checks.append(_pbh_check("detectability", "(C1, A)", plant.a.T, plant.c1.T, tol, unstable_only=True, required=True))
        checks.append(_pbh_check("stabilizability", "(A, B1)", plant.a, plant.b1, tol, unstable_only=True, required=True))
        checks.append(_pbh_check("detectability", "(C2, A)", plant.a.T, plant.c2.T, tol, unstable_only=True, required=True))
        checks.append(_pbh_check("controllability", "(A, B1)", plant.a, plant.b1, tol, unstable_only=False, required=False))
        checks.append(_pbh_check("observability", "(C2, A)", plant.a.T, plant.c2.T, tol, unstable_only=False, required=False))
    else:
        raise InvalidModel(f"unsupported plant type: {type(plant).__name__}")

    return StructureReport(kind=plant.kind, checks=checks)


def ensure_valid(plant: Plant, tol: float = PBH_TOL) -> StructureReport:
    """validate() and raise InvalidModel naming every failed required assumption."""
    report = validate(plant, tol)
    for c in report.warnings:
        logger.warning("%s does not hold for %s (margin %.3g)", c.name, c.detail, c.margin)
    if report.failures:
        reasons = "; ".join(f"{c.name} violated: {c.detail} (margin {c.margin:.3g})" for c in report.failures)
        raise InvalidModel(reasons)
    return report


# --- Gramians and responses --------------------------------------------------


def gramians(sys: LtiSystem) -> tuple[np.ndarray, np.ndarray]:
    """Controllability and observability Gramians of a stable system."""
    p = lyap_solve(sys.a, sys.b @ sys.b.T)
    q = lyap_solve(sys.a.T, sys.c.T @ sys.c)
    return p, q


def impulse_response(sys: LtiSystem, t: float) -> np.ndarray:
    return sys.c @ matexp(sys.a, t) @ sys.b


# --- File loading ------------------------------------------------------------


def from_matrices(kind: PlantKind, data: dict) -> Plant:
    """Build a system or plant from a JSON-style dict of row-major matrices."""
    try:
        if kind == PlantKind.SYSTEM:
            s = SystemFile.model_validate(data)
            return LtiSystem(s.A, s.B, s.C, name=s.name)
        if kind == PlantKind.SF:
            sf = SfPlantFile.model_validate(data)
            return SfPlant(sf.A, sf.B, sf.Bw, sf.C, sf.D, name=sf.name)
        if kind == PlantKind.FILTER:
            fp = FilterPlantFile.model_validate(data)
            return FilterPlant(fp.A, fp.B, fp.C, fp.D, fp.Cz, name=fp.name)
        if kind == PlantKind.OF:
            of = OfPlantFile.model_validate(data)
            return OfPlant(of.A, of.B1, of.B2, of.C1, of.C2, of.D1, of.D2, name=of.name)
    except ValidationError as e:
        raise InvalidModel(f"invalid {kind} description: {e.error_count()} error(s): {e.errors()[0]['msg']} at {e.errors()[0]['loc']}") from e
    raise InvalidModel(f"unknown plant kind: {kind}")


def load_json(path: str, kind: PlantKind) -> Plant:
    p = Path(path)
    if not p.exists():
        raise InvalidModel(f"input file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InvalidModel(f"malformed JSON in {path}: {e}") from e
    if not isinstance(data, dict):
        raise InvalidModel(f"{path} must contain a JSON object")
    return from_matrices(kind, data)

"""Pydantic models and enums for epsctl inputs and reports."""

from enum import StrEnum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

Matrix = list[list[float]]


class PlantKind(StrEnum):
    SYSTEM = "system"
    SF = "sf"
    FILTER = "filter"
    OF = "of"


class SignalNorm(StrEnum):
    ONE = "one"
    INF = "inf"


class SetKind(StrEnum):
    REACH_INF = "reach_inf"
    REACH_ONE = "reach_one"
    OBS_ONE = "obs_one"
    OBS_INF = "obs_inf"
    ELLIPSE = "ellipse"


class GainKind(StrEnum):
    PEAK_TO_PEAK = "peak_to_peak"
    IMPULSE_TO_INTEGRAL = "impulse_to_integral"
    INTEGRAL_TO_PEAK = "integral_to_peak"
    IMPULSE_TO_PEAK = "impulse_to_peak"


class EllipsoidForm(StrEnum):
    P = "p"  # x' shape^-1 x <= 1
    Q = "q"  # x' shape x <= 1


class Realization(StrEnum):
    STATE_ERROR = "state_error"
    ESTIMATE_ERROR = "estimate_error"


class PolicyKind(StrEnum):
    ZERO = "zero"
    CONSTANT = "constant"
    RANDOM = "random"
    WORST = "worst"


class OutputFormat(StrEnum):
    JSON = "json"
    CSV = "csv"


# --- Input files -------------------------------------------------------------


class SystemFile(BaseModel):
    """Strictly proper triple (A, B, C)."""

    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    A: Matrix
    B: Matrix
    C: Matrix


class SfPlantFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    A: Matrix
    B: Matrix
    Bw: Matrix
    C: Matrix
    D: Matrix


class FilterPlantFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    A: Matrix
    B: Matrix
    C: Matrix
    D: Matrix
    Cz: Matrix


class OfPlantFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    A: Matrix
    B1: Matrix
    B2: Matrix
    C1: Matrix
    C2: Matrix
    D1: Matrix
    D2: Matrix


# --- Reports -----------------------------------------------------------------


class StructureCheck(BaseModel):
    """One structural property of a system or plant."""

    name: str = Field(..., description="Property name, e.g. stabilizability or orthogonality")
    detail: str = Field(..., description="Which matrices the property concerns")
    holds: bool
    margin: float = Field(..., ge=0.0, description="Relative PBH margin, residual, or inverse condition number")
    required: bool = True


class StructureReport(BaseModel):
    kind: PlantKind
    checks: list[StructureCheck] = Field(default_factory=list)

    @property
    def failures(self) -> list[StructureCheck]:
        return [c for c in self.checks if c.required and not c.holds]

    @property
    def warnings(self) -> list[StructureCheck]:
        return [c for c in self.checks if not c.required and not c.holds]

    def get(self, name: str, detail: Optional[str] = None) -> StructureCheck:
        for c in self.checks:
            if c.name == name and (detail is None or c.detail == detail):
                return c
        raise KeyError(name)


class GainEstimates(BaseModel):
    """Time-domain oracle values of the four gains bounded by the norm chains."""

    peak_to_peak: float
    impulse_to_integral: float
    integral_to_peak: float
    impulse_to_peak: float
    peak_to_peak_sampled: bool = False
    impulse_to_integral_sampled: bool = False


class ChainCheck(BaseModel):
    name: str
    lhs: float
    rhs: float
    slack: float = 0.0
    holds: bool


class NormReport(BaseModel):
    h2: float
    energy_to_peak: float
    impulse_to_energy: float
    eps: float
    alpha_hat: float
    boundary_flag: bool = False
    eps_alpha_curve: list[tuple[float, float]] = Field(default_factory=list)
    star: float
    star_prime: float
    omega: Optional[float] = None
    circ: Optional[float] = None
    circ_prime: Optional[float] = None
    gains: Optional[GainEstimates] = None
    chain_checks: list[ChainCheck] = Field(default_factory=list)


class SynthesisResult(BaseModel):
    """Optimal gains for one synthesis problem."""

    kind: PlantKind
    k: Optional[Matrix] = None
    l: Optional[Matrix] = None
    alpha_hat: float
    eps_norm: float = Field(..., gt=0.0)
    boundary_flag: bool = False
    low_boundary_flag: bool = False
    curve: list[tuple[float, float]] = Field(default_factory=list)
    local_minima: list[float] = Field(default_factory=list)
    norm_form_a: Optional[float] = None
    norm_form_b: Optional[float] = None
    identity_gap: Optional[float] = Field(None, description="Largest relative gap between the two trace forms over evaluated alphas")
    closed_loop_abscissa: Optional[float] = None


class SubproblemSummary(BaseModel):
    alpha_hat: float
    eps_norm: float
    boundary_flag: bool = False


class SeparationReport(BaseModel):
    state_feedback: SubproblemSummary
    filtering: SubproblemSummary
    joint: SubproblemSummary
    mixed_alpha_hat: float
    mixed_eps_norm: float
    gap: float = Field(..., description="mixed_eps_norm - joint.eps_norm")


class ComparisonRow(BaseModel):
    beta: float
    alpha_hat: float
    k: Matrix
    l: Matrix
    eps_norm: float
    boundary_flag: bool = False
    identity_gap: Optional[float] = None


class InclusionCheck(BaseModel):
    name: str
    worst: float
    bound: float
    holds: bool


class InvarianceReport(BaseModel):
    max_v: float
    first_entry_time: float
    entered: bool
    monotone: bool


class TrajectoryMeta(BaseModel):
    policy: PolicyKind
    seed: Optional[int] = None
    dt: float
    t_end: float
    alpha: Optional[float] = None
    x0: list[float]
    invariance: Optional[InvarianceReport] = None


class ComparisonTable(BaseModel):
    rows: list[ComparisonRow] = Field(default_factory=list)


class AlphaCurve(BaseModel):
    """An objective curve over alpha with its refined minimum."""

    kind: PlantKind
    alpha_hat: float
    value: float
    boundary_flag: bool = False
    local_minima: list[float] = Field(default_factory=list)
    curve: list[tuple[float, float]] = Field(default_factory=list)


class InclusionReport(BaseModel):
    """Sampled set-in-ellipsoid and ellipsoid-in-set verdicts for a planar system."""

    alpha: float
    checks: list[InclusionCheck] = Field(default_factory=list)

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in self.checks)

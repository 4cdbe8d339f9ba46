"""
Pydantic models for the laboratory's domain records.

These models validate the invariants each record promises (positivity,
ordering, confidence-interval consistency) and serialize cleanly to the JSON
emitted by the CLI. Extended-precision numbers are mpmath values internally
and decimal strings on the wire.
"""

from fractions import Fraction
from typing import Any, Literal, Optional, Union

import mpmath
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator

MAX_DIGITS = 1000

Exact = Union[Fraction, float]


class PrecisionSpec(BaseModel):
    """Working precision of an extended-precision computation."""

    model_config = ConfigDict(frozen=True)

    significant_decimal_digits: int = Field(
        default=34,
        ge=15,
        le=MAX_DIGITS,
        description="Significant decimal digits carried by mpmath"
    )

    @property
    def digits(self) -> int:
        return self.significant_decimal_digits

    @property
    def relative_tolerance(self) -> mpmath.mpf:
        """Guaranteed relative error of specfun results, 10^(-digits+2)."""
        with mpmath.workdps(self.digits + 10):
            return mpmath.mpf(10) ** (-self.digits + 2)

    @classmethod
    def of(cls, digits: int) -> "PrecisionSpec":
        return cls(significant_decimal_digits=digits)


# ========================================================================
# EXCURSION
# ========================================================================

class MomentTable(BaseModel):
    """Excursion-area moments M_l and Wright's constants w_l = M_l / l!."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    max_ell: int = Field(..., ge=0)
    moments: list[Any]
    wright: list[Any]
    precision: PrecisionSpec
    recursion: Literal["takacs", "louchard"] = "takacs"

    @model_validator(mode="after")
    def check_invariants(self) -> "MomentTable":
        if len(self.moments) != self.max_ell + 1 or len(self.wright) != self.max_ell + 1:
            raise ValueError("moment table length does not match max_ell")
        if self.moments[0] != 1 or self.wright[0] != 1:
            raise ValueError("M_0 and w_0 must equal 1")
        for ell, (m, w) in enumerate(zip(self.moments, self.wright)):
            if not m > 0 or not w > 0:
                raise ValueError(f"non-positive entry at ell={ell}")
        return self

    @field_serializer("moments", "wright")
    def serialize_mp(self, values: list[Any]) -> list[str]:
        digits = self.precision.digits
        return [mpmath.nstr(v, digits) for v in values]


class ExcursionSample(BaseModel):
    """Monte Carlo moments of the discrete excursion area."""

    paths: int = Field(..., ge=1)
    steps: int = Field(..., ge=2)
    seed: int
    block_size: int = Field(..., ge=1)
    moments: list[float]
    stderr: list[float]

    @model_validator(mode="after")
    def check_lengths(self) -> "ExcursionSample":
        if len(self.moments) != len(self.stderr):
            raise ValueError("moments and stderr must have equal length")
        if self.moments and self.moments[0] != 1.0:
            raise ValueError("the zeroth sample moment must equal 1")
        return self

    @property
    def max_ell(self) -> int:
        return len(self.moments) - 1


# ========================================================================
# SCALING
# ========================================================================

class RigorousValue(BaseModel):
    """A value with a proven bound on |value - true value|."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    value: Any
    error_bound: float = Field(..., ge=0.0)
    truncation_bound: float = Field(default=0.0, ge=0.0)
    rounding_bound: float = Field(default=0.0, ge=0.0)
    digits: int = Field(default=34, ge=15, le=MAX_DIGITS)

    @model_validator(mode="after")
    def check_budget(self) -> "RigorousValue":
        if self.error_bound < self.truncation_bound + self.rounding_bound:
            raise ValueError("error_bound must cover truncation and rounding")
        return self

    def __float__(self) -> float:
        return float(self.value)

    def contains(self, x: Any, slack: float = 0.0) -> bool:
        return abs(mpmath.mpf(x) - self.value) <= self.error_bound + slack

    def formatted(self, digits: Optional[int] = None) -> str:
        return mpmath.nstr(self.value, digits or self.digits, strip_zeros=False)

    @field_serializer("value")
    def serialize_value(self, v: Any) -> str:
        return mpmath.nstr(v, self.digits, strip_zeros=False)


class IntensityParams(BaseModel):
    """Parameters of one evaluation of the point-process intensity."""

    lam: float
    ell0: int = Field(..., ge=1)
    x_max: float = Field(..., gt=0.0)

    @classmethod
    def for_lambda(cls, lam: float, ell0: int) -> "IntensityParams":
        return cls(lam=lam, ell0=ell0, x_max=max(20.0, 2.0 * lam + 20.0))


class ProfileRow(BaseModel):
    """One lambda of a scaling profile."""

    lam: float
    fk: dict[int, float]
    df2: float
    d2f2: float
    log_f2: float
    dlog_f2: float
    d2log_f2: float
    quadrature_error_estimate: float = Field(..., ge=0.0)
    series_unconfirmed: int = Field(default=0, ge=0, description="Intensity-series evaluations whose heuristic cut was not confirmed")
    ok: bool = True
    error: Optional[str] = None

    @model_validator(mode="after")
    def check_positive(self) -> "ProfileRow":
        if not self.ok:
            return self
        for k, value in self.fk.items():
            if not value > 0:
                raise ValueError(f"f_{k} must be positive, got {value}")
        return self


class ScalingProfile(BaseModel):
    """Rows of f_k and log-derivatives over a lambda grid."""

    ks: list[int]
    tol: float
    rows: list[ProfileRow]

    @property
    def complete(self) -> bool:
        return all(r.ok for r in self.rows)

    def row_at(self, lam: float, atol: float = 1e-9) -> ProfileRow:
        for row in self.rows:
            if abs(row.lam - lam) <= atol:
                return row
        raise KeyError(f"no profile row at lambda={lam}")


class MaximizerReport(BaseModel):
    """Location and value of the maximizer of d/dlambda log f."""

    lambda_star: float
    g_star: float
    bracket: tuple[float, float]
    unimodal_observed: bool
    grid_step: float = Field(..., gt=0.0)
    grid_argmax: float
    on_boundary: bool = False
    window: tuple[float, float]
    tol: float

    @model_validator(mode="after")
    def check_bracket(self) -> "MaximizerReport":
        lo, hi = self.bracket
        if not self.on_boundary and not lo < self.lambda_star < hi:
            raise ValueError("lambda_star must lie strictly inside its bracket")
        return self


# ========================================================================
# PERCOLATION
# ========================================================================

class ComponentStats(BaseModel):
    """Component sizes of one G(n,p) draw and their exact power sums."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n: int = Field(..., ge=1)
    p: float = Field(..., ge=0.0, le=1.0)
    seed: int
    sizes: Any
    power_sums: dict[int, int]

    @model_validator(mode="after")
    def check_invariants(self) -> "ComponentStats":
        sizes = np.asarray(self.sizes)
        if sizes.size and np.any(np.diff(sizes) > 0):
            raise ValueError("sizes must be in descending order")
        if self.power_sums.get(1) != self.n:
            raise ValueError("s_1 must equal n")
        return self

    def s(self, k: int) -> int:
        return self.power_sums[k]

    @property
    def largest(self) -> int:
        return int(self.sizes[0]) if len(self.sizes) else 0

    @property
    def second_largest(self) -> int:
        return int(self.sizes[1]) if len(self.sizes) > 1 else 0

    @field_serializer("sizes")
    def serialize_sizes(self, v: Any) -> list[int]:
        return [int(x) for x in v]


class SampleFunctionals(BaseModel):
    """Rescaled functionals X_k = s_k / n^(2k/3) of one sample."""

    x: dict[int, float]
    pair_product: int = Field(..., ge=0)
    two_large: bool

    @field_validator("x")
    @classmethod
    def check_positive(cls, v: dict[int, float]) -> dict[int, float]:
        for k, value in v.items():
            if not value > 0:
                raise ValueError(f"X_{k} must be positive")
        return v


class EstimatorSummary(BaseModel):
    """Replicate mean, standard error and 95% interval of one estimand."""

    name: str
    n: int = Field(..., ge=1)
    lam: float
    p: float
    replicates: int = Field(..., ge=1)
    seed: int
    mean: float
    stderr: float = Field(..., ge=0.0)
    ci95: tuple[float, float]

    @model_validator(mode="after")
    def check_interval(self) -> "EstimatorSummary":
        lo, hi = self.ci95
        half = 1.96 * self.stderr
        scale = max(1.0, abs(self.mean))
        if abs(lo - (self.mean - half)) > 1e-9 * scale or abs(hi - (self.mean + half)) > 1e-9 * scale:
            raise ValueError("ci95 must equal mean +- 1.96*stderr")
        return self

    def excludes_zero(self) -> bool:
        return self.ci95[0] > 0 or self.ci95[1] < 0

    def within_relative(self, target: float, rel: float) -> bool:
        return abs(self.mean - target) <= rel * abs(target)


# ========================================================================
# ORACLES
# ========================================================================

class ExactGnpReport(BaseModel):
    """Exact expectations of G(n,p) component statistics, n <= 5."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n: int = Field(..., ge=1, le=5)
    p: Exact
    expected_s: dict[int, Exact]
    expected_s2_sq: Exact
    expected_s4_s2: Exact
    expected_s2_cubed: Exact
    expected_s3_sq: Exact
    susceptibility_sum: Exact
    d_susceptibility_sum: Exact
    expected_pair_product: Exact

    @model_validator(mode="after")
    def check_identities(self) -> "ExactGnpReport":
        if self.susceptibility_sum != self.expected_s[2]:
            raise ValueError("S_n(p) must equal E[s_2]")
        return self

    @property
    def expected_cluster_size(self) -> Exact:
        """E|C(v)| = S_n(p) / n."""
        return self.susceptibility_sum / self.n

    @field_serializer(
        "p", "expected_s2_sq", "expected_s4_s2", "expected_s2_cubed",
        "expected_s3_sq", "susceptibility_sum", "d_susceptibility_sum",
        "expected_pair_product",
    )
    def serialize_exact(self, v: Exact) -> Union[str, float]:
        return str(v) if isinstance(v, Fraction) else float(v)

    @field_serializer("expected_s")
    def serialize_exact_map(self, v: dict[int, Exact]) -> dict[int, Union[str, float]]:
        return {k: (str(x) if isinstance(x, Fraction) else float(x)) for k, x in v.items()}


class CycleReport(BaseModel):
    """Susceptibility of bond percolation on the n-cycle."""

    n: int = Field(..., ge=3)
    p: float = Field(..., ge=0.0, le=1.0)
    chi: float = Field(..., ge=1.0)
    dchi_dp: float
    logder: float


class CycleScan(BaseModel):
    """Maximizer of the cycle's logarithmic derivative over a p grid."""

    n: int = Field(..., ge=3)
    p_star: float
    logder_max: float
    on_boundary: bool = False
    window_scaled: float = Field(..., description="(1 - p_star) * n")


# ========================================================================
# CLI
# ========================================================================

class RunConfig(BaseModel):
    """Everything needed to reproduce one CLI invocation."""

    subcommand: Literal[
        "wright", "fk", "fk0", "profile", "maximize", "simulate", "cycle", "verify", "schema"
    ]
    params: dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None
    threads: int = Field(default=1, ge=1)
    out: Optional[str] = None
    format: Literal["csv", "json", "text", "table"] = "csv"


class SimulateParams(BaseModel):
    n: int
    lam: float = Field(..., serialization_alias="lambda")
    p: float
    reps: int
    seed: int


class SimulateEstimate(BaseModel):
    name: str
    mean: float
    stderr: float
    ci95: tuple[float, float]


class SimulateOutput(BaseModel):
    """JSON document written by the simulate subcommand."""

    config: RunConfig
    params: SimulateParams
    estimates: list[SimulateEstimate]


class MaximizeOutput(BaseModel):
    """JSON document written by the maximize subcommand."""

    config: RunConfig
    lambda_star: float
    g_star: float
    report: MaximizerReport

    @classmethod
    def of(cls, config: RunConfig, report: MaximizerReport) -> "MaximizeOutput":
        return cls(config=config, lambda_star=report.lambda_star, g_star=report.g_star, report=report)

"""
Streaming and batch estimators for Monte Carlo summaries.

RunningMoments is a Welford accumulator that merges partial results in a
fixed order, so block-parallel runs reduce to the same numbers as a serial
run. summarize() and ratio_summary() turn per-replicate arrays into
EstimatorSummary records.
"""

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from models import EstimatorSummary

Z95 = 1.96


@dataclass
class RunningMoments:
    """Welford mean/variance accumulator over one or more columns."""

    width: int = 1
    count: int = 0
    mean: np.ndarray = field(default=None)  # type: ignore[assignment]
    m2: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.width)
        if self.m2 is None:
            self.m2 = np.zeros(self.width)

    def push(self, row: Iterable[float]) -> None:
        x = np.asarray(row, dtype=float)
        self.count += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + delta * (x - self.mean)

    def push_batch(self, rows: np.ndarray) -> None:
        """Merge a 2-D batch (rows x width) using the pairwise update."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[0] == 0:
            return
        other = RunningMoments(
            width=self.width,
            count=rows.shape[0],
            mean=rows.mean(axis=0),
            m2=((rows - rows.mean(axis=0)) ** 2).sum(axis=0),
        )
        self.merge(other)

    def merge(self, other: "RunningMoments") -> None:
        if other.count == 0:
            return
        if self.count == 0:
            self.count, self.mean, self.m2 = other.count, other.mean.copy(), other.m2.copy()
            return
        total = self.count + other.count
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (other.count / total)
        self.m2 = self.m2 + other.m2 + delta**2 * (self.count * other.count / total)
        self.count = total

    @property
    def variance(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros(self.width)
        return self.m2 / (self.count - 1)

    @property
    def stderr(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros(self.width)
        return np.sqrt(self.variance / self.count)


def mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and standard error (zero for a single value)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("cannot summarize an empty sample")
    mean = float(values.mean())
    if values.size < 2:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / math.sqrt(values.size))


def build_summary(
    name: str,
    mean: float,
    stderr: float,
    *,
    n: int,
    lam: float,
    p: float,
    replicates: int,
    seed: int,
) -> EstimatorSummary:
    half = Z95 * stderr
    return EstimatorSummary(
        name=name,
        n=n,
        lam=lam,
        p=p,
        replicates=replicates,
        seed=seed,
        mean=mean,
        stderr=stderr,
        ci95=(mean - half, mean + half),
    )


def summarize(name: str, values: np.ndarray, **context) -> EstimatorSummary:
    """EstimatorSummary of the plain replicate mean."""
    mean, stderr = mean_and_stderr(values)
    return build_summary(name, mean, stderr, replicates=len(values), **context)


def ratio_of_means(
    numerator: np.ndarray,
    denominator: np.ndarray,
) -> tuple[float, float]:
    """
    Ratio of means with its delta-method standard error.

    Var(a_bar / b_bar) ~ (var a - 2 R cov(a,b) + R^2 var b) / (N b_bar^2).
    """
    a = np.asarray(numerator, dtype=float)
    b = np.asarray(denominator, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise ValueError("numerator and denominator must be equal-length, non-empty")
    b_bar = float(b.mean())
    if b_bar == 0.0:
        raise ZeroDivisionError("denominator mean is zero")
    ratio = float(a.mean()) / b_bar
    if a.size < 2:
        return ratio, 0.0
    cov = np.cov(a, b, ddof=1)
    var = (cov[0, 0] - 2.0 * ratio * cov[0, 1] + ratio**2 * cov[1, 1]) / (a.size * b_bar**2)
    return ratio, float(math.sqrt(max(var, 0.0)))


def ratio_summary(
    name: str,
    numerator: np.ndarray,
    denominator: np.ndarray,
    **context,
) -> EstimatorSummary:
    ratio, stderr = ratio_of_means(numerator, denominator)
    return build_summary(name, ratio, stderr, replicates=len(numerator), **context)


def linear_combination_summary(
    name: str,
    columns: list[np.ndarray],
    weights: list[float],
    **context,
) -> EstimatorSummary:
    """Mean of sum_i w_i * column_i per replicate, so covariances are accounted for."""
    combined = np.zeros(len(columns[0]), dtype=float)
    for column, weight in zip(columns, weights):
        combined += weight * np.asarray(column, dtype=float)
    return summarize(name, combined, **context)


def joint_ci_overlap(a: EstimatorSummary, b: EstimatorSummary, z: Optional[float] = None) -> bool:
    """True if two estimates agree within their combined 95% uncertainty."""
    z = Z95 if z is None else z
    return abs(a.mean - b.mean) <= z * math.hypot(a.stderr, b.stderr)

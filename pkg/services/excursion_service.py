"""
Excursion Service

Moments of the Brownian excursion area and Wright's constants w_l = M_l / l!.

This service encapsulates:
- Two exact moment recursions (rational K-recursion and gamma-recursion)
- Invariant checks on every table it returns (positivity, log-convexity,
  the explicit w_l upper bound)
- A double-precision log-table of w_l for the general-lambda intensity series,
  which needs thousands of terms at large lambda
- A Monte Carlo oracle built from uniform Dyck paths
"""

import math
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import mpmath
import numpy as np
import structlog
from joblib import Parallel, delayed
from scipy.special import gammaln

import specfun
from config import get_settings
from errors import DomainError, PrecisionError, PreconditionError
from models import ExcursionSample, MomentTable, PrecisionSpec
from observability import timed_computation
from utils.rng import stream
from utils.statistics import RunningMoments

logger = structlog.get_logger()

RECURSIONS = ("takacs", "louchard")
MC_MAX_POWER = 6
# Double-precision table sizes; the smallest that covers a request is built.
LOG_TABLE_LADDER = (256, 1024, 4096, 16384, 65536)


# ========================================================================
# EXACT RECURSIONS
# ========================================================================

@lru_cache(maxsize=8)
def takacs_coefficients(max_ell: int) -> tuple[Fraction, ...]:
    """
    K_0 = -1/2, K_1 = 1/8,
    K_l = (3l-4)/4 K_{l-1} + sum_{j=1}^{l-1} K_j K_{l-j}.
    """
    ks = [Fraction(-1, 2), Fraction(1, 8)]
    for ell in range(2, max_ell + 1):
        conv = sum((ks[j] * ks[ell - j] for j in range(1, ell)), Fraction(0))
        ks.append(Fraction(3 * ell - 4, 4) * ks[ell - 1] + conv)
    return tuple(ks[: max_ell + 1])


def _gamma_ratio(j: int) -> Fraction:
    """Gamma(3j + 1/2) / Gamma(j + 1/2) = prod_{i=j}^{3j-1} (i + 1/2), exactly."""
    ratio = Fraction(1)
    for i in range(j, 3 * j):
        ratio *= Fraction(2 * i + 1, 2)
    return ratio


@lru_cache(maxsize=8)
def louchard_coefficients(max_ell: int) -> tuple[Fraction, ...]:
    """
    gamma_0 = -1,
    gamma_l = 12l/(6l-1) G(l) - sum_{j=1}^{l-1} C(l,j) G(j) gamma_{l-j},
    with G(j) = Gamma(3j+1/2)/Gamma(j+1/2).
    """
    ratios = [_gamma_ratio(j) for j in range(max_ell + 1)]
    gs = [Fraction(-1)]
    for ell in range(1, max_ell + 1):
        value = Fraction(12 * ell, 6 * ell - 1) * ratios[ell]
        for j in range(1, ell):
            value -= math.comb(ell, j) * ratios[j] * gs[ell - j]
        gs.append(value)
    return tuple(gs)


def _to_mpf(q: Fraction) -> mpmath.mpf:
    return mpmath.mpf(q.numerator) / q.denominator


# ========================================================================
# DOUBLE-PRECISION LOG TABLE
# ========================================================================

@lru_cache(maxsize=len(LOG_TABLE_LADDER))
def _log_wright_table(size: int) -> np.ndarray:
    """
    log w_l for l < size via the rescaled recursion K_l = l! (3/4)^l kappa_l:
    kappa_l = (3l-4)/(3l) kappa_{l-1} + sum_{j=1}^{l-1} kappa_j kappa_{l-j} / C(l,j).
    kappa_l stays polynomially bounded, so the recursion never overflows.
    """
    kappa = np.zeros(size)
    kappa[0] = -0.5
    if size > 1:
        kappa[1] = 1.0 / 6.0
    log_fact = gammaln(np.arange(size + 1, dtype=float) + 1.0)
    for ell in range(2, size):
        j = np.arange(1, ell)
        inv_binom = np.exp(log_fact[j] + log_fact[ell - j] - log_fact[ell])
        conv = float(np.dot(kappa[1:ell] * kappa[ell - 1:0:-1], inv_binom))
        kappa[ell] = (3 * ell - 4) / (3 * ell) * kappa[ell - 1] + conv

    ell = np.arange(1, size, dtype=float)
    table = np.zeros(size)
    table[1:] = (
        math.log(4.0 * math.sqrt(math.pi))
        + log_fact[1:size]
        + ell * math.log(0.75)
        + np.log(kappa[1:])
        - gammaln((3.0 * ell - 1.0) / 2.0)
        - 0.5 * ell * math.log(2.0)
    )
    logger.debug("log_wright_table_built", size=size)
    return table


class ExcursionService:
    """
    Moments of the excursion area and Wright's constants.

    Tables are cached per (max_ell, digits, recursion); the Monte Carlo
    oracle splits paths into fixed-size RNG blocks so its output depends only
    on (paths, steps, seed, block_size).
    """

    def __init__(
        self,
        digits: Optional[int] = None,
        block_size: Optional[int] = None,
        threads: Optional[int] = None,
    ):
        settings = get_settings()
        self.precision = PrecisionSpec.of(digits or settings.digits)
        self.block_size = block_size or settings.excursion_block_size
        self.threads = threads or settings.threads
        self._tables: dict[tuple[int, int, str], MomentTable] = {}

    # ------------------------------------------------------------------
    # Exact tables
    # ------------------------------------------------------------------

    def excursion_moments(
        self,
        max_ell: int,
        prec: Optional[PrecisionSpec] = None,
        recursion: str = "takacs",
    ) -> MomentTable:
        """
        M_0..M_max_ell and w_0..w_max_ell in extended precision.

        Raises:
            PreconditionError: max_ell < 0 or unknown recursion
            PrecisionError: the computed table violates positivity,
                log-convexity or the w_l upper bound
        """
        if max_ell < 0:
            raise PreconditionError(f"max_ell must be >= 0, got {max_ell}")
        if recursion not in RECURSIONS:
            raise PreconditionError(f"unknown recursion {recursion!r}, expected one of {RECURSIONS}")
        prec = prec or self.precision
        key = (max_ell, prec.digits, recursion)
        if key in self._tables:
            return self._tables[key]

        with timed_computation("excursion_moments", max_ell=max_ell, digits=prec.digits, recursion=recursion):
            with mpmath.workdps(prec.digits + specfun.GUARD_DIGITS):
                moments = [mpmath.mpf(1)]
                if recursion == "takacs":
                    ks = takacs_coefficients(max_ell)
                    for ell in range(1, max_ell + 1):
                        moments.append(
                            4 * mpmath.sqrt(mpmath.pi) * math.factorial(ell) * _to_mpf(ks[ell])
                            / (specfun.gamma(Fraction(3 * ell - 1, 2), prec) * mpmath.mpf(2) ** (mpmath.mpf(ell) / 2))
                        )
                else:
                    gs = louchard_coefficients(max_ell)
                    base = 36 * mpmath.sqrt(2)
                    for ell in range(1, max_ell + 1):
                        moments.append(
                            2 * mpmath.sqrt(mpmath.pi) * _to_mpf(gs[ell])
                            / (base**ell * specfun.gamma(Fraction(3 * ell - 1, 2), prec))
                        )
                wright = [m / math.factorial(ell) for ell, m in enumerate(moments)]
                wright[0] = mpmath.mpf(1)

            self._check_table(moments, wright)
            table = MomentTable(
                max_ell=max_ell, moments=moments, wright=wright,
                precision=prec, recursion=recursion,
            )

        self._tables[key] = table
        return table

    @staticmethod
    def _check_table(moments: list, wright: list) -> None:
        for ell, (m, w) in enumerate(zip(moments, wright)):
            if not m > 0:
                raise PrecisionError(f"moment M_{ell} = {mpmath.nstr(m, 10)} is not positive")
            if ell >= 1 and w > specfun.wl_upper(ell):
                raise PrecisionError(f"w_{ell} exceeds its explicit upper bound")
        for ell in range(1, len(moments) - 1):
            if moments[ell] ** 2 > moments[ell - 1] * moments[ell + 1]:
                raise PrecisionError(f"moment sequence not log-convex at ell={ell}")

    def wright_constants(self, max_ell: int, prec: Optional[PrecisionSpec] = None) -> list:
        """w_0..w_max_ell, the projection of excursion_moments."""
        return list(self.excursion_moments(max_ell, prec).wright)

    def wl_bound_ratio(self, ell: int, prec: Optional[PrecisionSpec] = None) -> float:
        """w_l divided by its explicit upper bound; lies in (0, 1)."""
        if ell < 1:
            raise PreconditionError(f"wl_bound_ratio needs ell >= 1, got {ell}")
        w = self.excursion_moments(ell, prec).wright[ell]
        return float(w / specfun.wl_upper(ell))

    # ------------------------------------------------------------------
    # Double-precision table
    # ------------------------------------------------------------------

    def log_wright_table(self, size: int) -> np.ndarray:
        """
        log w_l for l = 0..size-1 in double precision.

        The returned array may be longer than requested (tables come from a
        fixed ladder of sizes and are cached).
        """
        if size < 1:
            raise PreconditionError(f"size must be >= 1, got {size}")
        for rung in LOG_TABLE_LADDER:
            if rung >= size:
                return _log_wright_table(rung)
        raise DomainError(
            f"intensity series would need {size} Wright constants, "
            f"above the supported {LOG_TABLE_LADDER[-1]}"
        )

    # ------------------------------------------------------------------
    # Monte Carlo oracle
    # ------------------------------------------------------------------

    @staticmethod
    def _block_areas(seed: int, block: int, count: int, half_steps: int) -> np.ndarray:
        """
        Areas of `count` uniform Dyck paths of length 2*half_steps.

        A uniform shuffle of m up-steps and m+1 down-steps has exactly one
        rotation whose partial sums stay >= 0 until the final step to -1: the
        one starting right after the first global minimum. Dropping that last
        step leaves a uniform Dyck path. Heights are lifted by one (the
        strictly positive excursion of length N+2), which removes the
        leading-order lattice bias.
        """
        rng = stream(seed, block)
        length = 2 * half_steps + 1
        base = np.concatenate([np.ones(half_steps, dtype=np.int8), -np.ones(half_steps + 1, dtype=np.int8)])
        walks = rng.permuted(np.tile(base, (count, 1)), axis=1)
        partial = np.cumsum(walks, axis=1, dtype=np.int32)
        first_min = np.argmin(partial, axis=1)
        minimum = partial[np.arange(count), first_min]
        # sum of rotated heights H_1..H_N, plus N+1 for the lift
        height_sum = partial.sum(axis=1, dtype=np.int64) - length * minimum.astype(np.int64) - first_min + length
        n = 2 * half_steps
        return height_sum / float(n) ** 1.5

    def mc_excursion_area(
        self,
        paths: int,
        steps: int,
        seed: int,
        max_power: int = MC_MAX_POWER,
    ) -> ExcursionSample:
        """
        Sample moments of the excursion area with standard errors.

        Raises:
            PreconditionError: paths < 1 or steps < 100
        """
        if paths < 1:
            raise PreconditionError(f"paths must be >= 1, got {paths}")
        if steps < 100:
            raise PreconditionError(f"steps must be >= 100, got {steps}")
        if seed < 0:
            raise PreconditionError(f"seed must be >= 0, got {seed}")

        half_steps = steps // 2
        blocks = [
            (b, min(self.block_size, paths - b * self.block_size))
            for b in range(math.ceil(paths / self.block_size))
        ]
        powers = np.arange(max_power + 1)

        def run_block(block: int, count: int) -> RunningMoments:
            areas = self._block_areas(seed, block, count, half_steps)
            acc = RunningMoments(width=max_power + 1)
            acc.push_batch(areas[:, None] ** powers[None, :])
            return acc

        with timed_computation("mc_excursion_area", paths=paths, steps=steps, seed=seed):
            partials = Parallel(n_jobs=self.threads, prefer="threads")(
                delayed(run_block)(b, count) for b, count in blocks
            )
            total = RunningMoments(width=max_power + 1)
            for part in partials:
                total.merge(part)

        moments = [float(x) for x in total.mean]
        moments[0] = 1.0
        stderr = [float(x) for x in total.stderr]
        stderr[0] = 0.0
        logger.info("mc_excursion_area_done", paths=paths, steps=steps, m1=moments[1] if max_power else None)
        return ExcursionSample(
            paths=paths, steps=2 * half_steps, seed=seed, block_size=self.block_size,
            moments=moments, stderr=stderr,
        )


# Singleton instance
_excursion_service: Optional[ExcursionService] = None


def get_excursion_service() -> ExcursionService:
    """
    Get the singleton excursion service instance.

    Returns:
        ExcursionService configured from settings
    """
    global _excursion_service

    if _excursion_service is None:
        _excursion_service = ExcursionService()

    return _excursion_service

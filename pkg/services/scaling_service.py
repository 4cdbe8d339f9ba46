"""
Scaling Service

The critical-window scaling functions f_k(lambda) = int_0^inf x^k Lambda(x) dx,
where Lambda is the intensity of the limiting point process of rescaled
component sizes:

    Lambda(x) = (2 pi)^(-1/2) x^(-5/2) exp(-F(x, lambda)) sum_l w_l x^(3l/2),
    F(x, lambda) = ((x - lambda)^3 + lambda^3) / 6.

This service encapsulates:
- The lambda = 0 series in extended precision with a rigorous error bound
- Adaptive quadrature for general lambda (substitution x = u^2)
- First and second lambda-derivatives of f_k from the moment identity
  f_k' = f_{k+2}/2 - lambda f_{k+1}
- Profiles of log f_2 and its derivatives over a lambda grid
- Large-|lambda| asymptotic references
"""

import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional

import mpmath
import numpy as np
import structlog
from joblib import Parallel, delayed
from numpy.lib.stride_tricks import sliding_window_view
from scipy import integrate
from scipy.special import logsumexp

import specfun
from config import get_settings
from errors import DomainError, PreconditionError, QuadratureError
from models import IntensityParams, PrecisionSpec, ProfileRow, RigorousValue, ScalingProfile
from observability import timed_computation
from services.excursion_service import ExcursionService, get_excursion_service

logger = structlog.get_logger()

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# Quadrature stops where the log-integrand has dropped this far below its peak.
CUTOFF_NATS = 60.0
# Consecutive negligible terms required before the intensity series is cut.
NEGLIGIBLE_RUN = 5
PROFILE_KS = (2, 3, 4, 5, 6)
SERIES_CACHE_LIMIT = 500_000


def big_f(x: float, lam: float) -> float:
    """F(x, lambda) = ((x - lambda)^3 + lambda^3) / 6."""
    if x < 0:
        raise DomainError(f"big_f requires x >= 0, got {x}")
    # expanded form cancels lambda^3 exactly
    return x * (x * x - 3.0 * x * lam + 3.0 * lam * lam) / 6.0


def asymptotic_reference(k: int, lam: float) -> float:
    """
    Leading asymptotics of f_k: (2k-5)!! / |lambda|^(2k-3) as lambda -> -inf,
    (2 lambda)^k as lambda -> +inf.
    """
    if k < 2:
        raise PreconditionError(f"asymptotic_reference needs k >= 2, got {k}")
    if lam == 0:
        raise DomainError("asymptotic_reference is undefined at lambda = 0")
    if lam < 0:
        return specfun.semifactorial(2 * k - 5) / abs(lam) ** (2 * k - 3)
    return (2.0 * lam) ** k


def lambda_grid(lo: float, hi: float, step: float) -> list[float]:
    """Inclusive grid lo, lo+step, ..., hi, rounded so that 0 lands exactly on 0."""
    if not step > 0:
        raise PreconditionError(f"step must be positive, got {step}")
    if not lo <= hi:
        raise PreconditionError(f"grid needs lo <= hi, got lo={lo}, hi={hi}")
    count = int(round((hi - lo) / step))
    if lo + count * step > hi + 1e-9 * step:
        count -= 1
    return [round(lo + i * step, 10) + 0.0 for i in range(count + 1)]


class ScalingService:
    """
    Evaluate f_k(lambda) and its derivatives.

    f_k at lambda = 0 comes from the rigorous series; everywhere else from
    quadrature. The intensity series sum_l w_l x^(3l/2) does not depend on
    lambda and is memoized per x.
    """

    def __init__(
        self,
        digits: Optional[int] = None,
        ell0: Optional[int] = None,
        quad_tol: Optional[float] = None,
        series_tol: Optional[float] = None,
        quad_limit: Optional[int] = None,
        threads: Optional[int] = None,
        excursion: Optional[ExcursionService] = None,
    ):
        settings = get_settings()
        self.precision = PrecisionSpec.of(digits or settings.digits)
        self.ell0 = ell0 or settings.ell0
        self.quad_tol = quad_tol or settings.quad_tol
        self.series_tol = series_tol or settings.series_tol
        self.quad_limit = quad_limit or settings.quad_limit
        self.threads = threads or settings.threads
        self.excursion = excursion or get_excursion_service()
        self._series_cache: dict[float, tuple[float, bool]] = {}
        self._zero_cache: dict[tuple[int, int, int], RigorousValue] = {}
        self._unconfirmed_truncations = 0

    def config(self) -> dict:
        return {
            "digits": self.precision.digits,
            "ell0": self.ell0,
            "quad_tol": self.quad_tol,
            "series_tol": self.series_tol,
            "quad_limit": self.quad_limit,
        }

    # ========================================================================
    # INTENSITY
    # ========================================================================

    def log_intensity_series(self, x: float) -> float:
        """
        log sum_l w_l x^(3l/2), truncated once NEGLIGIBLE_RUN consecutive terms
        past the largest one each fall below series_tol times the partial sum.

        The cut is a heuristic; rigorous truncation bounds exist only at
        lambda = 0. Every evaluation that had to fall back to the whole table,
        cached or not, is counted in unconfirmed_truncations.
        """
        cached = self._series_cache.get(x)
        if cached is not None:
            value, confirmed = cached
            if not confirmed:
                self._unconfirmed_truncations += 1
            return value

        log_x = math.log(x)
        center = x**3 / 12.0
        size = int(center + 15.0 * math.sqrt(center) + 100)
        table = self.excursion.log_wright_table(size)[:size]
        ell = np.arange(size, dtype=float)
        terms = table + 1.5 * ell * log_x
        partial = np.logaddexp.accumulate(terms)

        peak = int(np.argmax(terms))
        negligible = terms < partial + math.log(self.series_tol)
        runs = sliding_window_view(negligible[peak:], NEGLIGIBLE_RUN).all(axis=1)
        hits = np.flatnonzero(runs)
        confirmed = bool(hits.size)
        if confirmed:
            value = float(partial[peak + hits[0] + NEGLIGIBLE_RUN - 1])
        else:
            self._unconfirmed_truncations += 1
            logger.warning("series_truncation_unconfirmed", x=x, terms=size)
            value = float(partial[-1])

        if len(self._series_cache) > SERIES_CACHE_LIMIT:
            self._series_cache.clear()
        self._series_cache[x] = (value, confirmed)
        return value

    @property
    def unconfirmed_truncations(self) -> int:
        return self._unconfirmed_truncations

    def log_intensity(self, x: float, lam: float) -> float:
        return -2.5 * math.log(x) - big_f(x, lam) - LOG_SQRT_2PI + self.log_intensity_series(x)

    def lambda_intensity(self, x: float, lam: float, ell0: Optional[int] = None) -> float:
        """
        Lambda^(lambda)(x) with the series truncated at ell0 (all of the
        double-precision table when ell0 is None).
        """
        if not x > 0:
            raise DomainError(f"lambda_intensity requires x > 0, got {x}")
        if ell0 is None:
            return math.exp(self.log_intensity(x, lam))
        if ell0 < 1:
            raise PreconditionError(f"ell0 must be >= 1, got {ell0}")
        table = self.excursion.log_wright_table(ell0 + 1)[: ell0 + 1]
        series = float(logsumexp(table + 1.5 * np.arange(ell0 + 1) * math.log(x)))
        return math.exp(-2.5 * math.log(x) - big_f(x, lam) - LOG_SQRT_2PI + series)

    # ========================================================================
    # LAMBDA = 0 SERIES
    # ========================================================================

    def ikl_exact(self, k: int, ell: int, prec: Optional[PrecisionSpec] = None) -> mpmath.mpf:
        """
        I_{k,l} = int_0^inf x^(k + 3l/2 - 5/2) e^(-x^3/6) dx
                = (1/3) 6^(k/3 + (l-1)/2) Gamma(k/3 + (l-1)/2).
        """
        if k < 2 or ell < 0:
            raise PreconditionError(f"ikl_exact needs k >= 2 and ell >= 0, got k={k}, ell={ell}")
        prec = prec or self.precision
        a = Fraction(k, 3) + Fraction(ell - 1, 2)
        with mpmath.workdps(prec.digits + specfun.GUARD_DIGITS):
            power = mpmath.mpf(6) ** (mpmath.mpf(a.numerator) / a.denominator)
            return power * specfun.gamma(a, prec) / 3

    def fk_zero(self, k: int, ell0: Optional[int] = None, prec: Optional[PrecisionSpec] = None) -> RigorousValue:
        """
        f_k(0) = sum_{l=0}^{ell0} (2 pi)^(-1/2) w_l I_{k,l} with a proven bound.

        Every term is positive, so the truncated sum is a lower bound. The
        error bound adds the closed-form series tail bound and a rounding
        budget of (ell0 + 1) * 10^(-digits+2) * value.

        Raises:
            PreconditionError: k < 2 or ell0 < 2k/3 - 1
        """
        ell0 = self.ell0 if ell0 is None else ell0
        prec = prec or self.precision
        key = (k, ell0, prec.digits)
        if key in self._zero_cache:
            return self._zero_cache[key]
        if k < 2 or ell0 < 1 or 3 * ell0 < 2 * k - 3:
            raise PreconditionError(f"fk_zero needs k >= 2 and ell0 >= 2k/3 - 1, got k={k}, ell0={ell0}")

        with timed_computation("fk_zero", k=k, ell0=ell0, digits=prec.digits) as result:
            wright = self.excursion.wright_constants(ell0, prec)
            with mpmath.workdps(prec.digits + specfun.GUARD_DIGITS):
                scale = 1 / mpmath.sqrt(2 * mpmath.pi)
                total = mpmath.mpf(0)
                for ell in range(ell0 + 1):
                    total += scale * wright[ell] * self.ikl_exact(k, ell, prec)
                rounding = (ell0 + 1) * mpmath.mpf(10) ** (-prec.digits + 2) * total
            truncation = specfun.series_tail_bound(k, ell0)
            error_bound = specfun.as_float_upper(truncation + rounding)
            value = RigorousValue(
                value=total,
                error_bound=error_bound,
                truncation_bound=specfun.as_float_upper(truncation),
                rounding_bound=specfun.as_float_upper(rounding),
                digits=prec.digits,
            )
            result["value"] = mpmath.nstr(total, 20)
            result["error_bound"] = error_bound
        self._zero_cache[key] = value
        return value

    # ========================================================================
    # QUADRATURE
    # ========================================================================

    def _log_integrand_u(self, u: float, k: int, lam: float) -> float:
        """log of 2u * x^k * Lambda(x) at x = u^2."""
        x = u * u
        return math.log(2.0) + (2 * k - 4) * math.log(u) - big_f(x, lam) - LOG_SQRT_2PI + self.log_intensity_series(x)

    def _integration_window(self, k: int, lam: float, x_lo: float = 0.0) -> tuple[float, float, list[float], float]:
        """
        Lower and upper u-limits, breakpoints and the log-integrand at the cut.

        The log-integrand is sampled on a geometric grid in u. For lambda > 0 it
        has a small-component bump near x ~ 2/lambda^2 and the giant-component
        bump near x = 2 lambda, separated by a dip of depth ~ 4 lambda^3 / 27,
        so the cut is placed after the last sample within CUTOFF_NATS of the
        global peak.
        """
        params = IntensityParams.for_lambda(lam, self.ell0)
        x_top = params.x_max if lam <= 0 else min(params.x_max, 2.0 * lam + 10.0)
        u_top = math.sqrt(x_top)
        u_lo = math.sqrt(x_lo)
        if u_lo >= u_top:
            raise DomainError(f"lower limit x={x_lo} lies beyond the integration window")

        scales = [1.0] if lam == 0 else [math.sqrt(2.0) / abs(lam)]
        if lam > 0:
            scales.append(math.sqrt(2.0 * lam))

        grid = np.geomspace(max(u_lo, 1e-4), u_top, 800)
        logs = np.array([self._log_integrand_u(float(u), k, lam) for u in grid])
        peak = int(np.argmax(logs))
        kept = np.flatnonzero(logs >= logs[peak] - CUTOFF_NATS)
        cut = min(int(kept[-1]) + 1, grid.size - 1)
        u_cut, g_cut = float(grid[cut]), float(logs[cut])

        candidates = [float(grid[peak])]
        for s in scales:
            candidates.extend((0.5 * s, s, 2.0 * s))
        points = sorted({p for p in candidates if u_lo < p < u_cut})
        return u_lo, u_cut, points, g_cut

    def _quad(self, k: int, lam: float, tol: float, x_lo: float = 0.0) -> tuple[float, float]:
        """Integral of x^k Lambda(x) over (x_lo, inf) and its estimated relative error."""
        u_lo, u_hi, points, g_cut = self._integration_window(k, lam, x_lo)

        def integrand(u: float) -> float:
            if u <= 0.0:
                return 0.0
            return math.exp(self._log_integrand_u(u, k, lam))

        result = integrate.quad(
            integrand, u_lo, u_hi,
            points=points or None,
            epsabs=0.0, epsrel=tol,
            limit=self.quad_limit,
            full_output=1,
        )
        value, abserr, info = result[0], result[1], result[2]
        # integrand past the cut decays at least geometrically over a unit in u
        tail = math.exp(g_cut)
        rel_error = (abserr + tail) / value if value > 0 else math.inf

        if not value > 0 or rel_error > tol:
            raise QuadratureError(
                f"quadrature for f_{k} did not reach the tolerance",
                diagnostics={
                    "lambda": lam,
                    "k": k,
                    "achieved_rel_error": rel_error,
                    "tol": tol,
                    "subdivisions": info.get("last"),
                    "message": result[3] if len(result) > 3 else None,
                },
            )
        return value, rel_error

    def fk_quadrature(self, k: int, lam: float, tol: Optional[float] = None) -> float:
        """
        f_k(lambda) by adaptive quadrature.

        Raises:
            PreconditionError: k < 2 or tol <= 0
            QuadratureError: refinement did not reach the tolerance
        """
        value, _ = self.fk_quadrature_with_error(k, lam, tol)
        return value

    def fk_quadrature_with_error(self, k: int, lam: float, tol: Optional[float] = None) -> tuple[float, float]:
        tol = self.quad_tol if tol is None else tol
        if k < 2:
            raise PreconditionError(f"fk_quadrature needs k >= 2, got {k}")
        if not tol > 0:
            raise PreconditionError(f"tol must be positive, got {tol}")
        return self._quad(k, lam, tol)

    def fk(self, k: int, lam: float, tol: Optional[float] = None) -> tuple[float, float]:
        """f_k(lambda) and a relative error estimate; the rigorous series at lambda = 0."""
        if lam == 0:
            rv = self.fk_zero(k)
            value = float(rv.value)
            return value, rv.error_bound / value
        return self.fk_quadrature_with_error(k, lam, tol)

    def intensity_mass(self, lam: float, x_lo: float, tol: Optional[float] = None) -> float:
        """Expected number of rescaled components larger than x_lo: int_{x_lo}^inf Lambda."""
        if not x_lo > 0:
            raise DomainError(f"intensity_mass needs x_lo > 0, got {x_lo}")
        tol = self.quad_tol if tol is None else tol
        value, _ = self._quad(0, lam, tol, x_lo=x_lo)
        return value

    # ========================================================================
    # DERIVATIVES
    # ========================================================================

    def fk_derivative(self, k: int, lam: float, order: int = 1, tol: Optional[float] = None) -> float:
        """
        d/dlambda f_k from f_k' = f_{k+2}/2 - lambda f_{k+1}.

        Applying the identity twice:
            f_k'' = f_{k+4}/4 - lambda f_{k+3} - f_{k+1} + lambda^2 f_{k+2}.
        """
        if order not in (1, 2):
            raise PreconditionError(f"order must be 1 or 2, got {order}")
        f = lambda j: self.fk(j, lam, tol)[0]  # noqa: E731
        if order == 1:
            return 0.5 * f(k + 2) - lam * f(k + 1)
        return 0.25 * f(k + 4) - lam * f(k + 3) - f(k + 1) + lam * lam * f(k + 2)

    def fk_identity_residual(self, lam: float, tol: Optional[float] = None) -> float:
        """f_3(lambda) - 2 - 2 lambda f_2(lambda); zero for the exact functions."""
        f2, _ = self.fk(2, lam, tol)
        f3, _ = self.fk(3, lam, tol)
        return f3 - 2.0 - 2.0 * lam * f2

    def dlog_f(self, lam: float, tol: Optional[float] = None) -> float:
        """d/dlambda log f_2 = (f_4/2 - lambda f_3) / f_2."""
        f2, _ = self.fk(2, lam, tol)
        f3, _ = self.fk(3, lam, tol)
        f4, _ = self.fk(4, lam, tol)
        return (0.5 * f4 - lam * f3) / f2

    def profile_row(self, lam: float, ks: Iterable[int] = (2,), tol: Optional[float] = None) -> ProfileRow:
        needed = sorted(set(ks) | set(PROFILE_KS))
        before = self._unconfirmed_truncations
        values: dict[int, float] = {}
        worst = 0.0
        for k in needed:
            values[k], rel = self.fk(k, lam, tol)
            worst = max(worst, rel)
        f2, f3, f4, f5, f6 = (values[j] for j in PROFILE_KS)
        df2 = 0.5 * f4 - lam * f3
        d2f2 = 0.25 * f6 - lam * f5 - f3 + lam * lam * f4
        unconfirmed = self._unconfirmed_truncations - before
        return ProfileRow(
            lam=lam,
            fk={k: values[k] for k in sorted(set(ks))},
            df2=df2,
            d2f2=d2f2,
            log_f2=math.log(f2),
            dlog_f2=df2 / f2,
            d2log_f2=(f2 * d2f2 - df2 * df2) / (f2 * f2),
            quadrature_error_estimate=worst,
            series_unconfirmed=unconfirmed,
            error=f"intensity series cut unconfirmed at {unconfirmed} points" if unconfirmed else None,
        )

    def log_f_profile(
        self,
        lambda_grid: Iterable[float],
        tol: Optional[float] = None,
        ks: Iterable[int] = (2,),
    ) -> ScalingProfile:
        """
        Rows of f_k, f_2', f_2'', log f_2 and its first two derivatives.

        A row whose quadrature fails is kept with ok=False and the error text.
        """
        grid = [float(lam) for lam in lambda_grid]
        if not all(math.isfinite(lam) for lam in grid):
            raise PreconditionError("lambda grid must be finite")
        tol = self.quad_tol if tol is None else tol
        if not tol > 0:
            raise PreconditionError(f"tol must be positive, got {tol}")
        ks = tuple(sorted(set(ks)))

        with timed_computation("log_f_profile", rows=len(grid), tol=tol) as result:
            if self.threads > 1:
                rows = Parallel(n_jobs=self.threads)(
                    delayed(_profile_row_task)(self.config(), lam, ks, tol) for lam in grid
                )
            else:
                rows = [_safe_row(self, lam, ks, tol) for lam in grid]
            profile = ScalingProfile(ks=list(ks), tol=tol, rows=rows)
            result["failed_rows"] = sum(1 for r in rows if not r.ok)
        return profile

    def asymptotic_reference(self, k: int, lam: float) -> float:
        return asymptotic_reference(k, lam)


def _safe_row(service: ScalingService, lam: float, ks: tuple[int, ...], tol: float) -> ProfileRow:
    try:
        return service.profile_row(lam, ks, tol)
    except QuadratureError as e:
        logger.warning("profile_row_failed", lam=lam, error=str(e))
        nan = float("nan")
        return ProfileRow(
            lam=lam, fk={k: nan for k in ks}, df2=nan, d2f2=nan, log_f2=nan,
            dlog_f2=nan, d2log_f2=nan, quadrature_error_estimate=math.inf,
            ok=False, error=str(e),
        )


@lru_cache(maxsize=4)
def _worker_service(config_items: tuple) -> ScalingService:
    return ScalingService(**dict(config_items), threads=1)


def _profile_row_task(config: dict, lam: float, ks: tuple[int, ...], tol: float) -> ProfileRow:
    """Worker-process entry point; each process keeps its own service and caches."""
    return _safe_row(_worker_service(tuple(sorted(config.items()))), lam, ks, tol)


# Singleton instance
_scaling_service: Optional[ScalingService] = None


def get_scaling_service() -> ScalingService:
    """
    Get the singleton scaling service instance.

    Returns:
        ScalingService configured from settings
    """
    global _scaling_service

    if _scaling_service is None:
        _scaling_service = ScalingService()

    return _scaling_service

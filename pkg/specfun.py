"""
Special functions and explicit inequality bounds.

gamma() works in mpmath extended precision and is accurate to
10^(-digits+2) relative. Arguments that are multiples of 1/6 (the only ones
the lambda=0 series needs) go through a cached table of Gamma(j/6), j=1..6,
plus the recurrence Gamma(x+1) = x Gamma(x); other arguments use the same
Stirling engine directly.

The bound functions return mpmath numbers inflated outward by a relative
margin far above the working precision, so they stay valid upper bounds.
Use as_float_upper() to get a float that is still an upper bound.
"""

import math
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Union

import mpmath

from errors import DomainError, PrecisionError, PreconditionError
from models import PrecisionSpec

Real = Union[int, float, Fraction, mpmath.mpf, str]

GUARD_DIGITS = 10
BOUND_DPS = 40
# Relative outward margin applied to every bound; far above BOUND_DPS rounding.
BOUND_INFLATION = mpmath.mpf("1e-30")

DEFAULT_PRECISION = PrecisionSpec()


def _to_mpf(x: Real) -> mpmath.mpf:
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def _sixths(x: Real) -> Optional[int]:
    """Return 6x if x is an exact positive multiple of 1/6, else None."""
    if isinstance(x, mpmath.mpf) or isinstance(x, str):
        return None
    frac = Fraction(x)
    scaled = frac * 6
    if scaled.denominator == 1 and scaled > 0:
        return int(scaled)
    return None


# ========================================================================
# GAMMA
# ========================================================================

def _stirling_log_gamma(z: mpmath.mpf, target: mpmath.mpf) -> mpmath.mpf:
    """
    log Gamma(z) for large z > 0 by Stirling's series.

    The remainder after the B_2m term is bounded in absolute value by the
    first omitted term |B_{2m+2}| / ((2m+2)(2m+1) z^(2m+1)).
    """
    total = (z - mpmath.mpf(0.5)) * mpmath.log(z) - z + mpmath.log(2 * mpmath.pi) / 2
    z2 = z * z
    zpow = z
    previous_bound = None
    m = 1
    while True:
        total += mpmath.bernoulli(2 * m) / ((2 * m) * (2 * m - 1) * zpow)
        bound = abs(mpmath.bernoulli(2 * m + 2)) / ((2 * m + 2) * (2 * m + 1) * zpow * z2)
        if bound < target:
            return total
        if previous_bound is not None and bound >= previous_bound:
            # asymptotic series has started to diverge before reaching target
            raise PrecisionError(
                f"Stirling series stalled at z={mpmath.nstr(z, 8)} with remainder "
                f"{mpmath.nstr(bound, 3)} above target {mpmath.nstr(target, 3)}"
            )
        previous_bound = bound
        zpow *= z2
        m += 1


def _gamma_by_shift(x: mpmath.mpf, dps: int) -> mpmath.mpf:
    """Shift x upward until Stirling converges, then divide the shift back out."""
    threshold = mpmath.mpf(dps) / 2 + 10
    target = mpmath.mpf(10) ** (-(dps + 2))
    z = x
    shift_product = mpmath.mpf(1)
    while z < threshold:
        shift_product *= z
        z += 1
    return mpmath.exp(_stirling_log_gamma(z, target)) / shift_product


@lru_cache(maxsize=64)
def _gamma_sixth(j: int, digits: int) -> mpmath.mpf:
    """Gamma(j/6) for j = 1..6, cached per precision."""
    with mpmath.workdps(digits + GUARD_DIGITS):
        return _gamma_by_shift(mpmath.mpf(j) / 6, mpmath.mp.dps)


def gamma(x: Real, prec: PrecisionSpec = DEFAULT_PRECISION) -> mpmath.mpf:
    """
    Gamma(x) for real x > 0 with relative error below 10^(-digits+2).

    Raises:
        DomainError: x <= 0
    """
    if isinstance(x, float) and not math.isfinite(x):
        raise DomainError(f"gamma requires a finite argument, got {x}")
    sixths = _sixths(x)
    with mpmath.workdps(prec.digits + GUARD_DIGITS):
        xv = _to_mpf(x)
        if not xv > 0:
            raise DomainError(f"gamma requires x > 0, got {x}")
        if sixths is None:
            return _gamma_by_shift(xv, mpmath.mp.dps)
        j = (sixths - 1) % 6 + 1
        steps = (sixths - j) // 6
        value = _gamma_sixth(j, prec.digits)
        base = mpmath.mpf(j) / 6
        for i in range(steps):
            value *= base + i
        return value


# ========================================================================
# COMBINATORICS
# ========================================================================

def semifactorial(m: int) -> int:
    """m!! for odd m >= -1, with (-1)!! = 1."""
    if not isinstance(m, int) or isinstance(m, bool):
        raise DomainError(f"semifactorial requires an integer, got {m!r}")
    if m < -1 or m % 2 == 0:
        raise DomainError(f"semifactorial requires odd m >= -1, got {m}")
    return math.prod(range(1, m + 1, 2))


# ========================================================================
# BOUNDS
# ========================================================================

def _outward(value: mpmath.mpf) -> mpmath.mpf:
    return value * (1 + BOUND_INFLATION)


def as_float_upper(value: Union[mpmath.mpf, float]) -> float:
    """Largest-safe float conversion: the result is never below `value`."""
    f = float(value)
    if math.isinf(f):
        return f
    if mpmath.mpf(f) < value:
        return math.nextafter(f, math.inf)
    return f


def tail_geometric_bound(s: Real, ell0: int) -> mpmath.mpf:
    """
    Upper bound 5 * ell0^s * 2^(-ell0) for sum_{l > ell0} l^s 2^(-l).

    Raises:
        PreconditionError: s < 0 or ell0 < 2s
    """
    with mpmath.workdps(BOUND_DPS):
        sv = _to_mpf(s)
        if sv < 0 or ell0 < 0 or ell0 < 2 * sv:
            raise PreconditionError(f"tail_geometric_bound needs 0 <= 2s <= ell0, got s={s}, ell0={ell0}")
        return _outward(5 * mpmath.mpf(ell0) ** sv * mpmath.mpf(2) ** (-ell0))


def ikl_upper(k: int, ell: int) -> mpmath.mpf:
    """2 sqrt(pi) (3l)^(k/3-1) (3l/e)^(l/2) e^(2k^2/(9l)), an upper bound for I_{k,l}."""
    if k < 2 or ell < 1:
        raise PreconditionError(f"ikl_upper needs k >= 2 and ell >= 1, got k={k}, ell={ell}")
    with mpmath.workdps(BOUND_DPS):
        three_l = mpmath.mpf(3 * ell)
        value = (
            2 * mpmath.sqrt(mpmath.pi)
            * three_l ** (mpmath.mpf(k) / 3 - 1)
            * (three_l / mpmath.e) ** (mpmath.mpf(ell) / 2)
            * mpmath.exp(mpmath.mpf(2 * k * k) / (9 * ell))
        )
        return _outward(value)


def wl_upper(ell: int) -> mpmath.mpf:
    """8 pi^(-1/2) sqrt(l) (e/(12 l))^(l/2), an upper bound for Wright's constant w_l."""
    if ell < 1:
        raise PreconditionError(f"wl_upper needs ell >= 1, got {ell}")
    with mpmath.workdps(BOUND_DPS):
        lv = mpmath.mpf(ell)
        value = 8 / mpmath.sqrt(mpmath.pi) * mpmath.sqrt(lv) * (mpmath.e / (12 * lv)) ** (lv / 2)
        return _outward(value)


def series_tail_bound(k: int, ell0: int) -> mpmath.mpf:
    """
    Bound on the tail sum_{l > ell0} (2 pi)^(-1/2) w_l I_{k,l} of the lambda=0 series:
    11 e^(2k^2/(9 ell0)) 3^(k/3) ell0^(k/3-1/2) 2^(-ell0).

    Raises:
        PreconditionError: k < 2 or ell0 < 2k/3 - 1
    """
    if k < 2 or 3 * ell0 < 2 * k - 3 or ell0 < 1:
        raise PreconditionError(f"series_tail_bound needs k >= 2 and ell0 >= 2k/3 - 1, got k={k}, ell0={ell0}")
    with mpmath.workdps(BOUND_DPS):
        kv = mpmath.mpf(k)
        lv = mpmath.mpf(ell0)
        value = (
            11
            * mpmath.exp(2 * kv * kv / (9 * lv))
            * mpmath.mpf(3) ** (kv / 3)
            * lv ** (kv / 3 - mpmath.mpf(0.5))
            * mpmath.mpf(2) ** (-ell0)
        )
        return _outward(value)

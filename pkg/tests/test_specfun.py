"""
Tests for specfun.py - extended-precision Gamma and explicit bounds
"""

import math
import sys
from fractions import Fraction
from pathlib import Path

import mpmath
import pytest
from scipy import integrate

sys.path.insert(0, str(Path(__file__).parent.parent))

import specfun
from errors import DomainError, PreconditionError
from models import PrecisionSpec

PREC = PrecisionSpec.of(34)


def rel(a, b):
    with mpmath.workdps(60):
        return abs(mpmath.mpf(a) - b) / abs(b)


class TestGamma:
    """Gamma(x) to 10^(-digits+2) relative"""

    def test_small_integers(self):
        assert float(specfun.gamma(1, PREC)) == 1.0
        assert rel(specfun.gamma(5, PREC), 24) < 1e-32

    def test_half(self):
        with mpmath.workdps(50):
            assert rel(specfun.gamma(Fraction(1, 2), PREC), mpmath.sqrt(mpmath.pi)) < 1e-32

    def test_two_thirds_against_quadrature(self):
        value, _ = integrate.quad(lambda x: x ** (-1.0 / 3.0) * math.exp(-x), 0, math.inf)
        assert float(specfun.gamma(Fraction(2, 3), PREC)) == pytest.approx(value, rel=1e-8)
        assert float(specfun.gamma(Fraction(2, 3), PREC)) == pytest.approx(1.354117939, abs=1e-9)

    @pytest.mark.parametrize("j", range(1, 31))
    def test_sixths_against_mpmath(self, j):
        with mpmath.workdps(50):
            expected = mpmath.gamma(mpmath.mpf(j) / 6)
        assert rel(specfun.gamma(Fraction(j, 6), PREC), expected) < 1e-32

    def test_general_argument(self):
        with mpmath.workdps(50):
            expected = mpmath.gamma(mpmath.mpf("2.71828"))
        assert rel(specfun.gamma("2.71828", PREC), expected) < 1e-32

    @pytest.mark.parametrize("j", range(1, 30))
    def test_recurrence(self, j):
        x = Fraction(j, 6)
        with mpmath.workdps(50):
            lhs = specfun.gamma(x + 1, PREC)
            rhs = mpmath.mpf(j) / 6 * specfun.gamma(x, PREC)
            assert abs(lhs - rhs) / rhs < mpmath.mpf(10) ** (-31)

    @pytest.mark.parametrize("x", [Fraction(1, 6), Fraction(1, 3)])
    def test_reflection(self, x):
        with mpmath.workdps(50):
            product = specfun.gamma(x, PREC) * specfun.gamma(1 - x, PREC)
            xv = mpmath.mpf(x.numerator) / x.denominator
            expected = mpmath.pi / mpmath.sin(mpmath.pi * xv)
            assert abs(product - expected) / expected < mpmath.mpf(10) ** (-31)

    def test_higher_precision(self):
        prec = PrecisionSpec.of(60)
        with mpmath.workdps(80):
            expected = mpmath.gamma(mpmath.mpf(7) / 6)
        assert rel(specfun.gamma(Fraction(7, 6), prec), expected) < 1e-58

    @pytest.mark.parametrize("x", [0, -1, -0.5, Fraction(-1, 6)])
    def test_non_positive_rejected(self, x):
        with pytest.raises(DomainError):
            specfun.gamma(x, PREC)

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            specfun.gamma(math.inf, PREC)


class TestSemifactorial:
    @pytest.mark.parametrize("m, expected", [(-1, 1), (1, 1), (3, 3), (5, 15), (7, 105)])
    def test_values(self, m, expected):
        assert specfun.semifactorial(m) == expected

    @pytest.mark.parametrize("m", [0, 2, -3, 4])
    def test_invalid(self, m):
        with pytest.raises(DomainError):
            specfun.semifactorial(m)


class TestTailGeometricBound:
    def test_examples(self):
        assert float(specfun.tail_geometric_bound(0, 2)) == pytest.approx(1.25)
        assert float(specfun.tail_geometric_bound(1, 4)) == pytest.approx(1.25)

    @pytest.mark.parametrize("s, ell0", [(0, 2), (1, 4), (Fraction(11, 6), 75), (2.5, 10), (Fraction(1, 2), 40)])
    def test_dominates_partial_tail(self, s, ell0):
        with mpmath.workdps(40):
            sv = mpmath.mpf(s.numerator) / s.denominator if isinstance(s, Fraction) else mpmath.mpf(s)
            tail = mpmath.fsum(mpmath.mpf(ell) ** sv * mpmath.mpf(2) ** (-ell) for ell in range(ell0 + 1, 501))
            assert specfun.tail_geometric_bound(s, ell0) >= tail

    def test_precondition(self):
        with pytest.raises(PreconditionError):
            specfun.tail_geometric_bound(3, 5)


class TestExplicitBounds:
    def test_ikl_upper_instance(self):
        expected = 2 * math.sqrt(math.pi) * 3 ** (-1 / 3) * math.sqrt(3 / math.e) * math.exp(4 / 9)
        assert float(specfun.ikl_upper(2, 1)) == pytest.approx(expected, rel=1e-14)

    def test_wl_upper_values(self):
        assert float(specfun.wl_upper(1)) == pytest.approx(8 / math.sqrt(math.pi) * math.sqrt(math.e / 12), rel=1e-14)
        assert float(specfun.wl_upper(1)) == pytest.approx(2.148, abs=1e-3)
        assert specfun.wl_upper(10) > specfun.wl_upper(20)

    def test_bounds_are_rounded_outward(self):
        with mpmath.workdps(40):
            exact = 8 / mpmath.sqrt(mpmath.pi) * mpmath.sqrt(mpmath.e / 12)
            assert specfun.wl_upper(1) > exact

    def test_preconditions(self):
        with pytest.raises(PreconditionError):
            specfun.ikl_upper(1, 5)
        with pytest.raises(PreconditionError):
            specfun.ikl_upper(2, 0)
        with pytest.raises(PreconditionError):
            specfun.wl_upper(0)


class TestSeriesTailBound:
    def test_k2_ell0_75(self):
        assert float(specfun.series_tail_bound(2, 75)) == pytest.approx(1.26e-21, rel=0.01)

    def test_k6_below_target(self):
        assert specfun.series_tail_bound(6, 75) < mpmath.mpf("1e-17")

    def test_decreasing_in_ell0(self):
        values = [specfun.series_tail_bound(4, ell0) for ell0 in (40, 60, 80)]
        assert values[0] > values[1] > values[2]

    @pytest.mark.parametrize("k", range(2, 7))
    @pytest.mark.parametrize("ell0", [40, 75])
    def test_dominates_termwise_bound(self, k, ell0):
        with mpmath.workdps(40):
            scale = 1 / mpmath.sqrt(2 * mpmath.pi)
            tail = mpmath.fsum(
                scale * specfun.wl_upper(ell) * specfun.ikl_upper(k, ell) for ell in range(ell0 + 1, 501)
            )
            assert specfun.series_tail_bound(k, ell0) >= tail

    def test_precondition(self):
        with pytest.raises(PreconditionError):
            specfun.series_tail_bound(1, 75)

    def test_as_float_upper(self):
        with mpmath.workdps(40):
            value = mpmath.mpf(1) / 3
            assert mpmath.mpf(specfun.as_float_upper(value)) >= value

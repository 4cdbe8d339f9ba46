"""
Oracle Service

Exact and analytic references that the scaling and Monte Carlo results are
checked against.

This service encapsulates:
- Exhaustive enumeration of G(n, p) for n <= 5, with expectations kept as
  integer polynomials in p so derivative identities are checked exactly
- Graph-by-graph pivotal-edge counting
- Closed forms for bond percolation on the n-cycle
- Poisson branching-process references (survival probability, total-size pmf)
- Susceptibility bounds and tree-graph inequalities
- The verification suites behind `verify`

Every check returns a standardized response from utils.responses.
"""

import itertools
import math
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence, Union

import mpmath
import numpy as np
import structlog
from scipy import optimize
from scipy.special import gammaln, xlogy

import specfun
from config import get_settings
from errors import CritwinError, DomainError, EnumerationLimitError, PreconditionError
from models import CycleReport, CycleScan, ExactGnpReport
from observability import timed_computation
from utils.responses import check_response, error_to_response, not_applicable_response
from utils.statistics import joint_ci_overlap, summarize
from utils.union_find import components_of

logger = structlog.get_logger()

Poly = tuple[int, ...]
Number = Union[Fraction, float]

SUITES = ("oracles", "analytic", "montecarlo", "all")
TIERS = ("quick", "full")

# Reference values at lambda = 0
F_ZERO = {2: 1.830470321422761, 4: 3.514851319980978, 6: 16.922562003970612}
NUM_ZERO = 3.9783051377505
D2LOG_ZERO = 0.296833365232
DLOG_ZERO = 0.9601
D1_ZERO = 1.7574
D2_ZERO = 2.2306

# Stand-in for the non-constructive constant in the supercritical bound
SUSCEPTIBILITY_D = 10.0

CYCLE_ENUMERATION_MAX_N = 16


# ========================================================================
# POLYNOMIALS IN p
# ========================================================================

def poly_eval(coeffs: Poly, p: Number) -> Number:
    """Horner evaluation; exact for Fraction p."""
    value = 0 * p
    for c in reversed(coeffs):
        value = value * p + c
    return value


def poly_derivative(coeffs: Poly) -> Poly:
    if len(coeffs) <= 1:
        return (0,)
    return tuple(i * c for i, c in enumerate(coeffs) if i > 0)


def poly_one_minus_p(coeffs: Poly) -> Poly:
    """Multiply by (1 - p)."""
    padded = tuple(coeffs) + (0,)
    return tuple(c - (padded[i - 1] if i else 0) for i, c in enumerate(padded))


def poly_scale(coeffs: Poly, factor: int) -> Poly:
    return tuple(factor * c for c in coeffs)


def poly_trim(coeffs: Poly) -> Poly:
    trimmed = list(coeffs)
    while len(trimmed) > 1 and trimmed[-1] == 0:
        trimmed.pop()
    return tuple(trimmed)


def poly_equal(a: Poly, b: Poly) -> bool:
    return poly_trim(a) == poly_trim(b)


def _lifted(coeffs: Poly) -> Poly:
    """(1 - p) d/dp applied to a polynomial."""
    return poly_one_minus_p(poly_derivative(coeffs))


# ========================================================================
# ENUMERATION
# ========================================================================

def _power_sum(sizes: Sequence[int], k: int) -> int:
    return sum(c**k for c in sizes)


@lru_cache(maxsize=None)
def _graph_catalogue(n: int) -> tuple[tuple[int, tuple[int, ...], int], ...]:
    """
    (edge count, component sizes, connected ordered pairs) of every graph on
    n labelled vertices, in edge-subset bitmask order.
    """
    pairs = list(itertools.combinations(range(n), 2))
    catalogue = []
    for mask in range(1 << len(pairs)):
        edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
        uf = components_of(n, edges)
        connected = sum(1 for v in range(n) for w in range(n) if uf.connected(v, w))
        catalogue.append((len(edges), tuple(uf.sizes()), connected))
    return tuple(catalogue)


def expectation_poly(n: int, statistic: Callable[[tuple[int, ...]], int]) -> Poly:
    """
    E_{n,p}[statistic] as integer coefficients in p, from
    sum over graphs of statistic * p^m (1-p)^(M-m).
    """
    total_edges = n * (n - 1) // 2
    by_edges = [0] * (total_edges + 1)
    for m, sizes, _ in _graph_catalogue(n):
        by_edges[m] += statistic(sizes)
    coeffs = [0] * (total_edges + 1)
    for m, weight in enumerate(by_edges):
        if weight == 0:
            continue
        for j in range(total_edges - m + 1):
            coeffs[m + j] += weight * math.comb(total_edges - m, j) * (-1) ** j
    return tuple(coeffs)


def susceptibility_poly(n: int) -> Poly:
    """S_n(p) = sum_{v,w} P(v <-> w), counted pair by pair."""
    total_edges = n * (n - 1) // 2
    by_edges = [0] * (total_edges + 1)
    for m, _, connected in _graph_catalogue(n):
        by_edges[m] += connected
    coeffs = [0] * (total_edges + 1)
    for m, weight in enumerate(by_edges):
        for j in range(total_edges - m + 1):
            coeffs[m + j] += weight * math.comb(total_edges - m, j) * (-1) ** j
    return tuple(coeffs)


def power_sum_poly(n: int, *ks: int) -> Poly:
    """E[s_k1 s_k2 ...] as a polynomial in p."""
    return expectation_poly(n, lambda sizes: math.prod(_power_sum(sizes, k) for k in ks))


def pivotal_count(n: int, edges: Sequence[tuple[int, int]]) -> int:
    """
    Number of triples (e, v, w), e a non-edge and v, w ordered vertices, such
    that v <-> w in G + e but not in G.
    """
    base = components_of(n, edges)
    present = set(edges)
    count = 0
    for e in itertools.combinations(range(n), 2):
        if e in present:
            continue
        plus = components_of(n, list(edges) + [e])
        for v in range(n):
            for w in range(n):
                if plus.connected(v, w) and not base.connected(v, w):
                    count += 1
    return count


def _exact_p(p: Union[Fraction, float, int, str]) -> Number:
    if isinstance(p, (int, str)):
        p = Fraction(p)
    if not 0 <= p <= 1:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    return p


def _sample_points() -> list[Fraction]:
    return [Fraction(i, 11) for i in range(1, 11)]


# ========================================================================
# BRANCHING PROCESS
# ========================================================================

def rho_solver(eps: float) -> float:
    """
    Positive root rho of 1 - rho = exp(-(1 + eps) rho), by bisection.

    Raises:
        DomainError: eps <= 0 (rho = 0 is then the only root)
    """
    if not eps > 0:
        raise DomainError(f"rho_solver needs eps > 0, got {eps}")
    slope = 1.0 + eps

    def residual(rho: float) -> float:
        return -rho - math.expm1(-slope * rho)

    return float(optimize.bisect(residual, 1e-16, 1.0 - 1e-16, xtol=1e-16, maxiter=400))


def bp_survival(lam: float) -> float:
    """Survival probability of a Poisson(lambda) Galton-Watson tree."""
    if lam < 0:
        raise DomainError(f"bp_survival needs lambda >= 0, got {lam}")
    if lam <= 1.0:
        return 0.0
    return rho_solver(lam - 1.0)


def otter_dwass_pmf(lam: float, k: int) -> float:
    """P(|T| = k) = exp(-lambda k) (lambda k)^(k-1) / k!."""
    if lam < 0:
        raise DomainError(f"otter_dwass_pmf needs lambda >= 0, got {lam}")
    if k < 1:
        raise DomainError(f"otter_dwass_pmf needs k >= 1, got {k}")
    return float(np.exp(-lam * k + xlogy(k - 1, lam * k) - gammaln(k + 1)))


def bp_tail_probability(lam: float, k: int) -> float:
    """P(k <= |T| <= infinity) = 1 - sum_{j<k} P(|T| = j)."""
    if k < 1:
        raise DomainError(f"bp_tail_probability needs k >= 1, got {k}")
    j = np.arange(1, k)
    if j.size == 0:
        return 1.0
    pmf = np.exp(-lam * j + xlogy(j - 1, lam * j) - gammaln(j + 1))
    return float(max(1.0 - math.fsum(pmf), 0.0))


def bp_tail_bound(lam: float, k: int) -> float:
    """2 max(lambda - 1, 0) + 2e / sqrt(2 pi (k - 1)), valid for k >= 2."""
    if k < 2:
        raise DomainError(f"bp_tail_bound needs k >= 2, got {k}")
    return 2.0 * max(lam - 1.0, 0.0) + 2.0 * math.e / math.sqrt(2.0 * math.pi * (k - 1))


class OracleService:
    """Reference computations and the verification suites."""

    def __init__(
        self,
        scaling=None,
        excursion=None,
        percolation=None,
        maximizer=None,
    ):
        self.settings = get_settings()
        self._scaling = scaling
        self._excursion = excursion
        self._percolation = percolation
        self._maximizer = maximizer

    # Collaborators are resolved lazily so oracle-only use stays cheap.

    @property
    def scaling(self):
        if self._scaling is None:
            from services.scaling_service import get_scaling_service
            self._scaling = get_scaling_service()
        return self._scaling

    @property
    def excursion(self):
        if self._excursion is None:
            from services.excursion_service import get_excursion_service
            self._excursion = get_excursion_service()
        return self._excursion

    @property
    def percolation(self):
        if self._percolation is None:
            from services.percolation_service import get_percolation_service
            self._percolation = get_percolation_service()
        return self._percolation

    @property
    def maximizer(self):
        if self._maximizer is None:
            from services.maximizer_service import get_maximizer_service
            self._maximizer = get_maximizer_service()
        return self._maximizer

    # ========================================================================
    # EXACT ENUMERATION
    # ========================================================================

    def _check_enumerable(self, n: int) -> None:
        if n < 1:
            raise PreconditionError(f"n must be >= 1, got {n}")
        if n > self.settings.enumeration_max_n:
            raise EnumerationLimitError(
                f"exhaustive enumeration is limited to n <= {self.settings.enumeration_max_n}, got n={n}"
            )

    def exact_small_n(self, n: int, p: Union[Fraction, float, int, str]) -> ExactGnpReport:
        """
        Exact expectations of G(n, p) statistics by summing over all
        2^C(n,2) graphs. Rational p gives exact Fractions.

        Raises:
            EnumerationLimitError: n above the enumeration cap
            DomainError: p outside [0, 1]
        """
        self._check_enumerable(n)
        p = _exact_p(p)
        ev = lambda coeffs: poly_eval(coeffs, p)  # noqa: E731

        expected_s = {k: ev(power_sum_poly(n, k)) for k in range(1, 7)}
        s2_sq = power_sum_poly(n, 2, 2)
        s4 = power_sum_poly(n, 4)
        pair = tuple(a - b for a, b in zip(s2_sq, s4))
        return ExactGnpReport(
            n=n,
            p=p,
            expected_s=expected_s,
            expected_s2_sq=ev(s2_sq),
            expected_s4_s2=ev(power_sum_poly(n, 4, 2)),
            expected_s2_cubed=ev(power_sum_poly(n, 2, 2, 2)),
            expected_s3_sq=ev(power_sum_poly(n, 3, 3)),
            susceptibility_sum=expected_s[2],
            d_susceptibility_sum=ev(poly_derivative(susceptibility_poly(n))),
            expected_pair_product=ev(pair),
        )

    def verify_susceptibility_identities(self, n: int) -> dict:
        """
        S_n(p) = E[s_2] and (1-p) dS_n/dp = E[s_2^2 - s_4], identically in p
        and at ten rational sample points.
        """
        self._check_enumerable(n)
        s_poly = susceptibility_poly(n)
        s2 = power_sum_poly(n, 2)
        pair = tuple(a - b for a, b in zip(power_sum_poly(n, 2, 2), power_sum_poly(n, 4)))
        lifted = _lifted(s_poly)

        pointwise = all(
            poly_eval(s_poly, p) == poly_eval(s2, p) and poly_eval(lifted, p) == poly_eval(pair, p)
            for p in _sample_points()
        )
        passed = poly_equal(s_poly, s2) and poly_equal(lifted, pair) and pointwise
        return check_response(
            passed,
            f"susceptibility identities by enumeration, n={n}",
            data={"n": n, "graphs": len(_graph_catalogue(n)), "points": len(_sample_points())},
            check="susceptibility_identities",
        )

    def verify_pivotal_identity(self, n: int = 5) -> dict:
        """Graph by graph, the pivotal triple count equals s_2^2 - s_4."""
        self._check_enumerable(n)
        pairs = list(itertools.combinations(range(n), 2))
        mismatches = 0
        for mask in range(1 << len(pairs)):
            edges = [pairs[i] for i in range(len(pairs)) if mask >> i & 1]
            sizes = components_of(n, edges).sizes()
            if pivotal_count(n, edges) != _power_sum(sizes, 2) ** 2 - _power_sum(sizes, 4):
                mismatches += 1
        return check_response(
            mismatches == 0,
            f"pivotal-edge identity on every graph, n={n}",
            data={"n": n, "graphs": 1 << len(pairs), "mismatches": mismatches},
            check="pivotal_identity",
        )

    def verify_mixed_moment_identity(self, n: int, k: int) -> dict:
        """
        (1-p) d/dp E[s_k] = 1/2 sum_l C(k,l) E[s_{l+1} s_{k-l+1}] - (2^(k-1)-1) E[s_{k+2}]
        exactly; for k = 2 also the second-order identity
        ((1-p) d/dp)^2 E[s_2] = 2E[s_2^3] - 6E[s_4 s_2] - E[s_3^2] + 5E[s_6].
        """
        self._check_enumerable(n)
        if k not in (2, 3, 4):
            raise PreconditionError(f"k must be 2, 3 or 4, got {k}")

        def twice_rhs(sizes: tuple[int, ...]) -> int:
            s = lambda j: _power_sum(sizes, j)  # noqa: E731
            mixed = sum(math.comb(k, l) * s(l + 1) * s(k - l + 1) for l in range(1, k))
            return mixed - 2 * (2 ** (k - 1) - 1) * s(k + 2)

        lhs = poly_scale(_lifted(power_sum_poly(n, k)), 2)
        first = poly_equal(lhs, expectation_poly(n, twice_rhs))
        data = {"n": n, "k": k, "first_order": first}

        passed = first
        if k == 2:
            def second_rhs(sizes: tuple[int, ...]) -> int:
                s = lambda j: _power_sum(sizes, j)  # noqa: E731
                return 2 * s(2) ** 3 - 6 * s(4) * s(2) - s(3) ** 2 + 5 * s(6)

            second = poly_equal(_lifted(_lifted(power_sum_poly(n, 2))), expectation_poly(n, second_rhs))
            data["second_order"] = second
            passed = passed and second

        return check_response(passed, f"mixed-moment derivative identity, n={n}, k={k}", data=data, check="mixed_moment")

    def verify_tree_graph(self, n: int, p: Union[Fraction, float], k: int) -> dict:
        """E|C(v)|^k <= (2k-3)!! (E|C(v)|)^(2k-1), both sides exact."""
        self._check_enumerable(n)
        if k not in (2, 3):
            raise PreconditionError(f"k must be 2 or 3, got {k}")
        p = _exact_p(p)
        if not 0 < p < 1:
            raise DomainError(f"verify_tree_graph needs p in (0,1), got {p}")

        mean = poly_eval(power_sum_poly(n, 2), p) / n
        lhs = poly_eval(power_sum_poly(n, k + 1), p) / n
        rhs = specfun.semifactorial(2 * k - 3) * mean ** (2 * k - 1)
        return check_response(
            lhs <= rhs,
            f"tree-graph inequality, n={n}, p={p}, k={k}",
            data={"lhs": float(lhs), "rhs": float(rhs), "margin": float(rhs - lhs)},
            check="tree_graph",
        )

    def verify_susceptibility_bounds(
        self,
        n: int,
        p: float,
        eps: float,
        replicates: int = 200,
        seed: int = 42,
    ) -> dict:
        """
        E|C(v)| <= 1/eps when np <= 1 - eps, and
        E|C(v)| <= D max(eps^2 n, n^(1/3)) when np <= 1 + eps.

        Exact for n within the enumeration cap, Monte Carlo otherwise (the
        bound must not be rejected at three standard errors). D is a fixed
        proxy; the bound's own constant is not explicit.
        """
        if not eps > 0:
            raise PreconditionError(f"eps must be positive, got {eps}")
        if n <= self.settings.enumeration_max_n:
            mean, stderr, source = float(poly_eval(power_sum_poly(n, 2), _exact_p(p))) / n, 0.0, "exact"
        else:
            lam = (p - 1.0 / n) * n ** (4.0 / 3.0)
            summary = self.percolation.estimate_susceptibility(n, lam, replicates, seed)
            mean, stderr, source = summary.mean * n ** (1.0 / 3.0), summary.stderr * n ** (1.0 / 3.0), "montecarlo"

        low = mean - 3.0 * stderr
        data: dict = {"n": n, "p": p, "eps": eps, "mean": mean, "stderr": stderr, "source": source}
        verdicts = []

        if n * p <= 1.0 - eps:
            bound = 1.0 / eps
            verdicts.append(low <= bound)
            data["subcritical"] = {"bound": bound, "margin": bound - low}
        if n * p <= 1.0 + eps:
            scale = max(eps * eps * n, n ** (1.0 / 3.0))
            verdicts.append(low / scale <= SUSCEPTIBILITY_D)
            data["critical"] = {"ratio": mean / scale, "d_proxy": SUSCEPTIBILITY_D, "margin": SUSCEPTIBILITY_D - low / scale}

        message = f"susceptibility bounds, n={n}, p={p:.6g}, eps={eps:.6g}"
        if not verdicts:
            return not_applicable_response(message, data=data, check="susceptibility_bounds")
        return check_response(all(verdicts), message, data=data, check="susceptibility_bounds")

    # ========================================================================
    # CYCLE
    # ========================================================================

    def cycle_susceptibility(self, n: int, p: float) -> CycleReport:
        """
        chi = 1 + sum_{1<=j<n} (2p^j - p^n),
        dchi/dp = sum_{1<=j<n} 2j p^(j-1) (1 - p^(n-j)).
        """
        if n < 3:
            raise PreconditionError(f"cycle needs n >= 3, got {n}")
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {p}")
        j = np.arange(1, n, dtype=float)
        chi = 1.0 + float(np.sum(2.0 * p**j - p**n))
        dchi = float(np.sum(2.0 * j * p ** (j - 1) * (1.0 - p ** (n - j))))
        return CycleReport(n=n, p=p, chi=chi, dchi_dp=dchi, logder=dchi / chi)

    def cycle_enumeration(self, n: int, p: float) -> float:
        """E|C(v)| on the n-cycle by summing over all 2^n edge subsets."""
        if n < 3:
            raise PreconditionError(f"cycle needs n >= 3, got {n}")
        if n > CYCLE_ENUMERATION_MAX_N:
            raise EnumerationLimitError(f"cycle enumeration is limited to n <= {CYCLE_ENUMERATION_MAX_N}")
        ring = [(i, (i + 1) % n) for i in range(n)]
        total = 0.0
        for mask in range(1 << n):
            edges = [ring[i] for i in range(n) if mask >> i & 1]
            m = len(edges)
            sizes = components_of(n, edges).sizes()
            total += p**m * (1.0 - p) ** (n - m) * _power_sum(sizes, 2)
        return total / n

    def cycle_scan(self, n: int, p_grid: Optional[Sequence[float]] = None) -> CycleScan:
        """
        Maximize d/dp log chi over a p grid, then refine between the
        neighbours of the best grid point.

        The default grid is geometric in 1 - p from 0.01/n to 0.99.
        """
        if n < 3:
            raise PreconditionError(f"cycle needs n >= 3, got {n}")
        if p_grid is None:
            grid = np.sort(1.0 - np.geomspace(0.99, 0.01 / n, 2001))
        else:
            grid = np.sort(np.asarray(p_grid, dtype=float))
        if grid.size < 3 or grid[0] <= 0.0 or grid[-1] >= 1.0:
            raise PreconditionError("p grid needs at least 3 points inside (0, 1)")

        with timed_computation("cycle_scan", n=n, points=int(grid.size)):
            logder = np.array([self.cycle_susceptibility(n, float(p)).logder for p in grid])
            best = int(np.argmax(logder))
            p_star, value = float(grid[best]), float(logder[best])
            on_boundary = best in (0, grid.size - 1)
            if on_boundary:
                logger.warning("cycle_maximum_on_boundary", n=n, p=p_star)
            else:
                refined = optimize.minimize_scalar(
                    lambda p: -self.cycle_susceptibility(n, p).logder,
                    bounds=(float(grid[best - 1]), float(grid[best + 1])),
                    method="bounded",
                    options={"xatol": 1e-12},
                )
                if -refined.fun > value:
                    p_star, value = float(refined.x), float(-refined.fun)

        return CycleScan(
            n=n,
            p_star=p_star,
            logder_max=value,
            on_boundary=on_boundary,
            window_scaled=(1.0 - p_star) * n,
        )

    def cycle_rows(self, n: int, p_grid: Sequence[float]) -> list[tuple[float, float, float, float]]:
        rows = []
        for p in p_grid:
            report = self.cycle_susceptibility(n, float(p))
            rows.append((report.p, report.chi, report.dchi_dp, report.logder))
        return rows

    # ========================================================================
    # SUITES
    # ========================================================================

    def _run(self, name: str, check: Callable[[], Union[dict, list[dict]]]) -> list[dict]:
        try:
            result = check()
        except CritwinError as exc:
            logger.warning("check_raised", check=name, error=str(exc))
            return [error_to_response(name, exc)]
        return result if isinstance(result, list) else [result]

    def oracle_checks(self) -> list[dict]:
        responses = []
        for n in range(1, self.settings.enumeration_max_n + 1):
            responses += self._run("susceptibility_identities", lambda n=n: self.verify_susceptibility_identities(n))
        responses += self._run("pivotal_identity", lambda: self.verify_pivotal_identity(5))
        for n in (4, 5):
            for k in (2, 3, 4):
                responses += self._run("mixed_moment", lambda n=n, k=k: self.verify_mixed_moment_identity(n, k))
        for n, p, k in ((4, Fraction(3, 10), 2), (5, Fraction(1, 5), 3), (5, Fraction(1, 2), 2), (5, Fraction(9, 10), 3)):
            responses += self._run("tree_graph", lambda n=n, p=p, k=k: self.verify_tree_graph(n, p, k))
        responses += self._run("susceptibility_bounds", lambda: self.verify_susceptibility_bounds(5, 0.1, 0.5))
        responses += self._run("cycle_formula", self._check_cycle_formula)
        responses += self._run("cycle_scaling", self._check_cycle_scaling)
        responses += self._run("branching_process", self._check_branching_process)
        return responses

    def _check_cycle_formula(self) -> dict:
        worst = 0.0
        for n in range(3, 11):
            for p in (0.2, 0.5, 0.8):
                exact = self.cycle_enumeration(n, p)
                worst = max(worst, abs(self.cycle_susceptibility(n, p).chi - exact) / exact)
        return check_response(
            worst < 1e-12,
            "cycle susceptibility formula against enumeration, n=3..10",
            data={"max_rel_error": worst},
            check="cycle_formula",
        )

    def _check_cycle_scaling(self) -> dict:
        small, large = self.cycle_scan(100), self.cycle_scan(1000)
        window_ratio = large.window_scaled / small.window_scaled
        peak_ratio = (large.logder_max / 1000) / (small.logder_max / 100)
        passed = (
            not small.on_boundary and not large.on_boundary
            and 0.5 <= window_ratio <= 2.0 and 0.5 <= peak_ratio <= 2.0
        )
        return check_response(
            passed,
            "cycle critical window scales as 1/n and peak log-derivative as n",
            data={
                "window_scaled": [small.window_scaled, large.window_scaled],
                "peak_over_n": [small.logder_max / 100, large.logder_max / 1000],
            },
            check="cycle_scaling",
        )

    def _check_branching_process(self) -> list[dict]:
        rho = rho_solver(1.0)
        residual = abs(1.0 - rho - math.exp(-2.0 * rho))
        responses = [
            check_response(
                residual < 1e-13 and abs(rho - 0.7968) < 1e-4,
                "rho(1) solves 1 - rho = exp(-2 rho)",
                data={"rho": rho, "residual": residual},
                check="rho_solver",
            ),
            check_response(
                bp_survival(1.0 + 1e-6) < 1e-2 and 0.95 <= rho_solver(0.01) / 0.02 <= 1.05,
                "survival probability is continuous at lambda = 1",
                data={"rho_near_one": bp_survival(1.0 + 1e-6), "rho_small_eps_ratio": rho_solver(0.01) / 0.02},
                check="bp_survival",
            ),
        ]

        k = np.arange(1, 5001)
        critical_mass = math.fsum(np.exp(-k + xlogy(k - 1, k) - gammaln(k + 1)))
        super_mass = math.fsum(np.exp(-2.0 * k + xlogy(k - 1, 2.0 * k) - gammaln(k + 1)))
        responses.append(
            check_response(
                1.0 - critical_mass < 1e-2 and abs(super_mass - (1.0 - bp_survival(2.0))) < 1e-10,
                "total-size pmf sums to 1 - rho",
                data={"critical_deficit": 1.0 - critical_mass, "supercritical_mass": super_mass},
                check="otter_dwass",
            )
        )

        margins = [
            bp_tail_bound(lam, kk) - bp_tail_probability(lam, kk)
            for lam in (0.5, 1.0, 1.5, 2.0)
            for kk in (2, 10, 100, 1000)
        ]
        responses.append(
            check_response(
                min(margins) >= 0.0,
                "branching-process tail bound",
                data={"min_margin": min(margins)},
                check="bp_tail",
            )
        )
        return responses

    def analytic_checks(self, tier: str = "quick") -> list[dict]:
        responses = []
        responses += self._run("fk_zero", self._check_fk_zero)
        responses += self._run("fk_identity", self._check_fk_identity)
        responses += self._run("fk_derivative", self._check_fk_derivative)
        responses += self._run("asymptotics", self._check_asymptotics)
        responses += self._run("excursion_tables", self._check_excursion_tables)
        if tier == "full":
            responses += self._run("maximizer", self._check_maximizer)
        return responses

    def _check_fk_zero(self) -> list[dict]:
        responses = []
        values = {}
        for k in (2, 3, 4, 5, 6):
            values[k] = self.scaling.fk_zero(k, 75)
        for k, reference in F_ZERO.items():
            v = values[k]
            diff = abs(float(v.value) - reference)
            responses.append(
                check_response(
                    diff <= 2e-15 and v.error_bound < 1e-17,
                    f"f_{k}(0) sixteen-digit constant",
                    data={"value": mpmath.nstr(v.value, 20), "diff": diff, "error_bound": v.error_bound},
                    check="fk_zero",
                )
            )
        f2, f4, f6 = (float(values[k].value) for k in (2, 4, 6))
        num0 = f2 * f6 - 8.0 * f2 - f4 * f4
        responses.append(
            check_response(
                abs(num0 - NUM_ZERO) <= 5e-13,
                "f_2 f_6 - 8 f_2 - f_4^2 at lambda = 0",
                data={"value": num0, "diff": abs(num0 - NUM_ZERO)},
                check="fk_zero",
            )
        )
        d2log = self.scaling.profile_row(0.0).d2log_f2
        responses.append(
            check_response(
                abs(d2log - D2LOG_ZERO) <= 1e-11,
                "second derivative of log f at lambda = 0",
                data={"value": d2log, "diff": abs(d2log - D2LOG_ZERO)},
                check="fk_zero",
            )
        )
        responses.append(
            check_response(
                values[3].contains(2),
                "f_3(0) = 2 within the series error bound",
                data={"value": mpmath.nstr(values[3].value, 20), "error_bound": values[3].error_bound},
                check="fk_zero",
            )
        )
        return responses

    def _check_fk_identity(self) -> dict:
        residuals = {lam: abs(self.scaling.fk_identity_residual(lam)) for lam in (-2.0, -1.0, 0.0, 1.0, 2.0, 3.0)}
        worst = max(residuals.values())
        return check_response(
            worst < 1e-7,
            "f_3 = 2 + 2 lambda f_2",
            data={"max_residual": worst},
            check="fk_identity",
        )

    def _check_fk_derivative(self) -> dict:
        lam, h = 0.5, 1e-4
        fd = (self.scaling.fk_quadrature(2, lam + h) - self.scaling.fk_quadrature(2, lam - h)) / (2.0 * h)
        analytic = self.scaling.fk_derivative(2, lam, 1)
        rel = abs(fd - analytic) / abs(analytic)
        return check_response(
            rel < 1e-5,
            "f_2' against a central difference at lambda = 0.5",
            data={"analytic": analytic, "finite_difference": fd, "rel_error": rel},
            check="fk_derivative",
        )

    def _check_asymptotics(self) -> dict:
        lower = {
            lam: abs(self.scaling.fk_quadrature(2, lam) / self.scaling.asymptotic_reference(2, lam) - 1.0)
            for lam in (-5.0, -10.0, -20.0)
        }
        lower_ok = all(err <= 3.0 * abs(lam) ** -3 for lam, err in lower.items())
        r10 = self.scaling.fk_quadrature(2, 10.0) / 400.0
        r20 = self.scaling.fk_quadrature(2, 20.0) / 1600.0
        upper_ok = 0.8 <= r10 <= 1.2 and abs(r20 - 1.0) < abs(r10 - 1.0)
        return check_response(
            lower_ok and upper_ok,
            "f_2 asymptotics as lambda -> -inf and +inf",
            data={"lower_rel_errors": {str(k): v for k, v in lower.items()}, "ratio_10": r10, "ratio_20": r20},
            check="asymptotics",
        )

    def _check_excursion_tables(self) -> list[dict]:
        takacs = self.excursion.excursion_moments(75, recursion="takacs")
        louchard = self.excursion.excursion_moments(75, recursion="louchard")
        ratios = [float(takacs.wright[ell] / specfun.wl_upper(ell)) for ell in range(1, 76)]
        with mpmath.workdps(takacs.precision.digits):
            agreement = max(
                abs(a - b) / b for a, b in zip(takacs.moments, louchard.moments)
            )
        m1 = float(takacs.moments[1])
        m2 = float(takacs.moments[2])
        tolerance = float(takacs.precision.relative_tolerance)
        return [
            check_response(
                all(0.0 < r < 1.0 for r in ratios),
                "w_l below its explicit bound for 1 <= l <= 75",
                data={"max_ratio": max(ratios)},
                check="wright_bound",
            ),
            check_response(
                agreement <= tolerance
                and abs(m1 - math.sqrt(math.pi / 8.0)) < 1e-15
                and abs(m2 - 5.0 / 12.0) < 1e-15,
                "excursion moment recursions agree",
                data={"max_rel_difference": float(agreement), "M1": m1, "M2": m2},
                check="excursion_recursions",
            ),
        ]

    def _check_maximizer(self) -> list[dict]:
        report = self.maximizer.find_maximizer(-2.0, 4.0)
        rows = self.maximizer.profile_rows(
            self.settings.profile_lo, self.settings.profile_hi, self.settings.grid_step
        )
        return [
            check_response(
                not report.on_boundary and 0.5 <= report.lambda_star <= 1.5,
                "interior maximizer of d/dlambda log f near 1",
                data={"lambda_star": report.lambda_star, "g_star": report.g_star},
                check="maximizer",
            ),
            check_response(
                all(row[2] > 0 for row in rows),
                "d/dlambda log f > 0 across the profile range",
                data={"rows": len(rows), "min": min(row[2] for row in rows)},
                check="profile_positive",
            ),
        ]

    def montecarlo_checks(self, tier: str = "quick") -> list[dict]:
        if tier != "full":
            return [not_applicable_response("Monte Carlo suite runs in the full tier", check="montecarlo")]
        responses = []
        responses += self._run("excursion_mc", self._check_excursion_mc)
        responses += self._run("critical_estimators", self._check_critical_estimators)
        responses += self._run("coupling", self._check_coupling)
        responses += self._run(
            "susceptibility_bounds",
            lambda: [
                self.verify_susceptibility_bounds(10**6, 1e-6, 10**-2),
                self.verify_susceptibility_bounds(10**6, 0.5e-6, 0.5),
            ],
        )
        return responses

    def _check_excursion_mc(self) -> dict:
        sample = self.excursion.mc_excursion_area(10**6, 10**4, seed=42)
        table = self.excursion.excursion_moments(6)
        z = [
            abs(sample.moments[ell] - float(table.moments[ell])) / sample.stderr[ell]
            for ell in range(1, 7)
        ]
        return check_response(
            max(z) <= 4.0,
            "Monte Carlo excursion moments agree with the recursion",
            data={"max_z": max(z)},
            check="excursion_mc",
        )

    def _check_critical_estimators(self) -> list[dict]:
        n, lam, reps, seed = 10**6, 0.0, 200, 42
        perc = self.percolation
        x2 = perc.estimate_susceptibility(n, lam, reps, seed)
        dlog = perc.estimate_log_derivative(n, lam, reps, seed)
        derivs = perc.estimate_derivative_moments(n, lam, reps, seed)
        two = perc.two_large_components_freq(n, lam, reps, seed)
        targets = (
            (x2, F_ZERO[2], 0.05),
            (dlog, DLOG_ZERO, 0.10),
            (derivs["d1"], D1_ZERO, 0.10),
            (derivs["d2"], D2_ZERO, 0.25),
        )
        responses = [
            check_response(
                est.within_relative(target, rel),
                f"{est.name} at n={n}, lambda=0 within {rel:.0%} of {target}",
                data={"mean": est.mean, "stderr": est.stderr},
                check="critical_estimators",
            )
            for est, target, rel in targets
        ]
        responses.append(
            check_response(
                two.mean > 0 and two.excludes_zero(),
                "two large components occur with positive frequency",
                data={"mean": two.mean, "ci95": list(two.ci95)},
                check="critical_estimators",
            )
        )
        return responses

    def _check_coupling(self) -> list[dict]:
        n, seeds = 10**5, 50
        p_list = [1.0 / n + lam * n ** (-4.0 / 3.0) for lam in (-2.0, 0.0, 2.0)]
        violations = 0
        middle = []
        for seed in range(seeds):
            samples = self.percolation.coupled_sample(n, p_list, seed)
            s2 = [s.s(2) for s in samples]
            violations += sum(1 for a, b in zip(s2, s2[1:]) if b < a)
            middle.append(s2[1] / n ** (4.0 / 3.0))

        coupled = summarize("x2_coupled", np.array(middle), n=n, lam=0.0, p=p_list[1], seed=0)
        direct = self.percolation.estimate_susceptibility(n, 0.0, seeds, seed=10**6)
        return [
            check_response(
                violations == 0,
                "coupled samples are monotone in p",
                data={"seeds": seeds, "violations": violations},
                check="coupling",
            ),
            check_response(
                joint_ci_overlap(coupled, direct, z=3.0),
                "coupled marginal at lambda = 0 agrees with direct sampling",
                data={"coupled": coupled.mean, "direct": direct.mean},
                check="coupling",
            ),
        ]

    def verify_suite(self, suite: str = "all", tier: str = "quick") -> list[dict]:
        """
        Run a verification suite.

        Args:
            suite: oracles | analytic | montecarlo | all
            tier: quick (enumeration and analytic identities) or full
                (adds the maximizer and the Monte Carlo suites)
        """
        if suite not in SUITES:
            raise PreconditionError(f"unknown suite {suite!r}, expected one of {SUITES}")
        if tier not in TIERS:
            raise PreconditionError(f"unknown tier {tier!r}, expected one of {TIERS}")

        responses = []
        with timed_computation("verify_suite", suite=suite, tier=tier) as result:
            if suite in ("oracles", "all"):
                responses += self.oracle_checks()
            if suite in ("analytic", "all"):
                responses += self.analytic_checks(tier)
            if suite in ("montecarlo", "all"):
                responses += self.montecarlo_checks(tier)
            result["checks"] = len(responses)
            result["failed"] = sum(1 for r in responses if not r["success"])
        logger.info("verify_suite_done", suite=suite, tier=tier, checks=len(responses), failed=result["failed"])
        return responses


# Singleton instance
_oracle_service: Optional[OracleService] = None


def get_oracle_service() -> OracleService:
    """Get the singleton oracle service instance."""
    global _oracle_service

    if _oracle_service is None:
        _oracle_service = OracleService()

    return _oracle_service

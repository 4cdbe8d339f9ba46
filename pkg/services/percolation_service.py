"""
Percolation Service

Monte Carlo engine for the Erdos-Renyi graph G(n, p) in the critical window
p = 1/n + lambda n^(-4/3).

This service encapsulates:
- Exact sampling of component sizes (geometric edge skipping, sparse
  connected components) with integer-exact power sums
- Monotone coupling of several p values in one draw
- Susceptibility, log-derivative and mixed-moment derivative estimators
- Frequency of two macroscopic components and the largest-component scale

Replicate r of a run draws from a Philox stream keyed by (seed, r), and
results are reduced in replicate order, so summaries do not depend on the
worker count.
"""

import math
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np
import structlog
from joblib import Parallel, delayed
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from config import get_settings
from errors import DomainError, PreconditionError, SimulationBudgetError
from models import ComponentStats, EstimatorSummary, SampleFunctionals
from observability import timed_computation
from utils.rng import stream
from utils.statistics import linear_combination_summary, ratio_summary, summarize

logger = structlog.get_logger()

POWERS = tuple(range(1, 7))
ESTIMANDS = ("x2", "x3", "x4", "x6", "dlogchi", "d1", "d2", "twolarge", "dk3", "dk4", "c1")

# Column layout of the per-replicate sample matrix.
COLUMNS = ("x2", "x3", "x4", "x5", "x6", "pair", "twolarge", "c1")
COL = {name: i for i, name in enumerate(COLUMNS)}


# ========================================================================
# PARAMETERS
# ========================================================================

def critical_p(n: int, lam: float) -> float:
    """p = 1/n + lambda n^(-4/3), which must lie in (0, 1)."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    p = 1.0 / n + lam * n ** (-4.0 / 3.0)
    if not 0.0 < p < 1.0:
        raise DomainError(f"p = 1/n + lambda n^(-4/3) = {p:.6g} is outside (0,1) for n={n}, lambda={lam}")
    return p


def large_component_threshold(n: int) -> int:
    """ceil(n^(2/3)), computed exactly: the least c with c^3 >= n^2."""
    target = n * n
    c = max(1, round(n ** (2.0 / 3.0)))
    while c**3 < target:
        c += 1
    while c > 1 and (c - 1) ** 3 >= target:
        c -= 1
    return c


# ========================================================================
# SAMPLING
# ========================================================================

@lru_cache(maxsize=4)
def _row_offsets(n: int) -> np.ndarray:
    """Number of lexicographic pairs (i, j), i < j, whose first index is below i."""
    i = np.arange(n, dtype=np.int64)
    return i * (2 * n - i - 1) // 2


def decode_pairs(n: int, index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map lexicographic pair indices in [0, n(n-1)/2) to (i, j) with i < j."""
    offsets = _row_offsets(n)
    rows = np.searchsorted(offsets, index, side="right") - 1
    cols = index - offsets[rows] + rows + 1
    return rows, cols


def _present_pairs(n: int, p: float, rng: np.random.Generator, max_edges: int) -> np.ndarray:
    """Indices of present edges, drawn by geometric skipping over the pair sequence."""
    total = n * (n - 1) // 2
    if total == 0 or p <= 0.0:
        return np.empty(0, dtype=np.int64)
    expected = p * total
    if expected > max_edges:
        raise SimulationBudgetError(n, p, expected, max_edges)
    if p >= 1.0:
        return np.arange(total, dtype=np.int64)

    chunk = int(expected + 6.0 * math.sqrt(expected) + 64)
    found = []
    position = -1
    while True:
        gaps = rng.geometric(p, size=chunk).astype(np.int64)
        positions = position + np.cumsum(gaps)
        inside = positions[positions < total]
        found.append(inside)
        if inside.size < positions.size:
            break
        position = int(positions[-1])
    return np.concatenate(found)


def _component_sizes(n: int, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    if rows.size == 0:
        return np.ones(n, dtype=np.int64)
    graph = coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(n, n)).tocsr()
    _, labels = connected_components(graph, directed=False)
    sizes = np.bincount(labels).astype(np.int64)
    return np.sort(sizes)[::-1]


def power_sums(sizes: np.ndarray) -> dict[int, int]:
    """s_k = sum_i |C_i|^k for k = 1..6 in exact integer arithmetic."""
    values, counts = np.unique(sizes, return_counts=True)
    pairs = [(int(v), int(c)) for v, c in zip(values, counts)]
    return {k: sum(c * v**k for v, c in pairs) for k in POWERS}


def _stats(n: int, p: float, seed: int, sizes: np.ndarray) -> ComponentStats:
    return ComponentStats(n=n, p=p, seed=seed, sizes=sizes, power_sums=power_sums(sizes))


def functionals(stats: ComponentStats) -> SampleFunctionals:
    """Rescaled X_k, pair product s_2^2 - s_4 and the two-large-components event."""
    n = stats.n
    x = {k: stats.s(k) / n ** (2.0 * k / 3.0) for k in range(2, 7)}
    return SampleFunctionals(
        x=x,
        pair_product=stats.s(2) ** 2 - stats.s(4),
        two_large=stats.second_largest >= large_component_threshold(n),
    )


class PercolationService:
    """
    G(n, p) sampling and critical-window estimators.

    The most recent replicate matrix is cached so that several estimands
    requested for the same (n, lambda, replicates, seed) share samples.
    """

    def __init__(self, threads: Optional[int] = None, max_edges: Optional[int] = None):
        settings = get_settings()
        self.threads = threads or settings.threads
        self.max_edges = max_edges or settings.max_edges
        self._last_run: Optional[tuple[tuple, np.ndarray]] = None

    # ------------------------------------------------------------------
    # Single draws
    # ------------------------------------------------------------------

    def _validate(self, n: int, p: float) -> None:
        if n < 1:
            raise DomainError(f"n must be >= 1, got {n}")
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {p}")

    def sample_gnp_components(self, n: int, p: float, seed: int, replicate: int = 0) -> ComponentStats:
        """
        Component sizes of one G(n, p) draw.

        Raises:
            DomainError: n < 1 or p outside [0, 1]
            SimulationBudgetError: expected edge count above max_edges
        """
        self._validate(n, p)
        rng = stream(seed, replicate)
        index = _present_pairs(n, p, rng, self.max_edges)
        rows, cols = decode_pairs(n, index)
        return _stats(n, p, seed, _component_sizes(n, rows, cols))

    def coupled_sample(self, n: int, p_list: Sequence[float], seed: int, replicate: int = 0) -> list[ComponentStats]:
        """
        One monotone-coupled draw at every p in p_list.

        Edges present at p_max carry an independent uniform V on [0, p_max];
        the edge is present at p iff V <= p, so each marginal is exactly
        G(n, p) and the graphs are nested.
        """
        if not p_list:
            raise PreconditionError("p_list must not be empty")
        if any(b < a for a, b in zip(p_list, p_list[1:])):
            raise PreconditionError("p_list must be ascending")
        for p in p_list:
            self._validate(n, p)

        p_max = float(p_list[-1])
        rng = stream(seed, replicate)
        index = _present_pairs(n, p_max, rng, self.max_edges)
        marks = rng.uniform(0.0, p_max, size=index.size) if p_max > 0 else np.empty(0)
        rows, cols = decode_pairs(n, index)

        samples = []
        for p in p_list:
            keep = marks <= p
            samples.append(_stats(n, float(p), seed, _component_sizes(n, rows[keep], cols[keep])))
        return samples

    # ------------------------------------------------------------------
    # Replicates
    # ------------------------------------------------------------------

    def _replicate_row(self, n: int, p: float, seed: int, r: int) -> np.ndarray:
        stats = self.sample_gnp_components(n, p, seed, replicate=r)
        f = functionals(stats)
        row = np.empty(len(COLUMNS))
        for k in range(2, 7):
            row[COL[f"x{k}"]] = f.x[k]
        row[COL["pair"]] = f.pair_product / n ** (8.0 / 3.0)
        row[COL["twolarge"]] = 1.0 if f.two_large else 0.0
        row[COL["c1"]] = stats.largest / n ** (2.0 / 3.0)
        return row

    def replicate_matrix(self, n: int, lam: float, replicates: int, seed: int) -> np.ndarray:
        """Per-replicate functionals, one row per replicate in replicate order."""
        if replicates < 1:
            raise PreconditionError(f"replicates must be >= 1, got {replicates}")
        p = critical_p(n, lam)
        key = (n, lam, replicates, seed, self.max_edges)
        if self._last_run is not None and self._last_run[0] == key:
            return self._last_run[1]

        with timed_computation("replicate_matrix", n=n, lam=lam, replicates=replicates, seed=seed):
            rows = Parallel(n_jobs=self.threads, prefer="threads")(
                delayed(self._replicate_row)(n, p, seed, r) for r in range(replicates)
            )
            matrix = np.vstack(rows)
        logger.info("replicate_batch_done", n=n, lam=lam, replicates=replicates, seed=seed)
        self._last_run = (key, matrix)
        return matrix

    def _context(self, n: int, lam: float, seed: int) -> dict:
        return {"n": n, "lam": lam, "p": critical_p(n, lam), "seed": seed}

    # ------------------------------------------------------------------
    # Estimators
    # ------------------------------------------------------------------

    def estimate_susceptibility(self, n: int, lam: float, replicates: int, seed: int) -> EstimatorSummary:
        """Mean of X_2 = s_2 / n^(4/3), estimating chi(p) / n^(1/3)."""
        m = self.replicate_matrix(n, lam, replicates, seed)
        return summarize("x2", m[:, COL["x2"]], **self._context(n, lam, seed))

    def estimate_moment(self, name: str, n: int, lam: float, replicates: int, seed: int) -> EstimatorSummary:
        m = self.replicate_matrix(n, lam, replicates, seed)
        return summarize(name, m[:, COL[name]], **self._context(n, lam, seed))

    def estimate_log_derivative(self, n: int, lam: float, replicates: int, seed: int) -> EstimatorSummary:
        """
        n^(-4/3) d/dp log chi as a ratio of means:
        mean[(s_2^2 - s_4) / ((1-p) n^(8/3))] / mean[s_2 / n^(4/3)].
        """
        m = self.replicate_matrix(n, lam, replicates, seed)
        ctx = self._context(n, lam, seed)
        return ratio_summary("dlogchi", m[:, COL["pair"]] / (1.0 - ctx["p"]), m[:, COL["x2"]], **ctx)

    def estimate_derivative_moments(self, n: int, lam: float, replicates: int, seed: int) -> dict[str, EstimatorSummary]:
        """
        D E[X_2] = E[X_2^2] - E[X_4] and
        D^2 E[X_2] = 2E[X_2^3] - 6E[X_4 X_2] - E[X_3^2] + 5E[X_6],
        with D = (1-p) n^(-4/3) d/dp, from the same samples.
        """
        m = self.replicate_matrix(n, lam, replicates, seed)
        ctx = self._context(n, lam, seed)
        x2, x3, x4, x6 = (m[:, COL[c]] for c in ("x2", "x3", "x4", "x6"))
        return {
            "d1": linear_combination_summary("d1", [x2 * x2, x4], [1.0, -1.0], **ctx),
            "d2": linear_combination_summary(
                "d2", [x2**3, x4 * x2, x3 * x3, x6], [2.0, -6.0, -1.0, 5.0], **ctx
            ),
        }

    def estimate_moment_derivative(self, n: int, lam: float, k: int, replicates: int, seed: int) -> EstimatorSummary:
        """
        D E[X_k] = 1/2 sum_{l=1}^{k-1} C(k,l) E[X_{l+1} X_{k-l+1}] - (2^(k-1) - 1) E[X_{k+2}].
        """
        if k not in (2, 3, 4):
            raise PreconditionError(f"k must be 2, 3 or 4, got {k}")
        m = self.replicate_matrix(n, lam, replicates, seed)
        x = lambda j: m[:, COL[f"x{j}"]]  # noqa: E731
        columns = [x(l + 1) * x(k - l + 1) for l in range(1, k)]
        weights = [0.5 * math.comb(k, l) for l in range(1, k)]
        columns.append(x(k + 2))
        weights.append(-(2.0 ** (k - 1) - 1.0))
        return linear_combination_summary(f"dk{k}", columns, weights, **self._context(n, lam, seed))

    def two_large_components_freq(self, n: int, lam: float, replicates: int, seed: int) -> EstimatorSummary:
        """Frequency of |C_2| >= ceil(n^(2/3))."""
        return self.estimate_moment("twolarge", n, lam, replicates, seed)

    def estimate_largest_component(self, n: int, lam: float, replicates: int, seed: int) -> EstimatorSummary:
        """Mean of |C_1| / n^(2/3)."""
        return self.estimate_moment("c1", n, lam, replicates, seed)

    def estimate(
        self,
        names: Iterable[str],
        n: int,
        lam: float,
        replicates: int,
        seed: int,
    ) -> list[EstimatorSummary]:
        """Summaries for the named estimands, all from one replicate matrix."""
        names = list(names)
        unknown = [name for name in names if name not in ESTIMANDS]
        if unknown:
            raise PreconditionError(f"unknown estimands {unknown}, expected a subset of {ESTIMANDS}")

        out = []
        for name in names:
            if name == "x2":
                out.append(self.estimate_susceptibility(n, lam, replicates, seed))
            elif name in ("x3", "x4", "x6", "twolarge", "c1"):
                out.append(self.estimate_moment(name, n, lam, replicates, seed))
            elif name == "dlogchi":
                out.append(self.estimate_log_derivative(n, lam, replicates, seed))
            elif name in ("d1", "d2"):
                out.append(self.estimate_derivative_moments(n, lam, replicates, seed)[name])
            else:
                out.append(self.estimate_moment_derivative(n, lam, int(name[2:]), replicates, seed))
        return out


# Singleton instance
_percolation_service: Optional[PercolationService] = None


def get_percolation_service() -> PercolationService:
    """
    Get the singleton percolation service instance.

    Returns:
        PercolationService configured from settings
    """
    global _percolation_service

    if _percolation_service is None:
        _percolation_service = PercolationService()

    return _percolation_service

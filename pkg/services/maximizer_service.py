"""
Maximizer Service

Locates the maximizer lambda* of g(lambda) = d/dlambda log f_2(lambda) and
emits the log f profile data behind the critical-window figure.

Unimodality of g is observed and reported, never assumed.
"""

import math
from typing import Optional

import numpy as np
import structlog
from scipy import optimize

from config import get_settings
from errors import PreconditionError
from models import MaximizerReport, RunConfig
from observability import timed_computation
from services.scaling_service import ScalingService, get_scaling_service, lambda_grid
from utils.output import write_csv

logger = structlog.get_logger()

PROFILE_HEADER = ("lambda", "log_f", "dlog_f", "d2log_f")


def observed_unimodal(values: np.ndarray) -> bool:
    """True iff the sequence rises then falls with exactly one sign change of its differences."""
    signs = np.sign(np.diff(np.asarray(values, dtype=float)))
    signs = signs[signs != 0]
    if signs.size < 2 or signs[0] < 0 or signs[-1] > 0:
        return False
    return int(np.count_nonzero(np.diff(signs))) == 1


class MaximizerService:
    """Coarse grid scan of g followed by bounded refinement of the best cell."""

    def __init__(
        self,
        scaling: Optional[ScalingService] = None,
        grid_step: Optional[float] = None,
    ):
        settings = get_settings()
        self.scaling = scaling or get_scaling_service()
        self.grid_step = grid_step or settings.grid_step

    def g(self, lam: float, tol: Optional[float] = None) -> float:
        """d/dlambda log f_2 at lambda."""
        return self.scaling.dlog_f(lam, tol)

    def find_maximizer(self, lo: float, hi: float, tol: float = 1e-6) -> MaximizerReport:
        """
        Maximize g over [lo, hi].

        A maximum at either end of the window is reported with
        on_boundary=True rather than raised.

        Raises:
            PreconditionError: lo >= hi or tol <= 0
        """
        if not lo < hi:
            raise PreconditionError(f"find_maximizer needs lo < hi, got lo={lo}, hi={hi}")
        if not tol > 0:
            raise PreconditionError(f"tol must be positive, got {tol}")

        cells = max(2, math.ceil((hi - lo) / self.grid_step - 1e-9))
        step = (hi - lo) / cells
        grid = [round(lo + i * step, 12) + 0.0 for i in range(cells + 1)]

        with timed_computation("find_maximizer", lo=lo, hi=hi, tol=tol) as result:
            profile = self.scaling.log_f_profile(grid)
            values = np.array([row.dlog_f2 for row in profile.rows])
            if np.any(np.isnan(values)):
                logger.warning("maximizer_grid_incomplete", failed=int(np.isnan(values).sum()))
            best = int(np.nanargmax(values))
            grid_argmax = grid[best]
            unimodal = observed_unimodal(values[~np.isnan(values)])

            if best == 0 or best == cells:
                logger.warning("maximizer_on_boundary", lam=grid_argmax, window=(lo, hi))
                report = MaximizerReport(
                    lambda_star=grid_argmax,
                    g_star=float(values[best]),
                    bracket=(grid[max(best - 1, 0)], grid[min(best + 1, cells)]),
                    unimodal_observed=unimodal,
                    grid_step=step,
                    grid_argmax=grid_argmax,
                    on_boundary=True,
                    window=(lo, hi),
                    tol=tol,
                )
            else:
                a, b = grid[best - 1], grid[best + 1]
                refined = optimize.minimize_scalar(
                    lambda lam: -self.g(lam),
                    bounds=(a, b),
                    method="bounded",
                    options={"xatol": tol},
                )
                lambda_star, g_star = float(refined.x), float(-refined.fun)
                if g_star < values[best] or not a < lambda_star < b:
                    lambda_star, g_star = grid_argmax, float(values[best])
                report = MaximizerReport(
                    lambda_star=lambda_star,
                    g_star=g_star,
                    bracket=(a, b),
                    unimodal_observed=unimodal,
                    grid_step=step,
                    grid_argmax=grid_argmax,
                    window=(lo, hi),
                    tol=tol,
                )
            result["lambda_star"] = report.lambda_star
            result["on_boundary"] = report.on_boundary

        logger.info(
            "maximizer_found",
            lambda_star=round(report.lambda_star, 4),
            g_star=report.g_star,
            above_one=report.lambda_star > 1.0,
        )
        return report

    def grid_rows(self, grid: list[float]) -> list[tuple[float, float, float, float]]:
        """(lambda, log f, d/dlambda log f, d2/dlambda2 log f) at each grid point."""
        profile = self.scaling.log_f_profile(grid)
        return [(r.lam, r.log_f2, r.dlog_f2, r.d2log_f2) for r in profile.rows]

    def profile_rows(self, lam_lo: float, lam_hi: float, step: float) -> list[tuple[float, float, float, float]]:
        if not lam_lo < lam_hi:
            raise PreconditionError(f"profile needs lo < hi, got lo={lam_lo}, hi={lam_hi}")
        return self.grid_rows(lambda_grid(lam_lo, lam_hi, step))

    def emit_profile_csv(
        self,
        lam_lo: Optional[float] = None,
        lam_hi: Optional[float] = None,
        step: Optional[float] = None,
        path: Optional[str] = None,
        config: Optional[RunConfig] = None,
    ):
        """
        Write lambda, log_f, dlog_f, d2log_f over [lam_lo, lam_hi].

        Defaults come from settings (the [-1.75, 3.75] figure range).
        """
        settings = get_settings()
        lam_lo = settings.profile_lo if lam_lo is None else lam_lo
        lam_hi = settings.profile_hi if lam_hi is None else lam_hi
        step = self.grid_step if step is None else step
        rows = self.profile_rows(lam_lo, lam_hi, step)
        return write_csv(path, PROFILE_HEADER, rows, config)


# Singleton instance
_maximizer_service: Optional[MaximizerService] = None


def get_maximizer_service() -> MaximizerService:
    """Get the singleton maximizer service instance."""
    global _maximizer_service

    if _maximizer_service is None:
        _maximizer_service = MaximizerService()

    return _maximizer_service

"""
Tests for services/maximizer_service.py - maximizer of d/dlambda log f
"""

import sys
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from errors import PreconditionError
from services.maximizer_service import PROFILE_HEADER, MaximizerService, observed_unimodal
from services.scaling_service import ScalingService
from utils.output import read_csv_rows


def fake_scaling(mocker, g):
    """A scaling service whose d/dlambda log f is the function g."""

    def profile(grid, tol=None, ks=(2,)):
        rows = [
            SimpleNamespace(lam=lam, log_f2=0.0, dlog_f2=g(lam), d2log_f2=-1.0, ok=True)
            for lam in grid
        ]
        return SimpleNamespace(rows=rows)

    scaling = mocker.Mock(spec=ScalingService)
    scaling.log_f_profile.side_effect = profile
    scaling.dlog_f.side_effect = lambda lam, tol=None: g(lam)
    return scaling


class TestObservedUnimodal:
    def test_single_peak(self):
        assert observed_unimodal(np.array([0.1, 0.5, 0.9, 0.7, 0.2]))

    def test_plateau_ignored(self):
        assert observed_unimodal(np.array([0.1, 0.5, 0.5, 0.3]))

    def test_monotone_is_not_unimodal(self):
        assert not observed_unimodal(np.array([0.1, 0.2, 0.3]))
        assert not observed_unimodal(np.array([0.3, 0.2, 0.1]))

    def test_two_peaks(self):
        assert not observed_unimodal(np.array([0.0, 1.0, 0.5, 1.0, 0.0]))


class TestFindMaximizer:
    def test_interior_peak(self, mocker):
        service = MaximizerService(scaling=fake_scaling(mocker, lambda lam: 1.0 - (lam - 0.83) ** 2), grid_step=0.1)
        report = service.find_maximizer(-2.0, 4.0, tol=1e-8)
        assert report.lambda_star == pytest.approx(0.83, abs=1e-6)
        assert report.g_star == pytest.approx(1.0, abs=1e-10)
        assert report.unimodal_observed
        assert not report.on_boundary
        lo, hi = report.bracket
        assert lo < report.lambda_star < hi
        assert abs(report.grid_argmax - 0.83) <= report.grid_step

    def test_boundary_maximum_reported(self, mocker):
        service = MaximizerService(scaling=fake_scaling(mocker, lambda lam: lam), grid_step=0.5)
        report = service.find_maximizer(0.0, 2.0)
        assert report.on_boundary
        assert report.lambda_star == 2.0
        assert not report.unimodal_observed

    def test_bimodal_flagged(self, mocker):
        g = lambda lam: np.exp(-((lam + 1.0) ** 2) * 8) + 1.5 * np.exp(-((lam - 1.0) ** 2) * 8)  # noqa: E731
        service = MaximizerService(scaling=fake_scaling(mocker, g), grid_step=0.05)
        report = service.find_maximizer(-2.0, 2.0, tol=1e-8)
        assert not report.unimodal_observed
        assert report.lambda_star == pytest.approx(1.0, abs=1e-4)

    def test_preconditions(self, mocker):
        service = MaximizerService(scaling=fake_scaling(mocker, lambda lam: 0.0))
        with pytest.raises(PreconditionError):
            service.find_maximizer(1.0, 1.0)
        with pytest.raises(PreconditionError):
            service.find_maximizer(0.0, 1.0, tol=0.0)


class TestProfileCsv:
    def test_emit_profile(self, mocker, tmp_path):
        service = MaximizerService(scaling=fake_scaling(mocker, lambda lam: 2.0 * lam), grid_step=0.25)
        path = tmp_path / "profile.csv"
        service.emit_profile_csv(-0.5, 0.5, path=str(path))
        header, rows = read_csv_rows(str(path))
        assert tuple(header) == PROFILE_HEADER
        assert [float(r[0]) for r in rows] == [-0.5, -0.25, 0.0, 0.25, 0.5]
        assert float(rows[-1][2]) == pytest.approx(1.0)

    def test_profile_needs_ordered_range(self, mocker):
        service = MaximizerService(scaling=fake_scaling(mocker, lambda lam: 0.0))
        with pytest.raises(PreconditionError):
            service.profile_rows(1.0, 0.0, 0.1)


@pytest.fixture(scope="module")
def real_maximizer():
    return MaximizerService(scaling=ScalingService(threads=1), grid_step=0.1)


@pytest.fixture(scope="module")
def real_report(real_maximizer):
    return real_maximizer.find_maximizer(-2.0, 4.0, tol=1e-4)


@pytest.mark.slow
@pytest.mark.analytic
class TestRealMaximizer:
    def test_lambda_star_window(self, real_report):
        assert 0.5 <= real_report.lambda_star <= 1.5
        assert real_report.unimodal_observed
        assert not real_report.on_boundary

    def test_wider_window_same_maximizer(self, real_maximizer, real_report):
        wide = real_maximizer.find_maximizer(-5.0, 8.0, tol=1e-4)
        assert not wide.on_boundary
        assert wide.lambda_star == pytest.approx(real_report.lambda_star, abs=1e-3)

    def test_strict_local_maximum(self, real_maximizer, real_report):
        lam = real_report.lambda_star
        g_star = real_maximizer.g(lam)
        assert g_star > real_maximizer.g(lam - 0.5)
        assert g_star > real_maximizer.g(lam + 0.5)

    def test_far_left_below_zero(self, real_maximizer):
        assert real_maximizer.g(-20.0) < real_maximizer.g(0.0)

    def test_profile_log_derivative_positive(self, real_maximizer):
        rows = real_maximizer.profile_rows(-1.75, 3.75, 0.05)
        assert len(rows) == 111
        assert all(row[2] > 0 for row in rows)

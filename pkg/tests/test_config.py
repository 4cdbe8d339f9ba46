"""
Tests for config.py - Pydantic Settings configuration

Tests cover:
- Default values
- Environment variable loading
- Type validation
- Custom validators
"""

import pytest
from pydantic import ValidationError
from config import Settings, get_settings


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    """Run every test away from any project .env and CRITWIN_ variables."""
    monkeypatch.chdir(tmp_path)
    for name in ("THREADS", "DIGITS", "ELL0", "LOG_LEVEL", "LOG_JSON", "MAX_EDGES"):
        monkeypatch.delenv(f"CRITWIN_{name}", raising=False)


class TestConfigDefaults:
    """Test that default values are set correctly"""

    def test_default_precision_settings(self):
        """Defaults reproduce the published lambda=0 constants"""
        settings = Settings()
        assert settings.digits == 34
        assert settings.ell0 == 75
        assert settings.quad_tol == 1e-10
        assert settings.series_tol == 1e-16

    def test_default_monte_carlo_settings(self):
        settings = Settings()
        assert settings.threads == 1
        assert settings.max_edges == 50_000_000
        assert settings.excursion_block_size == 1024
        assert settings.enumeration_max_n == 5

    def test_default_profile_range(self):
        """Profile defaults match the [-1.75, 3.75] figure range"""
        settings = Settings()
        assert settings.profile_lo == -1.75
        assert settings.profile_hi == 3.75
        assert settings.grid_step == 0.05

    def test_default_logging(self):
        settings = Settings()
        assert settings.log_level == "WARNING"
        assert settings.log_json is False


class TestConfigValidation:
    """Test Pydantic validation"""

    def test_digits_bounds(self):
        Settings(digits=15)
        Settings(digits=200)

        with pytest.raises(ValidationError) as exc_info:
            Settings(digits=10)
        assert "greater than or equal to 15" in str(exc_info.value)

        with pytest.raises(ValidationError):
            Settings(digits=500)

    def test_threads_bounds(self):
        Settings(threads=1)
        Settings(threads=64)

        with pytest.raises(ValidationError):
            Settings(threads=0)

    def test_quad_tol_must_be_positive(self):
        with pytest.raises(ValidationError):
            Settings(quad_tol=0.0)
        with pytest.raises(ValidationError):
            Settings(quad_tol=-1e-8)

    def test_enumeration_cap(self):
        """Enumeration cannot be configured above 5 vertices"""
        with pytest.raises(ValidationError):
            Settings(enumeration_max_n=6)

    def test_log_level_normalized(self):
        assert Settings(log_level="debug").log_level == "DEBUG"
        with pytest.raises(ValidationError):
            Settings(log_level="chatty")

    def test_profile_range_ordered(self):
        with pytest.raises(ValidationError):
            Settings(profile_lo=1.0, profile_hi=0.5)


class TestEnvironmentVariables:
    """Test loading from environment variables"""

    def test_load_from_env(self, monkeypatch):
        """Test that settings load from CRITWIN_ variables"""
        monkeypatch.setenv("CRITWIN_THREADS", "8")
        monkeypatch.setenv("CRITWIN_DIGITS", "50")
        monkeypatch.setenv("CRITWIN_ELL0", "100")

        settings = Settings()
        assert settings.threads == 8
        assert settings.digits == 50
        assert settings.ell0 == 100

    def test_env_file(self, tmp_path):
        """Values in .env are picked up from the working directory"""
        (tmp_path / ".env").write_text("CRITWIN_MAX_EDGES=123456\n")
        assert Settings().max_edges == 123456

    def test_boolean_parsing(self, monkeypatch):
        monkeypatch.setenv("CRITWIN_LOG_JSON", "true")
        assert Settings().log_json is True

        monkeypatch.setenv("CRITWIN_LOG_JSON", "0")
        assert Settings().log_json is False

    def test_case_insensitive_env_vars(self, monkeypatch):
        monkeypatch.setenv("critwin_threads", "3")
        assert Settings().threads == 3

    def test_unprefixed_variables_ignored(self, monkeypatch):
        monkeypatch.setenv("THREADS", "7")
        assert Settings().threads == 1


class TestGetSettings:
    def test_returns_global_instance(self):
        assert get_settings() is get_settings()

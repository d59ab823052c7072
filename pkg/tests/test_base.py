"""Tests for sis_patch_analysis: version, settings, scenario schema and error kinds."""

import dataclasses
import os
from unittest.mock import patch

import pytest
from pydantic import ValidationError

import sis_patch_analysis
from sis_patch_analysis.config import DEFAULT_SETTINGS, AnalysisSettings
from sis_patch_analysis.errors import (
    DegenerateOmegaStar,
    InvalidInput,
    NoBracket,
    NoConvergence,
    NoPositiveSolution,
    NotApplicable,
    NumericalFailure,
    SisPatchError,
)
from sis_patch_analysis.schemas import EquilibriumRecord, ScenarioConfig, Tolerances


def _scenario(**overrides: object) -> dict[str, object]:
    data: dict[str, object] = {
        "n": 2,
        "L": [[0.0, 1.0], [1.0, 0.0]],
        "beta": [1.0, 1.0],
        "gamma": [1.0, 1.0],
        "dS": 1.0,
        "dI": 1.0,
        "N": 4.0,
    }
    data.update(overrides)
    return data


# ---------------------------------------------------------------------------
# Version
# ---------------------------------------------------------------------------


def test_version_exists() -> None:
    """Verify that the package has a version string."""
    assert hasattr(sis_patch_analysis, "__version__")
    assert isinstance(sis_patch_analysis.__version__, str)
    assert len(sis_patch_analysis.__version__) > 0


def test_version_format() -> None:
    """Verify version follows semver pattern."""
    version = sis_patch_analysis.__version__
    parts = version.split(".")
    assert len(parts) >= 2, "Version should have at least major.minor"
    for part in parts:
        assert part.isdigit() or part[0].isdigit(), f"Version part '{part}' should start with a digit"


# ---------------------------------------------------------------------------
# Settings
# ---------------------------------------------------------------------------


def test_settings_defaults() -> None:
    """Settings load with all defaults when no env vars are set."""
    with patch.dict(os.environ, {}, clear=True):
        settings = AnalysisSettings.from_env()
    assert settings == DEFAULT_SETTINGS
    assert settings.scan_points == 400
    assert settings.threshold_offset == 1e-6
    assert settings.ode_rtol == 1e-8
    assert settings.ode_atol == 1e-10
    assert settings.output_samples == 200
    assert settings.workers == 1
    assert settings.seed == 0


def test_settings_from_env() -> None:
    """Settings pick up SISPATCH_* overrides."""
    env = {
        "SISPATCH_SCAN_POINTS": "150",
        "SISPATCH_LMAX_CAP": "1e8",
        "SISPATCH_ODE_RTOL": "1e-9",
        "SISPATCH_ODE_ATOL": "1e-12",
        "SISPATCH_OUTPUT_SAMPLES": "50",
        "SISPATCH_WORKERS": "4",
        "SISPATCH_SEED": "17",
    }
    with patch.dict(os.environ, env, clear=True):
        settings = AnalysisSettings.from_env()
    assert settings.scan_points == 150
    assert settings.lmax_cap == 1e8
    assert settings.ode_rtol == 1e-9
    assert settings.ode_atol == 1e-12
    assert settings.output_samples == 50
    assert settings.workers == 4
    assert settings.seed == 17


def test_settings_invalid_int() -> None:
    """Non-integer SISPATCH_SCAN_POINTS raises ValueError."""
    with patch.dict(os.environ, {"SISPATCH_SCAN_POINTS": "many"}, clear=True):
        with pytest.raises(ValueError, match="SISPATCH_SCAN_POINTS must be an integer"):
            AnalysisSettings.from_env()


def test_settings_nonpositive_float() -> None:
    """Zero tolerance is rejected."""
    with patch.dict(os.environ, {"SISPATCH_ODE_RTOL": "0"}, clear=True):
        with pytest.raises(ValueError, match="SISPATCH_ODE_RTOL must be > 0"):
            AnalysisSettings.from_env()


def test_settings_zero_workers() -> None:
    """Worker count below one is rejected."""
    with patch.dict(os.environ, {"SISPATCH_WORKERS": "0"}, clear=True):
        with pytest.raises(InvalidInput, match="SISPATCH_WORKERS must be >= 1"):
            AnalysisSettings.from_env()


def test_settings_invalid_seed() -> None:
    """SISPATCH_SEED is validated like the other variables."""
    with patch.dict(os.environ, {"SISPATCH_SEED": "x"}, clear=True):
        with pytest.raises(InvalidInput, match="SISPATCH_SEED must be an integer"):
            AnalysisSettings.from_env()
    with patch.dict(os.environ, {"SISPATCH_SEED": "-3"}, clear=True):
        with pytest.raises(InvalidInput, match="SISPATCH_SEED must be >= 0"):
            AnalysisSettings.from_env()
    with patch.dict(os.environ, {"SISPATCH_SEED": " 0 "}, clear=True):
        assert AnalysisSettings.from_env().seed == 0


def test_settings_frozen() -> None:
    """Settings cannot be mutated in place."""
    with pytest.raises(dataclasses.FrozenInstanceError):
        DEFAULT_SETTINGS.scan_points = 3  # type: ignore[misc]


# ---------------------------------------------------------------------------
# Scenario schema
# ---------------------------------------------------------------------------


def test_scenario_minimal() -> None:
    """A minimal scenario validates and builds a model."""
    scenario = ScenarioConfig.model_validate(_scenario())
    m = scenario.to_model()
    assert m.n == 2
    assert m.L[0, 0] == -1.0
    assert scenario.S0 is None
    assert scenario.tolerances is None


def test_scenario_rejects_unknown_field() -> None:
    """Unknown fields fail closed."""
    with pytest.raises(ValidationError, match="extra"):
        ScenarioConfig.model_validate(_scenario(ds=1.0))


def test_scenario_rejects_unknown_tolerance() -> None:
    """Unknown keys inside tolerances are rejected too."""
    with pytest.raises(ValidationError):
        ScenarioConfig.model_validate(_scenario(tolerances={"rtol": 1e-6}))


def test_scenario_nonpositive_rate() -> None:
    """dS must be strictly positive."""
    with pytest.raises(ValidationError):
        ScenarioConfig.model_validate(_scenario(dS=0.0))


def test_scenario_dimension_mismatch() -> None:
    """beta length must match n."""
    with pytest.raises(ValidationError, match="beta must have 2 entries"):
        ScenarioConfig.model_validate(_scenario(beta=[1.0, 1.0, 1.0]))


def test_scenario_non_square_L() -> None:
    """L must be n x n."""
    with pytest.raises(ValidationError, match="L must be a 2x2 matrix"):
        ScenarioConfig.model_validate(_scenario(L=[[0.0, 1.0]]))


def test_scenario_initial_data_sum() -> None:
    """S0 and I0 must sum to N."""
    with pytest.raises(ValidationError, match="expected N"):
        ScenarioConfig.model_validate(_scenario(S0=[1.0, 1.0], I0=[1.0, 0.5]))


def test_scenario_initial_data_pair() -> None:
    """S0 without I0 is rejected."""
    with pytest.raises(ValidationError, match="together"):
        ScenarioConfig.model_validate(_scenario(S0=[2.0, 2.0]))


def test_scenario_tolerances_and_seed_override_settings() -> None:
    """Scenario tolerances and seed are layered over the base settings."""
    scenario = ScenarioConfig.model_validate(
        _scenario(tolerances={"rel": 1e-6, "points": 50, "workers": 2}, seed=9)
    )
    settings = scenario.settings(DEFAULT_SETTINGS)
    assert settings.ode_rtol == 1e-6
    assert settings.scan_points == 50
    assert settings.workers == 2
    assert settings.seed == 9
    assert settings.ode_atol == DEFAULT_SETTINGS.ode_atol


def test_tolerances_empty_is_identity() -> None:
    """An empty tolerances block leaves settings unchanged."""
    assert Tolerances().apply(DEFAULT_SETTINGS) == DEFAULT_SETTINGS


def test_equilibrium_record_ignores_extra_keys() -> None:
    """Read-back records tolerate additional columns."""
    record = EquilibriumRecord.model_validate(
        {"kind": "EE", "S": [1.0], "I": [1.0], "kappa_star": 1.0, "stability": "stable", "note": "x"}
    )
    assert record.l is None
    assert record.marginal_root is False


# ---------------------------------------------------------------------------
# Error kinds
# ---------------------------------------------------------------------------


def test_error_exit_codes() -> None:
    """Input errors exit 2, numerical failures exit 3."""
    assert InvalidInput.exit_code == 2
    assert NumericalFailure.exit_code == 3
    assert NoPositiveSolution("x").exit_code == 2
    assert NoBracket("x").exit_code == 3


def test_error_hierarchy() -> None:
    """Errors keep their builtin bases so callers can catch broadly."""
    assert issubclass(NoPositiveSolution, NotApplicable)
    assert issubclass(DegenerateOmegaStar, InvalidInput)
    assert issubclass(InvalidInput, ValueError)
    assert issubclass(NoConvergence, RuntimeError)
    assert issubclass(NoConvergence, SisPatchError)

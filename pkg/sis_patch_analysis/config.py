"""Numerical settings, with optional overrides from environment variables."""

from __future__ import annotations

import os
from dataclasses import dataclass

from sis_patch_analysis.errors import InvalidInput


def _parse_positive_int(name: str, value: str) -> int:
    """Parse *value* as a strictly positive integer for the variable *name*."""
    try:
        parsed = int(value.strip())
    except ValueError:
        raise InvalidInput(f"{name} must be an integer, got {value!r}") from None
    if parsed < 1:
        raise InvalidInput(f"{name} must be >= 1, got {parsed}")
    return parsed


def _parse_seed(name: str, value: str) -> int:
    """Parse *value* as a nonnegative integer seed for the variable *name*."""
    try:
        parsed = int(value.strip())
    except ValueError:
        raise InvalidInput(f"{name} must be an integer, got {value!r}") from None
    if parsed < 0:
        raise InvalidInput(f"{name} must be >= 0, got {parsed}")
    return parsed


def _parse_positive_float(name: str, value: str) -> float:
    """Parse *value* as a strictly positive float for the variable *name*."""
    try:
        parsed = float(value.strip())
    except ValueError:
        raise InvalidInput(f"{name} must be a number, got {value!r}") from None
    if not parsed > 0.0:
        raise InvalidInput(f"{name} must be > 0, got {parsed}")
    return parsed


@dataclass(frozen=True)
class AnalysisSettings:
    """Immutable tolerances, budgets and grid sizes shared by all analyses.

    Defaults are usable as-is; :meth:`from_env` applies optional overrides and the CLI
    layers scenario tolerances and flags on top with :func:`dataclasses.replace`.
    """

    # spectral routines
    power_max_iter: int = 100_000
    power_rtol: float = 1e-12
    threshold_deadband: float = 1e-10
    ratio_rtol: float = 1e-9

    # family solve
    family_rtol: float = 1e-10
    family_max_steps: int = 500
    newton_max_iter: int = 50

    # root scan
    scan_points: int = 400
    threshold_offset: float = 1e-6
    lmax_cap: float = 1e12
    bisect_rtol: float = 1e-15
    merge_rtol: float = 1e-8
    root_tol: float = 1e-9

    # stability and dynamics
    stability_tol: float = 1e-8
    ode_rtol: float = 1e-8
    ode_atol: float = 1e-10
    output_samples: int = 200
    max_ode_steps: int = 2_000_000
    convergence_tol: float = 1e-6

    # sweeps and estimators
    sweep_refine_rtol: float = 1e-4
    uniqueness_points: int = 200
    critical_points: int = 200
    workers: int = 1
    seed: int = 0

    @classmethod
    def from_env(cls) -> AnalysisSettings:
        """Build :class:`AnalysisSettings` from defaults and environment variables.

        Environment variables
        ---------------------
        SISPATCH_SCAN_POINTS : str, optional
            Points of the logarithmic l-scan for endemic equilibria (default ``400``).
        SISPATCH_LMAX_CAP : str, optional
            Hard upper limit for the l-scan cap (default ``1e12``).
        SISPATCH_ODE_RTOL : str, optional
            Relative tolerance of the Runge-Kutta integrator (default ``1e-8``).
        SISPATCH_ODE_ATOL : str, optional
            Absolute tolerance of the Runge-Kutta integrator (default ``1e-10``).
        SISPATCH_OUTPUT_SAMPLES : str, optional
            Stored states per simulation (default ``200``).
        SISPATCH_WORKERS : str, optional
            Worker threads for sweeps (default ``1``).
        SISPATCH_SEED : str, optional
            Seed for randomly drawn initial data (default ``0``).
        """
        defaults = cls()
        return cls(
            scan_points=(
                _parse_positive_int("SISPATCH_SCAN_POINTS", v)
                if (v := os.environ.get("SISPATCH_SCAN_POINTS"))
                else defaults.scan_points
            ),
            lmax_cap=(
                _parse_positive_float("SISPATCH_LMAX_CAP", v)
                if (v := os.environ.get("SISPATCH_LMAX_CAP"))
                else defaults.lmax_cap
            ),
            ode_rtol=(
                _parse_positive_float("SISPATCH_ODE_RTOL", v)
                if (v := os.environ.get("SISPATCH_ODE_RTOL"))
                else defaults.ode_rtol
            ),
            ode_atol=(
                _parse_positive_float("SISPATCH_ODE_ATOL", v)
                if (v := os.environ.get("SISPATCH_ODE_ATOL"))
                else defaults.ode_atol
            ),
            output_samples=(
                _parse_positive_int("SISPATCH_OUTPUT_SAMPLES", v)
                if (v := os.environ.get("SISPATCH_OUTPUT_SAMPLES"))
                else defaults.output_samples
            ),
            workers=(
                _parse_positive_int("SISPATCH_WORKERS", v)
                if (v := os.environ.get("SISPATCH_WORKERS"))
                else defaults.workers
            ),
            seed=_parse_seed("SISPATCH_SEED", v) if (v := os.environ.get("SISPATCH_SEED")) else defaults.seed,
        )


DEFAULT_SETTINGS = AnalysisSettings()

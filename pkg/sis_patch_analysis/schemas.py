"""Pydantic v2 models for scenario configs and emitted equilibrium records."""

import dataclasses
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from sis_patch_analysis.config import AnalysisSettings
from sis_patch_analysis.model import Model, build_model


class Tolerances(BaseModel):
    """Optional numerical overrides carried by a scenario."""

    model_config = ConfigDict(extra="forbid")

    rel: float | None = Field(None, gt=0.0)
    abs: float | None = Field(None, gt=0.0)
    lmax_cap: float | None = Field(None, gt=0.0)
    points: int | None = Field(None, ge=2)
    output_samples: int | None = Field(None, ge=2)
    workers: int | None = Field(None, ge=1)

    def apply(self, settings: AnalysisSettings) -> AnalysisSettings:
        changes = {
            "ode_rtol": self.rel,
            "ode_atol": self.abs,
            "lmax_cap": self.lmax_cap,
            "scan_points": self.points,
            "output_samples": self.output_samples,
            "workers": self.workers,
        }
        return dataclasses.replace(settings, **{k: v for k, v in changes.items() if v is not None})


class ScenarioConfig(BaseModel):
    """JSON scenario: network, rates, dispersal, population and optional initial data.

    Unknown fields are rejected. Only the off-diagonal entries of ``L`` are used.
    """

    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=2)
    L: list[list[float]]
    beta: list[float]
    gamma: list[float]
    dS: float = Field(gt=0.0)
    dI: float = Field(gt=0.0)
    N: float = Field(gt=0.0)
    S0: list[float] | None = None
    I0: list[float] | None = None
    tolerances: Tolerances | None = None
    seed: int | None = Field(None, ge=0)

    @model_validator(mode="after")
    def _check_dimensions(self) -> "ScenarioConfig":
        if len(self.L) != self.n or any(len(row) != self.n for row in self.L):
            raise ValueError(f"L must be a {self.n}x{self.n} matrix")
        for name in ("beta", "gamma", "S0", "I0"):
            values = getattr(self, name)
            if values is not None and len(values) != self.n:
                raise ValueError(f"{name} must have {self.n} entries, got {len(values)}")
        if (self.S0 is None) != (self.I0 is None):
            raise ValueError("S0 and I0 must be given together")
        if self.S0 is not None and self.I0 is not None:
            if min(self.S0 + self.I0) < 0.0:
                raise ValueError("S0 and I0 must be nonnegative")
            total = sum(self.S0) + sum(self.I0)
            if abs(total - self.N) > 1e-9 * self.N:
                raise ValueError(f"S0 and I0 sum to {total!r}, expected N={self.N!r}")
        return self

    def settings(self, base: AnalysisSettings) -> AnalysisSettings:
        settings = self.tolerances.apply(base) if self.tolerances else base
        if self.seed is not None:
            settings = dataclasses.replace(settings, seed=self.seed)
        return settings

    def to_model(self, settings: AnalysisSettings | None = None) -> Model:
        return build_model(self.L, self.beta, self.gamma, self.dS, self.dI, self.N, settings)


class EquilibriumRecord(BaseModel):
    """One equilibrium as written to ``equilibria.json``."""

    model_config = ConfigDict(extra="ignore")

    kind: Literal["DFE", "EE"]
    S: list[float]
    I: list[float]
    kappa_star: float
    stability: Literal["stable", "unstable", "marginal"]
    l: float | None = None
    spectral_bound: float | None = None
    marginal_root: bool = False

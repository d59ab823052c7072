"""Model construction, reproduction-number analysis and closed-form threshold checks."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Literal

import numpy as np
import numpy.typing as npt
import scipy.linalg
from loguru import logger as glogger

from sis_patch_analysis.config import DEFAULT_SETTINGS, AnalysisSettings
from sis_patch_analysis.errors import DimensionMismatch, NonPositiveParameter, NotApplicable, SingularV
from sis_patch_analysis.linalg_core import (
    ConnectivityMatrix,
    FloatArray,
    frozen,
    spectral_bound,
    spectral_radius,
    validate_connectivity,
)

logger = glogger.bind(classname="model")

Threshold = Literal["subcritical", "threshold", "supercritical"]
Stability = Literal["stable", "unstable", "marginal"]


def _positive_vector(values: npt.ArrayLike, name: str, n: int) -> FloatArray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != (n,):
        raise DimensionMismatch(f"{name} must have shape ({n},), got {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise NonPositiveParameter(f"{name} must be strictly positive, got {arr.tolist()}")
    return frozen(arr)


def _positive_scalar(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise NonPositiveParameter(f"{name} must be strictly positive, got {value}")
    return value


@dataclass(frozen=True, eq=False)
class Model:
    """Full parameter set of the SIS patch model with mass-action transmission.

    ``d_s`` and ``d_i`` are the dispersal rates of susceptible and infected people,
    ``N`` the total population. Validation runs on construction, so
    :meth:`with_params` re-validates every derived model.
    """

    conn: ConnectivityMatrix
    beta: FloatArray
    gamma: FloatArray
    d_s: float
    d_i: float
    N: float

    def __post_init__(self) -> None:
        n = self.conn.n
        object.__setattr__(self, "beta", _positive_vector(self.beta, "beta", n))
        object.__setattr__(self, "gamma", _positive_vector(self.gamma, "gamma", n))
        object.__setattr__(self, "d_s", _positive_scalar(self.d_s, "d_s"))
        object.__setattr__(self, "d_i", _positive_scalar(self.d_i, "d_i"))
        object.__setattr__(self, "N", _positive_scalar(self.N, "N"))

    @property
    def n(self) -> int:
        return self.conn.n

    @property
    def L(self) -> FloatArray:
        return self.conn.entries

    @property
    def alpha(self) -> FloatArray:
        return self.conn.alpha

    @property
    def r(self) -> FloatArray:
        """Risk vector ``r_j = gamma_j / beta_j``."""
        return self.gamma / self.beta

    @property
    def risk_ratios(self) -> FloatArray:
        """``r_j / alpha_j``; its minimum and maximum drive the dispersal limits."""
        return self.r / self.alpha

    def with_params(self, **changes: Any) -> Model:
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    """Steady state ``(S, I)`` with its scalar coordinate and local-stability tag.

    ``l`` is ``None`` for the DFE. ``kappa_star`` satisfies
    ``d_s * S + d_i * I = kappa_star * N * alpha``.
    """

    S: FloatArray
    I: FloatArray
    kind: Literal["DFE", "EE"]
    kappa_star: float
    stability: Stability
    l: float | None = None
    spectral_bound: float | None = None
    marginal_root: bool = False


@dataclass(frozen=True, eq=False)
class ReproductionAnalysis:
    F: FloatArray
    V: FloatArray
    r0: float
    sigma_star: float
    limit_di_zero: float
    limit_di_inf: float
    threshold: Threshold


@dataclass(frozen=True)
class DfeStability:
    """Which sufficient conditions for global stability of the DFE hold.

    Condition (ii) has no computable threshold; ``large_ds_regime_possible`` only records
    that ``r0 < 1``, under which a large enough ``d_s`` makes the DFE globally stable.
    """

    condition_i: bool
    large_ds_regime_possible: bool
    condition_iii: bool
    condition_iv: bool
    proportionality_m: float | None
    globally_stable: bool
    inconclusive: bool
    linear_stability: Stability
    r0: float
    n_rho_beta_v_inv: float


@dataclass(frozen=True)
class EENonexistence:
    condition_i: bool
    condition_ii: bool
    r0: float
    min_risk_ratio: float

    @property
    def no_ee(self) -> bool:
        return self.condition_i or self.condition_ii


@dataclass(frozen=True)
class MultipleEEWindow:
    """Population window ``(sum r, sum alpha*gamma / sum alpha^2*beta)``.

    For ``N`` strictly inside, ``sum r < N`` and the large-``d_i`` limit of ``r0`` is
    below one, so multiple endemic equilibria appear for small ``d_s`` once ``d_i`` is
    large enough.
    """

    lower: float
    upper: float
    contains_n: bool


def build_model(
    conn_raw: npt.ArrayLike | ConnectivityMatrix,
    beta: npt.ArrayLike,
    gamma: npt.ArrayLike,
    d_s: float,
    d_i: float,
    N: float,
    settings: AnalysisSettings | None = None,
) -> Model:
    """Validate the connectivity and parameters and assemble a :class:`Model`.

    Raises:
        NonPositiveParameter: If a rate, dispersal coefficient or ``N`` is not positive.
        DimensionMismatch: If vector lengths disagree with the patch count.
    """
    conn = conn_raw if isinstance(conn_raw, ConnectivityMatrix) else validate_connectivity(conn_raw, settings)
    return Model(conn=conn, beta=np.asarray(beta), gamma=np.asarray(gamma), d_s=d_s, d_i=d_i, N=N)


def threshold_tag(value: float, deadband: float) -> Threshold:
    """Classify ``value`` against 1 with a symmetric dead-band."""
    if value > 1.0 + deadband:
        return "supercritical"
    if value < 1.0 - deadband:
        return "subcritical"
    return "threshold"


def transition_matrix(m: Model) -> FloatArray:
    """``V = diag(gamma) - d_i L``, a nonsingular M-matrix."""
    return np.diag(m.gamma) - m.d_i * m.L


def right_divide_by_v(m: Model, matrix: FloatArray) -> FloatArray:
    """``matrix @ inv(V)`` computed as ``solve(V.T, matrix.T).T``.

    Raises:
        SingularV: If the solve fails or the result has significantly negative entries.
    """
    V = transition_matrix(m)
    try:
        product = scipy.linalg.solve(V.T, matrix.T).T
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularV(f"cannot solve with V: {exc}") from exc
    scale = float(np.abs(product).max()) if product.size else 0.0
    if np.any(product < -1e-12 * scale):
        raise SingularV("matrix @ inv(V) has negative entries; V is not an M-matrix numerically")
    return np.maximum(product, 0.0)


def v_inverse(m: Model) -> FloatArray:
    return right_divide_by_v(m, np.eye(m.n))


def reproduction_analysis(m: Model, settings: AnalysisSettings | None = None) -> ReproductionAnalysis:
    """Next-generation analysis: ``r0 = rho(F inv(V))`` and ``sigma*(F - V)``."""
    settings = settings or DEFAULT_SETTINGS
    F = np.diag(m.N * m.alpha * m.beta)
    V = transition_matrix(m)
    r0 = spectral_radius(right_divide_by_v(m, F), settings)
    sigma_star = spectral_bound(m.d_i * m.L + np.diag(m.N * m.alpha * m.beta - m.gamma), settings=settings)
    limit_di_zero = float(np.max(m.N * m.alpha * m.beta / m.gamma))
    limit_di_inf = float(np.sum(m.N * m.alpha**2 * m.beta) / np.sum(m.alpha * m.gamma))
    tag = threshold_tag(r0, settings.threshold_deadband)
    logger.debug("r0={:.12g} sigma*={:.6g} ({})", r0, sigma_star, tag)
    return ReproductionAnalysis(
        F=frozen(F),
        V=frozen(V),
        r0=r0,
        sigma_star=sigma_star,
        limit_di_zero=limit_di_zero,
        limit_di_inf=limit_di_inf,
        threshold=tag,
    )


def linear_stability_of_dfe(r0: float, settings: AnalysisSettings | None = None) -> Stability:
    tag = threshold_tag(r0, (settings or DEFAULT_SETTINGS).threshold_deadband)
    if tag == "subcritical":
        return "stable"
    if tag == "supercritical":
        return "unstable"
    return "marginal"


def dfe(m: Model, settings: AnalysisSettings | None = None) -> EquilibriumSolution:
    """The disease-free equilibrium ``(N alpha, 0)``, tagged by the sign of ``r0 - 1``."""
    r0 = reproduction_analysis(m, settings).r0
    return EquilibriumSolution(
        S=frozen(m.N * m.alpha),
        I=frozen(np.zeros(m.n)),
        kind="DFE",
        kappa_star=m.d_s,
        stability=linear_stability_of_dfe(r0, settings),
    )


def gamma_proportionality(m: Model, rtol: float = DEFAULT_SETTINGS.ratio_rtol) -> float | None:
    """Return ``m`` if ``gamma = m * beta * alpha`` within *rtol*, else ``None``."""
    ratios = m.gamma / (m.beta * m.alpha)
    if ratios.max() <= ratios.min() * (1.0 + rtol):
        return float(ratios.mean())
    return None


def classify_dfe_global_stability(m: Model, settings: AnalysisSettings | None = None) -> DfeStability:
    """Evaluate the sufficient conditions for global stability of the DFE.

    (i) ``N rho(diag(beta) inv(V)) <= 1``; (iii) ``r0 <= 1`` and ``d_s = d_i``;
    (iv) ``r0 <= 1`` and ``gamma`` proportional to ``beta * alpha``.
    """
    settings = settings or DEFAULT_SETTINGS
    r0 = reproduction_analysis(m, settings).r0
    at_most_one = r0 <= 1.0 + settings.threshold_deadband
    n_rho = m.N * spectral_radius(right_divide_by_v(m, np.diag(m.beta)), settings)

    condition_i = n_rho <= 1.0 + settings.threshold_deadband
    condition_iii = at_most_one and bool(np.isclose(m.d_s, m.d_i, rtol=1e-12, atol=0.0))
    proportionality = gamma_proportionality(m, settings.ratio_rtol)
    condition_iv = at_most_one and proportionality is not None
    large_ds = r0 < 1.0 - settings.threshold_deadband
    globally_stable = condition_i or condition_iii or condition_iv

    return DfeStability(
        condition_i=condition_i,
        large_ds_regime_possible=large_ds,
        condition_iii=condition_iii,
        condition_iv=condition_iv,
        proportionality_m=proportionality if condition_iv else None,
        globally_stable=globally_stable,
        inconclusive=not globally_stable,
        linear_stability=linear_stability_of_dfe(r0, settings),
        r0=r0,
        n_rho_beta_v_inv=n_rho,
    )


def ee_nonexistence_check(
    m: Model, analysis: ReproductionAnalysis | None = None, settings: AnalysisSettings | None = None
) -> EENonexistence:
    """Check the closed-form conditions under which no endemic equilibrium exists.

    (i) ``r0 <= 1`` and ``d_s >= d_i r0``; (ii) ``N <= min_j r_j / alpha_j``.
    """
    settings = settings or DEFAULT_SETTINGS
    r0 = (analysis or reproduction_analysis(m, settings)).r0
    min_ratio = float(m.risk_ratios.min())
    condition_i = r0 <= 1.0 + settings.threshold_deadband and m.d_s >= m.d_i * r0
    condition_ii = m.N <= min_ratio
    return EENonexistence(condition_i=condition_i, condition_ii=condition_ii, r0=r0, min_risk_ratio=min_ratio)


def local_reproduction_numbers(m: Model) -> FloatArray:
    """Isolated-patch reproduction numbers ``N alpha_j / r_j``."""
    return frozen(m.N * m.alpha / m.r)


def reduced_threshold(m: Model, settings: AnalysisSettings | None = None) -> float:
    """``R* = 1 / rho(diag(alpha * beta) inv(V))``; the family exists iff ``l N > R*``."""
    rho = spectral_radius(right_divide_by_v(m, np.diag(m.alpha * m.beta)), settings)
    return 1.0 / rho


def multiple_ee_gamma(conn: ConnectivityMatrix, beta: npt.ArrayLike) -> FloatArray:
    """Recovery rates ``gamma_j = (beta_j alpha_j)^2``."""
    beta_arr = np.asarray(beta, dtype=np.float64)
    if beta_arr.shape != (conn.n,):
        raise DimensionMismatch(f"beta must have shape ({conn.n},), got {beta_arr.shape}")
    return frozen((beta_arr * conn.alpha) ** 2)


def multiple_ee_window(m: Model) -> MultipleEEWindow:
    lower = float(m.r.sum())
    upper = float(np.sum(m.alpha * m.gamma) / np.sum(m.alpha**2 * m.beta))
    return MultipleEEWindow(lower=lower, upper=upper, contains_n=lower < m.N < upper)


def symmetric_uniqueness_bound(m: Model) -> float:
    """Upper bound ``(1 - n / ((sum beta)^(1/3) (sum beta^-1/2)^(2/3))) d_i`` on the d_s threshold
    above which the endemic equilibrium is unique, valid for symmetric ``L``.

    Raises:
        NotApplicable: If ``L`` is not symmetric.
    """
    if not m.conn.is_symmetric:
        raise NotApplicable("symmetric_uniqueness_bound needs a symmetric connectivity matrix")
    denominator = np.sum(m.beta) ** (1.0 / 3.0) * np.sum(m.beta**-0.5) ** (2.0 / 3.0)
    return float(max(1.0 - m.n / denominator, 0.0) * m.d_i)


def vector_field(m: Model, S: FloatArray, I: FloatArray) -> tuple[FloatArray, FloatArray]:
    """Right-hand side of the patch model at ``(S, I)``."""
    infection = m.beta * S * I
    recovery = m.gamma * I
    dS = m.d_s * (m.L @ S) - infection + recovery
    dI = m.d_i * (m.L @ I) + infection - recovery
    return dS, dI

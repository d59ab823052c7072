"""Limits of endemic equilibria under small dispersal rates.

Covers ``d_s -> 0``, ``d_i -> 0``, the joint limit with ``d_i / d_s -> sigma``, the
extreme branches when several equilibria coexist, and an estimate of the critical
population size above which the small-``d_s`` limit is ``(r, (N - sum r) alpha)``.
"""

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.optimize
from loguru import logger as glogger

from sis_patch_analysis.config import DEFAULT_SETTINGS, AnalysisSettings
from sis_patch_analysis.equilibria import capital_N, scan_grid, solve_cooperative_logistic, solve_family
from sis_patch_analysis.errors import (
    DegenerateOmegaStar,
    NoBracket,
    NoConvergence,
    NoInteriorRoot,
    NonPositiveParameter,
    NotApplicable,
)
from sis_patch_analysis.linalg_core import FloatArray, frozen, spectral_bound
from sis_patch_analysis.model import Model, reduced_threshold, reproduction_analysis

logger = glogger.bind(classname="asymptotics")

_OMEGA_RTOL = 1e-9
_NEAR_TIE_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class DsZeroProfile:
    """Limit of endemic equilibria as ``d_s -> 0``.

    ``case`` compares ``N`` with ``sum r``. When they coincide both admissible limits are
    reported: ``(S_limit, I_limit)`` is ``(r, 0)`` and ``alternative`` the form built from
    ``bar_I``.
    """

    case: Literal["below", "equal", "above"]
    S_limit: FloatArray
    I_limit: FloatArray
    bar_I: FloatArray | None = None
    alternative: tuple[FloatArray, FloatArray] | None = None


@dataclass(frozen=True, eq=False)
class DiZeroProfile:
    omega_star: tuple[int, ...]
    S_limit: FloatArray
    I_total: float
    I_star: FloatArray
    C_star: float
    C_bracket: tuple[float, float]
    I_limit: FloatArray


@dataclass(frozen=True, eq=False)
class SigmaProfile:
    sigma: float
    l_sigma: float
    S_limit: FloatArray
    I_limit: FloatArray


@dataclass(frozen=True, eq=False)
class SigmaSublimits:
    """Closed-form limits of the sigma profile as ``sigma -> 0`` and ``sigma -> inf``.

    ``case`` compares ``N`` with ``sum r`` for the large-sigma limit; ``l_infinity`` is
    ``None`` when ``N > sum r`` because ``l^sigma`` then grows without bound.
    """

    S_small: FloatArray
    I_small: FloatArray
    case: Literal["below", "equal", "above"]
    l_infinity: float | None
    S_large: FloatArray
    I_large: FloatArray


@dataclass(frozen=True)
class CriticalNEstimate:
    estimate: float
    lower_bound: float
    upper_bound: float
    argmax: float
    regime: Literal["interior", "lower_edge", "upper_edge"]


@dataclass(frozen=True, eq=False)
class BranchLimits:
    """``d_s -> 0`` limits of the largest- and smallest-``l`` endemic branches.

    ``min_spectral_bound`` is ``sigma*(d_i L + diag(beta (S_min - r)))``, zero up to
    rounding for a consistent limit.
    """

    S_max: FloatArray
    I_max: FloatArray
    l0: float
    S_min: FloatArray
    I_min: FloatArray
    min_spectral_bound: float


def _population_case(m: Model) -> Literal["below", "equal", "above"]:
    total = float(m.r.sum())
    if abs(m.N - total) <= _OMEGA_RTOL * total:
        return "equal"
    return "below" if m.N < total else "above"


def _require_spread(m: Model) -> None:
    ratios = m.risk_ratios
    if float(ratios.max() - ratios.min()) <= _OMEGA_RTOL * float(ratios.min()):
        raise DegenerateOmegaStar("r is proportional to alpha; the highest-risk set is every patch")


def _require_population_above_min_ratio(m: Model) -> None:
    _require_spread(m)
    min_ratio = float(m.risk_ratios.min())
    if m.N <= min_ratio:
        raise NotApplicable(f"N={m.N} must exceed min r/alpha={min_ratio}")


def omega_star(m: Model) -> tuple[int, ...]:
    """Indices of the highest-risk patches, minimisers of ``r_i / alpha_i``."""
    ratios = m.risk_ratios
    minimum = float(ratios.min())
    members = np.flatnonzero(ratios <= minimum * (1.0 + _OMEGA_RTOL))
    near = np.flatnonzero((ratios > minimum * (1.0 + _OMEGA_RTOL)) & (ratios <= minimum * (1.0 + _NEAR_TIE_RTOL)))
    if near.size:
        logger.warning("patches {} nearly tie with the highest-risk set {}", near.tolist(), members.tolist())
    return tuple(int(i) for i in members)


# ---------------------------------------------------------------------------
# d_s -> 0
# ---------------------------------------------------------------------------


def solve_barI(m: Model, settings: AnalysisSettings | None = None) -> FloatArray:
    """Nonnegative solution of ``d_i L I + beta (alpha N - r + d_i alpha sum(I) - d_i I) I = 0``.

    Marches the corresponding evolution system with a stiff integrator from
    ``(N / d_i) alpha`` until it is stationary, then polishes a positive limit by Newton.
    Zero is returned when the marching collapses.

    Raises:
        NoConvergence: If the marching grows without bound or the polish fails.
    """
    settings = settings or DEFAULT_SETTINGS
    scale = m.N / m.d_i
    base = m.alpha * m.N - m.r

    def rhs(_t: float, y: FloatArray) -> FloatArray:
        return m.d_i * (m.L @ y) + m.beta * (base + m.d_i * m.alpha * y.sum() - m.d_i * y) * y

    def jacobian(_t: float, y: FloatArray) -> FloatArray:
        c = base + m.d_i * m.alpha * y.sum() - m.d_i * y
        return (
            m.d_i * m.L
            + np.diag(m.beta * c - m.d_i * m.beta * y)
            + m.d_i * np.outer(m.beta * m.alpha * y, np.ones(m.n))
        )

    def stationary(t: float, y: FloatArray) -> float:
        return float(np.abs(rhs(t, y)).max() - 1e-11 * (1.0 + np.abs(jacobian(t, y)).sum(axis=1).max()))

    def collapsed(_t: float, y: FloatArray) -> float:
        return float(y.max() - 1e-14 * scale)

    def blown_up(_t: float, y: FloatArray) -> float:
        return float(y.max() - 1e6 * scale)

    for event in (stationary, collapsed, blown_up):
        event.terminal = True  # type: ignore[attr-defined]

    result = scipy.integrate.solve_ivp(
        rhs,
        (0.0, 1e12),
        scale * m.alpha,
        method="BDF",
        jac=jacobian,
        events=(stationary, collapsed, blown_up),
        rtol=1e-10,
        atol=1e-14 * scale,
    )
    if not result.success:
        raise NoConvergence(f"marching for the reduced infected profile failed: {result.message}")
    if result.t_events[2].size:
        raise NoConvergence("marching for the reduced infected profile grows without bound")
    y = result.y[:, -1]
    zero_is_stable = spectral_bound(jacobian(0.0, np.zeros(m.n)), settings=settings) < 0.0
    if result.t_events[1].size or (float(y.max()) <= 1e-6 * scale and zero_is_stable):
        logger.debug("reduced infected profile collapsed to zero at t={:.3e}", result.t[-1])
        return frozen(np.zeros(m.n))

    for _ in range(settings.newton_max_iter):
        g = rhs(0.0, y)
        if float(np.abs(g).max()) <= 1e-13 * max(1.0, m.N):
            break
        try:
            y = y - scipy.linalg.solve(jacobian(0.0, y), g)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NoConvergence(f"Newton polish of the reduced infected profile failed: {exc}") from exc
    residual = float(np.abs(rhs(0.0, y)).max())
    if np.any(y < 0.0) or residual > 1e-9 * max(1.0, m.N):
        raise NoConvergence(f"reduced infected profile residual {residual:.3e}")
    return frozen(y)


def profile_dS_to_zero(m: Model, settings: AnalysisSettings | None = None) -> DsZeroProfile:
    """Limit of the endemic equilibria as ``d_s -> 0``; ``m.d_s`` is not used."""
    settings = settings or DEFAULT_SETTINGS
    case = _population_case(m)
    high_risk = (frozen(m.r), frozen(np.maximum(m.N - float(m.r.sum()), 0.0) * m.alpha))
    if case == "above":
        return DsZeroProfile(case=case, S_limit=high_risk[0], I_limit=high_risk[1])

    bar_I = solve_barI(m, settings)
    S_low = frozen((m.N + m.d_i * float(bar_I.sum())) * m.alpha - m.d_i * bar_I)
    I_low = frozen(np.zeros(m.n))
    if case == "below":
        return DsZeroProfile(case=case, S_limit=S_low, I_limit=I_low, bar_I=bar_I)
    logger.warning("N equals sum(r); both admissible d_s -> 0 limits are reported")
    return DsZeroProfile(
        case=case, S_limit=high_risk[0], I_limit=high_risk[1], bar_I=bar_I, alternative=(S_low, I_low)
    )


# ---------------------------------------------------------------------------
# d_i -> 0
# ---------------------------------------------------------------------------


def profile_dI_to_zero(m: Model, settings: AnalysisSettings | None = None) -> DiZeroProfile:
    """Limit of the endemic equilibrium as ``d_i -> 0`` with ``d_s`` fixed.

    Off the highest-risk set the infected vanish. On it they solve
    ``0 = d_s L' I + beta (C alpha - I) I`` with ``L'`` the principal submatrix, where the
    constant ``C`` is found by bisection so that the infected total is ``N - min r/alpha``.

    Raises:
        DegenerateOmegaStar: If ``r`` is proportional to ``alpha``.
        NotApplicable: If ``N <= min r/alpha``.
        NoBracket: If the infected total is not crossed on the analytic bracket for ``C``.
    """
    settings = settings or DEFAULT_SETTINGS
    _require_population_above_min_ratio(m)
    min_ratio = float(m.risk_ratios.min())
    omega = omega_star(m)
    idx = np.array(omega)
    total = m.N - min_ratio
    alpha = m.alpha[idx]
    beta = m.beta[idx]
    reduced = m.L[np.ix_(idx, idx)]
    lower = total / float(alpha.sum())
    upper = (total * float(beta.min()) + m.d_s * float(np.abs(reduced).sum(axis=0).max())) / (
        float(alpha.min()) * float(beta.min())
    )

    if len(omega) == 1:
        C = (total - m.d_s * float(reduced[0, 0]) / float(beta[0])) / float(alpha[0])
        I_star = np.array([total])
    else:

        def reduced_profile(C: float) -> FloatArray:
            A = m.d_s * reduced
            a = beta * C * alpha
            # within the dead-band the positive profile is indistinguishable from zero
            if spectral_bound(A + np.diag(a), settings=settings) <= settings.stability_tol * (1.0 + float(a.max())):
                return np.zeros(len(omega))
            cap = C * alpha
            profile, _, _ = solve_cooperative_logistic(
                A=A,
                a=a,
                b=beta,
                upper=cap,
                initial=0.5 * cap,
                settings=settings,
                residual_scale=(1.0 + float(a.max())) * float(cap.max()),
            )
            return profile

        def defect(C: float) -> float:
            return float(reduced_profile(C).sum()) - total

        if defect(lower) > 0.0 or defect(upper) < 0.0:
            raise NoBracket(f"infected total not crossed for C in [{lower:.6g}, {upper:.6g}]")
        C = float(scipy.optimize.bisect(defect, lower, upper, xtol=1e-14 * upper, rtol=1e-13))
        I_star = reduced_profile(C)

    I_limit = np.zeros(m.n)
    I_limit[idx] = I_star
    logger.debug("d_i -> 0 profile: omega*={}, C*={:.12g}", omega, C)
    return DiZeroProfile(
        omega_star=omega,
        S_limit=frozen(min_ratio * m.alpha),
        I_total=total,
        I_star=frozen(I_star),
        C_star=C,
        C_bracket=(lower, upper),
        I_limit=frozen(I_limit),
    )


# ---------------------------------------------------------------------------
# d_i / d_s -> sigma
# ---------------------------------------------------------------------------


def _invert_breakpoints(m: Model, inv_sigma: float) -> float:
    """Solve ``sum_j min(l N alpha_j, r_j) + inv_sigma (l N alpha_j - r_j)_+ = N`` exactly.

    The left side is piecewise linear in ``l`` with breakpoints ``r_j / (N alpha_j)``.

    Raises:
        NoInteriorRoot: If ``inv_sigma == 0`` and the left side never reaches ``N``.
    """
    weights = m.N * m.alpha
    breakpoints = np.sort(m.r / weights)

    def G(l: float) -> float:
        return float(np.sum(np.minimum(l * weights, m.r) + inv_sigma * np.maximum(l * weights - m.r, 0.0)))

    values = [G(float(b)) for b in breakpoints]
    previous_l, previous_g = 0.0, 0.0
    for b, g in zip(breakpoints, values):
        if g >= m.N:
            if g == m.N:
                return float(b)
            return previous_l + (m.N - previous_g) * (float(b) - previous_l) / (g - previous_g)
        previous_l, previous_g = float(b), g
    if inv_sigma == 0.0:
        raise NoInteriorRoot(f"sum(min(l N alpha, r)) never reaches N={m.N}")
    # beyond the last breakpoint every term grows with slope inv_sigma N alpha_j
    return previous_l + (m.N - previous_g) / (inv_sigma * m.N)


def sigma_profile(m: Model, sigma: float) -> SigmaProfile:
    """Joint limit ``d_i, d_s -> 0`` with ``d_i / d_s -> sigma``.

    Raises:
        NonPositiveParameter: If ``sigma <= 0``.
        DegenerateOmegaStar: If ``r`` is proportional to ``alpha``.
        NotApplicable: If ``N <= min(r / alpha)``.
    """
    if not sigma > 0.0:
        raise NonPositiveParameter(f"sigma must be strictly positive, got {sigma}")
    _require_population_above_min_ratio(m)
    l_sigma = _invert_breakpoints(m, 1.0 / sigma)
    load = l_sigma * m.N * m.alpha
    return SigmaProfile(
        sigma=float(sigma),
        l_sigma=l_sigma,
        S_limit=frozen(np.minimum(load, m.r)),
        I_limit=frozen(np.maximum(load - m.r, 0.0) / sigma),
    )


def solve_l_infinity(m: Model) -> float:
    """Root of ``N = sum_j min(l N alpha_j, r_j)``.

    Raises:
        NoInteriorRoot: If ``N >= sum r``.
    """
    if m.N >= float(m.r.sum()):
        raise NoInteriorRoot(f"N={m.N} >= sum(r)={float(m.r.sum())}: no interior root")
    return _invert_breakpoints(m, 0.0)


def sigma_sublimits(m: Model) -> SigmaSublimits:
    _require_population_above_min_ratio(m)
    min_ratio = float(m.risk_ratios.min())
    idx = np.array(omega_star(m))
    I_small = np.zeros(m.n)
    I_small[idx] = (m.N - min_ratio) / float(m.alpha[idx].sum()) * m.alpha[idx]

    case = _population_case(m)
    if case == "below":
        l_inf: float | None = solve_l_infinity(m)
        S_large = np.minimum(l_inf * m.N * m.alpha, m.r)
        I_large = np.zeros(m.n)
    elif case == "equal":
        l_inf = float(m.risk_ratios.max()) / m.N
        S_large, I_large = m.r.copy(), np.zeros(m.n)
    else:
        l_inf = None
        S_large, I_large = m.r.copy(), (m.N - float(m.r.sum())) * m.alpha
    return SigmaSublimits(
        S_small=frozen(min_ratio * m.alpha),
        I_small=frozen(I_small),
        case=case,
        l_infinity=l_inf,
        S_large=frozen(S_large),
        I_large=frozen(I_large),
    )


# ---------------------------------------------------------------------------
# critical population and multiple branches
# ---------------------------------------------------------------------------


def critical_N_estimate(m: Model, settings: AnalysisSettings | None = None) -> CriticalNEstimate:
    """Estimate the supremum of ``N(l)`` over ``l N > R*`` as a function of ``Lambda = l N``.

    ``m.N`` is not used. The supremum is taken over ``Lambda`` in ``(R*, 1e4 R*]`` on a
    logarithmic grid and refined by golden-section search around the best grid point.
    """
    settings = settings or DEFAULT_SETTINGS
    _require_spread(m)
    r_star = reduced_threshold(m, settings)
    sum_r = float(m.r.sum())
    lower_bound = max(sum_r, r_star)
    upper_bound = float(m.risk_ratios.max())

    def mass(lam: float) -> float:
        return capital_N(m.with_params(N=lam), 1.0, settings)

    grid = r_star * (1.0 + np.geomspace(settings.threshold_offset, 1e4 - 1.0, settings.critical_points))
    values = np.array([mass(float(lam)) for lam in grid])
    k = int(np.argmax(values))
    best, argmax = float(values[k]), float(grid[k])
    if 0 < k < len(grid) - 1:
        found = scipy.optimize.minimize_scalar(
            lambda lam: -mass(lam), bracket=(float(grid[k - 1]), argmax, float(grid[k + 1])), method="golden"
        )
        if -float(found.fun) > best:
            best, argmax = -float(found.fun), float(found.x)
        regime: Literal["interior", "lower_edge", "upper_edge"] = "interior"
    else:
        regime = "lower_edge" if k == 0 else "upper_edge"
    if best < lower_bound:
        regime = "upper_edge" if sum_r >= r_star else "lower_edge"
    estimate = max(best, lower_bound)
    logger.info(
        "critical N estimate {:.12g} ({}), bracket [{:.6g}, {:.6g})", estimate, regime, lower_bound, upper_bound
    )
    return CriticalNEstimate(
        estimate=estimate, lower_bound=lower_bound, upper_bound=upper_bound, argmax=argmax, regime=regime
    )


def multiple_ee_branch_limits(m: Model, settings: AnalysisSettings | None = None) -> BranchLimits:
    """``d_s -> 0`` limits of the extreme endemic branches below threshold.

    Raises:
        NotApplicable: Unless ``r0 < 1`` and ``sum r < N``.
        NoBracket: If ``N(l) = N`` has no root below ``settings.lmax_cap``.
    """
    settings = settings or DEFAULT_SETTINGS
    r0 = reproduction_analysis(m, settings).r0
    sum_r = float(m.r.sum())
    if not (r0 < 1.0 - settings.threshold_deadband and sum_r < m.N):
        raise NotApplicable(f"branch limits need r0 < 1 and sum(r) < N, got r0={r0:.6g}, sum(r)={sum_r:.6g}")

    def excess(l: float) -> float:
        return capital_N(m, l, settings) - m.N

    cap = 4.0 / r0
    while excess(cap) >= 0.0:
        if cap >= settings.lmax_cap:
            raise NoBracket("N(l) stays above N on the whole scan")
        cap = min(cap * 4.0, settings.lmax_cap)
    grid = scan_grid(r0, cap, settings)
    values = np.array([excess(float(l)) for l in grid])
    k = int(np.flatnonzero(values < 0.0)[0])
    if k == 0:
        raise NoBracket("N(l) is already below N at the first scan point")
    lo, hi = float(grid[k - 1]), float(grid[k])
    l0 = float(scipy.optimize.bisect(excess, lo, hi, xtol=1e-3 * settings.bisect_rtol * lo, rtol=settings.bisect_rtol))
    S_min = solve_family(m, l0, settings).Z
    sigma = spectral_bound(m.d_i * m.L + np.diag(m.beta * (S_min - m.r)), settings=settings)
    return BranchLimits(
        S_max=frozen(m.r),
        I_max=frozen((m.N - sum_r) * m.alpha),
        l0=l0,
        S_min=frozen(S_min),
        I_min=frozen(np.zeros(m.n)),
        min_spectral_bound=sigma,
    )

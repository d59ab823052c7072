"""Tests for the small-dispersal limits, the critical population and the branch limits."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sis_patch_analysis.asymptotics import (
    critical_N_estimate,
    multiple_ee_branch_limits,
    omega_star,
    profile_dI_to_zero,
    profile_dS_to_zero,
    sigma_profile,
    sigma_sublimits,
    solve_barI,
    solve_l_infinity,
)
from sis_patch_analysis.equilibria import find_endemic_equilibria
from sis_patch_analysis.errors import (
    DegenerateOmegaStar,
    InvalidInput,
    NoInteriorRoot,
    NonPositiveParameter,
    NotApplicable,
)
from sis_patch_analysis.model import EquilibriumSolution, Model, build_model, reproduction_analysis

SYMMETRIC = [[0.0, 1.0], [1.0, 0.0]]
ASYMMETRIC = [[0.0, 1.0], [2.0, 0.0]]
COMPLETE3 = [[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]


def _homogeneous(N: float = 4.0, d_i: float = 1.0) -> Model:
    return build_model(SYMMETRIC, [1.0, 1.0], [1.0, 1.0], 1.0, d_i, N)


def _two_patch_risk(N: float = 4.0, d_s: float = 1.0, d_i: float = 1.0) -> Model:
    """alpha = (1/2, 1/2), r = (1, 2)."""
    return build_model(SYMMETRIC, [1.0, 1.0], [1.0, 2.0], d_s, d_i, N)


def _multiple_ee(N: float = 1.45, d_s: float = 0.01) -> Model:
    """alpha = (1/3, 2/3), r = (2/3, 2/3), gamma = (beta alpha)^2."""
    return build_model(ASYMMETRIC, [6.0, 1.5], [4.0, 1.0], d_s, 100.0, N)


def _distance(eq: EquilibriumSolution, S: np.ndarray, I: np.ndarray) -> float:
    return float(max(np.abs(eq.S - S).max(), np.abs(eq.I - I).max()))


# ---------------------------------------------------------------------------
# Highest-risk set
# ---------------------------------------------------------------------------


def test_omega_star() -> None:
    """Minimisers of r / alpha, as 0-based indices."""
    assert omega_star(build_model(ASYMMETRIC, [1.5, 1.5], [1.0, 1.0], 1.0, 1.0, 4.0)) == (1,)
    assert omega_star(_homogeneous()) == (0, 1)
    assert omega_star(build_model(COMPLETE3, [1.0, 1.0, 1.0], [1.0, 1.0, 2.0], 1.0, 1.0, 5.0)) == (0, 1)


# ---------------------------------------------------------------------------
# d_s -> 0
# ---------------------------------------------------------------------------


def test_dS_to_zero_above() -> None:
    """N > sum r: the limit is (r, (N - sum r) alpha)."""
    profile = profile_dS_to_zero(_two_patch_risk())
    assert profile.case == "above"
    assert_allclose(profile.S_limit, [1.0, 2.0])
    assert_allclose(profile.I_limit, [0.5, 0.5], rtol=1e-12)
    assert profile.bar_I is None


def test_dS_to_zero_below_with_vanishing_profile() -> None:
    """N alpha < r in every patch: the reduced profile is zero and S tends to N alpha."""
    m = _homogeneous(N=1.0, d_i=0.1)
    assert_allclose(solve_barI(m), [0.0, 0.0])
    profile = profile_dS_to_zero(m)
    assert profile.case == "below"
    assert_allclose(profile.S_limit, [0.5, 0.5], rtol=1e-12)
    assert_allclose(profile.I_limit, [0.0, 0.0])
    assert profile.bar_I is not None


def test_dS_to_zero_equal_reports_both() -> None:
    m = _homogeneous(N=2.0)
    profile = profile_dS_to_zero(m)
    assert profile.case == "equal"
    assert_allclose(profile.S_limit, m.r)
    assert_allclose(profile.I_limit, [0.0, 0.0], atol=1e-12)
    assert profile.alternative is not None
    S_alt, I_alt = profile.alternative
    assert float(S_alt.sum()) == pytest.approx(m.N, rel=1e-9)
    assert_allclose(I_alt, [0.0, 0.0])


def test_max_branch_approaches_dS_limit() -> None:
    """Above threshold the largest-l EE approaches (r, (N - sum r) alpha) as d_s -> 0."""
    base = _multiple_ee(N=2.0)
    assert reproduction_analysis(base).r0 > 1.0
    limit = profile_dS_to_zero(base)
    errors = []
    for d_s in (1e-2, 1e-3, 1e-4):
        found = find_endemic_equilibria(base.with_params(d_s=d_s))
        errors.append(_distance(found[-1], limit.S_limit, limit.I_limit))
    assert errors == sorted(errors, reverse=True)
    assert errors[-1] <= 2e-2


# ---------------------------------------------------------------------------
# d_i -> 0
# ---------------------------------------------------------------------------


def test_dI_to_zero_singleton() -> None:
    """A single highest-risk patch collects all N - min(r/alpha) infected."""
    profile = profile_dI_to_zero(_two_patch_risk())
    assert profile.omega_star == (0,)
    assert profile.I_total == pytest.approx(2.0, rel=1e-12)
    assert profile.C_star == pytest.approx(6.0, rel=1e-12)
    lower, upper = profile.C_bracket
    assert lower <= profile.C_star <= upper * (1.0 + 1e-12)
    assert_allclose(profile.S_limit, [1.0, 1.0], rtol=1e-12)
    assert_allclose(profile.I_limit, [2.0, 0.0], rtol=1e-12)


def test_dI_to_zero_two_member_set() -> None:
    """Two tied high-risk patches share the infected through the reduced network."""
    m = build_model(COMPLETE3, [1.0, 1.0, 1.0], [1.0, 1.0, 2.0], 1.0, 1.0, 5.0)
    profile = profile_dI_to_zero(m)
    assert profile.omega_star == (0, 1)
    assert profile.C_star == pytest.approx(6.0, rel=1e-8)
    assert_allclose(profile.I_star, [1.0, 1.0], rtol=1e-8)
    assert_allclose(profile.I_limit, [1.0, 1.0, 0.0], rtol=1e-8, atol=1e-12)
    assert_allclose(profile.S_limit, [1.0, 1.0, 1.0], rtol=1e-12)


def test_dI_to_zero_preconditions() -> None:
    with pytest.raises(DegenerateOmegaStar):
        profile_dI_to_zero(_homogeneous())
    with pytest.raises(NotApplicable, match="min r/alpha"):
        profile_dI_to_zero(_two_patch_risk(N=2.0))


def test_endemic_equilibrium_approaches_dI_limit() -> None:
    m = _two_patch_risk()
    limit = profile_dI_to_zero(m)
    errors = []
    for d_i in (1e-2, 1e-3, 1e-4):
        found = find_endemic_equilibria(m.with_params(d_i=d_i))
        errors.append(min(_distance(eq, limit.S_limit, limit.I_limit) for eq in found))
    assert errors == sorted(errors, reverse=True)
    assert errors[-1] <= 2e-2


# ---------------------------------------------------------------------------
# d_i / d_s -> sigma
# ---------------------------------------------------------------------------


def test_sigma_profile_worked_example() -> None:
    """alpha = (1/2, 1/2), r = (1, 2), N = 4, sigma = 1 gives l = 1, S = (1, 2), I = (1, 0)."""
    profile = sigma_profile(_two_patch_risk(), 1.0)
    assert profile.l_sigma == pytest.approx(1.0, abs=1e-12)
    assert_allclose(profile.S_limit, [1.0, 2.0], atol=1e-12)
    assert_allclose(profile.I_limit, [1.0, 0.0], atol=1e-12)


def test_sigma_profile_conserves_population() -> None:
    m = _two_patch_risk()
    for sigma in (0.01, 0.5, 2.0, 100.0):
        profile = sigma_profile(m, sigma)
        assert float(profile.S_limit.sum() + profile.I_limit.sum()) == pytest.approx(m.N, rel=1e-12)


def test_sigma_profile_large_sigma() -> None:
    """For N > sum r, l grows like (sigma (N - sum r) + sum r) / N."""
    m = _two_patch_risk()
    sigma = 1e6
    profile = sigma_profile(m, sigma)
    assert profile.l_sigma == pytest.approx((sigma * 1.0 + 3.0) / 4.0, rel=1e-12)
    assert_allclose(profile.S_limit, [1.0, 2.0], rtol=1e-12)
    assert_allclose(profile.I_limit, [0.5, 0.5], atol=1e-5)


def test_sigma_profile_rejects_nonpositive() -> None:
    with pytest.raises(NonPositiveParameter):
        sigma_profile(_two_patch_risk(), 0.0)


@pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
def test_sigma_profile_preconditions(sigma: float) -> None:
    """Risk proportional to alpha or N <= min r/alpha has no meaningful profile."""
    with pytest.raises(DegenerateOmegaStar):
        sigma_profile(_homogeneous(), sigma)
    with pytest.raises(NotApplicable, match="must exceed min r/alpha"):
        sigma_profile(_two_patch_risk(N=2.0), sigma)
    with pytest.raises(InvalidInput):
        sigma_profile(_two_patch_risk(N=1.5), sigma)
    with pytest.raises(DegenerateOmegaStar):
        sigma_sublimits(_homogeneous())


def test_sigma_sublimits_above() -> None:
    limits = sigma_sublimits(_two_patch_risk())
    assert_allclose(limits.S_small, [1.0, 1.0], rtol=1e-12)
    assert_allclose(limits.I_small, [2.0, 0.0], rtol=1e-12)
    assert limits.case == "above"
    assert limits.l_infinity is None
    assert_allclose(limits.S_large, [1.0, 2.0])
    assert_allclose(limits.I_large, [0.5, 0.5], rtol=1e-12)


def test_sigma_sublimits_below_and_equal() -> None:
    """l_infinity solves sum(min(l N alpha, r)) = N."""
    below = sigma_sublimits(_two_patch_risk(N=2.5))
    assert below.case == "below"
    assert below.l_infinity == pytest.approx(1.2, rel=1e-12)
    assert_allclose(below.S_large, [1.0, 1.5], rtol=1e-12)
    assert_allclose(below.I_large, [0.0, 0.0])

    equal = sigma_sublimits(_two_patch_risk(N=3.0))
    assert equal.case == "equal"
    assert equal.l_infinity == pytest.approx(4.0 / 3.0, rel=1e-12)

    with pytest.raises(NotApplicable):
        sigma_sublimits(_two_patch_risk(N=1.5))


def test_solve_l_infinity() -> None:
    assert solve_l_infinity(_two_patch_risk(N=2.5)) == pytest.approx(1.2, rel=1e-12)
    with pytest.raises(NoInteriorRoot):
        solve_l_infinity(_two_patch_risk(N=4.0))


def test_endemic_equilibrium_approaches_sigma_profile() -> None:
    """With d_i = eps and d_s = eps / sigma the EE approaches the sigma profile."""
    m = _two_patch_risk()
    for sigma in (0.5, 1.0, 2.0):
        limit = sigma_profile(m, sigma)
        errors = []
        for eps in (1e-2, 1e-3, 1e-4):
            found = find_endemic_equilibria(m.with_params(d_i=eps, d_s=eps / sigma))
            errors.append(min(_distance(eq, limit.S_limit, limit.I_limit) for eq in found))
        assert errors == sorted(errors, reverse=True), f"sigma={sigma}"
        assert errors[-1] <= 2e-2, f"sigma={sigma}"


# ---------------------------------------------------------------------------
# Critical population and branch limits
# ---------------------------------------------------------------------------


def test_critical_N_estimate() -> None:
    m = _multiple_ee()
    estimate = critical_N_estimate(m)
    r_star = m.N / reproduction_analysis(m).r0
    assert estimate.lower_bound == pytest.approx(max(4.0 / 3.0, r_star), rel=1e-9)
    assert estimate.upper_bound == pytest.approx(2.0, rel=1e-12)
    assert estimate.estimate >= estimate.lower_bound
    assert estimate.estimate < estimate.upper_bound
    assert estimate.regime in ("interior", "lower_edge", "upper_edge")


def test_above_critical_N_limit_is_risk_profile() -> None:
    """Above the estimate, small d_s leaves every EE near (r, (N - sum r) alpha)."""
    estimate = critical_N_estimate(_multiple_ee()).estimate
    m = _multiple_ee(N=1.05 * estimate, d_s=1e-4)
    limit = profile_dS_to_zero(m)
    found = find_endemic_equilibria(m)
    assert len(found) >= 1
    for eq in found:
        assert _distance(eq, limit.S_limit, limit.I_limit) <= 5e-2


def test_critical_N_requires_spread() -> None:
    with pytest.raises(DegenerateOmegaStar):
        critical_N_estimate(_homogeneous())


def test_multiple_ee_branch_limits() -> None:
    """Largest branch tends to (r, (N - sum r) alpha); smallest to (Z^l0, 0)."""
    m = _multiple_ee()
    limits = multiple_ee_branch_limits(m)
    assert_allclose(limits.S_max, m.r)
    assert_allclose(limits.I_max, (m.N - 4.0 / 3.0) * m.alpha, rtol=1e-12)
    assert float(limits.S_min.sum()) == pytest.approx(m.N, rel=1e-9)
    assert limits.min_spectral_bound == pytest.approx(0.0, abs=1e-7)
    assert limits.l0 > 1.0 / reproduction_analysis(m).r0

    found = find_endemic_equilibria(m.with_params(d_s=1e-4))
    assert len(found) >= 2
    assert _distance(found[0], limits.S_min, limits.I_min) <= 5e-2
    assert _distance(found[-1], limits.S_max, limits.I_max) <= 5e-2


def test_branch_limits_not_applicable_above_threshold() -> None:
    with pytest.raises(NotApplicable, match="r0 < 1"):
        multiple_ee_branch_limits(_multiple_ee(N=2.0))

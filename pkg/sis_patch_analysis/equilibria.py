"""Endemic equilibria through the scalar reduction in ``l``.

For ``l > 1/r0`` the logistic-type system

    d_i L U + (l beta (N alpha - d_i U) - gamma) U = 0

has a unique positive solution ``U^l``. Every root of
``F(d_s, l) = N(l) + d_s l sum(U^l) = N`` with ``N(l) = sum(l (N alpha - d_i U^l))`` yields the
endemic equilibrium ``(l (N alpha - d_i U^l), d_s l U^l)``, and every endemic equilibrium
arises this way.
"""

import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
import scipy.linalg
import scipy.optimize
from loguru import logger as glogger

from sis_patch_analysis.config import DEFAULT_SETTINGS, AnalysisSettings
from sis_patch_analysis.errors import (
    InvalidInput,
    NoConvergence,
    NoPositiveSolution,
    NotApplicable,
    NotARoot,
    SingularSystem,
)
from sis_patch_analysis.linalg_core import FloatArray, frozen, spectral_bound
from sis_patch_analysis.model import (
    EquilibriumSolution,
    Model,
    Stability,
    gamma_proportionality,
    reproduction_analysis,
    vector_field,
)

logger = glogger.bind(classname="equilibria")

_EPS = float(np.finfo(np.float64).eps)
_MAX_STEP_HALVINGS = 80
_DT_GROWTH = 4.0
_DT_MAX = 1e300


@dataclass(frozen=True, eq=False)
class FamilySolution:
    l: float
    U: FloatArray
    Z: FloatArray
    residual: float
    steps: int = 0


@dataclass(frozen=True)
class SweepPoint:
    d_s: float
    count: int
    l_roots: tuple[float, ...]
    stability: tuple[Stability, ...]


@dataclass(frozen=True)
class SweepResult:
    """Equilibrium counts over a d_s grid with the two threshold estimates.

    ``d1_star`` is the largest d_s found with at least two endemic equilibria, ``d2_star``
    the largest with at least one; both are refined between adjacent grid points.
    ``d1_lower_bound`` certifies two equilibria for every smaller d_s when available.
    """

    grid: tuple[float, ...]
    points: tuple[SweepPoint, ...]
    d1_star: float | None
    d2_star: float | None
    d1_lower_bound: float | None


# ---------------------------------------------------------------------------
# cooperative logistic systems
# ---------------------------------------------------------------------------


def solve_cooperative_logistic(
    A: FloatArray,
    a: FloatArray,
    b: FloatArray,
    upper: FloatArray,
    initial: FloatArray,
    settings: AnalysisSettings,
    residual_scale: float,
) -> tuple[FloatArray, float, int]:
    """Positive solution of ``0 = A u + (a - b u) u`` for quasi-positive irreducible ``A``.

    ``upper`` must be a supersolution and ``0 < initial <= upper``. The evolution
    ``u' = A u + (a - b u) u`` is marched by linearly implicit Euler steps whose size grows
    geometrically; a step is rejected and halved when it leaves ``(0, upper]``. Once the
    relative change drops below ``settings.family_rtol`` the iterate is polished by damped
    Newton.

    Returns:
        ``(u, residual, steps)`` with ``residual`` the infinity norm of the equation.

    Raises:
        NoConvergence: If the marching or the polish exhausts its budget, or the final
            residual exceeds ``1e-9 * residual_scale`` plus a rounding floor.
    """

    def residual(u: FloatArray) -> FloatArray:
        return A @ u + (a - b * u) * u

    def jacobian(u: FloatArray) -> FloatArray:
        return A + np.diag(a - 2.0 * b * u)

    n = initial.shape[0]
    eye = np.eye(n)
    ceiling = upper * (1.0 + 1e-12)
    u = initial.astype(np.float64).copy()
    dt = 1.0 / (float(np.abs(A).sum(axis=1).max()) + float(np.abs(a).max()) + 1.0)

    steps = 0
    for steps in range(1, settings.family_max_steps + 1):
        g = residual(u)
        J = jacobian(u)
        for _ in range(_MAX_STEP_HALVINGS):
            try:
                delta = scipy.linalg.solve(eye / dt - J, g)
            except (np.linalg.LinAlgError, ValueError):
                dt *= 0.5
                continue
            candidate = u + delta
            if np.all(np.isfinite(candidate)) and np.all(candidate > 0.0) and np.all(candidate <= ceiling):
                break
            dt *= 0.5
        else:
            raise NoConvergence("pseudo-transient marching could not find an admissible step")
        change = float(np.abs(delta).max()) / float(np.abs(candidate).max())
        u = candidate
        if change <= settings.family_rtol:
            break
        dt = min(dt * _DT_GROWTH, _DT_MAX)
    else:
        raise NoConvergence(f"marching did not settle within {settings.family_max_steps} steps")

    g = residual(u)
    for _ in range(settings.newton_max_iter):
        g_norm = float(np.abs(g).max())
        if g_norm == 0.0:
            break
        try:
            delta = scipy.linalg.solve(jacobian(u), -g)
        except (np.linalg.LinAlgError, ValueError):
            break
        damping = 1.0
        while damping >= 2.0**-10:
            candidate = u + damping * delta
            if np.all(candidate > 0.0):
                g_candidate = residual(candidate)
                if float(np.abs(g_candidate).max()) < g_norm:
                    break
            damping *= 0.5
        else:
            break
        u, g = candidate, g_candidate
        if float(np.abs(damping * delta).max()) <= 4.0 * _EPS * float(np.abs(u).max()):
            break

    res = float(np.abs(g).max())
    magnitude = float(np.abs(np.abs(A) @ u + (np.abs(a) + b * u) * u).max())
    tolerance = 1e-9 * residual_scale + 64.0 * _EPS * magnitude
    if not res <= tolerance:
        raise NoConvergence(f"logistic system residual {res:.3e} above tolerance {tolerance:.3e}")
    return u, res, steps


# ---------------------------------------------------------------------------
# family solutions
# ---------------------------------------------------------------------------


def family_residual(m: Model, l: float, U: FloatArray) -> FloatArray:
    return m.d_i * (m.L @ U) + (l * m.beta * (m.N * m.alpha - m.d_i * U) - m.gamma) * U


def solve_family(m: Model, l: float, settings: AnalysisSettings | None = None) -> FamilySolution:
    """Unique positive solution ``U^l`` of the family equation at ``l``.

    Raises:
        NoPositiveSolution: If ``sigma*(d_i L + diag(l N alpha beta - gamma)) <= 0``,
            i.e. ``l <= 1/r0``.
        NoConvergence: If the marching or Newton budget is exhausted.
    """
    settings = settings or DEFAULT_SETTINGS
    if not l > 0.0:
        raise InvalidInput(f"l must be positive, got {l}")
    linearisation = m.d_i * m.L + np.diag(l * m.N * m.alpha * m.beta - m.gamma)
    sigma = spectral_bound(linearisation, settings=settings)
    if sigma <= 0.0:
        raise NoPositiveSolution(f"no positive family solution at l={l:.12g} (sigma*={sigma:.3e})")

    upper = m.N * m.alpha / m.d_i
    floor = 1e-6 * m.N / m.d_i
    subsolution = (l * m.N - float(m.risk_ratios.max())) / (l * m.d_i)
    initial = max(subsolution, floor) * m.alpha

    U, res, steps = solve_cooperative_logistic(
        A=m.d_i * m.L,
        a=l * m.beta * m.N * m.alpha - m.gamma,
        b=l * m.beta * m.d_i,
        upper=upper,
        initial=np.minimum(initial, upper),
        settings=settings,
        residual_scale=(1.0 + float(m.gamma.max())) * float(upper.max()),
    )
    Z = l * (m.N * m.alpha - m.d_i * U)
    logger.trace("family l={:.12g}: {} marching steps, residual {:.3e}", l, steps, res)
    return FamilySolution(l=float(l), U=frozen(U), Z=frozen(Z), residual=res, steps=steps)


class FamilyCache:
    """Family solutions of one model shape keyed by ``l``.

    The family does not depend on ``d_s``, so a sweep over ``d_s`` reuses the solutions
    computed on its shared scan grid. Holds at most ``maxsize`` solutions and evicts the
    least recently used one first. Safe to share between worker threads.
    """

    def __init__(self, m: Model, maxsize: int = 4096) -> None:
        if maxsize < 1:
            raise ValueError(f"maxsize must be positive, got {maxsize}")
        self._key = self._shape_key(m)
        self._maxsize = maxsize
        self._solutions: OrderedDict[float, FamilySolution] = OrderedDict()
        self._lock = threading.Lock()

    @staticmethod
    def _shape_key(m: Model) -> tuple[int, bytes, bytes, float, float]:
        return (id(m.conn), m.beta.tobytes(), m.gamma.tobytes(), m.d_i, m.N)

    def solve(self, m: Model, l: float, settings: AnalysisSettings | None = None) -> FamilySolution:
        if self._shape_key(m) != self._key:
            raise ValueError("FamilyCache used with a model of a different shape")
        with self._lock:
            cached = self._solutions.get(l)
            if cached is not None:
                self._solutions.move_to_end(l)
                return cached
        solution = solve_family(m, l, settings)
        with self._lock:
            self._solutions[l] = solution
            self._solutions.move_to_end(l)
            while len(self._solutions) > self._maxsize:
                self._solutions.popitem(last=False)
        return solution

    def __len__(self) -> int:
        return len(self._solutions)


def _family_getter(
    m: Model, settings: AnalysisSettings, cache: FamilyCache | None
) -> Callable[[float], FamilySolution]:
    if cache is None:
        return lambda l: solve_family(m, l, settings)
    return lambda l: cache.solve(m, l, settings)


def capital_N(
    m: Model, l: float, settings: AnalysisSettings | None = None, cache: FamilyCache | None = None
) -> float:
    """``N(l) = sum_j Z_j^l``."""
    family = _family_getter(m, settings or DEFAULT_SETTINGS, cache)(l)
    return float(family.Z.sum())


def balance_F(
    m: Model, d_s: float, l: float, settings: AnalysisSettings | None = None, cache: FamilyCache | None = None
) -> float:
    """``F(d_s, l) = N(l) + d_s l sum_j U_j^l``; roots of ``F = N`` are endemic equilibria."""
    family = _family_getter(m, settings or DEFAULT_SETTINGS, cache)(l)
    return float(family.Z.sum() + d_s * l * family.U.sum())


# ---------------------------------------------------------------------------
# equilibria and their stability
# ---------------------------------------------------------------------------


def equilibrium_residual(m: Model, S: FloatArray, I: FloatArray) -> float:
    dS, dI = vector_field(m, np.asarray(S, dtype=np.float64), np.asarray(I, dtype=np.float64))
    return float(max(np.abs(dS).max(), np.abs(dI).max()))


def residual_bound(m: Model) -> float:
    return 1e-9 * m.N * (1.0 + float(m.beta.max()) * m.N + float(m.gamma.max()))


def stability_tag(sigma: float, settings: AnalysisSettings) -> Stability:
    if sigma < -settings.stability_tol:
        return "stable"
    if sigma > settings.stability_tol:
        return "unstable"
    return "marginal"


def jacobian_stability(
    m: Model, eq: EquilibriumSolution, settings: AnalysisSettings | None = None
) -> tuple[Stability, float]:
    """Local stability of an equilibrium on the invariant hyperplane ``sum(S + I) = N``.

    The columns of the Jacobian sum to zero, so it maps into the orthogonal complement of
    the ones vector; the spectral bound is taken of its restriction to that hyperplane.
    """
    settings = settings or DEFAULT_SETTINGS
    S, I = np.asarray(eq.S), np.asarray(eq.I)
    jac = np.block(
        [
            [m.d_s * m.L - np.diag(m.beta * I), np.diag(m.gamma - m.beta * S)],
            [np.diag(m.beta * I), m.d_i * m.L + np.diag(m.beta * S - m.gamma)],
        ]
    )
    basis = scipy.linalg.null_space(np.ones((1, 2 * m.n)))
    sigma = spectral_bound(basis.T @ jac @ basis, quasi_positive=False, settings=settings)
    return stability_tag(sigma, settings), sigma


def ee_from_l(
    m: Model,
    l: float,
    settings: AnalysisSettings | None = None,
    family: FamilySolution | None = None,
    marginal_root: bool = False,
) -> EquilibriumSolution:
    """Assemble the endemic equilibrium at a root ``l`` of ``F(d_s, l) = N``.

    Raises:
        NotARoot: If ``|F(d_s, l) - N|`` exceeds ``settings.root_tol * N``.
        NoConvergence: If the assembled state fails the steady-state residual bound.
    """
    settings = settings or DEFAULT_SETTINGS
    family = family or solve_family(m, l, settings)
    imbalance = float(family.Z.sum() + m.d_s * l * family.U.sum()) - m.N
    if abs(imbalance) > settings.root_tol * m.N:
        raise NotARoot(f"F(d_s, l) - N = {imbalance:.3e} at l={l:.12g}")

    S = family.Z
    I = m.d_s * l * family.U
    residual = equilibrium_residual(m, S, I)
    if residual > residual_bound(m):
        raise NoConvergence(f"endemic equilibrium residual {residual:.3e} at l={l:.12g}")

    candidate = EquilibriumSolution(S=frozen(S), I=frozen(I), kind="EE", kappa_star=l * m.d_s, stability="marginal")
    tag, sigma = jacobian_stability(m, candidate, settings)
    return EquilibriumSolution(
        S=candidate.S,
        I=candidate.I,
        kind="EE",
        kappa_star=l * m.d_s,
        stability=tag,
        l=float(l),
        spectral_bound=sigma,
        marginal_root=marginal_root,
    )


def scan_cap(
    m: Model, r0: float, settings: AnalysisSettings | None = None, cache: FamilyCache | None = None
) -> float:
    """Grow ``l_cap`` by factors of 4 until ``d_s l_cap sum(U^l_cap) >= N``.

    Beyond that point ``F(d_s, l) > N`` for all larger ``l``, so no root is missed.
    """
    settings = settings or DEFAULT_SETTINGS
    family = _family_getter(m, settings, cache)
    cap = 4.0 / r0
    while True:
        if m.d_s * cap * float(family(cap).U.sum()) >= m.N:
            return cap
        if cap >= settings.lmax_cap:
            logger.warning("l-scan cap limited to {:.3e}; roots beyond it are not searched", settings.lmax_cap)
            return float(settings.lmax_cap)
        cap = min(cap * 4.0, settings.lmax_cap)


def scan_grid(r0: float, cap: float, settings: AnalysisSettings) -> FloatArray:
    # logarithmic in the distance from the threshold l = 1/r0
    span = max(cap * r0 - 1.0, settings.threshold_offset * 10.0)
    return (1.0 + np.geomspace(settings.threshold_offset, span, settings.scan_points)) / r0


def _merge_roots(roots: list[tuple[float, bool]], rtol: float) -> list[tuple[float, bool]]:
    merged: list[tuple[float, bool]] = []
    for l, marginal in sorted(roots):
        if merged and abs(l - merged[-1][0]) <= rtol * merged[-1][0]:
            if merged[-1][1] and not marginal:
                merged[-1] = (l, marginal)
            continue
        merged.append((l, marginal))
    return merged


def find_endemic_equilibria(
    m: Model,
    settings: AnalysisSettings | None = None,
    *,
    l_cap: float | None = None,
    cache: FamilyCache | None = None,
) -> list[EquilibriumSolution]:
    """All endemic equilibria found by scanning ``F(d_s, l) - N`` on ``(1/r0, l_cap]``.

    Sign changes on the scan are refined by bisection; local minima of ``|F - N|``
    without a sign change that reach the root tolerance are reported as marginal roots.
    Results are sorted by ``l``.
    """
    settings = settings or DEFAULT_SETTINGS
    r0 = reproduction_analysis(m, settings).r0
    cache = cache or FamilyCache(m)
    family = _family_getter(m, settings, cache)

    def excess(l: float) -> float:
        solution = family(l)
        return float(solution.Z.sum() + m.d_s * l * solution.U.sum()) - m.N

    cap = l_cap if l_cap is not None else scan_cap(m, r0, settings, cache)
    grid = scan_grid(r0, cap, settings)
    values = np.array([excess(float(l)) for l in grid])

    roots: list[tuple[float, bool]] = []
    for k in range(len(grid) - 1):
        lo, hi = float(grid[k]), float(grid[k + 1])
        if values[k] == 0.0:
            roots.append((lo, False))
        elif values[k] * values[k + 1] < 0.0:
            xtol = 1e-3 * settings.bisect_rtol * lo
            root = scipy.optimize.bisect(excess, lo, hi, xtol=xtol, rtol=settings.bisect_rtol)
            roots.append((float(root), False))
    if values[-1] == 0.0:
        roots.append((float(grid[-1]), False))

    magnitudes = np.abs(values)
    for k in range(1, len(grid) - 1):
        same_sign = np.sign(values[k - 1]) == np.sign(values[k]) == np.sign(values[k + 1])
        local_min = magnitudes[k] < magnitudes[k - 1] and magnitudes[k] < magnitudes[k + 1]
        if not (same_sign and local_min and magnitudes[k] <= 1e-3 * m.N):
            continue
        lo, hi = float(grid[k - 1]), float(grid[k + 1])
        found = scipy.optimize.minimize_scalar(
            lambda l: abs(excess(l)), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * lo}
        )
        if abs(excess(float(found.x))) <= settings.root_tol * m.N:
            logger.warning("tangential root at l={:.12g} reported as marginal", found.x)
            roots.append((float(found.x), True))

    equilibria = [
        ee_from_l(m, l, settings, family=family(l), marginal_root=marginal)
        for l, marginal in _merge_roots(roots, settings.merge_rtol)
    ]
    logger.debug(
        "d_s={:.6g}: {} endemic equilibria at l={}", m.d_s, len(equilibria), [round(e.l or 0.0, 10) for e in equilibria]
    )
    return equilibria


# ---------------------------------------------------------------------------
# sensitivity and uniqueness
# ---------------------------------------------------------------------------


def sensitivity_K(
    m: Model,
    l: float,
    settings: AnalysisSettings | None = None,
    method: Literal["linear", "finite_difference"] = "linear",
    family: FamilySolution | None = None,
) -> float:
    """``K(l) = sum_j (l dU_j/dl + U_j)``.

    ``method="linear"`` solves the differentiated family equation for ``V = l dU/dl``;
    ``method="finite_difference"`` uses a central difference with step ``1e-6 l``.

    Raises:
        SingularSystem: If the linearised system cannot be solved reliably.
    """
    settings = settings or DEFAULT_SETTINGS
    if method == "finite_difference":
        step = 1e-6 * l
        upper = solve_family(m, l + step, settings).U
        lower = solve_family(m, l - step, settings).U
        U = (family or solve_family(m, l, settings)).U
        V = l * (upper - lower) / (2.0 * step)
        return float(V.sum() + U.sum())

    U = (family or solve_family(m, l, settings)).U
    susceptible = m.N * m.alpha - m.d_i * U
    matrix = m.d_i * m.L + np.diag(l * m.beta * susceptible - m.gamma) - l * m.d_i * np.diag(m.beta * U)
    rhs = -l * m.beta * susceptible * U
    if np.linalg.cond(matrix) > 1e14:
        raise SingularSystem(f"sensitivity system is singular at l={l:.12g}; l is too close to 1/r0")
    try:
        V = scipy.linalg.solve(matrix, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystem(f"sensitivity solve failed at l={l:.12g}: {exc}") from exc
    return float(V.sum() + U.sum())


def uniqueness_margin(m: Model, settings: AnalysisSettings | None = None) -> float:
    """Estimate ``N / (d_i sup_l K(l))`` for this ``N``.

    The endemic equilibrium is unique whenever ``d_s > (1 - margin) d_i``. Exactly 1
    when ``gamma`` is proportional to ``beta * alpha``.
    """
    settings = settings or DEFAULT_SETTINGS
    if gamma_proportionality(m, settings.ratio_rtol) is not None:
        return 1.0
    r0 = reproduction_analysis(m, settings).r0
    grid = (1.0 + np.geomspace(settings.threshold_offset, 1e4 - 1.0, settings.uniqueness_points)) / r0
    k_sup = max(sensitivity_K(m, float(l), settings) for l in grid)
    margin = m.N / (m.d_i * k_sup)
    logger.debug("uniqueness margin {:.6g} (sup K={:.6g})", margin, k_sup)
    return float(min(max(margin, np.finfo(float).tiny), 1.0))


def two_root_certificate(
    m: Model, settings: AnalysisSettings | None = None, cache: FamilyCache | None = None
) -> float | None:
    """Largest ``(N - N(l)) / (l sum U^l)`` over the family scan when ``r0 < 1 < N / sum r``.

    Every ``d_s`` below the returned value has at least two endemic equilibria. ``None``
    if the hypotheses fail.
    """
    settings = settings or DEFAULT_SETTINGS
    r0 = reproduction_analysis(m, settings).r0
    if r0 >= 1.0 - settings.threshold_deadband or float(m.r.sum()) >= m.N:
        return None
    family = _family_getter(m, settings, cache)
    grid = (1.0 + np.geomspace(settings.threshold_offset, 1e6, settings.scan_points)) / r0
    best = 0.0
    for l in grid:
        solution = family(float(l))
        best = max(best, (m.N - float(solution.Z.sum())) / (float(l) * float(solution.U.sum())))
    return best if best > 0.0 else None


# ---------------------------------------------------------------------------
# d_s sweeps
# ---------------------------------------------------------------------------


def _refine_threshold(
    grid: FloatArray, counts: list[int], minimum: int, count_at: Callable[[float], int], rtol: float
) -> float | None:
    hits = [k for k, count in enumerate(counts) if count >= minimum]
    if not hits:
        return None
    k = hits[-1]
    if k == len(grid) - 1:
        return float(grid[k])
    lo, hi = float(grid[k]), float(grid[k + 1])
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        if count_at(mid) >= minimum:
            lo = mid
        else:
            hi = mid
    return lo


def bifurcation_sweep_dS(
    m: Model, grid: list[float] | FloatArray, settings: AnalysisSettings | None = None
) -> SweepResult:
    """Count endemic equilibria over an increasing ``d_s`` grid.

    ``m.d_s`` is ignored. Grid points run on ``settings.workers`` threads and share one
    family cache and one scan grid; results are reported in grid order.
    """
    settings = settings or DEFAULT_SETTINGS
    values = np.asarray(grid, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise InvalidInput("sweep grid must be a nonempty sequence")
    if np.any(values <= 0.0) or np.any(np.diff(values) <= 0.0):
        raise InvalidInput("sweep grid must be positive and strictly increasing")

    cache = FamilyCache(m)
    r0 = reproduction_analysis(m, settings).r0
    cap = scan_cap(m.with_params(d_s=float(values[0])), r0, settings, cache)

    def equilibria_at(d_s: float) -> list[EquilibriumSolution]:
        return find_endemic_equilibria(m.with_params(d_s=d_s), settings, l_cap=cap, cache=cache)

    if settings.workers > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as executor:
            results = list(executor.map(equilibria_at, [float(v) for v in values]))
    else:
        results = [equilibria_at(float(v)) for v in values]

    points = tuple(
        SweepPoint(
            d_s=float(d_s),
            count=len(found),
            l_roots=tuple(float(e.l or 0.0) for e in found),
            stability=tuple(e.stability for e in found),
        )
        for d_s, found in zip(values, results)
    )
    counts = [p.count for p in points]

    def count_at(d_s: float) -> int:
        return len(equilibria_at(d_s))

    d1 = _refine_threshold(values, counts, 2, count_at, settings.sweep_refine_rtol)
    d2 = _refine_threshold(values, counts, 1, count_at, settings.sweep_refine_rtol)
    lower_bound = two_root_certificate(m, settings, cache)
    logger.info("sweep over {} points: d1*~{}, d2*~{}, certified d1* >= {}", len(values), d1, d2, lower_bound)
    return SweepResult(
        grid=tuple(float(v) for v in values),
        points=points,
        d1_star=d1,
        d2_star=d2,
        d1_lower_bound=lower_bound,
    )


def special_ee_equal_dispersal(m: Model, settings: AnalysisSettings | None = None) -> EquilibriumSolution:
    """Endemic equilibrium for ``d_s = d_i``: ``(N alpha - I0, I0)`` with ``I0 = d_i U^1``.

    Raises:
        NotApplicable: If ``d_s != d_i``.
        NoPositiveSolution: If ``r0 <= 1``.
    """
    settings = settings or DEFAULT_SETTINGS
    if not np.isclose(m.d_s, m.d_i, rtol=1e-12, atol=0.0):
        raise NotApplicable(f"equal dispersal needed, got d_s={m.d_s} d_i={m.d_i}")
    r0 = reproduction_analysis(m, settings).r0
    if r0 <= 1.0 + settings.threshold_deadband:
        raise NoPositiveSolution(f"r0={r0:.12g} <= 1: no endemic equilibrium")
    return ee_from_l(m, 1.0, settings, family=solve_family(m, 1.0, settings))

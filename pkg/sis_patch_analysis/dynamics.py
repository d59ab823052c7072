"""Time integration of the patch model and trajectory diagnostics.

The integrator is the Dormand-Prince 5(4) pair with first-same-as-last reuse. Its stages
are linear combinations of right-hand sides whose entries sum to zero, so the total
population is conserved to rounding. Positivity is enforced by rejecting and halving
steps that produce a negative component.
"""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import scipy.linalg
from loguru import logger as glogger

from sis_patch_analysis.config import DEFAULT_SETTINGS, AnalysisSettings
from sis_patch_analysis.equilibria import jacobian_stability
from sis_patch_analysis.errors import (
    InvalidInitialData,
    InvalidInput,
    NoConvergence,
    NonPositiveParameter,
    StepUnderflow,
)
from sis_patch_analysis.linalg_core import ConnectivityMatrix, FloatArray, frozen
from sis_patch_analysis.model import EquilibriumSolution, Model, vector_field

logger = glogger.bind(classname="dynamics")

SAFETY = 0.9
ERROR_EXPONENT = 1.0 / 5.0
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_UNDERFLOW_RTOL = 1e-14
_MAX_HORIZON = 1e4
_FALLBACK_HORIZON = 500.0

# Dormand-Prince coefficients
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States sampled at ``times``; row ``k`` of ``S`` and ``I`` belongs to ``times[k]``."""

    times: FloatArray
    S: FloatArray
    I: FloatArray
    N: float
    accepted_steps: int
    rejected_steps: int
    max_conservation_drift: float

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def states(self) -> list[tuple[FloatArray, FloatArray]]:
        return [(self.S[k], self.I[k]) for k in range(len(self.times))]

    @property
    def final(self) -> tuple[FloatArray, FloatArray]:
        return self.S[-1], self.I[-1]


@dataclass(frozen=True)
class ConvergenceReport:
    distances: tuple[float, ...]
    max_distance: float
    converged: bool


@dataclass(frozen=True, eq=False)
class DriftCheck:
    """Pure-dispersal run ``X' = d L X`` compared with its limit ``sum(X0) alpha``."""

    deviation: float
    final: FloatArray
    mass_drift: float


def _validate_initial(m: Model, S0: npt.ArrayLike, I0: npt.ArrayLike) -> tuple[FloatArray, FloatArray]:
    S = np.asarray(S0, dtype=np.float64)
    I = np.asarray(I0, dtype=np.float64)
    if S.shape != (m.n,) or I.shape != (m.n,):
        raise InvalidInitialData(f"initial data must have shape ({m.n},), got {S.shape} and {I.shape}")
    if not (np.all(np.isfinite(S)) and np.all(np.isfinite(I))):
        raise InvalidInitialData("initial data contains non-finite entries")
    if np.any(S < 0.0) or np.any(I < 0.0):
        raise InvalidInitialData("initial data must be componentwise nonnegative")
    total = float(S.sum() + I.sum())
    if abs(total - m.N) > 1e-9 * m.N:
        raise InvalidInitialData(f"initial data sums to {total!r}, expected N={m.N!r}")
    return S, I


def _initial_step(y: FloatArray, f: FloatArray, horizon: float) -> float:
    d0 = float(np.abs(y).max())
    d1 = float(np.abs(f).max())
    h = 0.01 * d0 / d1 if d0 > 1e-5 and d1 > 1e-5 else 1e-6 * horizon
    return min(h, horizon)


def simulate(
    m: Model,
    S0: npt.ArrayLike,
    I0: npt.ArrayLike,
    horizon: float,
    settings: AnalysisSettings | None = None,
    samples: int | None = None,
) -> Trajectory:
    """Integrate the patch model from ``(S0, I0)`` to ``horizon``.

    States are stored at ``samples`` equally spaced output times including 0 and the
    horizon (``settings.output_samples`` by default); the integrator lands exactly on each.

    Raises:
        InvalidInitialData: If the initial data is negative, misshaped, or does not sum to N.
        StepUnderflow: If the step size falls below ``1e-14 * horizon``.
        NoConvergence: If ``settings.max_ode_steps`` attempts are exhausted.
    """
    settings = settings or DEFAULT_SETTINGS
    S, I = _validate_initial(m, S0, I0)
    if not horizon > 0.0:
        raise InvalidInput(f"horizon must be positive, got {horizon}")
    count = max(samples or settings.output_samples, 2)
    out_times = np.linspace(0.0, horizon, count)
    n = m.n

    def rhs(y: FloatArray) -> FloatArray:
        dS, dI = vector_field(m, y[:n], y[n:])
        return np.concatenate([dS, dI])

    y = np.concatenate([S, I])
    stored = np.empty((count, 2 * n))
    stored[0] = y
    t = 0.0
    k1 = rhs(y)
    h_proposed = _initial_step(y, k1, horizon)
    min_step = _UNDERFLOW_RTOL * horizon
    accepted = rejected = 0
    stages = np.empty((7, 2 * n))

    for index in range(1, count):
        target = float(out_times[index])
        while t < target:
            if accepted + rejected >= settings.max_ode_steps:
                raise NoConvergence(f"integration budget of {settings.max_ode_steps} steps exhausted at t={t:.6g}")
            if h_proposed < min_step:
                raise StepUnderflow(f"step size {h_proposed:.3e} below {min_step:.3e} at t={t:.6g}")
            remaining = target - t
            landing = h_proposed >= remaining
            h = remaining if landing else h_proposed

            stages[0] = k1
            for s in range(1, 6):
                stages[s] = rhs(y + h * (_A[s] @ stages[:s]))
            y5 = y + h * (_B5[:6] @ stages[:6])
            if np.any(y5 < 0.0) or not np.all(np.isfinite(y5)):
                rejected += 1
                h_proposed = 0.5 * h
                continue
            stages[6] = rhs(y5)
            y4 = y + h * (_B4 @ stages)

            scale = settings.ode_atol + np.maximum(np.abs(y), np.abs(y5)) * settings.ode_rtol
            error = float(np.abs((y5 - y4) / scale).max())
            factor = _MAX_FACTOR if error == 0.0 else SAFETY * (1.0 / error) ** ERROR_EXPONENT
            factor = min(max(factor, _MIN_FACTOR), _MAX_FACTOR)

            if error <= 1.0:
                accepted += 1
                t = target if landing else t + h
                y = y5
                k1 = stages[6].copy()
                if not landing or factor < 1.0:
                    h_proposed = factor * h
            else:
                rejected += 1
                h_proposed = factor * h
        stored[index] = y

    totals = stored.sum(axis=1)
    drift = float(np.abs(totals - m.N).max())
    if drift > 1e-8 * m.N:
        logger.warning("conservation drift {:.3e} exceeds 1e-8*N", drift)
    logger.debug("simulated to T={:.6g}: {} accepted, {} rejected steps", horizon, accepted, rejected)
    return Trajectory(
        times=frozen(out_times),
        S=frozen(stored[:, :n]),
        I=frozen(stored[:, n:]),
        N=m.N,
        accepted_steps=accepted,
        rejected_steps=rejected,
        max_conservation_drift=drift,
    )


def detect_convergence(
    traj: Trajectory, target: EquilibriumSolution, window: int = 10, settings: AnalysisSettings | None = None
) -> ConvergenceReport:
    """Infinity-norm distances of the last ``window`` stored states to ``target``."""
    settings = settings or DEFAULT_SETTINGS
    if len(traj.times) == 0:
        raise InvalidInput("empty trajectory")
    window = max(1, min(window, len(traj.times)))
    distances = tuple(
        float(max(np.abs(traj.S[k] - target.S).max(), np.abs(traj.I[k] - target.I).max()))
        for k in range(len(traj.times) - window, len(traj.times))
    )
    max_distance = max(distances)
    return ConvergenceReport(
        distances=distances,
        max_distance=max_distance,
        converged=max_distance <= settings.convergence_tol * traj.N,
    )


def persistence_floor(traj: Trajectory, burn_in: float = 0.5) -> float:
    """Smallest infected component over the states after ``burn_in * horizon``."""
    if not 0.0 <= burn_in <= 0.5:
        raise InvalidInput(f"burn_in fraction must lie in [0, 0.5], got {burn_in}")
    keep = traj.times >= burn_in * traj.horizon
    return float(traj.I[keep].min())


def drift_projection_check(conn: ConnectivityMatrix, d: float, X0: npt.ArrayLike, T: float) -> DriftCheck:
    if not d > 0.0:
        raise NonPositiveParameter(f"d must be strictly positive, got {d}")
    x0 = np.asarray(X0, dtype=np.float64)
    if x0.shape != (conn.n,):
        raise InvalidInput(f"X0 must have shape ({conn.n},), got {x0.shape}")
    final = scipy.linalg.expm(d * T * conn.entries) @ x0
    limit = float(x0.sum()) * conn.alpha
    return DriftCheck(
        deviation=float(np.abs(final - limit).sum()),
        final=frozen(final),
        mass_drift=float(abs(final.sum() - x0.sum())),
    )


def convergence_horizon(m: Model, target: EquilibriumSolution, settings: AnalysisSettings | None = None) -> float:
    """``50 / |sigma*|`` of the linearisation at ``target`` when it is stable, else 500."""
    settings = settings or DEFAULT_SETTINGS
    sigma = target.spectral_bound
    if sigma is None:
        _, sigma = jacobian_stability(m, target, settings)
    if sigma < -settings.stability_tol:
        return min(50.0 / abs(sigma), _MAX_HORIZON)
    return _FALLBACK_HORIZON


def random_interior_state(m: Model, rng: np.random.Generator) -> tuple[FloatArray, FloatArray]:
    weights = rng.uniform(0.1, 1.0, size=2 * m.n)
    state = m.N * weights / weights.sum()
    return state[: m.n], state[m.n :]

"""Dense spectral routines and connectivity validation for small patch networks.

The Perron root of a nonnegative matrix and the spectral bound of a quasi-positive
(Metzler) matrix are computed by power iteration; dense eigensolves are used only for
matrices without sign structure.
"""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import scipy.linalg
from loguru import logger as glogger
from scipy.sparse.csgraph import breadth_first_order

from sis_patch_analysis.config import DEFAULT_SETTINGS, AnalysisSettings
from sis_patch_analysis.errors import (
    DimensionMismatch,
    InvalidInput,
    NegativeEntry,
    NegativeOffDiagonal,
    NoConvergence,
    NotIrreducible,
    NumericalFailure,
)

logger = glogger.bind(classname="linalg_core")

FloatArray = npt.NDArray[np.float64]

_COLUMN_SUM_ATOL = 1e-12
_PERRON_RESIDUAL_RTOL = 1e-10
_STALL_WINDOW = 100


def frozen(values: npt.ArrayLike) -> FloatArray:
    """Return a read-only float64 copy of *values*."""
    arr = np.array(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ConnectivityMatrix:
    """Validated movement matrix ``L`` and its Perron vector ``alpha``.

    ``entries[i, j]`` (i != j) is the movement degree from patch j to patch i; the
    diagonal holds minus the total outflow so that every column sums to zero.
    """

    entries: FloatArray
    alpha: FloatArray

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])

    @property
    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.entries, self.entries.T, rtol=0.0, atol=_COLUMN_SUM_ATOL))


def _as_square(matrix: npt.ArrayLike, name: str = "matrix") -> FloatArray:
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return arr


def _off_diagonal(arr: FloatArray) -> FloatArray:
    off = arr.copy()
    np.fill_diagonal(off, 0.0)
    return off


def is_irreducible(matrix: npt.ArrayLike) -> bool:
    """Check strong connectivity of the digraph ``{j -> i : M[i, j] > 0, i != j}``.

    Runs one breadth-first search on the graph and one on its transpose from patch 0;
    the graph is strongly connected iff both reach every patch.
    """
    arr = _as_square(matrix)
    n = arr.shape[0]
    if n == 1:
        return True
    # adjacency[j, i] marks the edge j -> i
    adjacency = (_off_diagonal(arr) > 0.0).T.astype(np.float64)
    forward = breadth_first_order(adjacency, 0, directed=True, return_predecessors=False)
    backward = breadth_first_order(adjacency.T, 0, directed=True, return_predecessors=False)
    return len(forward) == n and len(backward) == n


def _dense_perron(matrix: FloatArray) -> tuple[float, FloatArray]:
    """Perron root and vector from a dense eigensolve."""
    try:
        eigenvalues, vectors = scipy.linalg.eig(matrix)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"power iteration stalled and the dense eigensolve failed: {exc}") from exc
    k = int(np.argmax(eigenvalues.real))
    vector = np.abs(vectors[:, k].real)
    return float(eigenvalues[k].real), vector / vector.sum()


def _power_iteration(matrix: FloatArray, settings: AnalysisSettings) -> tuple[float, FloatArray]:
    """Perron root and vector (summing to 1) of a nonnegative matrix.

    Converged once ``||M x - lambda x||_inf <= settings.power_rtol * lambda * ||x||_inf``. A
    residual that loses less than one decade per ``_STALL_WINDOW`` iterates means the two
    leading eigenvalues are nearly tied; the root is then taken from a dense eigensolve.
    """
    n = matrix.shape[0]
    x = np.full(n, 1.0 / n)
    checkpoint = np.inf
    for iteration in range(1, settings.power_max_iter + 1):
        y = matrix @ x
        total = float(y.sum())
        if total <= 0.0:
            return 0.0, x
        # x sums to one, so the column-sum ratio is the root estimate
        residual = float(np.abs(y - total * x).max())
        if residual <= settings.power_rtol * total * float(x.max()):
            logger.trace("power iteration converged after {} iterations: {}", iteration, total)
            return total, y / total
        x = y / total
        if iteration % _STALL_WINDOW == 0:
            if residual > 0.1 * checkpoint:
                logger.debug("power iteration stalled at residual {:.3e}; using dense eigensolve", residual)
                return _dense_perron(matrix)
            checkpoint = residual
    raise NoConvergence(f"power iteration did not converge within {settings.power_max_iter} iterations")


def spectral_radius(matrix: npt.ArrayLike, settings: AnalysisSettings | None = None) -> float:
    """Perron root ``rho(M)`` of an entrywise nonnegative matrix.

    Matrices with zero entries are shifted by ``||M||_inf / n`` before iterating so that
    periodic (imprimitive) structure cannot stall the iteration.

    Raises:
        NegativeEntry: If any entry is negative.
        NoConvergence: If the iteration budget is exhausted.
    """
    settings = settings or DEFAULT_SETTINGS
    arr = _as_square(matrix)
    if np.any(arr < 0.0):
        raise NegativeEntry(f"spectral_radius needs a nonnegative matrix, min entry {arr.min():.3e}")
    if np.all(arr > 0.0):
        return _power_iteration(arr, settings)[0]
    shift = float(np.abs(arr).sum(axis=1).max()) / arr.shape[0]
    if shift == 0.0:
        return 0.0
    rho, _ = _power_iteration(arr + shift * np.eye(arr.shape[0]), settings)
    return max(rho - shift, 0.0)


def spectral_bound(
    matrix: npt.ArrayLike, quasi_positive: bool = True, settings: AnalysisSettings | None = None
) -> float:
    """Spectral bound ``sigma*(M)``, the largest real part of the spectrum.

    For quasi-positive ``M`` this is the Perron root of ``M + sI`` minus ``s`` with
    ``s = 1 + max_i |M_ii|``. Without the flag a dense eigensolve is used.

    Raises:
        NegativeOffDiagonal: If the flag is set and ``M`` has a negative off-diagonal entry.
        NoConvergence: If the iteration or the eigensolve fails.
    """
    settings = settings or DEFAULT_SETTINGS
    arr = _as_square(matrix)
    if not quasi_positive:
        try:
            eigenvalues = scipy.linalg.eigvals(arr)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"dense eigensolve failed: {exc}") from exc
        return float(np.max(eigenvalues.real))
    if np.any(_off_diagonal(arr) < 0.0):
        raise NegativeOffDiagonal("spectral_bound with quasi_positive=True needs nonnegative off-diagonals")
    shift = 1.0 + float(np.abs(np.diag(arr)).max())
    rho, _ = _power_iteration(arr + shift * np.eye(arr.shape[0]), settings)
    return rho - shift


def perron_vector(matrix: npt.ArrayLike, settings: AnalysisSettings | None = None) -> FloatArray:
    """Positive null vector ``alpha`` of a connectivity matrix, normalised to sum 1.

    Raises:
        NotIrreducible: If the support digraph is not strongly connected.
        NoConvergence: If neither the power iteration nor the bordered least-squares
            polish reaches the residual tolerance.
    """
    settings = settings or DEFAULT_SETTINGS
    arr = _as_square(matrix)
    if not is_irreducible(arr):
        raise NotIrreducible("perron_vector needs an irreducible matrix")
    n = arr.shape[0]
    shift = 1.0 + float(np.abs(np.diag(arr)).max())
    _, x = _power_iteration(arr + shift * np.eye(n), settings)
    alpha = x / x.sum()

    scale = max(float(np.abs(arr).sum(axis=1).max()), np.finfo(float).tiny)
    if float(np.abs(arr @ alpha).max()) > _PERRON_RESIDUAL_RTOL * scale:
        bordered = np.vstack([arr, np.ones((1, n))])
        rhs = np.zeros(n + 1)
        rhs[-1] = 1.0
        alpha = scipy.linalg.lstsq(bordered, rhs)[0]
        logger.debug("perron vector polished by bordered least squares")

    residual = float(np.abs(arr @ alpha).max())
    if residual > _PERRON_RESIDUAL_RTOL * scale or np.any(alpha <= 0.0):
        raise NoConvergence(f"Perron vector residual {residual:.3e} above tolerance")
    return alpha


def validate_connectivity(
    off_diagonal_entries: npt.ArrayLike, settings: AnalysisSettings | None = None
) -> ConnectivityMatrix:
    """Validate movement rates and build the :class:`ConnectivityMatrix`.

    The supplied diagonal is ignored and recomputed as minus the column sums of the
    off-diagonal entries.

    Raises:
        DimensionMismatch: If the matrix is not square or has fewer than two patches.
        NegativeOffDiagonal: If an off-diagonal entry is negative.
        NotIrreducible: If the movement digraph is not strongly connected.
    """
    arr = _as_square(off_diagonal_entries, name="L")
    n = arr.shape[0]
    if n < 2:
        raise DimensionMismatch(f"need at least 2 patches, got {n}")
    off = _off_diagonal(arr)
    if np.any(off < 0.0):
        i, j = np.argwhere(off < 0.0)[0]
        raise NegativeOffDiagonal(f"L[{i}, {j}] = {off[i, j]} is negative")
    if not is_irreducible(off):
        raise NotIrreducible("movement digraph is not strongly connected")

    entries = off
    np.fill_diagonal(entries, -off.sum(axis=0))
    column_sums = np.abs(entries.sum(axis=0)).max()
    if column_sums > _COLUMN_SUM_ATOL * max(1.0, float(np.abs(entries).sum(axis=1).max())):
        raise NumericalFailure(f"column sums {column_sums:.3e} not zero after diagonal fill")

    alpha = perron_vector(entries, settings)
    logger.debug("validated {}-patch connectivity, alpha={}", n, alpha)
    return ConnectivityMatrix(entries=frozen(entries), alpha=frozen(alpha))

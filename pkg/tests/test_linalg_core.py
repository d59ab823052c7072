"""Tests for connectivity validation and the spectral routines."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sis_patch_analysis.errors import DimensionMismatch, NegativeEntry, NegativeOffDiagonal, NotIrreducible
from sis_patch_analysis.linalg_core import (
    is_irreducible,
    perron_vector,
    spectral_bound,
    spectral_radius,
    validate_connectivity,
)

# ---------------------------------------------------------------------------
# Connectivity
# ---------------------------------------------------------------------------


def test_diagonal_is_recomputed() -> None:
    """The supplied diagonal is ignored and replaced by minus the column sums."""
    conn = validate_connectivity([[5.0, 1.0], [2.0, 7.0]])
    assert_allclose(conn.entries, [[-2.0, 1.0], [2.0, -1.0]])
    assert_allclose(conn.entries.sum(axis=0), [0.0, 0.0], atol=1e-15)
    assert_allclose(conn.alpha, [1.0 / 3.0, 2.0 / 3.0], rtol=1e-12)


def test_directed_cycle_perron_vector() -> None:
    """A directed three-patch cycle has the flow-balance vector as its Perron vector."""
    conn = validate_connectivity([[0.0, 0.0, 2.0], [1.0, 0.0, 0.0], [0.0, 3.0, 0.0]])
    assert_allclose(conn.alpha, np.array([6.0, 2.0, 3.0]) / 11.0, rtol=1e-10)
    assert_allclose(conn.entries @ conn.alpha, np.zeros(3), atol=1e-12)
    assert not conn.is_symmetric


def test_entries_are_read_only() -> None:
    """Validated matrices cannot be mutated in place."""
    conn = validate_connectivity([[0.0, 1.0], [1.0, 0.0]])
    assert conn.is_symmetric
    with pytest.raises(ValueError):
        conn.entries[0, 1] = 3.0


def test_negative_off_diagonal_rejected() -> None:
    """Negative movement rates are an input error."""
    with pytest.raises(NegativeOffDiagonal, match=r"L\[0, 1\]"):
        validate_connectivity([[0.0, -1.0], [1.0, 0.0]])


def test_reducible_rejected() -> None:
    """A one-way link between two patches is not strongly connected."""
    with pytest.raises(NotIrreducible):
        validate_connectivity([[0.0, 1.0], [0.0, 0.0]])


def test_single_patch_rejected() -> None:
    """At least two patches are required."""
    with pytest.raises(DimensionMismatch, match="at least 2 patches"):
        validate_connectivity([[0.0]])


def test_non_square_rejected() -> None:
    with pytest.raises(DimensionMismatch):
        validate_connectivity([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0]])


def test_is_irreducible() -> None:
    """Cycles are strongly connected, chains are not."""
    cycle = [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
    chain = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
    assert is_irreducible(cycle)
    assert not is_irreducible(chain)
    # diagonal entries do not create edges
    assert not is_irreducible(np.eye(3))


# ---------------------------------------------------------------------------
# Spectral routines
# ---------------------------------------------------------------------------


def test_spectral_radius_matches_eigvals() -> None:
    """Power iteration agrees with a dense eigensolve on random nonnegative matrices."""
    rng = np.random.default_rng(11)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        matrix = rng.uniform(0.0, 2.0, size=(n, n))
        matrix[rng.uniform(size=(n, n)) < 0.3] = 0.0
        expected = float(np.max(np.abs(np.linalg.eigvals(matrix))))
        assert spectral_radius(matrix) == pytest.approx(expected, rel=1e-8, abs=1e-12)


def test_spectral_radius_periodic() -> None:
    """Imprimitive matrices do not stall the iteration."""
    assert spectral_radius([[0.0, 1.0], [1.0, 0.0]]) == pytest.approx(1.0, rel=1e-10)
    assert spectral_radius(np.zeros((3, 3))) == 0.0


def test_spectral_radius_nearly_tied_spectrum() -> None:
    """Two leading eigenvalues 1e-7 apart still give the dominant root to 1e-9."""
    matrix = np.array([[1.0, 1e-9], [1e-9, 1.0 - 1e-7]])
    eigenvalues = np.linalg.eigvals(matrix)
    rho = spectral_radius(matrix)
    assert rho == pytest.approx(float(np.max(np.abs(eigenvalues))), rel=1e-9)
    assert np.all(rho >= np.abs(eigenvalues) * (1.0 - 1e-12))


@pytest.mark.parametrize("gap", [1e-4, 1e-6, 1e-8])
def test_spectral_radius_slow_ratio(gap: float) -> None:
    """A small relative spectral gap still gives the dense root."""
    c = 1e-2 * gap
    matrix = np.array([[1.0, c, c], [c, 1.0 - gap, c], [c, c, 0.5]])
    expected = float(np.max(np.abs(np.linalg.eigvals(matrix))))
    assert spectral_radius(matrix) == pytest.approx(expected, rel=1e-9)


def test_spectral_radius_negative_entry() -> None:
    with pytest.raises(NegativeEntry):
        spectral_radius([[1.0, -0.5], [0.5, 1.0]])


def test_spectral_bound_matches_eigvals() -> None:
    """Spectral bound of random Metzler matrices agrees with the dense eigensolve."""
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        matrix = rng.uniform(0.0, 1.0, size=(n, n))
        np.fill_diagonal(matrix, rng.uniform(-5.0, 2.0, size=n))
        expected = float(np.max(np.linalg.eigvals(matrix).real))
        assert spectral_bound(matrix) == pytest.approx(expected, rel=1e-8, abs=1e-10)


def test_spectral_bound_nearly_tied_spectrum() -> None:
    """Nearly tied diagonal entries do not stop the shifted iteration early."""
    matrix = np.array([[-1.0, 1e-9], [1e-9, -1.0 - 1e-7]])
    expected = float(np.max(np.linalg.eigvals(matrix).real))
    assert spectral_bound(matrix) == pytest.approx(expected, abs=1e-12)


def test_spectral_bound_connectivity_is_zero() -> None:
    """A connectivity matrix has spectral bound zero."""
    conn = validate_connectivity([[0.0, 0.0, 2.0], [1.0, 0.0, 0.0], [0.0, 3.0, 0.0]])
    assert spectral_bound(conn.entries) == pytest.approx(0.0, abs=1e-10)


def test_spectral_bound_requires_metzler() -> None:
    """The Perron route rejects negative off-diagonals; the dense route accepts them."""
    matrix = [[0.0, -1.0], [1.0, 0.0]]
    with pytest.raises(NegativeOffDiagonal):
        spectral_bound(matrix)
    assert spectral_bound(matrix, quasi_positive=False) == pytest.approx(0.0, abs=1e-12)


def test_perron_vector_reducible() -> None:
    with pytest.raises(NotIrreducible):
        perron_vector([[-1.0, 0.0], [1.0, 0.0]])

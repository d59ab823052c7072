"""Error kinds raised by the analysis library.

Every error carries the process exit code the CLI maps it to: input and precondition
problems exit with ``2``, numerical failures with ``3``.
"""


class SisPatchError(Exception):
    """Base class for all library errors."""

    exit_code: int = 1


class InvalidInput(SisPatchError, ValueError):
    """Parameters or data violate a model invariant."""

    exit_code = 2


class NumericalFailure(SisPatchError, RuntimeError):
    """An iteration or linear solve failed on otherwise valid input."""

    exit_code = 3


# --- input validation ---


class NegativeOffDiagonal(InvalidInput):
    """A connectivity matrix has a negative off-diagonal entry."""


class NotIrreducible(InvalidInput):
    """The movement digraph is not strongly connected."""


class DimensionMismatch(InvalidInput):
    """Array shapes disagree with the patch count."""


class NegativeEntry(InvalidInput):
    """A matrix expected to be nonnegative has a negative entry."""


class NonPositiveParameter(InvalidInput):
    """A rate, dispersal coefficient or population is not strictly positive."""


class InvalidInitialData(InvalidInput):
    """Initial data is negative, mis-shaped or does not sum to N."""


class NotARoot(InvalidInput):
    """The requested l does not balance the population equation."""


# --- preconditions of a particular analysis ---


class NotApplicable(InvalidInput):
    """The analysis is undefined for this model."""


class NoPositiveSolution(NotApplicable):
    """The family equation has no positive solution at this l."""


class DegenerateOmegaStar(NotApplicable):
    """The risk vector is proportional to the Perron vector."""


class NoInteriorRoot(NotApplicable):
    """The requested sub-limit case does not apply to this N."""


# --- numerical failures ---


class NoConvergence(NumericalFailure):
    """An iterative method exhausted its budget."""


class SingularV(NumericalFailure):
    """The transition matrix diag(gamma) - d_I L could not be factorised."""


class SingularSystem(NumericalFailure):
    """A linearised system is numerically singular."""


class StepUnderflow(NumericalFailure):
    """The integrator step fell below its lower limit."""


class NoBracket(NumericalFailure):
    """A one-dimensional search found no sign change on its bracket."""

"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command line front end:
1 for bad input, 2 for instability, 3 for violated modelling assumptions and
4 for decomposition failures.
"""


class DigraphPerfError(Exception):
    """Base class for all package errors."""

    exit_code = 1


# --- input / structural errors (exit 1) -------------------------------------

class InvalidGraph(DigraphPerfError, ValueError):
    """Graph description violates the weighted digraph invariants."""


class BadOmega(DigraphPerfError, ValueError):
    """Neighbourhood size outside ``1..n-1``."""


class BadSize(DigraphPerfError, ValueError):
    """Node count too small for the requested construction."""


class NotWeightBalanced(DigraphPerfError, ValueError):
    """Column sums of the Laplacian are not zero."""


class ShapeMismatch(DigraphPerfError, ValueError):
    """Array shapes are inconsistent with each other."""


class InvalidQuery(DigraphPerfError, ValueError):
    """A performance query combines incompatible options."""


class NotPSD(DigraphPerfError, ValueError):
    """Input covariance is not positive semidefinite."""


class RepeatedRoots(DigraphPerfError, ValueError):
    """Distinct-root formula requested for a repeated characteristic root."""


class DistinctRoots(DigraphPerfError, ValueError):
    """Repeated-root formula requested for distinct characteristic roots."""


class BlockTooLarge(DigraphPerfError, ValueError):
    """Jordan block exceeds the supported size."""


class HorizonExceeded(DigraphPerfError, RuntimeError):
    """Time-domain integration did not settle within the step budget."""


class NumericalError(DigraphPerfError, ArithmeticError):
    """A result failed a post-condition check (sign, realness, symmetry)."""


class LyapunovIllConditioned(NumericalError):
    """Lyapunov solution failed its residual or definiteness check."""


# --- stability (exit 2) ------------------------------------------------------

class Unstable(DigraphPerfError, ArithmeticError):
    """The input-output map is not stable, so the metric is infinite."""

    exit_code = 2


class DivergentIntegral(Unstable):
    """A scalar product integral does not converge."""


# --- assumptions (exit 3) ----------------------------------------------------

class AssumptionViolated(DigraphPerfError, ValueError):
    """A modelling assumption required by the closed forms does not hold."""

    exit_code = 3


class GainAssumptionViolated(AssumptionViolated):
    """Gains lack either position or velocity feedback."""


class OutputAssumptionViolated(AssumptionViolated):
    """The output matrix does not annihilate the consensus direction."""


class NotNormal(AssumptionViolated):
    """The Laplacian is required to be normal."""


class NoComplexObservableMode(AssumptionViolated):
    """No observable mode with a nonzero imaginary part exists."""


# --- decomposition (exit 4) --------------------------------------------------

class DecompositionError(DigraphPerfError, ArithmeticError):
    """The Jordan data could not be produced or validated."""

    exit_code = 4


class DefectiveOrIllConditioned(DecompositionError):
    """Numeric eigendecomposition cannot certify diagonalizability."""


class NoReachableNode(DecompositionError):
    """The graph has no globally reachable node."""


class ResidualTooLarge(DecompositionError):
    """``L R - R J`` is not small."""


class SingularR(DecompositionError):
    """The (generalized) eigenvector matrix is singular."""

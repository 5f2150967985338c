"""Exception hierarchy for dcselect.

Two families matter to callers: ``ValidationError`` for malformed inputs
(CLI exit code 2) and ``NumericalError`` for breakdowns inside otherwise
valid computations (CLI exit code 3).
"""


class DcselectError(Exception):
    """Base class for all dcselect errors."""


class ValidationError(DcselectError):
    """Invalid or inconsistent user input."""


class DimensionMismatchError(ValidationError):
    """Shapes of design matrix, response, or parameter vectors disagree."""


class NonFiniteEntryError(ValidationError):
    """A NaN or infinity was found where a finite value is required."""


class NonPositiveHyperparameterError(ValidationError):
    """A hyperparameter that must be strictly positive is not."""


class ZeroVarianceColumnError(ValidationError):
    """A design column is constant and cannot be standardized."""

    def __init__(self, column: int):
        self.column = column
        super().__init__(f"column {column} has zero variance")


class MalformedPartitionError(ValidationError):
    """Group index sets do not form a valid partition/collection."""


class NumericalError(DcselectError):
    """Numerical failure in an otherwise valid computation."""


class LinearSolverError(NumericalError):
    """Iterative linear solver failed to converge."""

    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"conjugate gradient did not converge within {iterations} "
            f"iterations (max relative residual {residual:.3e})"
        )


class LossEvaluationError(NumericalError):
    """Argument of a logarithm became non-positive; catastrophic breakdown."""


class ProjectionConvergenceError(NumericalError):
    """Alternating projection exceeded its sweep budget."""

    def __init__(self, sweeps: int, infeasibility: float):
        self.sweeps = sweeps
        self.infeasibility = infeasibility
        super().__init__(
            f"alternating projection not feasible after {sweeps} sweeps "
            f"(residual infeasibility {infeasibility:.3e})"
        )


class PosetSolverError(NumericalError):
    """Partitioning solver for poset isotonic regression failed."""


class SolverRuntimeError(NumericalError):
    """Numerical failure during an optimization run, with iteration index."""

    def __init__(self, iteration: int, cause: Exception):
        self.iteration = iteration
        self.cause = cause
        super().__init__(f"numerical failure at iteration {iteration}: {cause}")

"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes: schema problems exit with 2,
numerical failures (divergence, degeneracy, violated preconditions) with 3,
and I/O errors with 4.
"""


class PsmError(Exception):
    """Base class for all toolkit errors."""


class EvaluationError(PsmError):
    """A map returned a non-finite value during evaluation."""


class ChartError(PsmError):
    """A chart is degenerate at its base point, or two charts disagree."""


class OffManifoldError(PsmError):
    """A point violates the on-manifold tolerance."""

    def __init__(self, message: str, distance: float):
        super().__init__(f"{message} (residual {distance:.3e})")
        self.distance = distance


class PreconditionError(PsmError):
    """An operation was called outside its stated domain of validity."""


class DegenerateError(PsmError):
    """A probe or projection could not produce a usable result."""


class DivergenceError(PsmError):
    """Solver iterates left the trust region."""

    def __init__(self, iteration: int, norm: float):
        super().__init__(
            f"iterate norm {norm:.3e} exceeded 1e12 at iteration {iteration}"
        )
        self.iteration = iteration


class SchemaError(PsmError):
    """An experiment config failed validation."""

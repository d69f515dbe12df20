class ValidationError(ValueError):
    """Invalid input data or parameters."""


class SolverError(RuntimeError):
    """A numerical routine failed to converge or hit an internal limit."""


class BudgetExceededError(SolverError):
    """Problem size exceeds the configured variable budget."""

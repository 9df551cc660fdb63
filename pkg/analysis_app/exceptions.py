from core.exceptions import WorkbenchError


class InvalidPerturbationError(WorkbenchError, ValueError):
    """Raised when a dynamics perturbation leaves the probability simplex."""

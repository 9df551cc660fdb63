from core.exceptions import WorkbenchError


class InvalidGridworldError(WorkbenchError, ValueError):
    """Raised for degenerate or inconsistent gridworld specifications."""


class EmptyRolloutError(WorkbenchError, ValueError):
    """Raised when a rate is requested over rollouts containing no transitions."""


class ShapeMismatchError(WorkbenchError, ValueError):
    """Raised when estimated and true quantities disagree in shape."""

from core.exceptions import WorkbenchError


class BatchTooSmallError(WorkbenchError, ValueError):
    """Raised when advantage normalization is requested on fewer than two samples."""

from core.exceptions import WorkbenchError


class EmptyDatasetError(WorkbenchError, ValueError):
    """Raised when an average over dataset transitions is requested on no data."""


class InvalidParametersError(WorkbenchError, ValueError):
    """
    Raised when reward/dynamics parameters violate their invariants.

    Attributes:
        field (str): Name of the offending field.
    """

    def __init__(self, field, message):
        super().__init__(f'{field}: {message}')
        self.field = field


class InvalidConfigError(WorkbenchError, ValueError):
    """
    Raised when a training configuration is rejected before running.

    Attributes:
        field (str): Name of the offending field.
    """

    def __init__(self, field, message):
        super().__init__(f'{field}: {message}')
        self.field = field


class TrainingDiverged(WorkbenchError):
    """
    Raised by the training loops when the divergence detector fires.

    Attributes:
        iteration (int): Outer iteration at which training was aborted.
        reason (str): Human readable diagnostic.
    """

    def __init__(self, iteration, reason):
        super().__init__(f'training aborted at iteration {iteration}: {reason}')
        self.iteration = iteration
        self.reason = reason

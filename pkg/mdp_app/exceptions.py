from core.exceptions import WorkbenchError


class InvalidMdpError(WorkbenchError, ValueError):
    """
    Raised when an MDP violates one of its invariants.

    Attributes:
        field (str): Name of the offending field.
    """

    def __init__(self, field, message):
        super().__init__(f'{field}: {message}')
        self.field = field


class SolverDidNotConverge(WorkbenchError):
    """
    Raised when soft value iteration exhausts its iteration budget.

    Attributes:
        residual (float): Sup-norm change of V at the last sweep.
        iterations (int): Number of sweeps performed.
    """

    def __init__(self, residual, iterations):
        super().__init__(
            f'soft value iteration did not reach tolerance after {iterations} sweeps '
            f'(residual {residual:.3e})'
        )
        self.residual = residual
        self.iterations = iterations


class OccupancySolveError(WorkbenchError):
    """
    Raised when the discounted flow equation cannot be solved accurately.

    Attributes:
        residual (float): Sup-norm residual of the flow equation.
    """

    def __init__(self, residual, message='occupancy solve failed'):
        super().__init__(f'{message} (residual {residual:.3e})')
        self.residual = residual

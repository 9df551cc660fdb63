from dataclasses import dataclass

import numpy as np

from gridworld_app.models import Trajectory

ORIGINS = ('real_branch', 'fake_branch', 'expert', 'imagined')


@dataclass(frozen=True, eq=False)
class RolloutBatch:
    """
    Fixed-length rollouts stored as aligned arrays.

    ``states`` is [batch, steps + 1] and ``actions`` is [batch, steps]; row i
    starts at the branch point ``(states[i, 0], actions[i, 0])``.
    """
    states: np.ndarray
    actions: np.ndarray
    origin: str
    discount: float

    def __post_init__(self):
        if self.origin not in ORIGINS:
            raise ValueError(f'origin must be one of {ORIGINS}')
        if self.states.ndim != 2 or self.states.shape != (self.actions.shape[0], self.actions.shape[1] + 1):
            raise ValueError('states must be [batch, steps + 1] for actions [batch, steps]')

    @property
    def size(self):
        return self.states.shape[0]

    @property
    def steps(self):
        return self.actions.shape[1]

    @property
    def trajectories(self):
        return [Trajectory(s, a) for s, a in zip(self.states, self.actions)]

    @property
    def branch_points(self):
        return list(zip(self.states[:, 0].tolist(), self.actions[:, 0].tolist()))

    def as_records(self):
        """One JSON-ready dict per trajectory, for debugging dumps."""
        return [
            {'origin': self.origin, 'states': s.tolist(), 'actions': a.tolist()}
            for s, a in zip(self.states, self.actions)
        ]

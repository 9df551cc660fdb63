"""
Gridworld specification, trajectories and expert datasets.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax

from gridworld_app.exceptions import InvalidGridworldError

MOVES = {
    'up': (0, 1),
    'down': (0, -1),
    'left': (-1, 0),
    'right': (1, 0),
}
BOUNDARY_RULES = ('stay_in_place',)


@dataclass(frozen=True)
class GridworldSpec:
    """
    Deterministic gridworld with a single goal cell.

    Cells are (x, y) with the origin at the lower left; state index is
    ``y * width + x``. The goal defaults to the upper-right corner and the
    start to the lower-left one. The target distribution over states is the
    softmax of logits that are ``goal_logit`` at the goal and 0 elsewhere.
    """
    width: int = 5
    height: int = 5
    goal: tuple = None
    start: tuple = (0, 0)
    actions: tuple = ('up', 'down', 'left', 'right')
    boundary_rule: str = 'stay_in_place'
    goal_logit: float = 20.0
    discount: float = 0.7

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise InvalidGridworldError('width and height must both be at least 2')
        if self.goal is None:
            object.__setattr__(self, 'goal', (self.width - 1, self.height - 1))
        object.__setattr__(self, 'goal', tuple(self.goal))
        object.__setattr__(self, 'start', tuple(self.start))
        object.__setattr__(self, 'actions', tuple(self.actions))
        for name in ('goal', 'start'):
            if not self.contains(getattr(self, name)):
                raise InvalidGridworldError(f'{name} {getattr(self, name)} lies outside the grid')
        unknown = set(self.actions) - set(MOVES)
        if unknown or not self.actions or len(set(self.actions)) != len(self.actions):
            raise InvalidGridworldError(f'actions must be distinct moves from {tuple(MOVES)}')
        if self.boundary_rule not in BOUNDARY_RULES:
            raise InvalidGridworldError(f'boundary_rule must be one of {BOUNDARY_RULES}')
        if not 0.0 < self.discount < 1.0:
            raise InvalidGridworldError('discount must lie strictly inside (0, 1)')

    @property
    def n_states(self):
        return self.width * self.height

    @property
    def n_actions(self):
        return len(self.actions)

    def contains(self, cell):
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def state_index(self, cell):
        x, y = cell
        return y * self.width + x

    def cell(self, state):
        return state % self.width, state // self.width

    @property
    def goal_state(self):
        return self.state_index(self.goal)

    @property
    def start_state(self):
        return self.state_index(self.start)

    def target_logits(self):
        logits = np.zeros(self.n_states)
        logits[self.goal_state] = self.goal_logit
        return logits

    def target_log_probs(self):
        return log_softmax(self.target_logits())

    def legal_successors(self):
        """
        Boolean [n_states, n_states] matrix; entry (s, s') is set when s' is in
        the 4-neighbourhood of s or equals s.
        """
        legal = np.zeros((self.n_states, self.n_states), dtype=bool)
        for state in range(self.n_states):
            x, y = self.cell(state)
            legal[state, state] = True
            for dx, dy in MOVES.values():
                neighbour = (x + dx, y + dy)
                if self.contains(neighbour):
                    legal[state, self.state_index(neighbour)] = True
        return legal


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    A state-action path: ``states`` has one more entry than ``actions``.
    """
    states: np.ndarray
    actions: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.int64)
        actions = np.asarray(self.actions, dtype=np.int64)
        if states.ndim != 1 or actions.ndim != 1 or len(states) != len(actions) + 1:
            raise InvalidGridworldError('trajectory needs len(states) == len(actions) + 1')
        object.__setattr__(self, 'states', states)
        object.__setattr__(self, 'actions', actions)

    def __len__(self):
        return len(self.actions)

    def transitions(self):
        return self.states[:-1], self.actions, self.states[1:]


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Expert demonstrations with their sufficient statistics.

    Fields:
        trajectories (list): Trajectory objects.
        counts (ndarray): [n_states, n_actions, n_states] visit counts N(s, a, s').
        sa_counts (ndarray): [n_states, n_actions] counts N(s, a).
    """
    trajectories: list
    counts: np.ndarray
    sa_counts: np.ndarray = field(default=None)

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=float)
        object.__setattr__(self, 'counts', counts)
        object.__setattr__(self, 'sa_counts', counts.sum(axis=-1))
        object.__setattr__(self, 'trajectories', list(self.trajectories))

    @classmethod
    def from_trajectories(cls, trajectories, n_states, n_actions):
        counts = np.zeros((n_states, n_actions, n_states))
        for trajectory in trajectories:
            states, actions, successors = trajectory.transitions()
            if len(actions) and (
                states.min() < 0 or successors.min() < 0 or max(states.max(), successors.max()) >= n_states
                or actions.min() < 0 or actions.max() >= n_actions
            ):
                raise InvalidGridworldError('trajectory indices out of range')
            np.add.at(counts, (states, actions, successors), 1.0)
        return cls(trajectories=trajectories, counts=counts)

    @property
    def n_states(self):
        return self.counts.shape[0]

    @property
    def n_actions(self):
        return self.counts.shape[1]

    @property
    def n_transitions(self):
        return int(round(self.counts.sum()))

    def sa_weights(self):
        """Empirical distribution of (s, a) over all dataset transitions."""
        return self.sa_counts / self.counts.sum()

    def transition_weights(self):
        """Empirical distribution of (s, a, s') over all dataset transitions."""
        return self.counts / self.counts.sum()

    def transition_arrays(self):
        """Concatenated (states, actions, successors) over all trajectories."""
        if not self.trajectories:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, empty
        parts = [t.transitions() for t in self.trajectories]
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(3))


@dataclass(frozen=True)
class RewardRecoveryReport:
    """
    Goal recovery and total-variation distance between target distributions.
    """
    goal_argmax_match: bool
    estimated_goal: int
    true_goal: int
    tv_distance: float

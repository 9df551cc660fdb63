"""
In-memory domain types of the tabular MDP machinery.

None of these are ORM models; the workbench keeps no database. They are
frozen dataclasses over numpy arrays, validated on construction.
"""
from dataclasses import dataclass, field

import numpy as np

from mdp_app.exceptions import InvalidMdpError

PROBABILITY_TOL = 1e-12


def _check_simplex(name, array, axis, tol):
    if np.any(array < -tol):
        raise InvalidMdpError(name, 'entries must be non-negative')
    sums = array.sum(axis=axis)
    if np.max(np.abs(sums - 1.0)) > tol:
        raise InvalidMdpError(name, f'must sum to 1 within {tol}')


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """
    Entropy-regularized MDP (S, A, P, R, mu, gamma) over finite spaces.

    Fields:
        transition (ndarray): [n_states, n_actions, n_states], P(s'|s, a).
        reward (ndarray): [n_states, n_actions], R(s, a).
        init_dist (ndarray): [n_states], mu(s).
        discount (float): gamma, strictly inside (0, 1).
    """
    transition: np.ndarray
    reward: np.ndarray
    init_dist: np.ndarray
    discount: float
    tol: float = field(default=PROBABILITY_TOL, repr=False)

    def __post_init__(self):
        transition = np.asarray(self.transition, dtype=float)
        reward = np.asarray(self.reward, dtype=float)
        init_dist = np.asarray(self.init_dist, dtype=float)

        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise InvalidMdpError('transition', 'expected shape [n_states, n_actions, n_states]')
        n_states, n_actions = transition.shape[:2]
        if n_states < 1 or n_actions < 1:
            raise InvalidMdpError('transition', 'needs at least one state and one action')
        if reward.shape != (n_states, n_actions):
            raise InvalidMdpError('reward', f'expected shape ({n_states}, {n_actions})')
        if init_dist.shape != (n_states,):
            raise InvalidMdpError('init_dist', f'expected shape ({n_states},)')
        if not np.all(np.isfinite(reward)):
            raise InvalidMdpError('reward', 'entries must be finite')
        if not 0.0 < float(self.discount) < 1.0:
            raise InvalidMdpError('discount', 'must lie strictly inside (0, 1)')
        _check_simplex('transition', transition, -1, self.tol)
        _check_simplex('init_dist', init_dist, -1, self.tol)

        object.__setattr__(self, 'transition', transition)
        object.__setattr__(self, 'reward', reward)
        object.__setattr__(self, 'init_dist', init_dist)
        object.__setattr__(self, 'discount', float(self.discount))

    @property
    def n_states(self):
        return self.transition.shape[0]

    @property
    def n_actions(self):
        return self.transition.shape[1]

    def with_reward(self, reward):
        return TabularMdp(self.transition, reward, self.init_dist, self.discount, self.tol)

    def with_transition(self, transition):
        return TabularMdp(transition, self.reward, self.init_dist, self.discount, self.tol)


@dataclass(frozen=True, eq=False)
class SoftSolution:
    """
    Entropy-regularized optimum for one (reward, dynamics) pair.

    ``policy`` is the normalized exponential of ``q`` and ``v`` its
    log-sum-exp, so ``log(policy) = q - v[:, None]`` holds exactly up to
    rounding. ``bellman_residual`` is the sup-norm gap between ``q`` and the
    one-step backup of ``v``.
    """
    q: np.ndarray
    v: np.ndarray
    policy: np.ndarray
    bellman_residual: float
    iterations: int = 0

    @property
    def log_policy(self):
        return self.q - self.v[:, None]


@dataclass(frozen=True, eq=False)
class OccupancyMeasure:
    """
    Discounted occupancy ``rho`` (mass 1/(1-gamma)) and its normalized
    marginal ``d = (1 - gamma) * rho``.
    """
    rho: np.ndarray
    d: np.ndarray
    residual: float = 0.0

    @property
    def state_rho(self):
        return self.rho.sum(axis=1)

    @property
    def state_d(self):
        return self.d.sum(axis=1)

"""
Expert demonstrations sampled from the soft-optimal policy.
"""
import logging

from gridworld_app.models import Dataset, Trajectory
from mdp_app.solver import SOLVER_TOL, soft_value_iteration
from sampling_app.rollouts import policy_rollouts

logger = logging.getLogger(__name__)

EXPERT_STREAM = 1


def generate_expert_dataset(mdp, n_traj, horizon, seed, tol=SOLVER_TOL, solution=None):
    """
    Sample ``n_traj`` expert trajectories of ``horizon`` steps in the true MDP.

    Initial states are drawn from ``mdp.init_dist`` and actions from the
    soft-optimal policy. Trajectory i only consumes the random stream keyed by
    ``(seed, i)``.
    """
    if n_traj < 0 or horizon < 0:
        raise ValueError('n_traj and horizon must be non-negative')
    solution = solution or soft_value_iteration(mdp, tol=tol)

    states, actions = policy_rollouts(
        mdp.transition, solution.policy, mdp.init_dist, n_traj, horizon, (seed, EXPERT_STREAM),
    )
    trajectories = [Trajectory(s, a) for s, a in zip(states, actions)]

    logger.info('sampled %d expert trajectories of length %d (seed %d)', n_traj, horizon, seed)
    return Dataset.from_trajectories(trajectories, mdp.n_states, mdp.n_actions)

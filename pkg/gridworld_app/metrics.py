"""
Metrics of the gridworld study: illegal transitions and reward recovery.
"""
import numpy as np
from scipy.special import softmax

from gridworld_app.exceptions import EmptyRolloutError, ShapeMismatchError
from gridworld_app.models import RewardRecoveryReport


def illegal_transition_rate(spec, rollouts):
    """
    Fraction of consecutive state pairs whose successor is not a legal
    neighbour (or the same cell) of its predecessor.

    Raises:
        EmptyRolloutError: If the rollouts contain no transitions.
    """
    legal = spec.legal_successors()
    illegal = 0
    total = 0
    for trajectory in rollouts:
        states, _, successors = trajectory.transitions()
        illegal += int(np.count_nonzero(~legal[states, successors]))
        total += len(states)
    if total == 0:
        raise EmptyRolloutError('illegal transition rate is undefined without transitions')
    return illegal / total


def illegal_successor_mass(spec, dynamics):
    """[n_states, n_actions] probability that P(.|s, a) puts on illegal successors."""
    dynamics = np.asarray(dynamics, dtype=float)
    if dynamics.shape != (spec.n_states, spec.n_actions, spec.n_states):
        raise ShapeMismatchError('dynamics do not match the grid')
    return np.einsum('sat,st->sa', dynamics, ~spec.legal_successors())


def expected_illegal_rate(spec, dynamics, policy, init_dist, horizon):
    """
    Exact expectation of ``illegal_transition_rate`` for rollouts of
    ``horizon`` steps from ``init_dist`` in ``dynamics`` under ``policy``.
    """
    if horizon < 1:
        raise EmptyRolloutError('horizon must be at least 1')
    mass = illegal_successor_mass(spec, dynamics)
    marginal = policy * np.asarray(init_dist, dtype=float)[:, None]
    rate = 0.0
    for _ in range(horizon):
        rate += float(np.sum(marginal * mass))
        marginal = policy * np.einsum('sa,sat->t', marginal, dynamics)[:, None]
    return rate / horizon


def reward_recovery_error(true_reward, est_logits):
    """
    Compare an estimated state reward against the true target distribution.

    Args:
        true_reward (ndarray): [n_states] or [n_states, n_actions] true reward,
            a log-probability over states replicated across actions.
        est_logits (ndarray): [n_states] estimated reward logits.

    Returns:
        RewardRecoveryReport: Goal argmax agreement and the total-variation
        distance between softmax(true) and softmax(estimated).
    """
    true_reward = np.asarray(true_reward, dtype=float)
    est_logits = np.asarray(est_logits, dtype=float)
    true_state = true_reward[:, 0] if true_reward.ndim == 2 else true_reward
    if est_logits.shape != true_state.shape:
        raise ShapeMismatchError(
            f'estimated logits have shape {est_logits.shape}, expected {true_state.shape}'
        )
    true_probs = softmax(true_state)
    est_probs = softmax(est_logits)
    true_goal = int(np.argmax(true_state))
    estimated_goal = int(np.argmax(est_logits))
    return RewardRecoveryReport(
        goal_argmax_match=estimated_goal == true_goal,
        estimated_goal=estimated_goal,
        true_goal=true_goal,
        tv_distance=float(0.5 * np.abs(true_probs - est_probs).sum()),
    )

"""
Rollout engine and Monte-Carlo gradient estimators.

Every trajectory draws its randomness from its own counter-based stream
(Philox keyed by the caller's seed tuple plus the trajectory index), so a
batch is reproducible and independent of evaluation order.
"""
import logging

import numpy as np

from estimation_app.models import GradientVector
from sampling_app.exceptions import BatchTooSmallError
from sampling_app.models import RolloutBatch

logger = logging.getLogger(__name__)

NORMALIZE_EPS = 1e-8
BASELINES = ('q_minus_r', 'zero')


def stream_uniforms(key, n, width):
    """
    Uniform draws in [0, 1), one independent Philox stream per row.

    Args:
        key (tuple): Non-negative integers identifying the batch (seed, ...).
        n (int): Number of rows (trajectories).
        width (int): Draws per row.
    """
    key = tuple(int(k) for k in key)
    out = np.empty((n, width))
    for index in range(n):
        generator = np.random.Generator(np.random.Philox(np.random.SeedSequence(key + (index,))))
        out[index] = generator.random(width)
    return out


def sample_indices(key, n_items, size):
    """``size`` indices drawn uniformly with replacement from range(n_items)."""
    generator = np.random.Generator(np.random.Philox(np.random.SeedSequence(tuple(int(k) for k in key))))
    return generator.integers(0, n_items, size=size)


def sample_categorical(probs, uniforms):
    """Inverse-CDF sampling, one draw per row of ``probs``."""
    cdf = np.cumsum(probs, axis=-1)
    cdf /= cdf[..., -1:]
    return (cdf <= uniforms[..., None]).sum(axis=-1)


def simulate(transition, policy, start_states, steps, uniforms, first_actions=None):
    """
    Roll ``policy`` forward in ``transition`` for a fixed number of steps.

    Column ``2t`` of ``uniforms`` drives the action at step t and column
    ``2t + 1`` the successor. Entries of ``first_actions`` that are
    non-negative override the first sampled action.

    Returns:
        tuple: ``(states, actions)`` of shapes [batch, steps + 1] and [batch, steps].
    """
    start_states = np.asarray(start_states, dtype=np.int64)
    batch = start_states.shape[0]
    states = np.empty((batch, steps + 1), dtype=np.int64)
    actions = np.empty((batch, steps), dtype=np.int64)
    states[:, 0] = start_states
    for t in range(steps):
        current = states[:, t]
        chosen = sample_categorical(policy[current], uniforms[:, 2 * t])
        if t == 0 and first_actions is not None:
            chosen = np.where(first_actions >= 0, first_actions, chosen)
        actions[:, t] = chosen
        states[:, t + 1] = sample_categorical(transition[current, chosen], uniforms[:, 2 * t + 1])
    return states, actions


def policy_rollouts(transition, policy, init_dist, n, steps, key):
    """
    ``n`` rollouts of ``steps`` transitions with initial states drawn from
    ``init_dist``; row i reads column 0 of its stream for the start state.

    Returns:
        tuple: ``(states, actions)`` as in ``simulate``.
    """
    uniforms = stream_uniforms(key, n, 2 * steps + 1)
    starts = sample_categorical(np.broadcast_to(init_dist, (n, len(init_dist))), uniforms[:, 0])
    return simulate(transition, policy, starts, steps, uniforms[:, 1:])


def branch_rollouts(theta, sol, starts, steps, seed, stream=()):
    """
    Simulate branches in P^ under pi^. ``starts`` holds ``(state, action)``
    pairs; a ``None`` action is drawn from the policy.
    """
    if steps < 1:
        raise ValueError('steps must be at least 1')
    start_states = np.array([s for s, _ in starts], dtype=np.int64)
    given = [a is not None for _, a in starts]
    if starts and any(given) and not all(given):
        raise ValueError('a batch is either all real branches or all fake branches')
    origin = 'real_branch' if starts and all(given) else 'fake_branch'
    first_actions = np.array([-1 if a is None else a for _, a in starts], dtype=np.int64)

    uniforms = stream_uniforms((seed,) + tuple(stream), len(starts), 2 * steps)
    states, actions = simulate(theta.dynamics(), sol.policy, start_states, steps, uniforms, first_actions)
    return RolloutBatch(states=states, actions=actions, origin=origin, discount=theta.discount)


def _step_weights(batch):
    return batch.discount ** np.arange(batch.steps)


def reinforce_dynamics_grad(theta, sol, batch, baseline='q_minus_r', normalize=True, return_samples=False):
    """
    REINFORCE estimate of the dynamics gradient of the discounted EV terms.

    For each sampled transition (s_t, a_t, s_t+1) the contribution is
    ``gamma^t (V(s_t+1) - b(s_t, a_t)) grad log P^(s_t+1|s_t, a_t)``, averaged
    over trajectories. The default baseline is b = Q - R.

    Args:
        baseline: ``'q_minus_r'``, ``'zero'`` or an [n_states, n_actions] array.
        normalize (bool): Standardize advantages across the mini-batch.
            Normalization biases the estimator.
        return_samples (bool): Also return the per-trajectory contributions,
            shaped [batch, n_states, n_actions, n_states].

    Raises:
        BatchTooSmallError: If normalizing fewer than two transitions.
    """
    states, actions, successors = batch.states[:, :-1], batch.actions, batch.states[:, 1:]
    if isinstance(baseline, str):
        if baseline not in BASELINES:
            raise ValueError(f'baseline must be one of {BASELINES} or an array')
        offsets = sol.q - theta.reward_table() if baseline == 'q_minus_r' else np.zeros_like(sol.q)
    else:
        offsets = np.asarray(baseline, dtype=float)

    advantages = sol.v[successors] - offsets[states, actions]
    if normalize:
        if advantages.size < 2:
            raise BatchTooSmallError('advantage normalization needs at least two transitions')
        advantages = (advantages - advantages.mean()) / (advantages.std() + NORMALIZE_EPS)
    weights = advantages * _step_weights(batch)[None, :]

    dynamics = theta.dynamics()
    shape = dynamics.shape
    if return_samples:
        rows = np.broadcast_to(np.arange(batch.size)[:, None], states.shape)
        per_sample = np.zeros((batch.size,) + shape)
        np.add.at(per_sample, (rows, states, actions, successors), weights)
        mass = np.zeros((batch.size,) + shape[:2])
        np.add.at(mass, (rows, states, actions), weights)
        per_sample -= mass[..., None] * dynamics[None]
        estimate = per_sample.mean(axis=0)
    else:
        total = np.zeros(shape)
        np.add.at(total, (states, actions, successors), weights)
        mass = np.zeros(shape[:2])
        np.add.at(mass, (states, actions), weights)
        estimate = (total - mass[..., None] * dynamics) / batch.size

    gradient = GradientVector(np.zeros_like(theta.reward_logits), estimate)
    if return_samples:
        return gradient, per_sample
    return gradient


def exact_branch_weights(theta, sol, starts, steps):
    """
    Exact discounted (s, a) visitation of ``steps``-long branches from ``starts``
    in (P^, pi^), averaged over start points. ``None`` actions follow pi^.
    """
    dynamics = theta.dynamics()
    policy = sol.policy
    marginal = np.zeros(dynamics.shape[:2])
    for state, action in starts:
        if action is None:
            marginal[state] += policy[state]
        else:
            marginal[state, action] += 1.0
    marginal /= max(len(starts), 1)

    weights = np.zeros_like(marginal)
    discount = 1.0
    for _ in range(steps):
        weights += discount * marginal
        visits = np.einsum('sa,sat->t', marginal, dynamics)
        marginal = policy * visits[:, None]
        discount *= theta.discount
    return weights


def exact_branch_dynamics_grad(theta, sol, starts, steps):
    """
    Enumeration oracle for ``reinforce_dynamics_grad``: the exact expectation
    of the discounted EV gradient along the branches, V held fixed.
    """
    weights = exact_branch_weights(theta, sol, starts, steps)
    return GradientVector(np.zeros_like(theta.reward_logits), theta.expected_value_pullback(weights, sol.v))


def discounted_visit_weights(batch, n_states, n_actions, per_trajectory=False):
    """Monte-Carlo discounted (s, a) visitation, averaged over the batch."""
    step_weights = np.broadcast_to(_step_weights(batch)[None, :], batch.actions.shape)
    states = batch.states[:, :-1]
    if per_trajectory:
        rows = np.broadcast_to(np.arange(batch.size)[:, None], states.shape)
        weights = np.zeros((batch.size, n_states, n_actions))
        np.add.at(weights, (rows, states, batch.actions), step_weights)
        return weights
    weights = np.zeros((n_states, n_actions))
    np.add.at(weights, (states, batch.actions), step_weights)
    return weights / batch.size


def discounted_reward_grad(theta, batch, return_samples=False):
    """
    Monte-Carlo gradient of the discounted reward collected along a batch,
    E[sum_t gamma^t grad R(s_t, a_t)], the building block of the reward updates.
    """
    if return_samples:
        per_trajectory = discounted_visit_weights(batch, theta.n_states, theta.n_actions, per_trajectory=True)
        samples = theta.reward_pullback(per_trajectory)
        gradient = GradientVector(samples.mean(axis=0), np.zeros_like(theta.dynamics_logits))
        return gradient, samples
    weights = discounted_visit_weights(batch, theta.n_states, theta.n_actions)
    return GradientVector(theta.reward_pullback(weights), np.zeros_like(theta.dynamics_logits))

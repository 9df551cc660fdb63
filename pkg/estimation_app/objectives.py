"""
Log-posterior, surrogate objective and their exact gradients.

All quantities are computed with exact expectations: the inner problem is
solved by soft value iteration and every occupancy by a linear solve over
state-action pairs.
"""
import logging

import numpy as np

from estimation_app.exceptions import EmptyDatasetError
from estimation_app.models import GradientVector
from mdp_app.solver import (
    SOLVER_MAX_ITER,
    SOLVER_TOL,
    conditional_occupancy_matrix,
    occupancy_measure,
    soft_value_iteration,
)

logger = logging.getLogger(__name__)

# log of the smallest positive subnormal double
LOG_CLAMP = -745.0


def solve_policy(theta, tol=SOLVER_TOL, max_iter=SOLVER_MAX_ITER, init_v=None):
    """Soft-optimal solution of the learner's MDP (P^_theta2, R_theta1)."""
    return soft_value_iteration(theta.as_mdp(), tol=tol, max_iter=max_iter, init_v=init_v)


def clamp_log(values):
    """
    Replace log-probabilities below ``LOG_CLAMP`` (including -inf) by the clamp.

    Returns:
        tuple: ``(clamped, flagged)`` where ``flagged`` is True when any entry
        was replaced.
    """
    values = np.asarray(values, dtype=float)
    low = ~(values >= LOG_CLAMP)
    if np.any(low):
        logger.warning('clamped %d log-probabilities below %.1f', int(np.count_nonzero(low)), LOG_CLAMP)
        return np.where(low, LOG_CLAMP, values), True
    return values, False


def _transition_total(data):
    total = float(data.counts.sum())
    if total <= 0:
        raise EmptyDatasetError('the dataset contains no transitions')
    return total


def _weighted_log(weights, log_values):
    # 0 * log 0 = 0 for unvisited entries
    return float(np.sum(np.where(weights > 0, weights * log_values, 0.0)))


def data_dynamics_loglik(theta, data):
    """Average dataset log-likelihood E_D[log P^(s'|s, a)] of the internal dynamics."""
    total = _transition_total(data)
    log_dynamics, _ = clamp_log(theta.log_dynamics())
    return _weighted_log(data.counts, log_dynamics) / total


def log_posterior_terms(theta, data, sol=None):
    """
    Components of the normalized log posterior.

    Returns:
        dict: ``policy_loglik`` (E_D[log pi^]), ``dynamics_loglik``
        (E_D[log P^]), ``value`` (their lambda-weighted sum) and ``clamped``.
    """
    total = _transition_total(data)
    sol = sol or solve_policy(theta)
    log_policy, policy_clamped = clamp_log(sol.log_policy)
    log_dynamics, dynamics_clamped = clamp_log(theta.log_dynamics())
    policy_loglik = _weighted_log(data.sa_counts, log_policy) / total
    dynamics_loglik = _weighted_log(data.counts, log_dynamics) / total
    return {
        'policy_loglik': policy_loglik,
        'dynamics_loglik': dynamics_loglik,
        'value': policy_loglik + theta.lam * dynamics_loglik,
        'clamped': policy_clamped or dynamics_clamped,
    }


def log_posterior(theta, data, sol=None):
    """
    L(theta) = (1/NT) sum over dataset transitions of
    log pi^(a|s) + lambda * log P^(s'|s, a).

    Raises:
        EmptyDatasetError: If the dataset has no transitions.
    """
    return log_posterior_terms(theta, data, sol)['value']


def occupancy_matrix(theta, sol):
    """Conditional occupancy matrix N of the learner's MDP under ``sol.policy``."""
    return conditional_occupancy_matrix(theta.as_mdp(), sol.policy)


def _pullback(theta, sol, weights):
    """Gradient of sum weights(s, a) Q(s, a) through N-weighted reward and EV terms."""
    return GradientVector(
        theta.reward_pullback(weights),
        theta.discount * theta.expected_value_pullback(weights, sol.v),
    )


def exact_policy_log_grad(theta, sol, s, a, cond_occ=None):
    """
    Exact gradient of log pi^(a|s; theta) w.r.t. both logit blocks.

    grad log pi^(a|s) = grad Q(s, a) - E_{a~pi^(.|s)} grad Q(s, a~), where
    grad Q(s, a) = sum rho(s~, a~|s, a) [grad R(s~, a~) + gamma grad EV(s~, a~)]
    with V held fixed inside EV.
    """
    n_actions = theta.n_actions
    cond_occ = occupancy_matrix(theta, sol) if cond_occ is None else cond_occ
    start = np.zeros((theta.n_states, n_actions))
    start[s] = -sol.policy[s]
    start[s, a] += 1.0
    weights = (start.ravel() @ cond_occ).reshape(theta.n_states, n_actions)
    return _pullback(theta, sol, weights)


def _contrast_weights(sa_weights, policy):
    """c(s, a) = w(s, a) - pi(a|s) sum_a' w(s, a')."""
    return sa_weights - policy * sa_weights.sum(axis=1, keepdims=True)


def log_posterior_grad(theta, data, sol=None, cond_occ=None):
    """
    Exact gradient of ``log_posterior``, accumulated pair by pair from
    ``exact_policy_log_grad`` plus the prior term.
    """
    total = _transition_total(data)
    sol = sol or solve_policy(theta)
    cond_occ = occupancy_matrix(theta, sol) if cond_occ is None else cond_occ
    gradient = GradientVector.zeros_like(theta)
    for s, a in zip(*np.nonzero(data.sa_counts)):
        pair_grad = exact_policy_log_grad(theta, sol, s, a, cond_occ)
        gradient = gradient + (data.sa_counts[s, a] / total) * pair_grad
    prior = GradientVector(np.zeros_like(theta.reward_logits), theta.log_dynamics_pullback(data.counts) / total)
    return gradient + theta.lam * prior


def energy_table(theta, sol, cond_occ=None):
    """
    E(s, a) = sum rho(s~, a~|s, a) [R(s~, a~) + gamma EV(s~, a~)] for every pair,
    with EV(s, a) = sum P^(s'|s, a) V(s').
    """
    cond_occ = occupancy_matrix(theta, sol) if cond_occ is None else cond_occ
    expected = theta.dynamics() @ sol.v
    target = theta.reward_table() + theta.discount * expected
    return (cond_occ @ target.ravel()).reshape(theta.n_states, theta.n_actions)


def energy(theta, sol, s, a, cond_occ=None):
    """Energy of the single pair (s, a), see ``energy_table``."""
    return float(energy_table(theta, sol, cond_occ)[s, a])


def surrogate_objective(theta, data, sol=None, cond_occ=None):
    """
    E_D[E(s, a)] - E_{s~D, a~pi^}[E(s, a)] + lambda * E_D[log P^(s'|s, a)],
    with the pi^-expectation taken exactly over actions.
    """
    total = _transition_total(data)
    sol = sol or solve_policy(theta)
    contrast = _contrast_weights(data.sa_counts / total, sol.policy)
    energies = energy_table(theta, sol, cond_occ)
    return float(np.sum(contrast * energies)) + theta.lam * data_dynamics_loglik(theta, data)


def surrogate_grad(theta, data, sol=None, cond_occ=None):
    """
    Gradient of ``surrogate_objective`` holding the occupancies, the policy
    and V fixed; it coincides with ``log_posterior_grad``.
    """
    total = _transition_total(data)
    sol = sol or solve_policy(theta)
    cond_occ = occupancy_matrix(theta, sol) if cond_occ is None else cond_occ
    contrast = _contrast_weights(data.sa_counts / total, sol.policy)
    weights = (contrast.ravel() @ cond_occ).reshape(contrast.shape)
    gradient = _pullback(theta, sol, weights)
    prior = GradientVector(np.zeros_like(theta.reward_logits), theta.log_dynamics_pullback(data.counts) / total)
    return gradient + theta.lam * prior


def expected_log_posterior_grad(theta, mdp_true, expert_policy, sol=None):
    """
    Gradient of the log posterior with the empirical average replaced by the
    expert's normalized occupancy d(s, a) and true successors P(s'|s, a).
    """
    sol = sol or solve_policy(theta)
    expert_d = occupancy_measure(mdp_true, expert_policy).d
    cond_occ = occupancy_matrix(theta, sol)
    contrast = _contrast_weights(expert_d, sol.policy)
    weights = (contrast.ravel() @ cond_occ).reshape(contrast.shape)
    transitions = expert_d[:, :, None] * mdp_true.transition
    prior = GradientVector(np.zeros_like(theta.reward_logits), theta.log_dynamics_pullback(transitions))
    return _pullback(theta, sol, weights) + theta.lam * prior


def empirical_dynamics(data, smoothing=1.0):
    """
    Row-wise MLE of the transitions with Laplace smoothing,
    (N(s, a, s') + alpha) / (N(s, a) + n_states * alpha). Unvisited rows are
    uniform when ``smoothing > 0``; with no smoothing they stay uniform too.
    """
    counts = data.counts + smoothing
    row_totals = counts.sum(axis=-1, keepdims=True)
    n_states = data.n_states
    return np.where(row_totals > 0, counts / np.where(row_totals > 0, row_totals, 1.0), 1.0 / n_states)

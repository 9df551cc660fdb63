"""
Numerical certificates for an estimated (reward, dynamics) pair.

Expert quantities come from the exact soft-optimal expert in the true MDP;
``data_estimated_errors`` gives the finite-data counterparts.
"""
import logging
import math

import numpy as np
from scipy.special import rel_entr

from analysis_app.exceptions import InvalidPerturbationError
from analysis_app.models import BOUND_SLACK, BoundReport, DecompositionReport, ModelAdvantageReport
from estimation_app.exceptions import EmptyDatasetError
from estimation_app.models import ThetaParams, logits_from_probs
from estimation_app.objectives import clamp_log, empirical_dynamics, solve_policy
from mdp_app.solver import occupancy_measure, policy_entropy, reward_max

logger = logging.getLogger(__name__)

PERTURBATION_TOL = 1e-9


def dynamics_kl(transition, dynamics):
    """Per-pair KL(P(.|s, a) || P^(.|s, a)) with 0 log 0 = 0."""
    return rel_entr(transition, dynamics).sum(axis=-1)


def _learner_reward(theta):
    return theta.reward_table()


def decompose_likelihood(theta, mdp_true, expert_policy, sol=None):
    """
    Evaluate both sides of the discounted-likelihood decomposition.

    Args:
        theta (ThetaParams): Learner parameters.
        mdp_true (TabularMdp): True environment.
        expert_policy (ndarray): [n_states, n_actions] expert policy.
        sol (SoftSolution, optional): ``solve_policy(theta)``.

    Returns:
        DecompositionReport
    """
    sol = sol or solve_policy(theta)
    expert = occupancy_measure(mdp_true, expert_policy)
    log_policy, _ = clamp_log(sol.log_policy)
    reward = _learner_reward(theta)

    discounted_loglik = float(np.sum(np.where(expert.rho > 0, expert.rho * log_policy, 0.0)))
    ell_theta = float(np.sum(expert.rho * reward) - mdp_true.init_dist @ sol.v)
    value_gap = theta.dynamics() @ sol.v - mdp_true.transition @ sol.v
    t1 = float(theta.discount * np.sum(expert.rho * value_gap))
    epsilon_kl = float(np.sum(expert.d * dynamics_kl(mdp_true.transition, theta.dynamics())))

    return DecompositionReport(
        discounted_loglik=discounted_loglik,
        ell_theta=ell_theta,
        t1=t1,
        residual=abs(discounted_loglik - (ell_theta + t1)),
        epsilon_kl=epsilon_kl,
    )


def t1_bound_value(gamma, r_max, epsilon):
    """gamma * R_max / (1 - gamma)^2 * sqrt(2 epsilon)."""
    return gamma * r_max / (1.0 - gamma) ** 2 * math.sqrt(2.0 * max(epsilon, 0.0))


def t1_bound(theta, mdp_true, expert_policy, report=None):
    """
    Upper bound on |T1| from Pinsker's inequality and the value bound
    |V| <= R_max / (1 - gamma), with R_max taken from the learner's reward.
    """
    if report is None:
        report = decompose_likelihood(theta, mdp_true, expert_policy)
    r_max = reward_max(_learner_reward(theta), theta.n_actions)
    return t1_bound_value(theta.discount, r_max, report.epsilon_kl)


def performance_bound_value(eps_policy, eps_dynamics, density_ratio, r_max, gamma):
    """
    eps_policy / (1 - gamma) + gamma (C + 1) R_max / (1 - gamma)^2 sqrt(2 eps_dynamics).

    The dynamics term is zero whenever ``eps_dynamics`` is, even for C = inf.
    """
    bound = eps_policy / (1.0 - gamma)
    if eps_dynamics > 0:
        bound += gamma * (density_ratio + 1.0) * r_max / (1.0 - gamma) ** 2 * math.sqrt(2.0 * eps_dynamics)
    return bound


def density_ratio(learner_d, expert_d):
    """
    max d_learner / d_expert over the learner's support; inf when the learner
    visits a pair the expert never does.
    """
    support = learner_d > 0
    if np.any(support & (expert_d <= 0)):
        return math.inf
    if not np.any(support):
        return 0.0
    return float(np.max(learner_d[support] / expert_d[support]))


def performance_bound(theta, mdp_true, expert_policy, sol=None):
    """
    Certify |J_P(pi^) - J_P(pi)| against the performance bound.

    Both returns are entropy-inclusive and use the learner's reward R_theta in
    the true dynamics, the setting in which pi^ is the soft-optimal response
    the bound is stated for.

    Returns:
        BoundReport
    """
    sol = sol or solve_policy(theta)
    expert = occupancy_measure(mdp_true, expert_policy)
    learner = occupancy_measure(mdp_true, sol.policy)
    reward = _learner_reward(theta)
    log_policy, _ = clamp_log(sol.log_policy)

    eps_policy = float(-np.sum(np.where(expert.d > 0, expert.d * log_policy, 0.0)))
    eps_dynamics = float(np.sum(expert.d * dynamics_kl(mdp_true.transition, theta.dynamics())))
    ratio = density_ratio(learner.d, expert.d)
    r_max = reward_max(reward, theta.n_actions)
    gamma = theta.discount

    bound = performance_bound_value(eps_policy, eps_dynamics, ratio, r_max, gamma)
    learner_return = np.sum(learner.rho * (reward + policy_entropy(sol.policy)[:, None]))
    expert_return = np.sum(expert.rho * (reward + policy_entropy(np.asarray(expert_policy))[:, None]))
    observed_gap = float(abs(learner_return - expert_return))

    vacuous = math.isinf(bound)
    if vacuous:
        logger.warning('density ratio is unbounded; performance bound is vacuous')
    return BoundReport(
        eps_policy=eps_policy,
        eps_dynamics=eps_dynamics,
        density_ratio_c=ratio,
        r_max=r_max,
        gamma=gamma,
        bound=bound,
        observed_gap=observed_gap,
        holds=vacuous or observed_gap <= bound + BOUND_SLACK,
        vacuous=vacuous,
    )


def model_advantage_decomposition(theta, mdp_true, expert_policy, sol=None):
    """
    Check the identity behind the performance bound:

    sum rho_pi log pi^ = [sum rho_pi R - sum rho_pi^ (R + H(pi^))]
                         + gamma sum rho_pi^ (P - P^) V^ + gamma sum rho_pi (P^ - P) V^

    with both occupancies taken in the true dynamics.
    """
    sol = sol or solve_policy(theta)
    expert = occupancy_measure(mdp_true, expert_policy)
    learner = occupancy_measure(mdp_true, sol.policy)
    reward = _learner_reward(theta)
    log_policy, _ = clamp_log(sol.log_policy)
    value_gap = mdp_true.transition @ sol.v - theta.dynamics() @ sol.v
    gamma = theta.discount

    policy_loglik = float(np.sum(np.where(expert.rho > 0, expert.rho * log_policy, 0.0)))
    performance_difference = float(
        np.sum(expert.rho * reward)
        - np.sum(learner.rho * (reward + policy_entropy(sol.policy)[:, None]))
    )
    learner_model_term = float(gamma * np.sum(learner.rho * value_gap))
    expert_model_term = float(-gamma * np.sum(expert.rho * value_gap))
    total = performance_difference + learner_model_term + expert_model_term
    return ModelAdvantageReport(
        policy_loglik=policy_loglik,
        performance_difference=performance_difference,
        learner_model_term=learner_model_term,
        expert_model_term=expert_model_term,
        residual=abs(policy_loglik - total),
    )


def data_estimated_errors(theta, data, sol=None, smoothing=0.0):
    """
    Finite-data estimates of the policy and dynamics errors: the negative
    average log-likelihood of dataset actions, and the visit-weighted
    KL(P_data || P^) with P_data the (optionally smoothed) empirical rows.
    """
    total = float(data.counts.sum())
    if total <= 0:
        raise EmptyDatasetError('the dataset contains no transitions')
    sol = sol or solve_policy(theta)
    log_policy, _ = clamp_log(sol.log_policy)
    sa_weights = data.sa_counts / total
    eps_policy = float(-np.sum(np.where(sa_weights > 0, sa_weights * log_policy, 0.0)))
    frequencies = empirical_dynamics(data, smoothing)
    eps_dynamics = float(np.sum(sa_weights * dynamics_kl(frequencies, theta.dynamics())))
    return {'eps_policy': eps_policy, 'eps_dynamics': eps_dynamics}


def unidentifiability_witness(theta, perturbation, sol=None):
    """
    Build parameters with different (R, P^) but the same soft-optimal solution.

    With P^' = P^ + dP and R' = R - gamma * dP V, the backup R' + gamma P^' V
    equals R + gamma P^ V, so Q, V and pi^ are unchanged. The returned
    parameters store R' as a raw reward table.

    Args:
        theta (ThetaParams): Original parameters.
        perturbation (ndarray): [n_states, n_actions, n_states] rows summing to 0.
        sol (SoftSolution, optional): ``solve_policy(theta)``.

    Returns:
        tuple: ``(theta_prime, policy_distance)`` with the sup-norm distance
        between the two re-solved policies.

    Raises:
        InvalidPerturbationError: If P^ + dP leaves the simplex.
    """
    perturbation = np.asarray(perturbation, dtype=float)
    dynamics = theta.dynamics()
    if perturbation.shape != dynamics.shape:
        raise InvalidPerturbationError(f'perturbation must have shape {dynamics.shape}')
    if np.max(np.abs(perturbation.sum(axis=-1))) > PERTURBATION_TOL:
        raise InvalidPerturbationError('perturbation rows must sum to zero')
    perturbed = dynamics + perturbation
    if np.any(perturbed < -PERTURBATION_TOL):
        raise InvalidPerturbationError('perturbed dynamics have negative entries')

    sol = sol or solve_policy(theta)
    reward = theta.reward_table() - theta.discount * (perturbation @ sol.v)
    witness = ThetaParams(
        reward_logits=reward,
        dynamics_logits=logits_from_probs(np.clip(perturbed, 0.0, None)),
        lam=theta.lam,
        discount=theta.discount,
        init_dist=theta.init_dist,
    )
    witness_sol = solve_policy(witness)
    distance = float(np.max(np.abs(witness_sol.policy - sol.policy)))
    return witness, distance


def shift_mass_perturbation(dynamics, state, action, fraction=0.1):
    """
    Perturbation moving ``fraction`` of the most likely successor's mass in row
    (state, action) evenly onto the other successors.
    """
    dynamics = np.asarray(dynamics, dtype=float)
    perturbation = np.zeros_like(dynamics)
    row = dynamics[state, action]
    target = int(np.argmax(row))
    moved = fraction * row[target]
    others = row.shape[0] - 1
    if others == 0:
        return perturbation
    perturbation[state, action] = moved / others
    perturbation[state, action, target] = -moved
    return perturbation

"""
Exact tabular planning: soft value iteration, occupancy measures and returns.

All functions are pure; they read their arguments and allocate fresh arrays,
so they may be called from several threads at once.
"""
import logging
import math

import numpy as np
import scipy.linalg
from scipy.special import entr, logsumexp

from mdp_app.exceptions import InvalidMdpError, OccupancySolveError, SolverDidNotConverge
from mdp_app.models import OccupancyMeasure, SoftSolution

logger = logging.getLogger(__name__)

SOLVER_TOL = 1e-10
SOLVER_MAX_ITER = 100_000
OCCUPANCY_TOL = 1e-10
DENSE_SOLVE_LIMIT = 10_000
TRUNCATION_TOL = 1e-9
POLICY_TOL = 1e-9


def soft_bellman_backup(mdp, v):
    """
    One soft Bellman backup.

    Args:
        mdp (TabularMdp): Planning model.
        v (ndarray): [n_states] current value estimate.

    Returns:
        tuple: ``(q, v_next)`` with ``q = R + gamma * P v`` and
        ``v_next = logsumexp_a q``.
    """
    q = mdp.reward + mdp.discount * np.einsum('sat,t->sa', mdp.transition, v)
    return q, logsumexp(q, axis=1)


def solution_from_values(mdp, v, iterations=0):
    """
    Build a SoftSolution from a value vector, one backup away from ``v``.
    """
    q, v_next = soft_bellman_backup(mdp, v)
    policy = np.exp(q - v_next[:, None])
    backup = mdp.reward + mdp.discount * np.einsum('sat,t->sa', mdp.transition, v_next)
    residual = float(np.max(np.abs(q - backup)))
    return SoftSolution(q=q, v=v_next, policy=policy, bellman_residual=residual, iterations=iterations)


def soft_value_iteration(mdp, tol=SOLVER_TOL, max_iter=SOLVER_MAX_ITER, init_v=None):
    """
    Solve the entropy-regularized control problem by soft value iteration.

    Iterates ``V <- logsumexp_a(R + gamma * P V)`` until the sup-norm change
    of V drops to ``tol``.

    Args:
        mdp (TabularMdp): Planning model.
        tol (float): Sup-norm tolerance on successive value iterates.
        max_iter (int): Sweep budget.
        init_v (ndarray, optional): Warm start, zeros by default.

    Returns:
        SoftSolution: Q, V, policy and the Bellman residual of the result.

    Raises:
        SolverDidNotConverge: If the budget is exhausted first.
    """
    if tol <= 0:
        raise ValueError('tol must be positive')
    if max_iter < 1:
        raise ValueError('max_iter must be at least 1')

    v = np.zeros(mdp.n_states) if init_v is None else np.array(init_v, dtype=float)
    delta = math.inf
    for iteration in range(1, max_iter + 1):
        _, v_next = soft_bellman_backup(mdp, v)
        delta = float(np.max(np.abs(v_next - v)))
        v = v_next
        if delta <= tol:
            break
    else:
        raise SolverDidNotConverge(delta, max_iter)

    solution = solution_from_values(mdp, v, iterations=iteration)
    logger.debug('soft VI converged in %d sweeps, residual %.3e', iteration, solution.bellman_residual)
    return solution


def soft_bellman_sweeps(mdp, v0, n_sweeps):
    """
    Exactly ``n_sweeps`` backups from a warm start, without a convergence test.

    Used for the two-timescale inner loop where the planner only tracks the
    moving reward and dynamics.
    """
    v = np.array(v0, dtype=float)
    for _ in range(n_sweeps):
        _, v = soft_bellman_backup(mdp, v)
    return solution_from_values(mdp, v, iterations=n_sweeps)


def check_policy(policy, n_states, n_actions):
    policy = np.asarray(policy, dtype=float)
    if policy.shape != (n_states, n_actions):
        raise InvalidMdpError('policy', f'expected shape ({n_states}, {n_actions})')
    if np.any(policy < -POLICY_TOL) or np.max(np.abs(policy.sum(axis=1) - 1.0)) > POLICY_TOL:
        raise InvalidMdpError('policy', 'rows must be probability distributions')
    return policy


def policy_entropy(policy):
    """Per-state entropy H(pi(.|s)) with 0 log 0 = 0."""
    return entr(policy).sum(axis=1)


def policy_state_transition(mdp, policy):
    """State-to-state kernel P_pi(s'|s) = sum_a pi(a|s) P(s'|s, a)."""
    return np.einsum('sa,sat->st', policy, mdp.transition)


def state_action_transition(mdp, policy):
    """
    State-action kernel T[(s, a), (s', a')] = P(s'|s, a) pi(a'|s'), flattened
    row-major to [n_states * n_actions, n_states * n_actions].
    """
    size = mdp.n_states * mdp.n_actions
    kernel = mdp.transition[:, :, :, None] * policy[None, None, :, :]
    return kernel.reshape(size, size)


def _solve_state_flow(mdp, policy, source, tol):
    """Solve x = source + gamma * P_pi^T x for the discounted state visitation."""
    kernel = policy_state_transition(mdp, policy)
    gamma = mdp.discount
    if mdp.n_states * mdp.n_actions <= DENSE_SOLVE_LIMIT:
        system = np.eye(mdp.n_states) - gamma * kernel.T
        try:
            return scipy.linalg.solve(system, source)
        except (scipy.linalg.LinAlgError, ValueError) as exc:
            raise OccupancySolveError(math.inf, f'dense occupancy solve failed: {exc}') from exc

    x = np.array(source, dtype=float)
    term = np.array(source, dtype=float)
    max_terms = truncation_horizon(gamma, tol=tol * (1 - gamma)) + 1
    for _ in range(max_terms):
        term = gamma * kernel.T @ term
        x += term
        if np.max(np.abs(term)) <= tol * (1 - gamma):
            break
    return x


def _flow_residual(mdp, policy, rho, source_sa):
    inflow = np.einsum('sat,sa->t', mdp.transition, rho)
    return float(np.max(np.abs(rho - source_sa - policy * (mdp.discount * inflow)[:, None])))


def _finish(mdp, policy, rho, source_sa, tol):
    residual = _flow_residual(mdp, policy, rho, source_sa)
    if not np.isfinite(residual) or residual > tol * max(1.0, float(np.max(np.abs(rho)))):
        raise OccupancySolveError(residual)
    return OccupancyMeasure(rho=rho, d=(1.0 - mdp.discount) * rho, residual=residual)


def occupancy_measure(mdp, policy, tol=OCCUPANCY_TOL):
    """
    Discounted state-action occupancy of ``policy`` started from ``mu``.

    Solves rho(s, a) = pi(a|s) [mu(s) + gamma * sum P(s|s~, a~) rho(s~, a~)].

    Returns:
        OccupancyMeasure: ``rho`` with mass 1/(1-gamma) and ``d = (1-gamma) rho``.

    Raises:
        OccupancySolveError: If the flow residual exceeds ``tol``.
    """
    policy = check_policy(policy, mdp.n_states, mdp.n_actions)
    visits = _solve_state_flow(mdp, policy, mdp.init_dist, tol)
    rho = policy * visits[:, None]
    return _finish(mdp, policy, rho, policy * mdp.init_dist[:, None], tol)


def conditional_occupancy(mdp, policy, s0, a0, tol=OCCUPANCY_TOL):
    """
    Discounted occupancy rho(., .|s0, a0) of trajectories forced to start
    with state ``s0`` and action ``a0``, then following ``policy``.
    """
    policy = check_policy(policy, mdp.n_states, mdp.n_actions)
    if not (0 <= s0 < mdp.n_states and 0 <= a0 < mdp.n_actions):
        raise InvalidMdpError('start', f'({s0}, {a0}) out of range')
    visits = _solve_state_flow(mdp, policy, mdp.discount * mdp.transition[s0, a0], tol)
    rho = policy * visits[:, None]
    rho[s0, a0] += 1.0
    point_mass = np.zeros_like(rho)
    point_mass[s0, a0] = 1.0
    return _finish(mdp, policy, rho, point_mass, tol)


def conditional_occupancy_matrix(mdp, policy):
    """
    All conditional occupancies at once.

    Returns:
        ndarray: [n_states * n_actions, n_states * n_actions] matrix ``N`` with
        ``N[i, j] = rho(pair j | start pair i)``, i.e. ``(I - gamma T)^-1``.
    """
    policy = check_policy(policy, mdp.n_states, mdp.n_actions)
    size = mdp.n_states * mdp.n_actions
    if size > DENSE_SOLVE_LIMIT:
        raise OccupancySolveError(math.inf, f'{size} state-action pairs exceed the dense limit')
    system = np.eye(size) - mdp.discount * state_action_transition(mdp, policy)
    return scipy.linalg.solve(system, np.eye(size))


def occupancy_by_power_series(mdp, policy, horizon):
    """
    Truncated brute-force occupancy: sum over t <= horizon of gamma^t P(s_t, a_t).
    """
    policy = check_policy(policy, mdp.n_states, mdp.n_actions)
    marginal = policy * mdp.init_dist[:, None]
    rho = marginal.copy()
    weight = 1.0
    for _ in range(horizon):
        states = np.einsum('sa,sat->t', marginal, mdp.transition)
        marginal = policy * states[:, None]
        weight *= mdp.discount
        rho += weight * marginal
    return rho


def truncation_horizon(gamma, mode='tolerance', tol=TRUNCATION_TOL):
    """
    Horizon at which an infinite discounted sum is cut.

    ``'tolerance'`` gives ceil(ln(tol) / ln(gamma)), the geometric tail bound
    used across the workbench; ``'effective'`` gives int(1 / (1 - gamma)).
    """
    if mode == 'tolerance':
        return int(math.ceil(math.log(tol) / math.log(gamma)))
    if mode == 'effective':
        return int(1.0 / (1.0 - gamma))
    raise ValueError(f'unknown truncation mode {mode!r}')


def discounted_return(mdp, policy, occupancy=None):
    """
    Entropy-inclusive return J_P(pi) = sum rho(s, a) [R(s, a) + H(pi(.|s))].
    """
    occupancy = occupancy or occupancy_measure(mdp, policy)
    entropy = policy_entropy(np.asarray(policy, dtype=float))
    return float(np.sum(occupancy.rho * (mdp.reward + entropy[:, None])))


def reward_only_return(mdp, policy, occupancy=None):
    """Return without the entropy bonus, sum rho(s, a) R(s, a)."""
    occupancy = occupancy or occupancy_measure(mdp, policy)
    return float(np.sum(occupancy.rho * mdp.reward))


def reward_max(reward, n_actions):
    """R_max = max |R| + ln |A|."""
    return float(np.max(np.abs(reward)) + math.log(n_actions))


def value_bound(mdp):
    """Sup-norm bound R_max / (1 - gamma) on the soft-optimal value."""
    return reward_max(mdp.reward, mdp.n_actions) / (1.0 - mdp.discount)

"""
BM-IRL, RM-IRL and two-stage training loops.

Every outer iteration re-solves the learner's policy, takes one ascent step on
the reward logits and (except for the two-stage baseline) a fixed number of
ascent steps on the dynamics logits. The ``exact`` backend evaluates the
branch expectations with occupancy solves; the ``sampled`` backend replaces
them by rollouts in the estimated dynamics and REINFORCE estimates.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from estimation_app.exceptions import EmptyDatasetError, InvalidConfigError, TrainingDiverged
from estimation_app.models import ThetaParams, TrainingRecord, logits_from_probs
from estimation_app.objectives import (
    empirical_dynamics,
    log_posterior_terms,
    occupancy_matrix,
    solve_policy,
    surrogate_objective,
)
from gridworld_app.metrics import expected_illegal_rate
from mdp_app.models import SoftSolution
from mdp_app.solver import discounted_return, soft_bellman_sweeps, soft_value_iteration
from sampling_app.models import RolloutBatch
from sampling_app.rollouts import (
    branch_rollouts,
    discounted_reward_grad,
    discounted_visit_weights,
    exact_branch_weights,
    reinforce_dynamics_grad,
    sample_indices,
)

logger = logging.getLogger(__name__)

START_STREAM = 101
REAL_STREAM = 102
FAKE_STREAM = 103


class DivergenceDetector:
    """
    Aborts training when the log posterior is non-finite, or when it has
    strictly decreased for ``patience`` consecutive iterations. A positive
    ``drop`` additionally requires a total fall above ``drop * max(1, |L|)``.
    """

    def __init__(self, patience, drop):
        self.patience = patience
        self.drop = drop
        self.previous = None
        self.streak = 0
        self.streak_start = None

    def update(self, iteration, value):
        if not math.isfinite(value):
            raise TrainingDiverged(iteration, f'log posterior is {value}')
        if self.previous is not None and value < self.previous:
            if self.streak == 0:
                self.streak_start = self.previous
            self.streak += 1
        else:
            self.streak = 0
        self.previous = value

        if self.streak >= self.patience:
            fall = self.streak_start - value
            if fall > self.drop * max(1.0, abs(self.streak_start)):
                raise TrainingDiverged(
                    iteration,
                    f'log posterior decreased for {self.streak} consecutive iterations (total {fall:.3e})',
                )


@dataclass(frozen=True, eq=False)
class IterationContext:
    """Quantities held fixed during one outer iteration."""
    iteration: int
    sol: SoftSolution
    cond_occ: np.ndarray
    contrast: np.ndarray
    branch_weights: np.ndarray = None


class BaseTrainer:
    """
    Shared two-timescale loop. Subclasses provide ``reward_gradient`` and
    ``dynamics_gradient`` for their objectives.

    Args:
        mdp_true (TabularMdp): Environment the expert acted in; supplies the
            known discount and initial distribution and the evaluation metrics.
        data (Dataset): Expert demonstrations.
        cfg (TrainConfig): Hyperparameters; ``cfg.variant`` must match the trainer.
        spec (GridworldSpec, optional): Enables the illegal-rate column.
        expert_policy (ndarray, optional): Expert policy; solved from ``mdp_true`` if omitted.
    """
    variant = None
    updates_dynamics = True

    def __init__(self, mdp_true, data, cfg, spec=None, expert_policy=None):
        if cfg.variant != self.variant:
            raise InvalidConfigError('variant', f'expected {self.variant!r}, got {cfg.variant!r}')
        if data.counts.shape != mdp_true.transition.shape:
            raise InvalidConfigError('data', 'dataset does not match the MDP dimensions')
        self.total = float(data.counts.sum())
        if self.total <= 0:
            raise EmptyDatasetError('training needs at least one transition')

        self.mdp_true = mdp_true
        self.data = data
        self.cfg = cfg
        self.spec = spec
        if expert_policy is None:
            expert_policy = soft_value_iteration(mdp_true, tol=cfg.solver_tol).policy
        self.expert_return = discounted_return(mdp_true, expert_policy)
        self.eval_horizon = max((len(t) for t in data.trajectories), default=0) or cfg.rollout_steps
        self.states, self.actions, _ = data.transition_arrays()
        self.mle_summary = None

    # parameters

    def initial_theta(self):
        """Warm start: smoothed MLE dynamics logits and zero reward logits."""
        n_states, n_actions = self.mdp_true.n_states, self.mdp_true.n_actions
        shape = (n_states,) if self.cfg.reward_mode == 'state' else (n_states, n_actions)
        return ThetaParams(
            reward_logits=np.zeros(shape),
            dynamics_logits=logits_from_probs(empirical_dynamics(self.data, self.cfg.smoothing)),
            lam=self.cfg.lambda_effective,
            discount=self.mdp_true.discount,
            init_dist=self.mdp_true.init_dist,
            max_reward=self.cfg.max_reward,
        )

    def inner_solve(self, theta, previous):
        sweeps = self.cfg.partial_inner_sweeps
        if sweeps and previous is not None:
            return soft_bellman_sweeps(theta.as_mdp(), previous.v, sweeps)
        init_v = previous.v if previous is not None else None
        return solve_policy(theta, tol=self.cfg.solver_tol, init_v=init_v)

    def context(self, iteration, theta, sol):
        cond_occ = occupancy_matrix(theta, sol)
        sa_weights = self.data.sa_counts / self.total
        contrast = sa_weights - sol.policy * sa_weights.sum(axis=1, keepdims=True)
        return IterationContext(iteration=iteration, sol=sol, cond_occ=cond_occ, contrast=contrast)

    def loglik_grad(self, theta):
        return theta.log_dynamics_pullback(self.data.counts) / self.total

    def reward_gradient(self, theta, context):
        raise NotImplementedError

    def dynamics_gradient(self, theta, context, step):
        raise NotImplementedError

    # branches

    def sample_starts(self, context, step):
        index = sample_indices((self.cfg.seed, START_STREAM, context.iteration, step), len(self.states), self.cfg.rollout_batch)
        return self.states[index], self.actions[index]

    def rollout(self, theta, context, starts, stream, step, steps=None):
        return branch_rollouts(
            theta, context.sol, starts, steps or self.cfg.rollout_steps, self.cfg.seed,
            stream=(stream, context.iteration, step),
        )

    # evaluation

    def evaluate(self, theta, context, reward_norm, dynamics_norm):
        terms = log_posterior_terms(theta, self.data, context.sol)
        illegal_rate = float('nan')
        if self.spec is not None:
            illegal_rate = expected_illegal_rate(
                self.spec, theta.dynamics(), context.sol.policy, self.mdp_true.init_dist, self.eval_horizon,
            )
        learner_return = discounted_return(self.mdp_true, context.sol.policy)
        return {
            'iter': context.iteration,
            'log_posterior': terms['value'],
            'surrogate': surrogate_objective(theta, self.data, context.sol, context.cond_occ),
            'reward_grad_norm': reward_norm,
            'dyn_grad_norm': dynamics_norm,
            'data_dyn_loglik': terms['dynamics_loglik'],
            'illegal_rate': illegal_rate,
            'expert_gap': abs(learner_return - self.expert_return),
        }

    def run(self):
        """
        Execute ``cfg.outer_iters`` outer iterations.

        Returns:
            TrainingRecord: One row per iteration plus a final row for the
            returned parameters, and snapshots every ``cfg.snapshot_every``
            iterations.

        Raises:
            TrainingDiverged: When the divergence detector fires or a gradient
                is non-finite.
            SolverDidNotConverge: When the inner problem cannot be solved.
        """
        cfg = self.cfg
        theta = self.initial_theta()
        record = TrainingRecord(
            variant=self.variant, lambda_effective=cfg.lambda_effective, mle_summary=self.mle_summary,
        )
        detector = DivergenceDetector(cfg.divergence_patience, cfg.divergence_drop)
        logger.info(
            '%s training: %d outer iterations, lambda %.4g, %s backend',
            self.variant, cfg.outer_iters, cfg.lambda_effective, cfg.gradient_backend,
        )

        sol = None
        for iteration in range(cfg.outer_iters + 1):
            sol = self.inner_solve(theta, sol)
            context = self.context(iteration, theta, sol)
            reward_norm = dynamics_norm = float('nan')
            next_theta = theta

            if iteration < cfg.outer_iters:
                reward_grad = self.reward_gradient(theta, context) - cfg.reward_l2 * theta.reward_logits
                if not np.all(np.isfinite(reward_grad)):
                    raise TrainingDiverged(iteration, 'non-finite reward gradient')
                reward_norm = float(np.linalg.norm(reward_grad))
                next_theta = theta.replace(reward_logits=theta.reward_logits + cfg.reward_lr * reward_grad)

                steps = cfg.dynamics_steps_per_outer if self.updates_dynamics else 0
                for step in range(steps):
                    dynamics_grad = self.dynamics_gradient(next_theta, context, step)
                    if not np.all(np.isfinite(dynamics_grad)):
                        raise TrainingDiverged(iteration, 'non-finite dynamics gradient')
                    if step == 0:
                        dynamics_norm = float(np.linalg.norm(dynamics_grad))
                    next_theta = next_theta.replace(
                        dynamics_logits=next_theta.dynamics_logits + cfg.dynamics_lr * dynamics_grad,
                    )

            row = self.evaluate(theta, context, reward_norm, dynamics_norm)
            record.rows.append(row)
            detector.update(iteration, row['log_posterior'])

            if iteration % cfg.snapshot_every == 0 or iteration == cfg.outer_iters:
                record.snapshots.append({'iter': iteration, 'theta': theta.as_dict()})
                logger.info(
                    '%s iter %d: log posterior %.6f, data dynamics loglik %.6f, expert gap %.4g',
                    self.variant, iteration, row['log_posterior'], row['data_dyn_loglik'], row['expert_gap'],
                )
            theta = next_theta

        record.theta = theta
        return record


class BmIrlTrainer(BaseTrainer):
    """
    Bayesian model-based IRL.

    Reward step: ascend E_real[sum gamma^t R] - E_fake[sum gamma^t R] over
    branches started at dataset pairs (real) or at dataset states with a
    learner action (fake). Dynamics step: lambda1 times the same contrast of
    gamma * EV plus lambda2 times the data log-likelihood.
    """
    variant = 'bm_irl'

    def context(self, iteration, theta, sol):
        context = super().context(iteration, theta, sol)
        weights = (context.contrast.ravel() @ context.cond_occ).reshape(context.contrast.shape)
        return IterationContext(
            iteration=iteration, sol=sol, cond_occ=context.cond_occ, contrast=context.contrast,
            branch_weights=weights,
        )

    def branches(self, theta, context, step):
        states, actions = self.sample_starts(context, step)
        real = self.rollout(theta, context, list(zip(states.tolist(), actions.tolist())), REAL_STREAM, step)
        fake = self.rollout(theta, context, [(s, None) for s in states.tolist()], FAKE_STREAM, step)
        return real, fake

    def reward_gradient(self, theta, context):
        if self.cfg.gradient_backend == 'exact':
            return theta.reward_pullback(context.branch_weights)
        real, fake = self.branches(theta, context, 0)
        return discounted_reward_grad(theta, real).d_reward - discounted_reward_grad(theta, fake).d_reward

    def dynamics_gradient(self, theta, context, step):
        cfg = self.cfg
        if cfg.gradient_backend == 'exact':
            value_grad = theta.expected_value_pullback(context.branch_weights, context.sol.v)
        else:
            real, fake = self.branches(theta, context, step + 1)
            normalize = cfg.normalize_advantages
            value_grad = (
                reinforce_dynamics_grad(theta, context.sol, real, normalize=normalize).d_dynamics
                - reinforce_dynamics_grad(theta, context.sol, fake, normalize=normalize).d_dynamics
            )
        return cfg.lambda1 * theta.discount * value_grad + cfg.lambda2 * self.loglik_grad(theta)


class TwoStageTrainer(BmIrlTrainer):
    """
    Dynamics fixed at the smoothed MLE, reward trained with the BM-IRL rule.
    """
    variant = 'two_stage'
    updates_dynamics = False

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.mle_summary = mle_summary(self.data, self.cfg.smoothing)


class RmIrlTrainer(BaseTrainer):
    """
    Robust model-based IRL.

    Real branches are dataset segments, never re-simulated; fake branches
    start at each segment's first state and follow the learner in P^. The
    dynamics are trained to lower the learner's value along fake branches
    while fitting the data: -lambda1 * gamma * EV_fake + lambda2 * loglik.
    """
    variant = 'rm_irl'

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.segments = dataset_segments(self.data, self.cfg.rollout_steps, self.mdp_true.discount)
        self.segment_starts = [(s, None) for s in self.segments.states[:, 0].tolist()]
        self.real_weights = discounted_visit_weights(self.segments, self.mdp_true.n_states, self.mdp_true.n_actions)

    def context(self, iteration, theta, sol):
        context = super().context(iteration, theta, sol)
        if self.cfg.gradient_backend != 'exact':
            return context
        fake_weights = exact_branch_weights(theta, sol, self.segment_starts, self.segments.steps)
        return IterationContext(
            iteration=iteration, sol=sol, cond_occ=context.cond_occ, contrast=context.contrast,
            branch_weights=fake_weights,
        )

    def sampled_branches(self, theta, context, step):
        index = sample_indices((self.cfg.seed, START_STREAM, context.iteration, step), self.segments.size, self.cfg.rollout_batch)
        real = RolloutBatch(
            states=self.segments.states[index], actions=self.segments.actions[index],
            origin='expert', discount=self.segments.discount,
        )
        starts = [(s, None) for s in real.states[:, 0].tolist()]
        fake = self.rollout(theta, context, starts, FAKE_STREAM, step, steps=self.segments.steps)
        return real, fake

    def reward_gradient(self, theta, context):
        if self.cfg.gradient_backend == 'exact':
            return theta.reward_pullback(self.real_weights - context.branch_weights)
        real, fake = self.sampled_branches(theta, context, 0)
        return discounted_reward_grad(theta, real).d_reward - discounted_reward_grad(theta, fake).d_reward

    def dynamics_gradient(self, theta, context, step):
        cfg = self.cfg
        if cfg.gradient_backend == 'exact':
            value_grad = theta.expected_value_pullback(context.branch_weights, context.sol.v)
        else:
            _, fake = self.sampled_branches(theta, context, step + 1)
            value_grad = reinforce_dynamics_grad(
                theta, context.sol, fake, normalize=cfg.normalize_advantages,
            ).d_dynamics
        return -cfg.lambda1 * theta.discount * value_grad + cfg.lambda2 * self.loglik_grad(theta)


def dataset_segments(data, steps, discount):
    """
    Every contiguous window of ``min(steps, shortest trajectory)`` transitions
    in the dataset, as a RolloutBatch of origin ``'expert'``.
    """
    lengths = [len(t) for t in data.trajectories if len(t)]
    if not lengths:
        raise EmptyDatasetError('the dataset contains no transitions')
    window = min(steps, min(lengths))
    states, actions = [], []
    for trajectory in data.trajectories:
        for start in range(len(trajectory) - window + 1 if len(trajectory) else 0):
            states.append(trajectory.states[start:start + window + 1])
            actions.append(trajectory.actions[start:start + window])
    return RolloutBatch(states=np.array(states), actions=np.array(actions), origin='expert', discount=discount)


def mle_summary(data, smoothing):
    """Phase-1 statistics of the two-stage baseline."""
    smoothed = empirical_dynamics(data, smoothing)
    visited = data.sa_counts > 0
    raw = data.counts[visited] / data.sa_counts[visited][:, None]
    distances = 0.5 * np.abs(smoothed[visited] - raw).sum(axis=-1)
    return {
        'smoothing': smoothing,
        'visited_pairs': int(np.count_nonzero(visited)),
        'unvisited_pairs': int(np.count_nonzero(~visited)),
        'max_tv_to_empirical': float(distances.max()) if distances.size else 0.0,
    }


def bm_irl_train(mdp_true, data, cfg, spec=None, expert_policy=None):
    """Train with BM-IRL; see ``BmIrlTrainer``."""
    return BmIrlTrainer(mdp_true, data, cfg, spec=spec, expert_policy=expert_policy).run()


def rm_irl_train(mdp_true, data, cfg, spec=None, expert_policy=None):
    """Train with RM-IRL; see ``RmIrlTrainer``."""
    return RmIrlTrainer(mdp_true, data, cfg, spec=spec, expert_policy=expert_policy).run()


def two_stage_train(mdp_true, data, cfg, spec=None, expert_policy=None):
    """Train the two-stage baseline; see ``TwoStageTrainer``."""
    return TwoStageTrainer(mdp_true, data, cfg, spec=spec, expert_policy=expert_policy).run()


TRAINERS = {
    'bm_irl': bm_irl_train,
    'rm_irl': rm_irl_train,
    'two_stage': two_stage_train,
}

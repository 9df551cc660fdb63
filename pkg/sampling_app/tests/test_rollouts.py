import math

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from estimation_app.models import ThetaParams
from estimation_app.objectives import solve_policy
from gridworld_app.builder import build_gridworld
from gridworld_app.models import GridworldSpec
from mdp_app.models import SoftSolution
from mdp_app.tests.factories import random_mdp
from sampling_app.exceptions import BatchTooSmallError
from sampling_app.rollouts import (
    branch_rollouts,
    discounted_reward_grad,
    discounted_visit_weights,
    exact_branch_dynamics_grad,
    exact_branch_weights,
    reinforce_dynamics_grad,
    sample_categorical,
    stream_uniforms,
)


def within_stderr(samples, expected, factor=4.5):
    """True when the sample mean lies within ``factor`` standard errors of ``expected``."""
    mean = samples.mean(axis=0)
    stderr = samples.std(axis=0) / math.sqrt(samples.shape[0])
    return bool(np.all(np.abs(mean - expected) <= factor * stderr + 1e-12))


class StreamTests(SimpleTestCase):

    def test_rows_are_independent_of_batch_size(self):
        """
        Test that row i of a stream is the same whatever the batch size.
        """
        small = stream_uniforms((3, 1), 2, 5)
        large = stream_uniforms((3, 1), 10, 5)
        assert_array_equal(small, large[:2])
        self.assertFalse(np.array_equal(stream_uniforms((3, 2), 2, 5), small))

    def test_categorical_inverse_cdf(self):
        probs = np.array([[0.2, 0.3, 0.5]] * 4)
        draws = sample_categorical(probs, np.array([0.0, 0.19, 0.2, 0.99]))
        assert_array_equal(draws, [0, 0, 1, 2])


class BranchRolloutTests(SimpleTestCase):
    """
    Tests for branch simulation in the estimated dynamics.
    """

    def setUp(self):
        self.mdp = random_mdp(np.random.default_rng(21), n_states=3, n_actions=2, discount=0.6)
        self.theta = ThetaParams.from_mdp(self.mdp)
        self.sol = solve_policy(self.theta)

    def test_shapes_and_origin(self):
        batch = branch_rollouts(self.theta, self.sol, [(0, 1), (2, 0)], 1, seed=0)
        self.assertEqual(batch.states.shape, (2, 2))
        self.assertEqual(batch.actions.shape, (2, 1))
        self.assertEqual(batch.origin, 'real_branch')
        self.assertEqual(batch.branch_points, [(0, 1), (2, 0)])

        fake = branch_rollouts(self.theta, self.sol, [(0, None), (1, None)], 3, seed=0)
        self.assertEqual(fake.origin, 'fake_branch')
        assert_array_equal(fake.states[:, 0], [0, 1])

    def test_rejects_bad_arguments(self):
        with self.assertRaises(ValueError):
            branch_rollouts(self.theta, self.sol, [(0, 1)], 0, seed=0)
        with self.assertRaises(ValueError):
            branch_rollouts(self.theta, self.sol, [(0, 1), (1, None)], 2, seed=0)

    def test_same_seed_same_batch(self):
        starts = [(s, None) for s in (0, 1, 2, 0)]
        first = branch_rollouts(self.theta, self.sol, starts, 6, seed=5, stream=(1,))
        second = branch_rollouts(self.theta, self.sol, starts, 6, seed=5, stream=(1,))
        assert_array_equal(first.states, second.states)
        assert_array_equal(first.actions, second.actions)

    def test_single_step_frequencies(self):
        """
        Test that one-step successors follow P^(.|s, a).
        """
        logits = self.theta.dynamics_logits.copy()
        logits[1, 0] = np.log([0.2, 0.5, 0.3])
        theta = self.theta.replace(dynamics_logits=logits)
        batch = branch_rollouts(theta, solve_policy(theta), [(1, 0)] * 20000, 1, seed=2)
        samples = np.eye(3)[batch.states[:, 1]]
        self.assertTrue(within_stderr(samples, [0.2, 0.5, 0.3]))

    def test_deterministic_dynamics(self):
        """
        Test that one-hot dynamics produce the unique successor every step.
        """
        spec = GridworldSpec(width=3, height=3)
        mdp = build_gridworld(spec)
        theta = ThetaParams.from_mdp(mdp, reward_logits=spec.target_logits())
        batch = branch_rollouts(theta, solve_policy(theta), [(s, None) for s in range(9)], 8, seed=0)
        successors = mdp.transition.argmax(axis=-1)
        assert_array_equal(batch.states[:, 1:], successors[batch.states[:, :-1], batch.actions])


class ReinforceEstimatorTests(SimpleTestCase):
    """
    Tests for the REINFORCE dynamics gradient against exact enumeration.
    """

    steps = 10
    batch_size = 50000

    def starts(self, n_states, n_actions):
        return [(i % n_states, (i // n_states) % n_actions) for i in range(self.batch_size)]

    def test_unbiased_without_normalization(self):
        """
        Test that the mean estimate matches the enumeration oracle on small MDPs.
        """
        for seed in range(3):
            with self.subTest(seed=seed):
                mdp = random_mdp(np.random.default_rng(100 + seed), n_states=3, n_actions=2, discount=0.6)
                theta = ThetaParams.from_mdp(mdp)
                sol = solve_policy(theta)
                starts = self.starts(3, 2)
                batch = branch_rollouts(theta, sol, starts, self.steps, seed=seed)
                _, samples = reinforce_dynamics_grad(theta, sol, batch, normalize=False, return_samples=True)
                exact = exact_branch_dynamics_grad(theta, sol, starts, self.steps).d_dynamics
                self.assertTrue(within_stderr(samples, exact))

    def test_baseline_keeps_estimator_unbiased(self):
        """
        Test that an arbitrary state-action baseline and the zero baseline stay unbiased.
        """
        mdp = random_mdp(np.random.default_rng(7), n_states=3, n_actions=2, discount=0.6)
        theta = ThetaParams.from_mdp(mdp)
        sol = solve_policy(theta)
        starts = self.starts(3, 2)
        batch = branch_rollouts(theta, sol, starts, self.steps, seed=4)
        exact = exact_branch_dynamics_grad(theta, sol, starts, self.steps).d_dynamics
        baseline = np.random.default_rng(8).normal(size=(3, 2))
        for choice in (baseline, 'zero'):
            _, samples = reinforce_dynamics_grad(theta, sol, batch, baseline=choice, normalize=False, return_samples=True)
            self.assertTrue(within_stderr(samples, exact))

    def test_constant_values_give_zero_gradient(self):
        mdp = random_mdp(np.random.default_rng(9), n_states=3, n_actions=2, discount=0.6)
        theta = ThetaParams.from_mdp(mdp)
        sol = solve_policy(theta)
        flat = SoftSolution(q=sol.q, v=np.full(3, 2.5), policy=sol.policy, bellman_residual=0.0)
        batch = branch_rollouts(theta, flat, self.starts(3, 2)[:5000], self.steps, seed=1)
        _, samples = reinforce_dynamics_grad(theta, flat, batch, baseline='zero', normalize=False, return_samples=True)
        self.assertTrue(within_stderr(samples, np.zeros_like(theta.dynamics_logits)))
        assert_allclose(exact_branch_dynamics_grad(theta, flat, [(0, 0)], self.steps).d_dynamics, 0.0, atol=1e-12)

    def test_baseline_reduces_variance(self):
        """
        Test that b = Q - R lowers the estimator variance on the gridworld.
        """
        spec = GridworldSpec()
        mdp = build_gridworld(spec)
        theta = ThetaParams(
            reward_logits=spec.target_logits(),
            dynamics_logits=np.zeros((25, 4, 25)),
            discount=mdp.discount,
            init_dist=mdp.init_dist,
        )
        sol = solve_policy(theta)
        starts = [(s, a) for s in range(25) for a in range(4)] * 20
        batch = branch_rollouts(theta, sol, starts, 10, seed=0)
        _, with_baseline = reinforce_dynamics_grad(theta, sol, batch, normalize=False, return_samples=True)
        _, without = reinforce_dynamics_grad(theta, sol, batch, baseline='zero', normalize=False, return_samples=True)
        self.assertLess(with_baseline.var(axis=0).sum(), without.var(axis=0).sum())

    def test_normalization_needs_two_transitions(self):
        mdp = random_mdp(np.random.default_rng(3), n_states=3, n_actions=2)
        theta = ThetaParams.from_mdp(mdp)
        sol = solve_policy(theta)
        batch = branch_rollouts(theta, sol, [(0, 0)], 1, seed=0)
        with self.assertRaises(BatchTooSmallError):
            reinforce_dynamics_grad(theta, sol, batch)
        with self.assertRaises(ValueError):
            reinforce_dynamics_grad(theta, sol, batch, baseline='mean', normalize=False)

    def test_sample_mean_is_the_estimate(self):
        mdp = random_mdp(np.random.default_rng(4), n_states=3, n_actions=2)
        theta = ThetaParams.from_mdp(mdp)
        sol = solve_policy(theta)
        batch = branch_rollouts(theta, sol, [(s, None) for s in (0, 1, 2)] * 10, 5, seed=3)
        gradient, samples = reinforce_dynamics_grad(theta, sol, batch, return_samples=True)
        assert_allclose(gradient.d_dynamics, reinforce_dynamics_grad(theta, sol, batch).d_dynamics, atol=1e-12)
        assert_allclose(samples.mean(axis=0), gradient.d_dynamics, atol=1e-12)


class VisitWeightTests(SimpleTestCase):

    def setUp(self):
        self.mdp = random_mdp(np.random.default_rng(31), n_states=3, n_actions=2, discount=0.5)
        self.theta = ThetaParams.from_mdp(self.mdp)
        self.sol = solve_policy(self.theta)

    def test_matches_exact_branch_weights(self):
        """
        Test Monte-Carlo branch visitation against the exact recursion.
        """
        starts = [(i % 3, None) for i in range(30000)]
        batch = branch_rollouts(self.theta, self.sol, starts, 8, seed=6)
        samples = discounted_visit_weights(batch, 3, 2, per_trajectory=True)
        exact = exact_branch_weights(self.theta, self.sol, starts, 8)
        self.assertTrue(within_stderr(samples, exact))
        assert_allclose(samples.mean(axis=0), discounted_visit_weights(batch, 3, 2), atol=1e-12)
        self.assertAlmostEqual(exact.sum(), (1 - 0.5 ** 8) / 0.5, places=12)

    def test_reward_gradient_samples(self):
        batch = branch_rollouts(self.theta, self.sol, [(0, 1)] * 50, 4, seed=0)
        gradient, samples = discounted_reward_grad(self.theta, batch, return_samples=True)
        assert_allclose(samples.mean(axis=0), gradient.d_reward, atol=1e-12)
        assert_allclose(gradient.d_dynamics, 0.0)

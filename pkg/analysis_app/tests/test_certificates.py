import math

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from analysis_app.api.serializers import BoundReportSerializer
from analysis_app.certificates import (
    data_estimated_errors,
    decompose_likelihood,
    density_ratio,
    model_advantage_decomposition,
    performance_bound,
    performance_bound_value,
    shift_mass_perturbation,
    t1_bound,
    t1_bound_value,
    unidentifiability_witness,
)
from analysis_app.exceptions import InvalidPerturbationError
from analysis_app.models import BoundReport
from estimation_app.models import ThetaParams, TrainConfig, logits_from_probs
from estimation_app.objectives import empirical_dynamics, log_posterior, log_posterior_terms, solve_policy
from estimation_app.training import TRAINERS
from gridworld_app.builder import build_gridworld
from gridworld_app.experts import generate_expert_dataset
from gridworld_app.models import GridworldSpec
from mdp_app.solver import occupancy_measure, policy_entropy, soft_value_iteration
from mdp_app.tests.factories import random_mdp


class BoundArithmeticTests(SimpleTestCase):

    def test_t1_bound_value(self):
        expected = 0.9 * (1 + math.log(2)) / 0.01 * math.sqrt(0.04)
        self.assertAlmostEqual(t1_bound_value(0.9, 1 + math.log(2), 0.02), expected, places=10)

    def test_performance_bound_value(self):
        self.assertAlmostEqual(performance_bound_value(0.1, 0.0, math.inf, 5.0, 0.9), 1.0, places=12)
        self.assertTrue(math.isinf(performance_bound_value(0.1, 0.01, math.inf, 5.0, 0.9)))

    def test_density_ratio(self):
        self.assertEqual(density_ratio(np.array([0.5, 0.5]), np.array([0.25, 0.75])), 2.0)
        self.assertTrue(math.isinf(density_ratio(np.array([0.5, 0.5]), np.array([1.0, 0.0]))))


class GridworldCertificateTests(SimpleTestCase):
    """
    Tests for the decomposition and bounds on the 5x5 gridworld.
    """

    def setUp(self):
        self.spec = GridworldSpec()
        self.mdp = build_gridworld(self.spec)
        self.expert_policy = soft_value_iteration(self.mdp).policy

    def test_ground_truth(self):
        """
        Test that the true parameters give T1 = 0 and a zero performance gap.
        """
        theta = ThetaParams.from_mdp(self.mdp, reward_logits=self.spec.target_logits())
        report = decompose_likelihood(theta, self.mdp, self.expert_policy)
        self.assertLessEqual(report.residual, 1e-8)
        self.assertAlmostEqual(report.t1, 0.0, places=10)
        self.assertAlmostEqual(report.epsilon_kl, 0.0, places=10)

        bound = performance_bound(theta, self.mdp, self.expert_policy)
        self.assertLessEqual(bound.observed_gap, 1e-7)
        self.assertTrue(bound.holds)
        self.assertFalse(bound.vacuous)
        expert_d = occupancy_measure(self.mdp, self.expert_policy).d
        expected_entropy = float(np.sum(expert_d.sum(axis=1) * policy_entropy(self.expert_policy)))
        self.assertAlmostEqual(bound.eps_policy, expected_entropy, places=7)

    def test_random_parameters(self):
        """
        Test the identity, the T1 bound and the performance bound on random parameters.
        """
        rng = np.random.default_rng(0)
        for draw in range(100):
            theta = ThetaParams(
                reward_logits=rng.normal(size=25),
                dynamics_logits=2.0 * rng.normal(size=(25, 4, 25)),
                discount=self.mdp.discount,
                init_dist=self.mdp.init_dist,
            )
            with self.subTest(draw=draw):
                sol = solve_policy(theta)
                report = decompose_likelihood(theta, self.mdp, self.expert_policy, sol)
                self.assertLessEqual(report.residual, 1e-8)
                self.assertLessEqual(abs(report.t1), t1_bound(theta, self.mdp, self.expert_policy, report))
                self.assertTrue(performance_bound(theta, self.mdp, self.expert_policy, sol).holds)
                advantage = model_advantage_decomposition(theta, self.mdp, self.expert_policy, sol)
                self.assertLessEqual(advantage.residual, 1e-8)


class TrainedCheckpointTests(SimpleTestCase):

    def test_every_variant_satisfies_the_bounds(self):
        """
        Test the identity, the T1 bound and the performance bound on trained parameters.
        """
        spec = GridworldSpec(width=3, height=3)
        mdp = build_gridworld(spec)
        expert_policy = soft_value_iteration(mdp).policy
        data = generate_expert_dataset(mdp, 10, 8, seed=0)
        configs = [
            TrainConfig(variant='bm_irl', lambda1=1.0, lambda2=0.001, outer_iters=5),
            TrainConfig(variant='bm_irl', lambda1=1.0, lambda2=10.0, outer_iters=5),
            TrainConfig(variant='rm_irl', lambda1=1.0, lambda2=2.0, outer_iters=5),
            TrainConfig(variant='two_stage', outer_iters=5),
        ]
        for cfg in configs:
            with self.subTest(variant=cfg.variant, lambda2=cfg.lambda2):
                theta = TRAINERS[cfg.variant](mdp, data, cfg).theta
                report = decompose_likelihood(theta, mdp, expert_policy)
                self.assertLessEqual(report.residual, 1e-8)
                self.assertLessEqual(abs(report.t1), t1_bound(theta, mdp, expert_policy, report))
                self.assertTrue(performance_bound(theta, mdp, expert_policy).holds)

class WitnessTests(SimpleTestCase):
    """
    Tests for parameters that share a policy but differ in reward and dynamics.
    """

    def setUp(self):
        self.mdp = random_mdp(np.random.default_rng(8), n_states=3, n_actions=2, discount=0.8)
        self.data = generate_expert_dataset(self.mdp, 50, 20, seed=0)
        self.theta = ThetaParams.from_mdp(self.mdp, lam=1.0)

    def test_zero_perturbation(self):
        witness, distance = unidentifiability_witness(self.theta, np.zeros((3, 2, 3)))
        self.assertLessEqual(distance, 1e-12)
        assert_allclose(witness.reward_table(), self.theta.reward_table())
        assert_allclose(witness.dynamics(), self.theta.dynamics(), atol=1e-15)

    def test_policy_is_preserved(self):
        """
        Test that Q, V and the policy survive a valid dynamics perturbation.
        """
        rng = np.random.default_rng(1)
        other = rng.dirichlet(np.ones(3), size=(3, 2))
        perturbation = 0.3 * (other - self.theta.dynamics())
        sol = solve_policy(self.theta)
        witness, distance = unidentifiability_witness(self.theta, perturbation, sol)
        self.assertLessEqual(distance, 1e-8)
        witness_sol = solve_policy(witness)
        assert_allclose(witness_sol.v, sol.v, atol=1e-8)
        assert_allclose(witness_sol.q, sol.q, atol=1e-8)
        self.assertFalse(np.allclose(witness.dynamics(), self.theta.dynamics()))

    def test_prior_breaks_the_tie(self):
        """
        Test that moving mass off the observed successors lowers the posterior.
        """
        mle = self.theta.replace(dynamics_logits=logits_from_probs(empirical_dynamics(self.data, 0.0)))
        counts = self.data.sa_counts
        state, action = np.unravel_index(np.argmax(counts), counts.shape)
        perturbation = shift_mass_perturbation(mle.dynamics(), int(state), int(action), 0.1)
        witness, distance = unidentifiability_witness(mle, perturbation)
        self.assertLessEqual(distance, 1e-8)
        before = log_posterior_terms(mle, self.data)
        after = log_posterior_terms(witness, self.data)
        self.assertAlmostEqual(before['policy_loglik'], after['policy_loglik'], places=8)
        self.assertLess(log_posterior(witness, self.data), log_posterior(mle, self.data))

    def test_invalid_perturbations(self):
        unbalanced = np.zeros((3, 2, 3))
        unbalanced[0, 0, 0] = 0.1
        with self.assertRaises(InvalidPerturbationError):
            unidentifiability_witness(self.theta, unbalanced)

        negative = np.zeros((3, 2, 3))
        shift = self.theta.dynamics()[0, 0, 0] + 0.1
        negative[0, 0, 0] = -shift
        negative[0, 0, 1] = shift
        with self.assertRaises(InvalidPerturbationError):
            unidentifiability_witness(self.theta, negative)

        with self.assertRaises(InvalidPerturbationError):
            unidentifiability_witness(self.theta, np.zeros((3, 3, 3)))

    def test_shift_mass(self):
        dynamics = np.array([[[0.6, 0.3, 0.1]]])
        perturbation = shift_mass_perturbation(dynamics, 0, 0, 0.5)
        assert_allclose(perturbation[0, 0], [-0.3, 0.15, 0.15])


class DataEstimateTests(SimpleTestCase):

    def test_policy_error_is_negative_loglik(self):
        mdp = random_mdp(np.random.default_rng(12), n_states=3, n_actions=2)
        data = generate_expert_dataset(mdp, 10, 10, seed=2)
        theta = ThetaParams.from_mdp(mdp)
        errors = data_estimated_errors(theta, data)
        self.assertAlmostEqual(errors['eps_policy'], -log_posterior_terms(theta, data)['policy_loglik'], places=12)
        self.assertGreaterEqual(errors['eps_dynamics'], 0.0)


class ReportSerializerTests(SimpleTestCase):

    def test_infinite_values_become_null(self):
        report = BoundReport(
            eps_policy=0.1, eps_dynamics=0.01, density_ratio_c=math.inf, r_max=2.0, gamma=0.9,
            bound=math.inf, observed_gap=0.5, holds=True, vacuous=True,
        )
        data = BoundReportSerializer(report).data
        self.assertIsNone(data['density_ratio_c'])
        self.assertIsNone(data['bound'])
        self.assertTrue(data['vacuous'])
        self.assertEqual(report.slack, math.inf)

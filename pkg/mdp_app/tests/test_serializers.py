import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from mdp_app.api.serializers import PolicySerializer, TabularMdpSerializer
from mdp_app.models import TabularMdp
from mdp_app.solver import soft_value_iteration
from mdp_app.tests.factories import random_mdp


class TabularMdpSerializerTests(SimpleTestCase):
    """
    Tests for loading and dumping MDP documents.
    """

    def setUp(self):
        self.mdp = random_mdp(np.random.default_rng(2), n_states=3, n_actions=2)
        self.payload = TabularMdpSerializer(self.mdp).data

    def test_valid_document_builds_mdp(self):
        serializer = TabularMdpSerializer(data=self.payload)
        self.assertTrue(serializer.is_valid(), serializer.errors)
        mdp = serializer.save()
        self.assertIsInstance(mdp, TabularMdp)
        assert_allclose(mdp.transition, self.mdp.transition, atol=1e-15)
        self.assertEqual(mdp.discount, self.mdp.discount)

    def test_row_outside_tolerance_is_rejected(self):
        """
        Test that a transition row summing to 1 + 1e-6 is flagged on the transition field.
        """
        self.payload['transition'][0][1][0] += 1e-6
        serializer = TabularMdpSerializer(data=self.payload)
        self.assertFalse(serializer.is_valid())
        self.assertIn('transition', serializer.errors)

    def test_row_within_tolerance_is_renormalized(self):
        self.payload['transition'][0][1][0] += 1e-11
        serializer = TabularMdpSerializer(data=self.payload)
        self.assertTrue(serializer.is_valid(), serializer.errors)
        assert_allclose(serializer.save().transition.sum(axis=-1), 1.0, atol=1e-15)

    def test_shape_and_discount_errors(self):
        """
        Test that shape and discount violations name the offending field.
        """
        serializer = TabularMdpSerializer(data={**self.payload, 'n_states': 4})
        self.assertFalse(serializer.is_valid())
        self.assertIn('transition', serializer.errors)

        serializer = TabularMdpSerializer(data={**self.payload, 'discount': 1.0})
        self.assertFalse(serializer.is_valid())
        self.assertIn('discount', serializer.errors)

        serializer = TabularMdpSerializer(data={**self.payload, 'init_dist': [0.5, 0.5, 0.5]})
        self.assertFalse(serializer.is_valid())
        self.assertIn('init_dist', serializer.errors)


class PolicySerializerTests(SimpleTestCase):

    def test_policy_document(self):
        """
        Test that a dumped solution loads back as its policy table.
        """
        solution = soft_value_iteration(random_mdp(np.random.default_rng(4)))
        serializer = PolicySerializer(data=PolicySerializer(solution).data)
        self.assertTrue(serializer.is_valid(), serializer.errors)
        assert_allclose(serializer.save(), solution.policy, atol=1e-15)

    def test_rejects_non_distribution(self):
        serializer = PolicySerializer(data={'policy': [[0.7, 0.7]], 'bellman_residual': 0.0, 'iterations': 1})
        self.assertFalse(serializer.is_valid())
        self.assertIn('policy', serializer.errors)

"""
Serializers for the MDP JSON document exchanged between commands.
"""
import numpy as np
from rest_framework import serializers

from mdp_app.models import TabularMdp

LOAD_TOL = 1e-9


def _matrix_field(depth):
    field = serializers.FloatField()
    for _ in range(depth):
        field = serializers.ListField(child=field)
    return field


class TabularMdpSerializer(serializers.Serializer):
    """
    Serializer for a TabularMdp JSON document.

    Validates shapes and probability simplices (tolerance 1e-9) before
    building the MDP; rows are renormalized on load so the in-memory
    invariants hold to machine precision.

    Fields:
        n_states (int): Number of states.
        n_actions (int): Number of actions.
        transition (list): Row-major [s][a][s'] probabilities.
        reward (list): [s][a] rewards.
        init_dist (list): [s] initial distribution.
        discount (float): Discount factor in (0, 1).
    """
    n_states = serializers.IntegerField(min_value=1)
    n_actions = serializers.IntegerField(min_value=1)
    transition = _matrix_field(3)
    reward = _matrix_field(2)
    init_dist = _matrix_field(1)
    discount = serializers.FloatField()

    def validate_discount(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError('Discount must lie strictly inside (0, 1).')
        return value

    def validate(self, attrs):
        """
        Checks array shapes against the declared sizes and the probability
        constraints of ``transition`` and ``init_dist``.
        """
        n_states, n_actions = attrs['n_states'], attrs['n_actions']
        try:
            transition = np.array(attrs['transition'], dtype=float)
            reward = np.array(attrs['reward'], dtype=float)
        except ValueError:
            raise serializers.ValidationError({'transition': 'Arrays must be rectangular.'})
        init_dist = np.array(attrs['init_dist'], dtype=float)

        if transition.shape != (n_states, n_actions, n_states):
            raise serializers.ValidationError({'transition': f'Expected shape ({n_states}, {n_actions}, {n_states}).'})
        if reward.shape != (n_states, n_actions):
            raise serializers.ValidationError({'reward': f'Expected shape ({n_states}, {n_actions}).'})
        if init_dist.shape != (n_states,):
            raise serializers.ValidationError({'init_dist': f'Expected shape ({n_states},).'})
        if np.any(transition < -LOAD_TOL) or np.max(np.abs(transition.sum(axis=-1) - 1.0)) > LOAD_TOL:
            raise serializers.ValidationError({'transition': 'Rows must be probability distributions.'})
        if np.any(init_dist < -LOAD_TOL) or abs(init_dist.sum() - 1.0) > LOAD_TOL:
            raise serializers.ValidationError({'init_dist': 'Must be a probability distribution.'})

        transition = np.clip(transition, 0.0, None)
        init_dist = np.clip(init_dist, 0.0, None)
        attrs['transition'] = transition / transition.sum(axis=-1, keepdims=True)
        attrs['reward'] = reward
        attrs['init_dist'] = init_dist / init_dist.sum()
        return attrs

    def create(self, validated_data):
        return TabularMdp(
            transition=validated_data['transition'],
            reward=validated_data['reward'],
            init_dist=validated_data['init_dist'],
            discount=validated_data['discount'],
        )

    def to_representation(self, instance):
        return {
            'n_states': instance.n_states,
            'n_actions': instance.n_actions,
            'transition': instance.transition.tolist(),
            'reward': instance.reward.tolist(),
            'init_dist': instance.init_dist.tolist(),
            'discount': instance.discount,
        }


class PolicySerializer(serializers.Serializer):
    """
    Serializer for a stored policy (``expert_policy.json``).

    Fields:
        policy (list): [s][a] action probabilities.
        bellman_residual (float): Residual of the solution the policy came from.
        iterations (int): Soft value iteration sweeps used.
    """
    policy = _matrix_field(2)
    bellman_residual = serializers.FloatField(min_value=0.0)
    iterations = serializers.IntegerField(min_value=0)

    def validate_policy(self, value):
        try:
            policy = np.array(value, dtype=float)
        except ValueError:
            raise serializers.ValidationError('Policy must be a rectangular table.')
        if policy.ndim != 2 or np.any(policy < -LOAD_TOL) or np.max(np.abs(policy.sum(axis=1) - 1.0)) > LOAD_TOL:
            raise serializers.ValidationError('Rows must be probability distributions.')
        policy = np.clip(policy, 0.0, None)
        return policy / policy.sum(axis=1, keepdims=True)

    def create(self, validated_data):
        return validated_data['policy']

    def to_representation(self, instance):
        return {
            'policy': instance.policy.tolist(),
            'bellman_residual': instance.bellman_residual,
            'iterations': instance.iterations,
        }

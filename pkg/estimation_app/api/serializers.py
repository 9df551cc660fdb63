import numpy as np
from rest_framework import serializers

from estimation_app.exceptions import InvalidConfigError, InvalidParametersError
from estimation_app.models import GRADIENT_BACKENDS, VARIANTS, ThetaParams, TrainConfig


class TrainConfigSerializer(serializers.Serializer):
    """
    Serializer for the ``[train]`` section of a run config.

    Omitted keys keep the TrainConfig defaults. Cross-field rules (for example
    RM-IRL's ``lambda2 > lambda1``) are checked by building the config.
    """
    lambda1 = serializers.FloatField(min_value=0.0, required=False)
    lambda2 = serializers.FloatField(min_value=0.0, required=False)
    reward_lr = serializers.FloatField(min_value=0.0, required=False)
    dynamics_lr = serializers.FloatField(min_value=0.0, required=False)
    dynamics_steps_per_outer = serializers.IntegerField(min_value=0, required=False)
    rollout_batch = serializers.IntegerField(min_value=1, required=False)
    rollout_steps = serializers.IntegerField(min_value=1, required=False)
    outer_iters = serializers.IntegerField(min_value=0, required=False)
    seed = serializers.IntegerField(min_value=0, required=False)
    variant = serializers.ChoiceField(choices=list(VARIANTS), required=False)
    gradient_backend = serializers.ChoiceField(choices=list(GRADIENT_BACKENDS), required=False)
    prior_precision = serializers.FloatField(min_value=0.0, required=False, allow_null=True)
    partial_inner_sweeps = serializers.IntegerField(min_value=0, required=False)
    snapshot_every = serializers.IntegerField(min_value=1, required=False)
    smoothing = serializers.FloatField(min_value=0.0, required=False)
    max_reward = serializers.FloatField(min_value=0.0, required=False, allow_null=True)
    reward_l2 = serializers.FloatField(min_value=0.0, required=False)
    normalize_advantages = serializers.BooleanField(required=False)
    solver_tol = serializers.FloatField(min_value=0.0, required=False)
    divergence_patience = serializers.IntegerField(min_value=1, required=False)
    divergence_drop = serializers.FloatField(min_value=0.0, required=False)
    reward_mode = serializers.ChoiceField(choices=['state', 'table'], required=False)

    def validate(self, attrs):
        try:
            attrs['config'] = TrainConfig(**attrs)
        except InvalidConfigError as exc:
            raise serializers.ValidationError({exc.field: str(exc)})
        return attrs

    def create(self, validated_data):
        return validated_data['config']


class ThetaCheckpointSerializer(serializers.Serializer):
    """
    Serializer for a parameter checkpoint (``theta.json``).

    Fields:
        reward_logits (list): [n_states] or [n_states][n_actions] reward logits.
        dynamics_logits (list): [n_states][n_actions][n_states] dynamics logits.
        lam (float): Prior precision.
        discount (float): Discount factor in (0, 1).
        init_dist (list): Initial state distribution.
        max_reward (float): Optional reward clip.
    """
    reward_logits = serializers.ListField()
    dynamics_logits = serializers.ListField()
    lam = serializers.FloatField(min_value=0.0)
    discount = serializers.FloatField()
    init_dist = serializers.ListField(child=serializers.FloatField())
    max_reward = serializers.FloatField(required=False, allow_null=True)

    def validate_discount(self, value):
        if not 0.0 < value < 1.0:
            raise serializers.ValidationError('Discount must lie strictly inside (0, 1).')
        return value

    def _array(self, name, value):
        try:
            array = np.array(value, dtype=float)
        except (TypeError, ValueError):
            raise serializers.ValidationError({name: 'Must be a rectangular array of numbers.'})
        if not np.all(np.isfinite(array)):
            raise serializers.ValidationError({name: 'Entries must be finite.'})
        return array

    def validate(self, attrs):
        init_dist = self._array('init_dist', attrs['init_dist'])
        if np.any(init_dist < 0) or abs(init_dist.sum() - 1.0) > 1e-9:
            raise serializers.ValidationError({'init_dist': 'Must be a probability distribution.'})
        try:
            attrs['theta'] = ThetaParams(
                reward_logits=self._array('reward_logits', attrs['reward_logits']),
                dynamics_logits=self._array('dynamics_logits', attrs['dynamics_logits']),
                lam=attrs['lam'],
                discount=attrs['discount'],
                init_dist=init_dist / init_dist.sum(),
                max_reward=attrs.get('max_reward'),
            )
        except InvalidParametersError as exc:
            raise serializers.ValidationError({exc.field: str(exc)})
        return attrs

    def create(self, validated_data):
        return validated_data['theta']

    def to_representation(self, instance):
        return instance.as_dict()

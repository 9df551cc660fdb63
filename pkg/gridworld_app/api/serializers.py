from rest_framework import serializers

from gridworld_app.exceptions import InvalidGridworldError
from gridworld_app.models import BOUNDARY_RULES, MOVES, GridworldSpec, Trajectory


class GridworldSpecSerializer(serializers.Serializer):
    """
    Serializer for the ``[gridworld]`` section of a run config.

    Missing keys keep the GridworldSpec defaults; ``goal`` defaults to the
    upper-right cell.
    """
    width = serializers.IntegerField(min_value=2, default=5)
    height = serializers.IntegerField(min_value=2, default=5)
    goal = serializers.ListField(child=serializers.IntegerField(), min_length=2, max_length=2, required=False)
    start = serializers.ListField(child=serializers.IntegerField(), min_length=2, max_length=2, default=[0, 0])
    actions = serializers.ListField(
        child=serializers.ChoiceField(choices=list(MOVES)),
        default=list(MOVES),
        allow_empty=False,
    )
    boundary_rule = serializers.ChoiceField(choices=list(BOUNDARY_RULES), default='stay_in_place')
    goal_logit = serializers.FloatField(default=20.0)
    discount = serializers.FloatField(default=0.7)

    def validate(self, attrs):
        try:
            attrs['spec'] = self.build_spec(attrs)
        except InvalidGridworldError as exc:
            raise serializers.ValidationError({'gridworld': str(exc)})
        return attrs

    @staticmethod
    def build_spec(attrs):
        return GridworldSpec(
            width=attrs['width'],
            height=attrs['height'],
            goal=tuple(attrs['goal']) if attrs.get('goal') else None,
            start=tuple(attrs['start']),
            actions=tuple(attrs['actions']),
            boundary_rule=attrs['boundary_rule'],
            goal_logit=attrs['goal_logit'],
            discount=attrs['discount'],
        )

    def create(self, validated_data):
        return validated_data['spec']

    def to_representation(self, instance):
        return {
            'width': instance.width,
            'height': instance.height,
            'goal': list(instance.goal),
            'start': list(instance.start),
            'actions': list(instance.actions),
            'boundary_rule': instance.boundary_rule,
            'goal_logit': instance.goal_logit,
            'discount': instance.discount,
        }


class TrajectorySerializer(serializers.Serializer):
    """
    One line of a dataset JSONL file: ``{"states": [...], "actions": [...]}``.
    """
    states = serializers.ListField(child=serializers.IntegerField(min_value=0), allow_empty=False)
    actions = serializers.ListField(child=serializers.IntegerField(min_value=0))

    def validate(self, attrs):
        if len(attrs['states']) != len(attrs['actions']) + 1:
            raise serializers.ValidationError({'states': 'Must be exactly one longer than actions.'})
        return attrs

    def create(self, validated_data):
        return Trajectory(validated_data['states'], validated_data['actions'])

    def to_representation(self, instance):
        return {'states': instance.states.tolist(), 'actions': instance.actions.tolist()}

"""
Run configuration: a TOML file with ``[gridworld]``, ``[train]`` and
``[output]`` sections, completed from ``settings.WORKBENCH``.
"""
import tomllib
from dataclasses import asdict, dataclass, field
from pathlib import Path

from django.conf import settings
from rest_framework import serializers

from estimation_app.api.serializers import TrainConfigSerializer
from experiments_app.exceptions import InvalidInputError, MissingInputError
from gridworld_app.api.serializers import GridworldSpecSerializer


class GridworldSectionSerializer(GridworldSpecSerializer):
    """``[gridworld]``: the grid plus how much expert data to sample."""
    expert_trajectories = serializers.IntegerField(min_value=0)
    expert_horizon = serializers.IntegerField(min_value=1)
    seed = serializers.IntegerField(min_value=0)


class OutputSectionSerializer(serializers.Serializer):
    """``[output]``: where results go and how runs are evaluated."""
    directory = serializers.CharField()
    eval_rollouts = serializers.IntegerField(min_value=1)
    witness_fraction = serializers.FloatField(min_value=0.0, max_value=1.0)
    witness_lambda = serializers.FloatField(min_value=0.0)


class SweepSectionSerializer(TrainConfigSerializer):
    """``[train]`` with the optional λ grid used by the sweep command."""
    lambda_grid = serializers.ListField(child=serializers.FloatField(min_value=0.0), allow_empty=False)

    def validate(self, attrs):
        lambda_grid = attrs.pop('lambda_grid')
        attrs = super().validate(attrs)
        attrs['lambda_grid'] = lambda_grid
        return attrs


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a command needs besides its input files.
    """
    spec: object
    expert_trajectories: int
    expert_horizon: int
    expert_seed: int
    train: object
    lambda_grid: tuple
    directory: Path
    eval_rollouts: int
    witness_fraction: float
    witness_lambda: float
    source: dict = field(default_factory=dict)

    def as_dict(self):
        """Plain representation recorded in manifests."""
        return {
            'gridworld': {
                **GridworldSpecSerializer(self.spec).data,
                'expert_trajectories': self.expert_trajectories,
                'expert_horizon': self.expert_horizon,
                'seed': self.expert_seed,
            },
            'train': {**asdict(self.train), 'lambda_grid': list(self.lambda_grid)},
            'output': {
                'eval_rollouts': self.eval_rollouts,
                'witness_fraction': self.witness_fraction,
                'witness_lambda': self.witness_lambda,
            },
        }


def _validate(serializer_class, payload, section):
    serializer = serializer_class(data=payload)
    unknown = sorted(set(payload) - set(serializer.fields))
    if unknown:
        raise InvalidInputError(f'[{section}]', {key: 'Unknown key.' for key in unknown})
    if not serializer.is_valid():
        raise InvalidInputError(f'[{section}]', serializer.errors)
    return serializer.validated_data


def read_config_file(path):
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path)
    try:
        with path.open('rb') as handle:
            return tomllib.load(handle)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidInputError(str(path), {'toml': str(exc)}) from exc


def build_run_config(document=None, seed=None, variant=None, out=None):
    """
    Merge a parsed config document over the project defaults and validate it.

    Args:
        document (dict, optional): Parsed TOML document.
        seed (int, optional): Overrides both the expert and the training seed.
        variant (str, optional): Overrides ``[train].variant``.
        out (str, optional): Overrides ``[output].directory``.

    Returns:
        RunConfig

    Raises:
        InvalidInputError: With the offending section and fields.
    """
    document = document or {}
    unknown = set(document) - {'gridworld', 'train', 'output'}
    if unknown:
        raise InvalidInputError('config', {section: 'Unknown section.' for section in sorted(unknown)})
    defaults = settings.WORKBENCH

    gridworld = {**defaults['GRIDWORLD'], **document.get('gridworld', {})}
    train = {
        'smoothing': defaults['SMOOTHING'],
        'solver_tol': defaults['SOLVER_TOL'],
        'lambda_grid': defaults['LAMBDA_GRID'],
        **defaults['TRAIN'],
        **document.get('train', {}),
    }
    output = {**defaults['OUTPUT'], **document.get('output', {})}
    if seed is not None:
        gridworld['seed'] = seed
        train['seed'] = seed
    if variant is not None:
        train['variant'] = variant
    if out is not None:
        output['directory'] = out

    gridworld_data = _validate(GridworldSectionSerializer, gridworld, 'gridworld')
    train_data = _validate(SweepSectionSerializer, train, 'train')
    output_data = _validate(OutputSectionSerializer, output, 'output')

    return RunConfig(
        spec=gridworld_data['spec'],
        expert_trajectories=gridworld_data['expert_trajectories'],
        expert_horizon=gridworld_data['expert_horizon'],
        expert_seed=gridworld_data['seed'],
        train=train_data['config'],
        lambda_grid=tuple(train_data['lambda_grid']),
        directory=Path(output_data['directory']),
        eval_rollouts=output_data['eval_rollouts'],
        witness_fraction=output_data['witness_fraction'],
        witness_lambda=output_data['witness_lambda'],
        source=document,
    )


def load_run_config(path=None, **overrides):
    document = read_config_file(path) if path else {}
    return build_run_config(document, **overrides)

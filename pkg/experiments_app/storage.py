"""
File I/O for experiment artifacts.

Every writer is deterministic: JSON keys are sorted, floats use their
shortest round-trip representation and no timestamps are recorded.
"""
import json
from pathlib import Path

from experiments_app.exceptions import InvalidInputError, MissingInputError
from gridworld_app.api.serializers import TrajectorySerializer
from gridworld_app.models import Dataset

MDP_FILE = 'mdp.json'
POLICY_FILE = 'expert_policy.json'
DATASET_FILE = 'dataset.jsonl'
GRIDWORLD_FILE = 'gridworld.json'
MANIFEST_FILE = 'manifest.json'
RECORD_FILE = 'training.csv'
THETA_FILE = 'theta.json'
SNAPSHOTS_FILE = 'snapshots.json'
EVALUATION_FILE = 'evaluation.json'
CERTIFICATE_FILE = 'certificate.json'
SWEEP_FILE = 'sweep.csv'
ROLLOUTS_FILE = 'rollouts.jsonl'


def dumps(payload):
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + '\n'


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload))
    return path


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(str(path), {'json': str(exc)}) from exc


def write_jsonl(path, records):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [json.dumps(record, sort_keys=True, separators=(',', ':')) for record in records]
    path.write_text(''.join(line + '\n' for line in lines))
    return path


def read_jsonl(path):
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path)
    records = []
    for number, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f'{path}:{number}', {'json': str(exc)}) from exc
    return records


def write_frame(path, frame):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def load_validated(serializer_class, payload, source):
    """
    Validate ``payload`` with ``serializer_class`` and return the built object.

    Raises:
        InvalidInputError: With the serializer's field errors.
    """
    serializer = serializer_class(data=payload)
    if serializer.is_valid():
        return serializer.save()
    raise InvalidInputError(str(source), serializer.errors)


def write_dataset(path, data):
    return write_jsonl(path, [TrajectorySerializer(t).data for t in data.trajectories])


def read_dataset(path, n_states, n_actions):
    trajectories = [
        load_validated(TrajectorySerializer, record, f'{path}:{number}')
        for number, record in enumerate(read_jsonl(path), start=1)
    ]
    return Dataset.from_trajectories(trajectories, n_states, n_actions)

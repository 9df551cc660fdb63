"""
Experiment pipeline shared by the management commands: expert generation,
training, evaluation, λ sweeps and certification.
"""
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from django.conf import settings

from analysis_app.api.serializers import (
    BoundReportSerializer,
    DataErrorsSerializer,
    DecompositionReportSerializer,
    ModelAdvantageReportSerializer,
    T1CheckSerializer,
    WitnessSerializer,
)
from analysis_app.certificates import (
    data_estimated_errors,
    decompose_likelihood,
    model_advantage_decomposition,
    performance_bound,
    shift_mass_perturbation,
    t1_bound,
    unidentifiability_witness,
)
from analysis_app.models import BOUND_SLACK
from core.exceptions import WorkbenchError
from estimation_app.api.serializers import ThetaCheckpointSerializer
from estimation_app.objectives import data_dynamics_loglik, log_posterior, solve_policy
from estimation_app.training import TRAINERS
from experiments_app.exceptions import InvalidInputError
from experiments_app.storage import (
    DATASET_FILE,
    EVALUATION_FILE,
    GRIDWORLD_FILE,
    MANIFEST_FILE,
    MDP_FILE,
    POLICY_FILE,
    RECORD_FILE,
    ROLLOUTS_FILE,
    SNAPSHOTS_FILE,
    SWEEP_FILE,
    THETA_FILE,
    load_validated,
    read_dataset,
    read_json,
    write_dataset,
    write_frame,
    write_json,
    write_jsonl,
)
from gridworld_app.api.serializers import GridworldSpecSerializer
from gridworld_app.builder import build_gridworld
from gridworld_app.experts import generate_expert_dataset
from gridworld_app.metrics import expected_illegal_rate, illegal_transition_rate, reward_recovery_error
from mdp_app.api.serializers import PolicySerializer, TabularMdpSerializer
from mdp_app.solver import soft_value_iteration
from sampling_app.models import RolloutBatch
from sampling_app.rollouts import policy_rollouts

logger = logging.getLogger(__name__)

EVAL_STREAM = 7
SWEEP_DIRECTORY = 'sweep'
SWEEP_COLUMNS = [
    'point', 'variant', 'lambda', 'illegal_rate', 'goal_argmax', 'tv_to_true_reward',
    'data_dyn_loglik', 'expert_gap', 'error',
]


@dataclass(frozen=True, eq=False)
class ExperimentInputs:
    """
    Files produced by ``gen_expert`` and consumed by the other commands.
    """
    mdp: object
    expert_policy: np.ndarray
    data: object
    spec: object = None

    @property
    def horizon(self):
        return max((len(t) for t in self.data.trajectories), default=0)


def generate_expert(run):
    """
    Build the gridworld, solve for the expert and sample its demonstrations.

    Writes ``mdp.json``, ``expert_policy.json``, ``gridworld.json``,
    ``dataset.jsonl`` and ``manifest.json`` into ``run.directory``.
    """
    mdp = build_gridworld(run.spec)
    solution = soft_value_iteration(
        mdp, tol=run.train.solver_tol, max_iter=settings.WORKBENCH['SOLVER_MAX_ITER'],
    )
    data = generate_expert_dataset(
        mdp, run.expert_trajectories, run.expert_horizon, run.expert_seed, solution=solution,
    )

    directory = run.directory
    write_json(directory / MDP_FILE, TabularMdpSerializer(mdp).data)
    write_json(directory / POLICY_FILE, PolicySerializer(solution).data)
    write_json(directory / GRIDWORLD_FILE, GridworldSpecSerializer(run.spec).data)
    write_dataset(directory / DATASET_FILE, data)
    write_json(directory / MANIFEST_FILE, {
        'command': 'gen_expert',
        'seed': run.expert_seed,
        'config': run.as_dict(),
        'bellman_residual': solution.bellman_residual,
        'solver_iterations': solution.iterations,
        'n_trajectories': len(data.trajectories),
        'n_transitions': data.n_transitions,
    })
    logger.info('expert data written to %s', directory)
    return data, solution


def load_inputs(directory):
    """
    Read and validate the files written by ``generate_expert``.

    Raises:
        MissingInputError: If a required file is absent.
        InvalidInputError: If a file fails validation.
    """
    directory = Path(directory)
    mdp = load_validated(TabularMdpSerializer, read_json(directory / MDP_FILE), directory / MDP_FILE)
    expert_policy = load_validated(PolicySerializer, read_json(directory / POLICY_FILE), directory / POLICY_FILE)
    if expert_policy.shape != (mdp.n_states, mdp.n_actions):
        raise InvalidInputError(str(directory / POLICY_FILE), {'policy': 'Shape does not match the MDP.'})
    spec = None
    if (directory / GRIDWORLD_FILE).is_file():
        spec = load_validated(GridworldSpecSerializer, read_json(directory / GRIDWORLD_FILE), directory / GRIDWORLD_FILE)
        if spec.n_states != mdp.n_states or spec.n_actions != mdp.n_actions:
            raise InvalidInputError(str(directory / GRIDWORLD_FILE), {'gridworld': 'Grid does not match the MDP.'})
    data = read_dataset(directory / DATASET_FILE, mdp.n_states, mdp.n_actions)
    return ExperimentInputs(mdp=mdp, expert_policy=expert_policy, data=data, spec=spec)


def load_checkpoint(path):
    return load_validated(ThetaCheckpointSerializer, read_json(path), path)


def run_training(inputs, cfg):
    """Run ``cfg.variant`` on the inputs and return its TrainingRecord."""
    train = TRAINERS[cfg.variant]
    return train(inputs.mdp, inputs.data, cfg, spec=inputs.spec, expert_policy=inputs.expert_policy)


def state_reward_logits(theta):
    """State reward logits; table-mode rewards are averaged over actions."""
    if theta.reward_mode == 'state':
        return theta.reward_logits
    return theta.reward_table().mean(axis=1)


def imagined_rollouts(inputs, theta, sol, cfg, n_rollouts):
    """Rollouts of the learner policy in its own dynamics, started from the true mu."""
    horizon = inputs.horizon or cfg.rollout_steps
    states, actions = policy_rollouts(
        theta.dynamics(), sol.policy, inputs.mdp.init_dist, n_rollouts, horizon, (cfg.seed, EVAL_STREAM),
    )
    return RolloutBatch(states=states, actions=actions, origin='imagined', discount=theta.discount)


def evaluate_run(inputs, record, cfg, eval_rollouts):
    """
    Evaluation report of a trained agent: imagined-rollout illegal rate,
    reward recovery, data fit, expert gap and the performance bound.
    """
    theta = record.theta
    sol = solve_policy(theta, tol=cfg.solver_tol)
    final = record.final_row
    report = {
        'variant': record.variant,
        'lambda1': cfg.lambda1,
        'lambda2': cfg.lambda2,
        'lambda_effective': record.lambda_effective,
        'data_dyn_loglik': data_dynamics_loglik(theta, inputs.data),
        'log_posterior': final['log_posterior'],
        'expert_gap': final['expert_gap'],
        'performance_bound': BoundReportSerializer(performance_bound(theta, inputs.mdp, inputs.expert_policy, sol)).data,
    }
    if inputs.spec is not None:
        batch = imagined_rollouts(inputs, theta, sol, cfg, eval_rollouts)
        recovery = reward_recovery_error(inputs.mdp.reward, state_reward_logits(theta))
        report['illegal_transition_rate'] = illegal_transition_rate(inputs.spec, batch.trajectories)
        report['expected_illegal_rate'] = expected_illegal_rate(
            inputs.spec, theta.dynamics(), sol.policy, inputs.mdp.init_dist, batch.steps,
        )
        report['reward_recovery'] = asdict(recovery)
    if record.mle_summary is not None:
        report['mle_summary'] = record.mle_summary
    return report


def write_run(directory, record, evaluation, manifest):
    directory = Path(directory)
    write_frame(directory / RECORD_FILE, record.to_frame())
    write_json(directory / THETA_FILE, ThetaCheckpointSerializer(record.theta).data)
    write_json(directory / SNAPSHOTS_FILE, record.snapshots)
    write_json(directory / EVALUATION_FILE, evaluation)
    write_json(directory / MANIFEST_FILE, manifest)
    return directory


def train_and_write(inputs, cfg, run, directory, command='train', dump_rollouts=False):
    record = run_training(inputs, cfg)
    evaluation = evaluate_run(inputs, record, cfg, run.eval_rollouts)
    if dump_rollouts:
        sol = solve_policy(record.theta, tol=cfg.solver_tol)
        batch = imagined_rollouts(inputs, record.theta, sol, cfg, run.eval_rollouts)
        write_jsonl(Path(directory) / ROLLOUTS_FILE, batch.as_records())
    manifest = {
        'command': command,
        'seed': cfg.seed,
        'train': asdict(cfg),
        'eval_rollouts': run.eval_rollouts,
        'iterations': len(record.rows) - 1,
    }
    write_run(directory, record, evaluation, manifest)
    return record, evaluation


def sweep_points(run):
    """BM-IRL at every λ of the grid (lambda1 = 1, lambda2 = λ) plus the two-stage baseline."""
    base = run.train
    points = [
        (f'lambda_{lam:g}', base.replace(variant='bm_irl', lambda1=1.0, lambda2=lam, prior_precision=None))
        for lam in run.lambda_grid
    ]
    points.append(('two_stage', base.replace(variant='two_stage')))
    return points


def sweep_lambda(inputs, run):
    """
    Train every sweep point with shared seeds and tabulate the comparison.

    Failed points keep their row with the error text; completed points keep
    their per-point directory.
    """
    root = run.directory / SWEEP_DIRECTORY
    rows = []
    for name, cfg in sweep_points(run):
        row = {column: math.nan for column in SWEEP_COLUMNS}
        row.update({
            'point': name,
            'variant': cfg.variant,
            'lambda': cfg.lambda_effective if cfg.variant == 'bm_irl' else math.nan,
            'error': '',
        })
        try:
            _, evaluation = train_and_write(inputs, cfg, run, root / name, command='sweep_lambda')
        except WorkbenchError as exc:
            logger.error('sweep point %s failed: %s', name, exc)
            row['error'] = str(exc)
        else:
            recovery = evaluation.get('reward_recovery', {})
            row.update({
                'illegal_rate': evaluation.get('illegal_transition_rate', math.nan),
                'goal_argmax': recovery.get('goal_argmax_match', math.nan),
                'tv_to_true_reward': recovery.get('tv_distance', math.nan),
                'data_dyn_loglik': evaluation['data_dyn_loglik'],
                'expert_gap': evaluation['expert_gap'],
            })
        rows.append(row)

    frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    write_frame(root / SWEEP_FILE, frame)
    write_json(root / MANIFEST_FILE, {
        'command': 'sweep_lambda',
        'seed': run.train.seed,
        'config': run.as_dict(),
        'points': [name for name, _ in sweep_points(run)],
        'failed': [row['point'] for row in rows if row['error']],
    })
    return frame


def witness_demo(theta, inputs, sol, fraction, lam):
    """
    Shift ``fraction`` of the most likely successor's mass at the most visited
    dataset pair and compare log posteriors at prior precision ``lam``.
    """
    sa_counts = inputs.data.sa_counts
    state, action = (int(i) for i in np.unravel_index(np.argmax(sa_counts), sa_counts.shape))
    perturbation = shift_mass_perturbation(theta.dynamics(), state, action, fraction)
    anchored = theta.replace(lam=lam)
    witness, distance = unidentifiability_witness(anchored, perturbation, sol)
    before = log_posterior(anchored, inputs.data, sol)
    after = log_posterior(witness, inputs.data)
    return {
        'state': state,
        'action': action,
        'fraction': fraction,
        'lam': lam,
        'policy_distance': distance,
        'log_posterior': before,
        'witness_log_posterior': after,
        'posterior_decreased': after < before,
    }


def certify(theta, inputs, fraction, lam, solver_tol):
    """
    Certificate document for one checkpoint: decomposition, T1 check,
    performance bound, model-advantage identity, finite-data error
    estimates and the unidentifiability demonstration.
    """
    if (theta.n_states, theta.n_actions) != (inputs.mdp.n_states, inputs.mdp.n_actions):
        raise InvalidInputError('checkpoint', {'dynamics_logits': 'Shape does not match the MDP.'})
    sol = solve_policy(theta, tol=solver_tol)
    decomposition = decompose_likelihood(theta, inputs.mdp, inputs.expert_policy, sol)
    t1_limit = t1_bound(theta, inputs.mdp, inputs.expert_policy, decomposition)
    t1_check = {
        't1': decomposition.t1,
        'bound': t1_limit,
        'within_bound': abs(decomposition.t1) <= t1_limit + BOUND_SLACK,
    }
    return {
        'decomposition': DecompositionReportSerializer(decomposition).data,
        't1_check': T1CheckSerializer(t1_check).data,
        'performance_bound': BoundReportSerializer(
            performance_bound(theta, inputs.mdp, inputs.expert_policy, sol),
        ).data,
        'model_advantage': ModelAdvantageReportSerializer(
            model_advantage_decomposition(theta, inputs.mdp, inputs.expert_policy, sol),
        ).data,
        'data_estimated_errors': DataErrorsSerializer(data_estimated_errors(theta, inputs.data, sol)).data,
        'witness': WitnessSerializer(witness_demo(theta, inputs, sol, fraction, lam)).data,
    }

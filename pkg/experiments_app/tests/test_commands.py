import json
import shutil
import tempfile
from io import StringIO
from pathlib import Path

import pandas as pd
from django.core.management import call_command, load_command_class
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from estimation_app.api.serializers import ThetaCheckpointSerializer
from estimation_app.exceptions import TrainingDiverged
from estimation_app.models import ThetaParams
from experiments_app.config import build_run_config
from experiments_app.exceptions import InvalidInputError, MissingInputError
from experiments_app.management.base import exit_code_for
from experiments_app.storage import write_json
from gridworld_app.builder import build_gridworld
from gridworld_app.models import GridworldSpec
from mdp_app.exceptions import SolverDidNotConverge

CONFIG = """
[gridworld]
width = 3
height = 3
expert_trajectories = 4
expert_horizon = 6
seed = 0

[train]
lambda1 = 1.0
lambda2 = 10.0
outer_iters = 2
snapshot_every = 1
rollout_batch = 8
rollout_steps = 4
lambda_grid = [0.5]

[output]
eval_rollouts = 5
"""

GEN_EXPERT_FILES = ('mdp.json', 'expert_policy.json', 'gridworld.json', 'dataset.jsonl', 'manifest.json')
RUN_FILES = ('training.csv', 'theta.json', 'snapshots.json', 'evaluation.json', 'manifest.json')


class CommandTestCase(SimpleTestCase):
    """
    Runs the workbench commands against a temporary directory.
    """

    def setUp(self):
        self.root = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.root, ignore_errors=True)
        self.config = self.root / 'config.toml'
        self.config.write_text(CONFIG)
        self.out = self.root / 'run'

    def call(self, name, *args, config=None):
        call_command(name, '--config', str(config or self.config), *args, stdout=StringIO())

    def assert_exit_code(self, code, name, *args, config=None):
        with self.assertRaises(CommandError) as caught:
            self.call(name, *args, config=config)
        self.assertEqual(caught.exception.returncode, code)
        return caught.exception


class GenExpertCommandTests(CommandTestCase):

    def test_writes_inputs(self):
        self.call('gen_expert', '--out', str(self.out))
        for name in GEN_EXPERT_FILES:
            self.assertTrue((self.out / name).is_file(), name)
        lines = (self.out / 'dataset.jsonl').read_text().splitlines()
        self.assertEqual(len(lines), 4)
        self.assertEqual(len(json.loads(lines[0])['actions']), 6)
        manifest = json.loads((self.out / 'manifest.json').read_text())
        self.assertEqual(manifest['n_transitions'], 24)
        self.assertLessEqual(manifest['bellman_residual'], 1e-10)

    def test_reruns_are_byte_identical(self):
        """
        Test that the same config and seed reproduce every file exactly.
        """
        other = self.root / 'again'
        self.call('gen_expert', '--out', str(self.out))
        self.call('gen_expert', '--out', str(other))
        for name in GEN_EXPERT_FILES:
            self.assertEqual((self.out / name).read_bytes(), (other / name).read_bytes(), name)

    def test_seed_override(self):
        other = self.root / 'seeded'
        self.call('gen_expert', '--out', str(self.out))
        self.call('gen_expert', '--out', str(other), '--seed', '5')
        self.assertEqual(json.loads((other / 'manifest.json').read_text())['seed'], 5)

    def test_invalid_config(self):
        bad = self.root / 'bad.toml'
        bad.write_text('[gridworld]\nwidth = 1\n')
        self.assert_exit_code(2, 'gen_expert', '--out', str(self.out), config=bad)

        unknown = self.root / 'unknown.toml'
        unknown.write_text('[train]\nlearning_rate = 0.1\n')
        error = self.assert_exit_code(2, 'gen_expert', '--out', str(self.out), config=unknown)
        self.assertIn('learning_rate', str(error))

    def test_missing_config(self):
        self.assert_exit_code(5, 'gen_expert', config=self.root / 'absent.toml')


class TrainCommandTests(CommandTestCase):
    """
    Tests for training runs and their artifacts.
    """

    def setUp(self):
        super().setUp()
        self.call('gen_expert', '--out', str(self.out))

    def test_bm_irl_run(self):
        self.call('train', '--out', str(self.out), '--variant', 'bm_irl')
        directory = self.out / 'bm_irl'
        for name in RUN_FILES:
            self.assertTrue((directory / name).is_file(), name)
        frame = pd.read_csv(directory / 'training.csv')
        self.assertEqual(list(frame['iter']), [0, 1, 2])
        self.assertIn('illegal_rate', frame.columns)
        evaluation = json.loads((directory / 'evaluation.json').read_text())
        self.assertEqual(evaluation['lambda_effective'], 10.0)
        self.assertGreaterEqual(evaluation['illegal_transition_rate'], 0.0)
        self.assertIn('reward_recovery', evaluation)
        self.assertEqual(len(json.loads((directory / 'snapshots.json').read_text())), 3)
        self.assertFalse((directory / 'rollouts.jsonl').exists())

    def test_dump_rollouts(self):
        self.call('train', '--out', str(self.out), '--variant', 'two_stage', '--dump-rollouts')
        lines = (self.out / 'two_stage' / 'rollouts.jsonl').read_text().splitlines()
        self.assertEqual(len(lines), 5)
        record = json.loads(lines[0])
        self.assertEqual(record['origin'], 'imagined')
        self.assertEqual(len(record['states']), len(record['actions']) + 1)
        self.assertEqual(len(record['actions']), 6)

    def test_two_stage_reports_mle_summary(self):
        self.call('train', '--out', str(self.out), '--variant', 'two_stage')
        evaluation = json.loads((self.out / 'two_stage' / 'evaluation.json').read_text())
        self.assertEqual(evaluation['mle_summary']['smoothing'], 1.0)

    def test_rm_irl_needs_stronger_data_term(self):
        weak = self.root / 'weak.toml'
        weak.write_text(CONFIG.replace('lambda2 = 10.0', 'lambda2 = 1.0'))
        error = self.assert_exit_code(2, 'train', '--out', str(self.out), '--variant', 'rm_irl', config=weak)
        self.assertIn('lambda2', str(error))
        self.assertFalse((self.out / 'rm_irl').exists())

    def test_missing_data(self):
        self.assert_exit_code(5, 'train', '--out', str(self.out), '--data', str(self.root / 'empty'))

    def test_corrupt_dataset(self):
        (self.out / 'dataset.jsonl').write_text('{"states": [0, 1], "actions": [0, 0]}\n')
        self.assert_exit_code(2, 'train', '--out', str(self.out))

    def test_reruns_are_byte_identical(self):
        other = self.root / 'other'
        self.call('train', '--out', str(self.out), '--variant', 'rm_irl')
        shutil.copytree(self.out, other, ignore=shutil.ignore_patterns('rm_irl'))
        self.call('train', '--out', str(other), '--variant', 'rm_irl')
        for name in RUN_FILES:
            self.assertEqual(
                (self.out / 'rm_irl' / name).read_bytes(), (other / 'rm_irl' / name).read_bytes(), name,
            )


class SweepCommandTests(CommandTestCase):

    def setUp(self):
        super().setUp()
        self.call('gen_expert', '--out', str(self.out))

    def test_sweep_table(self):
        """
        Test one row per λ plus the two-stage baseline, reproducible across reruns.
        """
        self.call('sweep_lambda', '--out', str(self.out), '--lambdas', '0.5', '10')
        frame = pd.read_csv(self.out / 'sweep' / 'sweep.csv', keep_default_na=False)
        self.assertEqual(list(frame['point']), ['lambda_0.5', 'lambda_10', 'two_stage'])
        self.assertTrue((frame['error'] == '').all())
        self.assertTrue((self.out / 'sweep' / 'lambda_10' / 'theta.json').is_file())

        other = self.root / 'other'
        shutil.copytree(self.out, other, ignore=shutil.ignore_patterns('sweep'))
        self.call('sweep_lambda', '--out', str(other), '--lambdas', '0.5', '10')
        self.assertEqual(
            (self.out / 'sweep' / 'sweep.csv').read_bytes(), (other / 'sweep' / 'sweep.csv').read_bytes(),
        )


class CertifyCommandTests(CommandTestCase):
    """
    Tests for certificates of trained and hand-made checkpoints.
    """

    def setUp(self):
        super().setUp()
        self.call('gen_expert', '--out', str(self.out))

    def test_trained_checkpoint(self):
        self.call('train', '--out', str(self.out), '--variant', 'bm_irl')
        checkpoint = self.out / 'bm_irl' / 'theta.json'
        self.call('certify', '--data', str(self.out), '--checkpoint', str(checkpoint))
        certificate = json.loads((self.out / 'bm_irl' / 'certificate.json').read_text())
        self.assertLessEqual(certificate['decomposition']['residual'], 1e-8)
        self.assertTrue(certificate['t1_check']['within_bound'])
        self.assertTrue(certificate['performance_bound']['holds'])
        self.assertLessEqual(certificate['model_advantage']['residual'], 1e-8)
        self.assertLessEqual(certificate['witness']['policy_distance'], 1e-8)

    def test_ground_truth_checkpoint(self):
        """
        Test that the true parameters certify with T1 = 0.
        """
        spec = GridworldSpec(width=3, height=3)
        theta = ThetaParams.from_mdp(build_gridworld(spec), reward_logits=spec.target_logits())
        checkpoint = write_json(self.root / 'truth' / 'theta.json', ThetaCheckpointSerializer(theta).data)
        self.call('certify', '--data', str(self.out), '--checkpoint', str(checkpoint), '--out', str(self.root / 'certs'))
        certificate = json.loads((self.root / 'certs' / 'truth' / 'certificate.json').read_text())
        self.assertAlmostEqual(certificate['decomposition']['t1'], 0.0, places=10)
        self.assertLessEqual(certificate['performance_bound']['observed_gap'], 1e-7)

    def test_corrupt_checkpoint(self):
        checkpoint = self.root / 'broken' / 'theta.json'
        checkpoint.parent.mkdir()
        checkpoint.write_text(json.dumps({
            'reward_logits': [0.0] * 9, 'dynamics_logits': 'oops', 'lam': 0.0,
            'discount': 0.7, 'init_dist': [1.0] + [0.0] * 8,
        }))
        error = self.assert_exit_code(2, 'certify', '--data', str(self.out), '--checkpoint', str(checkpoint))
        self.assertIn('dynamics_logits', str(error))

    def test_mismatched_checkpoint(self):
        theta = ThetaParams.from_mdp(build_gridworld(GridworldSpec()))
        checkpoint = write_json(self.root / 'large' / 'theta.json', ThetaCheckpointSerializer(theta).data)
        self.assert_exit_code(2, 'certify', '--data', str(self.out), '--checkpoint', str(checkpoint))


class RunConfigTests(SimpleTestCase):

    def test_defaults_come_from_settings(self):
        run = build_run_config()
        self.assertEqual(run.spec.width, 5)
        self.assertEqual(run.expert_trajectories, 100)
        self.assertEqual(run.train.outer_iters, 2000)
        self.assertEqual(run.lambda_grid, (0.001, 0.5, 10.0))

    def test_overrides(self):
        run = build_run_config({'train': {'variant': 'two_stage'}}, seed=3, variant='bm_irl', out='elsewhere')
        self.assertEqual((run.expert_seed, run.train.seed), (3, 3))
        self.assertEqual(run.train.variant, 'bm_irl')
        self.assertEqual(str(run.directory), 'elsewhere')

    def test_unknown_section(self):
        with self.assertRaises(InvalidInputError) as caught:
            build_run_config({'plots': {}})
        self.assertIn('plots', caught.exception.errors)

    def test_exit_codes(self):
        self.assertEqual(exit_code_for(MissingInputError('x')), 5)
        self.assertEqual(exit_code_for(TrainingDiverged(3, 'falling')), 4)
        self.assertEqual(exit_code_for(SolverDidNotConverge(1.0, 10)), 3)
        self.assertEqual(exit_code_for(InvalidInputError('x', {})), 2)

    def test_help_names_hyphenated_steps(self):
        for name, step in (('gen_expert', 'gen-expert'), ('sweep_lambda', 'sweep-lambda')):
            self.assertTrue(load_command_class('experiments_app', name).help.startswith(step), name)

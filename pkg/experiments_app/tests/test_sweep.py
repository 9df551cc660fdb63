import shutil
import tempfile
from pathlib import Path

from django.test import SimpleTestCase, tag

from experiments_app.config import build_run_config
from experiments_app.runner import generate_expert, load_inputs, sweep_lambda


@tag('slow')
class DefaultSweepTests(SimpleTestCase):
    """
    Full λ sweep on the default 5x5 gridworld and seed.
    """

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.root = Path(tempfile.mkdtemp())
        run = build_run_config(out=str(cls.root))
        generate_expert(run)
        frame = sweep_lambda(load_inputs(cls.root), run)
        cls.rows = frame.set_index('point')

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.root, ignore_errors=True)
        super().tearDownClass()

    def test_every_point_completes(self):
        self.assertEqual(list(self.rows.index), ['lambda_0.001', 'lambda_0.5', 'lambda_10', 'two_stage'])
        self.assertTrue((self.rows['error'] == '').all())

    def test_goal_is_recovered(self):
        for point in ('lambda_0.5', 'lambda_10'):
            self.assertTrue(bool(self.rows.loc[point, 'goal_argmax']), point)

    def test_stronger_prior_avoids_illegal_moves(self):
        """
        Test that the illegal-transition rate does not rise with λ and that
        λ = 10 beats the two-stage baseline.
        """
        rates = self.rows['illegal_rate']
        self.assertGreaterEqual(rates['lambda_0.001'], rates['lambda_0.5'])
        self.assertGreaterEqual(rates['lambda_0.5'], rates['lambda_10'])
        self.assertLess(rates['lambda_10'], rates['two_stage'])

from pathlib import Path

from experiments_app.management.base import WorkbenchCommand
from experiments_app.runner import load_inputs, train_and_write


class Command(WorkbenchCommand):
    help = 'Train one estimator variant on the expert data and write its record and evaluation.'
    uses_variant = True

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--data', help='Directory written by gen_expert; defaults to the output directory.')
        parser.add_argument(
            '--dump-rollouts', action='store_true',
            help='Also write the imagined evaluation rollouts to rollouts.jsonl.',
        )

    def run(self, run_config, **options):
        cfg = run_config.train
        inputs = load_inputs(Path(options.get('data') or run_config.directory))
        directory = run_config.directory / cfg.variant
        _, evaluation = train_and_write(
            inputs, cfg, run_config, directory, dump_rollouts=options.get('dump_rollouts', False),
        )

        summary = f'{cfg.variant}: expert gap {evaluation["expert_gap"]:.4g}'
        if 'illegal_transition_rate' in evaluation:
            summary += f', illegal rate {evaluation["illegal_transition_rate"]:.4f}'
        self.stdout.write(self.style.SUCCESS(f'{summary}; results in {directory}'))

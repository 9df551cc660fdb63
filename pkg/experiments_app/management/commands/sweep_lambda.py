from dataclasses import replace
from pathlib import Path

from experiments_app.management.base import WorkbenchCommand
from experiments_app.runner import SWEEP_DIRECTORY, load_inputs, sweep_lambda


class Command(WorkbenchCommand):
    help = 'sweep-lambda: train BM-IRL over a grid of prior precisions plus the two-stage baseline.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--data', help='Directory written by gen_expert; defaults to the output directory.')
        parser.add_argument('--lambdas', type=float, nargs='+', help='Overrides the configured λ grid.')

    def run(self, run_config, **options):
        if options.get('lambdas'):
            run_config = replace(run_config, lambda_grid=tuple(options['lambdas']))
        inputs = load_inputs(Path(options.get('data') or run_config.directory))
        frame = sweep_lambda(inputs, run_config)

        failed = int((frame['error'] != '').sum())
        message = f'{len(frame)} sweep points written to {run_config.directory / SWEEP_DIRECTORY}'
        if failed:
            self.stdout.write(self.style.WARNING(f'{message}; {failed} failed'))
        else:
            self.stdout.write(self.style.SUCCESS(message))

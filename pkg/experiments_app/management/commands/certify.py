from pathlib import Path

from experiments_app.management.base import WorkbenchCommand
from experiments_app.runner import certify, load_checkpoint, load_inputs
from experiments_app.storage import CERTIFICATE_FILE, write_json


class Command(WorkbenchCommand):
    help = 'Certify the likelihood decomposition and performance bounds of trained checkpoints.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--checkpoint', nargs='+', required=True, help='theta.json files to certify.')
        parser.add_argument('--data', help='Directory written by gen_expert; defaults to the output directory.')

    def run(self, run_config, **options):
        inputs = load_inputs(Path(options.get('data') or run_config.directory))
        for checkpoint in options['checkpoint']:
            checkpoint = Path(checkpoint)
            theta = load_checkpoint(checkpoint)
            document = certify(
                theta, inputs, run_config.witness_fraction, run_config.witness_lambda, run_config.train.solver_tol,
            )
            target = checkpoint.parent / CERTIFICATE_FILE
            if options.get('out'):
                target = Path(options['out']) / checkpoint.parent.name / CERTIFICATE_FILE
            write_json(target, document)

            bound = document['performance_bound']
            style = self.style.SUCCESS if bound['holds'] else self.style.ERROR
            self.stdout.write(style(
                f'{checkpoint}: residual {document["decomposition"]["residual"]:.2e}, '
                f'bound holds: {bound["holds"]}, certificate {target}'
            ))

"""
Shared plumbing of the workbench management commands.
"""
from django.core.management.base import BaseCommand, CommandError

from analysis_app.exceptions import InvalidPerturbationError
from core.exceptions import WorkbenchError
from estimation_app.exceptions import InvalidConfigError, InvalidParametersError, TrainingDiverged
from estimation_app.models import VARIANTS
from experiments_app.config import load_run_config
from experiments_app.exceptions import InvalidInputError, MissingInputError
from gridworld_app.exceptions import InvalidGridworldError
from mdp_app.exceptions import InvalidMdpError, OccupancySolveError, SolverDidNotConverge

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_DIVERGED = 4
EXIT_MISSING_INPUT = 5

EXIT_CODES = (
    (MissingInputError, EXIT_MISSING_INPUT),
    (TrainingDiverged, EXIT_DIVERGED),
    ((SolverDidNotConverge, OccupancySolveError), EXIT_SOLVER),
    (
        (
            InvalidInputError, InvalidConfigError, InvalidParametersError,
            InvalidGridworldError, InvalidMdpError, InvalidPerturbationError,
        ),
        EXIT_CONFIG,
    ),
)


def exit_code_for(exc):
    for classes, code in EXIT_CODES:
        if isinstance(exc, classes):
            return code
    return 1


class WorkbenchCommand(BaseCommand):
    """
    Base class for experiment commands.

    Subclasses implement ``run(run_config, **options)``; workbench errors are
    converted to ``CommandError`` with the exit status of their category:
    2 configuration or validation, 3 solver failure, 4 divergence abort,
    5 missing input file.
    """
    uses_variant = False

    def add_arguments(self, parser):
        parser.add_argument('--config', help='TOML run config; project defaults when omitted.')
        parser.add_argument('--out', help='Output directory, overrides [output].directory.')
        parser.add_argument('--seed', type=int, help='Overrides the seeds of the config.')
        if self.uses_variant:
            parser.add_argument('--variant', choices=VARIANTS, help='Overrides [train].variant.')

    def handle(self, *args, **options):
        try:
            run_config = load_run_config(
                options.get('config'),
                seed=options.get('seed'),
                variant=options.get('variant'),
                out=options.get('out'),
            )
            self.run(run_config, **options)
        except WorkbenchError as exc:
            raise CommandError(str(exc), returncode=exit_code_for(exc)) from exc
        except OSError as exc:
            raise CommandError(f'cannot write results: {exc}', returncode=EXIT_CONFIG) from exc

    def run(self, run_config, **options):
        raise NotImplementedError

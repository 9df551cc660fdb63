from experiments_app.management.base import WorkbenchCommand
from experiments_app.runner import generate_expert


class Command(WorkbenchCommand):
    help = 'gen-expert: build the gridworld, solve for the soft-optimal expert and sample its demonstrations.'

    def run(self, run_config, **options):
        data, solution = generate_expert(run_config)
        self.stdout.write(self.style.SUCCESS(
            f'{len(data.trajectories)} trajectories, {data.n_transitions} transitions '
            f'(residual {solution.bellman_residual:.2e}) written to {run_config.directory}'
        ))

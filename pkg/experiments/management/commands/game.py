from experiments.management.base import ExperimentCommand, fmt
from experiments.output import write_csv
from experiments.parsing import load_instance
from experiments.runner import GAME_COLUMNS, compute_game_deviation


class Command(ExperimentCommand):
    help = "Compare the simulated per-player flow of a game with its closed form"
    name = "game"
    recorded_options = ("eta", "iters")

    def add_arguments(self, parser):
        parser.add_argument("instance", help="game file, or the name of a bundled game")
        parser.add_argument("--eta", type=float, default=1e-3, help="Euler stepsize")
        parser.add_argument("--iters", type=int, default=1000, help="number of Euler steps")
        super().add_arguments(parser)

    def run(self, **options):
        instance = load_instance(options["instance"])
        table = compute_game_deviation(instance, stepsize=options["eta"], iters=options["iters"])
        out = self.output_dir(options, instance.name)
        write_csv(out / "deviation.csv", GAME_COLUMNS, table)
        self.record(options["instance"], options, out)

        self.stdout.write(f"players        {instance.program.num_players}")
        self.stdout.write(f"actions        {instance.program.num_actions}")
        self.stdout.write(f"final t        {fmt(float(table[-1, 0]))}")
        self.stdout.write(f"max TV         {fmt(float(table[:, 1].max()))}")
        self.stdout.write(self.style.SUCCESS(f"wrote {out / 'deviation.csv'}"))

from experiments.management.base import ExperimentCommand, add_instance_arguments, fmt, recipe_overrides
from experiments.output import write_csv
from experiments.parsing import load_instance
from experiments.runner import RATES_COLUMNS, compute_rates


class Command(ExperimentCommand):
    help = "Print and save the rate constants of an LP or MDP instance"
    name = "rates"
    recorded_options = ("alpha",)

    def add_arguments(self, parser):
        add_instance_arguments(parser)
        super().add_arguments(parser)

    def run(self, **options):
        instance = load_instance(options["instance"], recipe_overrides(options))
        report = compute_rates(instance)
        out = self.output_dir(options, instance.name)
        write_csv(out / "rates.csv", RATES_COLUMNS, [report.row()])
        self.record(options["instance"], options, out)

        self.stdout.write(f"instance       {instance.name} ({instance.kind})")
        self.stdout.write(f"delta          {fmt(report.delta)}")
        self.stdout.write(f"delta_lower    {fmt(report.delta_lower)}")
        self.stdout.write(f"delta_K        {fmt(report.delta_kakade)}")
        self.stdout.write(f"t0             {fmt(report.t0)}")
        self.stdout.write(f"optimal value  {fmt(report.optimal_value)}")
        self.stdout.write(f"face size      {report.face_size}")
        for actions, reward in report.deterministic_rewards.items():
            self.stdout.write(f"R{actions}  {fmt(reward)}")
        self.stdout.write(self.style.SUCCESS(f"wrote {out / 'rates.csv'}"))

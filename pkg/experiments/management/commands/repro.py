from experiments.management.base import ExperimentCommand, fmt
from experiments.output import render_svg, write_csv
from experiments.runner import FIGURES, preconditioners_from_flag, repro_panels, run_repro
from npg.models import TrajectoryLog


class Command(ExperimentCommand):
    help = "Re-run the seeded NPG experiments on the bundled two-state MDPs"
    name = "repro"
    recorded_options = ("eta", "iters", "seeds", "preconditioner", "parametrization")

    def add_arguments(self, parser):
        parser.add_argument("figure", choices=sorted(FIGURES))
        parser.add_argument("--eta", type=float, default=None, help="NPG stepsize (default: FRFLOW NPG_STEPSIZE)")
        parser.add_argument("--iters", type=int, default=None, help="iterations per run (default: FRFLOW NPG_ITERS)")
        parser.add_argument("--seeds", type=int, default=30, help="number of seeds, starting at 0")
        parser.add_argument("--preconditioner", choices=["state-action", "kakade"], default=None,
                            help="run one preconditioner only")
        parser.add_argument("--parametrization", default="softmax", help="softmax, escort:P or loglinear:PATH")
        super().add_arguments(parser)

    def run(self, **options):
        seeds = list(range(options["seeds"]))
        result = run_repro(
            options["figure"],
            seeds,
            stepsize=options["eta"],
            iters=options["iters"],
            preconditioners=preconditioners_from_flag(options["preconditioner"]),
            parametrization=options["parametrization"],
        )
        out = self.output_dir(options, options["figure"])
        for kind, logs in result.runs.items():
            for log in logs:
                write_csv(out / kind / f"seed{log.seed:03d}.csv", TrajectoryLog.CSV_COLUMNS, log.rows())
        kinds = tuple(result.slopes)
        write_csv(
            out / "slopes.csv",
            ("seed",) + kinds,
            [(seed,) + tuple(result.slopes[kind][i] for kind in kinds) for i, seed in enumerate(seeds)],
        )
        render_svg(out / f"{options['figure']}.svg", f"NPG on {options['figure']}", repro_panels(result))
        self.record(options["figure"], options, out, seeds=seeds)

        rates = result.rates
        self.stdout.write(f"delta          {fmt(rates.delta_rate)}")
        self.stdout.write(f"delta_K        {fmt(rates.delta_kakade)}")
        for kind in kinds:
            slopes = result.slopes[kind]
            self.stdout.write(
                f"{kind:<14} KL tail slope in [{fmt(float(slopes.min()))}, {fmt(float(slopes.max()))}]"
            )
        self.stdout.write(self.style.SUCCESS(f"wrote {len(seeds) * len(kinds)} runs to {out}"))

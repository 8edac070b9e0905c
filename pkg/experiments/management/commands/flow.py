import logging

from experiments.management.base import ExperimentCommand, add_instance_arguments, fmt, recipe_overrides
from experiments.output import render_svg, write_csv
from experiments.parsing import load_instance
from experiments.runner import compute_flow, flow_panels
from flow.bounds import check_bound_chain

logger = logging.getLogger(__name__)


class Command(ExperimentCommand):
    help = "Integrate the Fisher-Rao gradient flow of an instance on a time grid"
    name = "flow"
    recorded_options = ("alpha", "t_max", "grid_points", "svg")

    def add_arguments(self, parser):
        add_instance_arguments(parser)
        parser.add_argument("--t-max", type=float, default=None, help="last grid time (default: horizon / delta)")
        parser.add_argument("--grid-points", type=int, default=None, help="number of grid times")
        parser.add_argument("--svg", action="store_true", help="also write log-scale plots")
        super().add_arguments(parser)

    def run(self, **options):
        instance = load_instance(options["instance"], recipe_overrides(options))
        trajectory = compute_flow(instance, t_max=options["t_max"], grid_points=options["grid_points"])
        out = self.output_dir(options, instance.name)
        write_csv(out / "trajectory.csv", trajectory.CSV_COLUMNS, trajectory.rows())
        if options["svg"]:
            render_svg(out / "trajectory.svg", f"Fisher-Rao flow on {instance.name}", flow_panels(trajectory))
        self.record(options["instance"], options, out)

        violations = check_bound_chain(trajectory)
        for name, index in violations:
            logger.warning("%s violated at t=%g", name, trajectory.times[index])
        self.stdout.write(f"grid points    {len(trajectory)}")
        self.stdout.write(f"final t        {fmt(float(trajectory.times[-1]))}")
        self.stdout.write(f"final gap      {fmt(float(trajectory.gap[-1]))}")
        self.stdout.write(f"final KL       {fmt(float(trajectory.kl[-1]))}")
        self.stdout.write(f"bound checks   {'ok' if not violations else f'{len(violations)} violations'}")
        self.stdout.write(self.style.SUCCESS(f"wrote {out / 'trajectory.csv'}"))

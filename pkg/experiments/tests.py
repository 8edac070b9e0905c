import json
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from frflow.exceptions import InstanceParseError
from lp_geometry.models import SimplexLp
from mdp_core.catalog import kakade_example
from mdp_core.models import Mdp
from games.models import FactorizedCost

from .models import ExperimentManifest
from .output import Panel, Series, render_svg, write_csv
from .parsing import BUNDLED_DIR, load_instance, parse_instance

BUNDLED_KINDS = {
    "kakade2x2": "mdp",
    "kakade2x2-variant": "mdp",
    "degenerate2x2": "mdp",
    "simplex3": "lp",
    "ex35": "recipe",
    "game2x3": "game",
}


def read_table(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


class ParsingTests(SimpleTestCase):
    def test_bundled_instances_load(self):
        self.assertEqual(sorted(path.stem for path in BUNDLED_DIR.glob("*.txt")), sorted(BUNDLED_KINDS))
        for name, kind in BUNDLED_KINDS.items():
            with self.subTest(name=name):
                instance = load_instance(name)
                self.assertEqual(instance.kind, kind)
                self.assertEqual(instance.name, name)

    def test_two_state_file_matches_the_catalog(self):
        mdp = load_instance("kakade2x2").program
        expected = kakade_example()
        self.assertIsInstance(mdp, Mdp)
        np.testing.assert_array_equal(mdp.transition, expected.transition)
        np.testing.assert_array_equal(mdp.reward, expected.reward)
        np.testing.assert_array_equal(mdp.initial.weights, expected.initial.weights)
        self.assertEqual(mdp.discount, 0.9)

    def test_variant_file_matches_the_catalog(self):
        mdp = load_instance("kakade2x2-variant").program
        np.testing.assert_array_equal(mdp.reward, kakade_example(3.0).reward)

    def test_game_file_is_separable(self):
        fc = load_instance("game2x3").program
        self.assertIsInstance(fc, FactorizedCost)
        self.assertEqual((fc.num_players, fc.num_actions), (2, 3))
        np.testing.assert_allclose(fc.flat(), [1.5, 1.0, 2.0, 0.5, 0.0, 1.0, 2.5, 2.0, 3.0], atol=1e-12)

    def test_comments_and_constraints(self):
        text = "\n".join([
            "# a square",
            "kind lp",
            "",
            "atoms 4      # four atoms",
            "cost 1 0 0 0",
            "constraint 1 1 0 0 = 0.5",
        ])
        lp = parse_instance(text).program
        self.assertIsInstance(lp, SimplexLp)
        np.testing.assert_array_equal(lp.constraint_rhs, [0.5])

    def test_bad_number_reports_line_and_column(self):
        with self.assertRaises(InstanceParseError) as raised:
            parse_instance("kind lp\natoms 3\ncost 1 x 0\n")
        self.assertEqual((raised.exception.line, raised.exception.column), (3, 8))
        self.assertEqual(raised.exception.exit_code, 2)

    def test_unknown_keyword(self):
        with self.assertRaises(InstanceParseError) as raised:
            parse_instance("kind game\nplayers 2\n  weights 1 2\n")
        self.assertEqual((raised.exception.line, raised.exception.column), (3, 3))

    def test_kind_comes_first(self):
        with self.assertRaises(InstanceParseError) as raised:
            parse_instance("atoms 3\nkind lp\n")
        self.assertEqual(raised.exception.line, 1)
        with self.assertRaises(InstanceParseError):
            parse_instance("kind polytope\n")
        with self.assertRaises(InstanceParseError):
            parse_instance("# nothing here\n")

    def test_repeated_scalar(self):
        with self.assertRaises(InstanceParseError) as raised:
            parse_instance("kind lp\natoms 2\natoms 3\n")
        self.assertEqual(raised.exception.line, 3)

    def test_constraint_needs_a_right_hand_side(self):
        with self.assertRaises(InstanceParseError) as raised:
            parse_instance("kind lp\natoms 2\ncost 1 0\nconstraint 1 0\n")
        self.assertEqual(raised.exception.line, 4)

    def test_shape_errors_point_at_the_keyword(self):
        text = "\n".join([
            "kind mdp",
            "states 2",
            "actions 1",
            "gamma 0.5",
            "mu 0.2 0.3 0.5",
            "reward 1",
            "reward 0",
            "transition 1 0",
            "transition 0 1",
        ])
        with self.assertRaises(InstanceParseError) as raised:
            parse_instance(text)
        self.assertEqual(raised.exception.line, 5)
        self.assertIn("mu", str(raised.exception))

    def test_discount_must_be_below_one(self):
        text = "kind mdp\nstates 1\nactions 1\ngamma 1\nmu 1\nreward 1\ntransition 1\n"
        with self.assertRaises(InstanceParseError) as raised:
            parse_instance(text)
        self.assertEqual(raised.exception.line, 4)

    def test_recipe_override(self):
        lp = load_instance("ex35", {"alpha": 0.3}).program
        np.testing.assert_allclose(lp.constraint_rhs, [0.3])
        with self.assertRaises(InstanceParseError):
            load_instance("ex35", {"alpha": 1.5})

    def test_override_must_apply(self):
        with self.assertRaises(InstanceParseError):
            load_instance("simplex3", {"alpha": 0.3})

    def test_missing_file(self):
        with self.assertRaises(InstanceParseError):
            load_instance("no/such/instance")


class OutputTests(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.dir = Path(tmp.name)

    def test_csv_keeps_seventeen_digits(self):
        path = write_csv(self.dir / "sub" / "table.csv", ("t", "value"), [(0.1, 1.0 / 3.0), (2, np.nan)])
        self.assertEqual(path.read_text(), "t,value\n0.10000000000000001,0.33333333333333331\n2,nan\n")

    def test_csv_is_byte_stable(self):
        rows = np.random.default_rng(0).random((5, 3))
        first = write_csv(self.dir / "a.csv", ("x", "y", "z"), rows).read_bytes()
        second = write_csv(self.dir / "b.csv", ("x", "y", "z"), rows).read_bytes()
        self.assertEqual(first, second)
        np.testing.assert_array_equal(read_table(self.dir / "a.csv"), rows)

    def test_svg_drops_values_off_the_log_axis(self):
        t = np.linspace(0.0, 5.0, 50)
        y = np.exp(-t)
        y[10] = 0.0
        y[20] = np.nan
        panel = Panel("decay", "t", "value", (Series("exp(-t)", t, y), Series("empty", t, np.zeros_like(t))))
        svg = render_svg(self.dir / "plot.svg", "test", [panel]).read_text()
        self.assertTrue(svg.startswith("<svg"))
        self.assertEqual(svg.count("<polyline"), 1)
        self.assertIn("1e-3", svg)
        self.assertIn("exp(-t)", svg)


class CommandTestCase(TestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.dir = Path(tmp.name)

    def call(self, *args, **options):
        stdout = StringIO()
        call_command(*args, stdout=stdout, stderr=StringIO(), **options)
        return stdout.getvalue()

    def write_instance(self, text, name="instance.txt"):
        path = self.dir / name
        path.write_text(text)
        return str(path)


class RatesCommandTests(CommandTestCase):
    def test_two_state_example(self):
        output = self.call("rates", "kakade2x2", out=str(self.dir))
        delta, delta_lower, delta_kakade, t0, value, face_size = read_table(self.dir / "rates.csv")[0]
        self.assertAlmostEqual(delta, 0.8, delta=1e-9)
        self.assertAlmostEqual(delta_lower, 0.64, delta=1e-9)
        self.assertAlmostEqual(delta_kakade, 0.8, delta=1e-9)
        self.assertGreater(t0, 0.0)
        self.assertEqual(face_size, 1)
        for actions, reward in (("(0, 1)", "0.98"), ("(0, 0)", "1.2"), ("(1, 0)", "1.84"), ("(1, 1)", "0")):
            self.assertIn(f"R{actions}  {reward}\n", output)

    def test_variant(self):
        self.call("rates", "kakade2x2-variant", out=str(self.dir))
        delta, delta_lower, delta_kakade = read_table(self.dir / "rates.csv")[0][:3]
        self.assertAlmostEqual(delta, 0.5789, delta=1e-3)
        self.assertAlmostEqual(delta_lower, 0.5326, delta=1e-3)
        self.assertAlmostEqual(delta_kakade, 1.1, delta=1e-9)

    def test_improvement_recipe(self):
        for alpha in (0.1, 0.3, 0.5, 0.9):
            with self.subTest(alpha=alpha):
                self.call("rates", "ex35", alpha=alpha, out=str(self.dir))
                delta, delta_lower, delta_kakade = read_table(self.dir / "rates.csv")[0][:3]
                self.assertAlmostEqual(delta, 1.0, delta=1e-9)
                self.assertAlmostEqual(delta_lower, 1.0 - alpha, delta=1e-9)
                self.assertTrue(np.isnan(delta_kakade))

    def test_degenerate_optimum_has_no_t0(self):
        output = self.call("rates", "degenerate2x2", out=str(self.dir))
        row = read_table(self.dir / "rates.csv")[0]
        self.assertTrue(np.isnan(row[3]))
        self.assertEqual(row[5], 2)
        self.assertIn("t0             n/a", output)

    def test_records_a_manifest(self):
        self.call("rates", "ex35", alpha=0.3, out=str(self.dir))
        manifest = ExperimentManifest.objects.get()
        self.assertEqual((manifest.command, manifest.instance_path), ("rates", "ex35"))
        self.assertEqual(manifest.overrides, {"alpha": 0.3})
        on_disk = json.loads((self.dir / "manifest.json").read_text())
        self.assertEqual(on_disk["id"], manifest.pk)
        self.assertEqual(on_disk["output_dir"], str(self.dir))

    def test_exit_codes(self):
        bad = self.write_instance("kind lp\natoms 3\ncost 1 x 0\n")
        with self.assertRaises(CommandError) as raised:
            self.call("rates", bad, out=str(self.dir))
        self.assertEqual(raised.exception.returncode, 2)
        self.assertIn("line 3, column 8", str(raised.exception))

        constant = self.write_instance("kind lp\natoms 2\ncost 1 1\n", "constant.txt")
        with self.assertRaises(CommandError) as raised:
            self.call("rates", constant, out=str(self.dir))
        self.assertEqual(raised.exception.returncode, 4)
        self.assertIn("TrivialProgram", str(raised.exception))

        with self.assertRaises(CommandError) as raised:
            self.call("rates", "game2x3", out=str(self.dir))
        self.assertEqual(raised.exception.returncode, 4)


class FlowCommandTests(CommandTestCase):
    def test_simplex_gap_is_monotone(self):
        output = self.call("flow", "simplex3", t_max=10.0, out=str(self.dir))
        path = self.dir / "trajectory.csv"
        self.assertEqual(
            path.read_text().splitlines()[0], "t,gap,kl,sublinear_bound,linear_bound_kl,linear_bound_value"
        )
        table = read_table(path)
        self.assertEqual(table.shape, (200, 6))
        self.assertAlmostEqual(table[-1, 0], 10.0)
        self.assertTrue(np.all(np.diff(table[:, 1]) <= 1e-12))
        self.assertIn("bound checks   ok", output)

    def test_two_state_gap_below_the_sublinear_bound(self):
        self.call("flow", "kakade2x2", t_max=60.0, out=str(self.dir))
        table = read_table(self.dir / "trajectory.csv")
        gap, bound = table[1:, 1], table[1:, 3]
        self.assertTrue(np.all(gap <= bound * (1 + 1e-9) + 1e-12))

    def test_improvement_recipe_converges(self):
        self.call("flow", "ex35", t_max=40.0, out=str(self.dir))
        table = read_table(self.dir / "trajectory.csv")
        self.assertLess(table[-1, 2], 1e-8)

    def test_svg(self):
        self.call("flow", "simplex3", t_max=5.0, grid_points=50, svg=True, out=str(self.dir))
        svg = (self.dir / "trajectory.svg").read_text()
        self.assertIn("<polyline", svg)
        self.assertIn("KL0 / t", svg)
        self.assertEqual(ExperimentManifest.objects.get().overrides["grid_points"], 50)

    def test_rerun_is_byte_identical(self):
        self.call("flow", "kakade2x2", t_max=20.0, grid_points=40, out=str(self.dir / "a"))
        self.call("replay", str(self.dir / "a"), out=str(self.dir / "b"))
        first = (self.dir / "a" / "trajectory.csv").read_bytes()
        self.assertEqual(first, (self.dir / "b" / "trajectory.csv").read_bytes())


class GameCommandTests(CommandTestCase):
    def test_bundled_game_tracks_the_closed_form(self):
        output = self.call("game", "game2x3", out=str(self.dir))
        table = read_table(self.dir / "deviation.csv")
        self.assertEqual(table.shape, (1001, 2))
        self.assertAlmostEqual(table[-1, 0], 1.0)
        self.assertLess(table[:, 1].max(), 1e-3)
        self.assertIn("max TV", output)

    def test_zero_cost(self):
        path = self.write_instance("kind game\nplayers 2\nactions 2\ncost 0 0 0 0\n")
        self.call("game", path, iters=50, out=str(self.dir))
        self.assertLess(read_table(self.dir / "deviation.csv")[:, 1].max(), 1e-15)

    def test_single_player(self):
        path = self.write_instance("kind game\nplayers 1\nactions 3\ncost 0.2 -0.5 1\n")
        self.call("game", path, out=str(self.dir))
        self.assertLess(read_table(self.dir / "deviation.csv")[:, 1].max(), 1e-10)

    def test_coordination_game_is_rejected(self):
        path = self.write_instance("kind game\nplayers 2\nactions 2\ncost 1 0\ncost 0 1\n")
        with self.assertRaises(CommandError) as raised:
            self.call("game", path, out=str(self.dir))
        self.assertEqual(raised.exception.returncode, 4)
        self.assertIn("NotFactorizable", str(raised.exception))


class ReproCommandTests(CommandTestCase):
    def test_writes_every_seed(self):
        output = self.call("repro", "fig2", seeds=2, iters=200, out=str(self.dir))
        for kind in ("state_action", "kakade"):
            for seed in (0, 1):
                path = self.dir / kind / f"seed{seed:03d}.csv"
                self.assertEqual(path.read_text().splitlines()[0], "k,reward,gap,kl,eps,chi2")
                table = read_table(path)
                self.assertEqual(table.shape, (200, 6))
                np.testing.assert_array_equal(table[:, 0], np.arange(200))
        slopes = read_table(self.dir / "slopes.csv")
        self.assertEqual(slopes.shape, (2, 3))
        self.assertTrue(np.all(slopes[:, 1:] < 0))
        self.assertIn("<polyline", (self.dir / "fig2.svg").read_text())
        self.assertEqual(ExperimentManifest.objects.get().seeds, [0, 1])
        self.assertIn("state_action", output)

    def test_variant_figure_draws_both_references(self):
        self.call("repro", "fig3", seeds=1, iters=100, preconditioner="kakade", out=str(self.dir))
        self.assertFalse((self.dir / "state_action").exists())
        svg = (self.dir / "fig3.svg").read_text()
        self.assertIn("exp(-delta t)", svg)
        self.assertIn("exp(-delta_K t)", svg)

    def test_replay_by_id_is_byte_identical(self):
        self.call("repro", "fig3", seeds=1, iters=150, preconditioner="state-action", out=str(self.dir / "a"))
        manifest = ExperimentManifest.objects.get()
        self.call("replay", str(manifest.pk), out=str(self.dir / "b"))
        relative = Path("state_action") / "seed000.csv"
        self.assertEqual((self.dir / "a" / relative).read_bytes(), (self.dir / "b" / relative).read_bytes())
        self.assertEqual(ExperimentManifest.objects.count(), 2)

    def test_escort_parametrization(self):
        self.call("repro", "fig2", seeds=1, iters=50, parametrization="escort:2", out=str(self.dir))
        self.assertEqual(read_table(self.dir / "kakade" / "seed000.csv").shape, (50, 6))

    def test_log_linear_features_file(self):
        features = self.dir / "features.txt"
        np.savetxt(features, np.eye(4))
        self.call(
            "repro", "fig2", seeds=1, iters=30, preconditioner="state-action",
            parametrization=f"loglinear:{features}", out=str(self.dir / "run"),
        )
        self.assertEqual(read_table(self.dir / "run" / "state_action" / "seed000.csv").shape, (30, 6))

        np.savetxt(features, np.eye(3))
        with self.assertRaises(CommandError) as raised:
            self.call("repro", "fig2", seeds=1, iters=30, parametrization=f"loglinear:{features}", out=str(self.dir))
        self.assertEqual(raised.exception.returncode, 2)

    def test_bad_flags(self):
        with self.assertRaises(CommandError) as raised:
            self.call("repro", "fig2", seeds=1, iters=10, parametrization="gaussian", out=str(self.dir))
        self.assertEqual(raised.exception.returncode, 2)
        with self.assertRaises(CommandError) as raised:
            self.call("repro", "fig2", seeds=1, iters=10, preconditioner="identity", out=str(self.dir))
        self.assertEqual(raised.exception.returncode, 2)


class ReplayCommandTests(CommandTestCase):
    def test_unreadable_manifests(self):
        with self.assertRaises(CommandError) as raised:
            self.call("replay", "999")
        self.assertEqual(raised.exception.returncode, 2)

        (self.dir / "manifest.json").write_text("{not json")
        with self.assertRaises(CommandError) as raised:
            self.call("replay", str(self.dir))
        self.assertEqual(raised.exception.returncode, 2)

        (self.dir / "manifest.json").write_text(json.dumps({"command": "deploy", "instance_path": "x"}))
        with self.assertRaises(CommandError) as raised:
            self.call("replay", str(self.dir))
        self.assertEqual(raised.exception.returncode, 2)

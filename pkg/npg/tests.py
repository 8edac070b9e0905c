import numpy as np
from django.test import SimpleTestCase

from flow.central_path import central_path_point
from frflow.exceptions import EscortSingularity, NumericalBlowup
from lp_geometry.faces import face_projection, optimal_face
from lp_geometry.vertices import enumerate_vertices
from mdp_core.catalog import degenerate_example, kakade_example, random_mdp
from mdp_core.occupancy import occupancy, reward_of, state_action_lp
from measures.divergences import kl_divergence, tv_distance

from .fisher import (
    compatible_fa,
    differentiate,
    fisher_matrix,
    natural_gradient,
    occupancy_jacobian,
    reward_gradient,
)
from .iteration import perturbed_bound_terms, run_npg, run_npg_seeds, tail_slope
from .models import KAKADE, STATE_ACTION, NpgConfig, Parametrization
from .parametrizations import clamp_escort, is_regular, policy_and_jacobian, random_theta, tangent_rank


def finite_difference(function, theta, h=1e-6):
    columns = []
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = h
        columns.append((np.asarray(function(theta + step)) - np.asarray(function(theta - step))) / (2 * h))
    return np.stack(columns, axis=-1)


def finite_hessian(function, theta, h=1e-3):
    p = theta.size
    steps = np.eye(p) * h
    hessian = np.zeros((p, p))
    for i in range(p):
        for j in range(i, p):
            hessian[i, j] = hessian[j, i] = (
                function(theta + steps[i] + steps[j])
                - function(theta + steps[i] - steps[j])
                - function(theta - steps[i] + steps[j])
                + function(theta - steps[i] - steps[j])
            ) / (4 * h * h)
    return hessian


def relative_error(actual, expected):
    return np.linalg.norm(actual - expected) / max(np.linalg.norm(expected), 1e-300)


def indicator_features(mdp, actions):
    """One feature per state-action pair in ``actions``."""
    features = np.zeros((mdp.num_states, mdp.num_actions, len(actions)))
    for column, (s, a) in enumerate(actions):
        features[s, a, column] = 1.0
    return features


def kakade_optimal_feature(mdp):
    """A single feature rewarding the optimal action in every state."""
    return indicator_features(mdp, [(0, 1), (1, 0)]).sum(axis=2, keepdims=True)


class ParametrizationTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(21)

    def test_softmax_at_zero_is_uniform(self):
        pi, _ = policy_and_jacobian(Parametrization.softmax(3, 4), np.zeros(12))
        np.testing.assert_allclose(pi.table, 0.25)

    def test_softmax_jacobian_keeps_rows_normalized(self):
        _, jacobian = policy_and_jacobian(Parametrization.softmax(3, 4), self.rng.normal(size=12))
        np.testing.assert_allclose(jacobian.sum(axis=1), 0.0, atol=1e-15)

    def test_jacobians_match_finite_differences(self):
        for par in (
            Parametrization.softmax(3, 2),
            Parametrization.escort(3, 2, power=2.0),
            Parametrization.escort(2, 3, power=1.5),
            Parametrization.log_linear(self.rng.normal(size=(3, 2, 4))),
        ):
            theta = self.rng.normal(size=par.parameter_dim) + 0.5
            with self.subTest(kind=par.label):
                _, analytic = policy_and_jacobian(par, theta)
                numeric = finite_difference(lambda x: policy_and_jacobian(par, x)[0].table, theta)
                self.assertLess(relative_error(analytic, numeric), 1e-5)

    def test_escort_rejects_parameters_near_zero(self):
        theta = np.array([1.0, 0.0, -2.0, 0.5])
        with self.assertRaises(EscortSingularity):
            policy_and_jacobian(Parametrization.escort(2, 2), theta)

    def test_escort_clamping_keeps_signs_and_warns(self):
        par = Parametrization.escort(2, 2)
        with self.assertLogs("npg.parametrizations", level="WARNING"):
            theta = clamp_escort(par, np.array([1.0, 0.0, -1e-12, 0.5]))
        self.assertGreater(theta[1], 0)
        self.assertLess(theta[2], 0)
        policy_and_jacobian(par, theta)

    def test_tabular_parametrizations_are_regular(self):
        for par in (Parametrization.softmax(3, 3), Parametrization.escort(3, 3, 2.0)):
            with self.subTest(kind=par.label):
                self.assertTrue(is_regular(par, self.rng.normal(size=par.parameter_dim)))

    def test_single_feature_is_not_regular(self):
        par = Parametrization.log_linear(self.rng.normal(size=(2, 2, 1)))
        self.assertEqual(tangent_rank(par, np.array([0.3])), 1)
        self.assertFalse(is_regular(par, np.array([0.3])))

    def test_random_theta_is_reproducible(self):
        par = Parametrization.softmax(2, 2)
        np.testing.assert_array_equal(random_theta(par, 4), random_theta(par, 4))


class OccupancyJacobianTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(22)

    def test_no_discount_scales_the_policy_jacobian(self):
        mdp = random_mdp(self.rng, 3, 2, discount=0.0)
        par = Parametrization.softmax(3, 2)
        theta = self.rng.normal(size=6)
        _, dpi = policy_and_jacobian(par, theta)
        expected = (mdp.initial.weights[:, None, None] * dpi).reshape(6, 6)
        np.testing.assert_allclose(occupancy_jacobian(mdp, par, theta), expected, atol=1e-14)

    def test_columns_sum_to_zero(self):
        mdp = random_mdp(self.rng, 4, 3)
        jacobian = occupancy_jacobian(mdp, Parametrization.softmax(4, 3), self.rng.normal(size=12))
        np.testing.assert_allclose(jacobian.sum(axis=0), 0.0, atol=1e-13)

    def test_matches_finite_differences(self):
        mdp = kakade_example()
        for par in (Parametrization.softmax(2, 2), Parametrization.escort(2, 2, 2.0)):
            theta = self.rng.normal(size=4) + 0.5
            with self.subTest(kind=par.label):
                numeric = finite_difference(
                    lambda x: occupancy(mdp, policy_and_jacobian(par, x)[0]).weights, theta
                )
                self.assertLess(relative_error(occupancy_jacobian(mdp, par, theta), numeric), 1e-5)


class FisherMatrixTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(23)

    def test_single_state_is_the_categorical_fisher_matrix(self):
        mdp = random_mdp(self.rng, 1, 4)
        par = Parametrization.softmax(1, 4)
        theta = self.rng.normal(size=4)
        pi = policy_and_jacobian(par, theta)[0].table[0]
        expected = np.diag(pi) - np.outer(pi, pi)
        for kind in (STATE_ACTION, KAKADE):
            with self.subTest(kind=kind):
                np.testing.assert_allclose(fisher_matrix(mdp, par, theta, kind), expected, atol=1e-13)

    def test_constant_feature_gives_a_zero_matrix(self):
        par = Parametrization.log_linear(np.ones((2, 2, 1)))
        matrix = fisher_matrix(kakade_example(), par, np.array([0.7]), STATE_ACTION)
        np.testing.assert_allclose(matrix, 0.0, atol=1e-15)

    def test_symmetric_positive_semidefinite(self):
        mdp = random_mdp(self.rng, 3, 3)
        par = Parametrization.softmax(3, 3)
        for kind in (STATE_ACTION, KAKADE):
            matrix = fisher_matrix(mdp, par, self.rng.normal(size=9), kind)
            with self.subTest(kind=kind):
                np.testing.assert_allclose(matrix, matrix.T, atol=1e-12)
                self.assertGreaterEqual(np.linalg.eigvalsh(matrix).min(), -1e-10 * np.trace(matrix))

    def test_matrices_are_kl_hessians_on_random_instances(self):
        for trial in range(20):
            mdp = random_mdp(self.rng, 2 + trial % 3, 2 + trial % 2)
            par = Parametrization.softmax(mdp.num_states, mdp.num_actions)
            theta = self.rng.normal(size=par.parameter_dim)
            diff = differentiate(mdp, par, theta)
            pi, rho = diff.policy.table, diff.state_occupancy

            def occupancy_at(x):
                return occupancy(mdp, policy_and_jacobian(par, x)[0])

            def state_action_kl(x):
                return kl_divergence(diff.occupancy, occupancy_at(x))

            def policy_kl(x):
                other = policy_and_jacobian(par, x)[0].table
                return float(rho @ np.sum(pi * np.log(pi / other), axis=1))

            with self.subTest(trial=trial):
                numeric = finite_difference(lambda x: occupancy_at(x).weights, theta)
                self.assertLess(relative_error(diff.jacobian, numeric), 1e-4)
                for kind, divergence in ((STATE_ACTION, state_action_kl), (KAKADE, policy_kl)):
                    matrix = fisher_matrix(mdp, par, theta, kind, diff=diff)
                    self.assertLess(relative_error(matrix, finite_hessian(divergence, theta)), 1e-4, kind)

    def test_softmax_gauge_lies_in_the_kernel(self):
        mdp = random_mdp(self.rng, 3, 2)
        par = Parametrization.softmax(3, 2)
        theta = self.rng.normal(size=6)
        for kind in (STATE_ACTION, KAKADE):
            matrix = fisher_matrix(mdp, par, theta, kind)
            with self.subTest(kind=kind):
                np.testing.assert_allclose(matrix, fisher_matrix(mdp, par, theta + 2.5, kind), atol=1e-12)
                np.testing.assert_allclose(matrix @ np.ones(6), 0.0, atol=1e-13)
                singular = np.linalg.svd(matrix, compute_uv=False)
                self.assertLess(singular.min(), 1e-10 * singular.max())


class RewardGradientTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(24)

    def test_constant_reward_has_no_gradient(self):
        mdp = random_mdp(self.rng, 3, 2).with_reward(np.full((3, 2), 2.0))
        gradient = reward_gradient(mdp, Parametrization.softmax(3, 2), self.rng.normal(size=6))
        np.testing.assert_allclose(gradient, 0.0, atol=1e-14)

    def test_no_discount_is_the_categorical_policy_gradient(self):
        mdp = random_mdp(self.rng, 3, 2, discount=0.0)
        par = Parametrization.softmax(3, 2)
        theta = self.rng.normal(size=6)
        pi = policy_and_jacobian(par, theta)[0].table
        baseline = (pi * mdp.reward).sum(axis=1, keepdims=True)
        expected = mdp.initial.weights[:, None] * pi * (mdp.reward - baseline)
        np.testing.assert_allclose(reward_gradient(mdp, par, theta), expected.ravel(), atol=1e-14)

    def test_matches_finite_differences(self):
        for trial in range(20):
            mdp = random_mdp(self.rng, 2 + trial % 3, 2)
            par = Parametrization.softmax(mdp.num_states, 2)
            theta = self.rng.normal(size=par.parameter_dim)
            with self.subTest(trial=trial):
                numeric = finite_difference(lambda x: reward_of(mdp, policy_and_jacobian(par, x)[0]), theta)
                self.assertLess(relative_error(reward_gradient(mdp, par, theta), numeric), 1e-5)


class CompatibleApproximationTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(25)

    def test_solves_the_normal_equation(self):
        for trial in range(5):
            mdp = random_mdp(self.rng, 3, 2)
            par = Parametrization.softmax(3, 2)
            theta = self.rng.normal(size=6)
            fit = compatible_fa(mdp, par, theta, mdp.reward)
            residual = fisher_matrix(mdp, par, theta, STATE_ACTION) @ fit.w - reward_gradient(mdp, par, theta)
            with self.subTest(trial=trial):
                self.assertLessEqual(np.max(np.abs(residual)), 1e-8)

    def test_every_normal_equation_solution_is_a_minimizer(self):
        mdp = random_mdp(self.rng, 3, 2)
        par = Parametrization.softmax(3, 2)
        theta = self.rng.normal(size=6)
        diff = differentiate(mdp, par, theta)
        fit = compatible_fa(mdp, par, theta, mdp.reward, diff=diff)
        shifted = fit.w + np.repeat([1.0, -2.0, 0.5], 2)
        scores = diff.jacobian / diff.occupancy.weights[:, None]
        loss = float(diff.occupancy.weights @ (scores @ shifted - mdp.reward.ravel()) ** 2)
        self.assertAlmostEqual(loss, fit.eps_sq, delta=1e-10)

    def test_regular_parametrization_has_no_projection_residual(self):
        mdp = random_mdp(self.rng, 3, 3)
        fit = compatible_fa(mdp, Parametrization.softmax(3, 3), self.rng.normal(size=9), mdp.reward)
        self.assertLess(fit.residual_sq, 1e-12)
        self.assertGreaterEqual(fit.eps_sq, fit.residual_sq)

    def test_realizable_target_is_fitted_exactly(self):
        mdp = random_mdp(self.rng, 3, 2)
        par = Parametrization.log_linear(self.rng.normal(size=(3, 2, 2)))
        theta = self.rng.normal(size=2)
        diff = differentiate(mdp, par, theta)
        target = diff.jacobian @ np.array([0.4, -1.3]) / diff.occupancy.weights
        self.assertLessEqual(compatible_fa(mdp, par, theta, target, diff=diff).eps_sq, 1e-10)

    def test_one_parameter_loss_matches_a_grid_search(self):
        mdp = kakade_example()
        par = Parametrization.log_linear(kakade_optimal_feature(mdp))
        theta = np.array([0.2])
        diff = differentiate(mdp, par, theta)
        fit = compatible_fa(mdp, par, theta, mdp.reward, diff=diff)
        scores = diff.jacobian[:, 0] / diff.occupancy.weights
        grid = np.linspace(-100.0, 100.0, 2_000_001)
        losses = ((grid[:, None] * scores[None, :] - mdp.reward.ravel()) ** 2) @ diff.occupancy.weights
        self.assertAlmostEqual(fit.eps_sq, float(losses.min()), delta=1e-6)
        self.assertGreater(fit.residual_sq, 0.0)
        self.assertGreaterEqual(fit.eps_sq, fit.residual_sq)

    def test_projection_property(self):
        mdp = kakade_example()
        par = Parametrization.softmax(2, 2)
        theta = self.rng.normal(size=4)
        diff = differentiate(mdp, par, theta)
        direction = natural_gradient(mdp, par, theta, STATE_ACTION, 1e-10, diff=diff)
        fit = compatible_fa(mdp, par, theta, mdp.reward, diff=diff)
        np.testing.assert_allclose(diff.jacobian @ direction, diff.jacobian @ fit.w, atol=1e-12)
        self.assertLess(np.sqrt(fit.residual_sq), 1e-6)


class RunNpgTests(SimpleTestCase):
    def test_stationary_at_a_critical_point(self):
        mdp = kakade_example().with_reward(np.ones((2, 2)))
        cfg = NpgConfig(max_iters=20)
        log = run_npg(mdp, Parametrization.softmax(2, 2), cfg, theta0=np.zeros(4))
        np.testing.assert_allclose(log.theta_final, 0.0, atol=1e-14)
        np.testing.assert_allclose(log.reward, 1.0, atol=1e-12)
        self.assertEqual(len(log), 20)

    def test_tracks_the_fisher_rao_flow(self):
        mdp = kakade_example()
        lp = state_action_lp(mdp)
        par = Parametrization.softmax(2, 2)
        theta0 = random_theta(par, 1)
        start = differentiate(mdp, par, theta0).occupancy
        target = central_path_point(lp, start, 1.0)
        errors = []
        for eta in (0.1, 0.05):
            cfg = NpgConfig(stepsize=eta, max_iters=int(round(1.0 / eta)), diagnostics=False)
            log = run_npg(mdp, par, cfg, theta0, lp=lp)
            errors.append(kl_divergence(differentiate(mdp, par, log.theta_final).occupancy, target))
        self.assertLess(errors[1], 0.5 * errors[0])
        self.assertLess(errors[1], 1e-2)

    def test_monotone_ascent_empirically(self):
        par = Parametrization.softmax(2, 2)
        for mdp in (kakade_example(), kakade_example(reward_s1_a2=3.0)):
            for kind in (STATE_ACTION, KAKADE):
                with self.subTest(mdp=mdp.name, kind=kind):
                    log = run_npg(mdp, par, NpgConfig(preconditioner=kind, max_iters=500, seed=2, diagnostics=False))
                    self.assertGreaterEqual(np.diff(log.reward).min(), -1e-9)

    def test_blowup_halts_with_a_partial_log(self):
        par = Parametrization.softmax(2, 2)
        threshold = float(np.max(np.abs(random_theta(par, 0)))) + 1.0
        cfg = NpgConfig(stepsize=100.0, max_iters=1000, blowup_threshold=threshold, diagnostics=False)
        with self.assertLogs("npg.iteration", level="ERROR"):
            with self.assertRaises(NumericalBlowup) as raised:
                run_npg(kakade_example(), par, cfg)
        log = raised.exception.context["log"]
        self.assertLess(len(log), 1000)
        self.assertGreater(np.max(np.abs(log.theta_final)), threshold)

    def test_thirty_seeds_decay_at_the_advantage_rate(self):
        par = Parametrization.softmax(2, 2)
        for kind in (STATE_ACTION, KAKADE):
            cfg = NpgConfig(preconditioner=kind, stepsize=1e-2, max_iters=3000, diagnostics=False)
            for log in run_npg_seeds(kakade_example(), par, cfg, seeds=range(30), threads=4):
                with self.subTest(kind=kind, seed=log.seed):
                    self.assertLessEqual(tail_slope(log.kl, cfg.stepsize), -0.9 * 0.8)

    def test_thirty_seeds_on_the_variant_decay_faster_than_the_guarantee(self):
        par = Parametrization.softmax(2, 2)
        for kind in (STATE_ACTION, KAKADE):
            cfg = NpgConfig(preconditioner=kind, stepsize=1e-2, max_iters=3000, diagnostics=False)
            for log in run_npg_seeds(kakade_example(reward_s1_a2=3.0), par, cfg, seeds=range(30), threads=4):
                slope = tail_slope(log.kl, cfg.stepsize)
                with self.subTest(kind=kind, seed=log.seed):
                    self.assertLessEqual(slope, -0.5789)
                    self.assertLess(abs(slope + 1.1), 0.15 * 1.1)

    def test_seed_runs_come_back_in_seed_order(self):
        mdp = kakade_example()
        par = Parametrization.softmax(2, 2)
        cfg = NpgConfig(max_iters=50, diagnostics=False)
        logs = run_npg_seeds(mdp, par, cfg, seeds=[3, 1, 2], threads=3)
        self.assertEqual([log.seed for log in logs], [3, 1, 2])
        single = run_npg(mdp, par, NpgConfig(max_iters=50, diagnostics=False, seed=1))
        np.testing.assert_array_equal(logs[1].reward, single.reward)

    def test_implicit_bias_on_a_degenerate_optimum(self):
        mdp = degenerate_example()
        lp = state_action_lp(mdp)
        vertices = enumerate_vertices(lp)
        face = optimal_face(lp, vertices)
        par = Parametrization.softmax(2, 2)
        theta0 = random_theta(par, 5)
        start = differentiate(mdp, par, theta0).occupancy
        projection = face_projection(lp, face, start)

        cfg = NpgConfig(stepsize=0.05, max_iters=2000, diagnostics=False)
        log = run_npg(mdp, par, cfg, theta0, lp=lp, vertices=vertices)
        final = differentiate(mdp, par, log.theta_final).occupancy
        self.assertLess(tv_distance(final, projection), 1e-3)

        for index in face.vertex_indices:
            vertex = vertices[index]
            self.assertAlmostEqual(
                kl_divergence(vertex, start),
                kl_divergence(vertex, projection) + kl_divergence(projection, start),
                delta=1e-8,
            )


class PerturbedBoundTests(SimpleTestCase):
    def test_regular_parametrization_has_no_approximation_error(self):
        log = run_npg(kakade_example(), Parametrization.softmax(2, 2), NpgConfig(max_iters=200, seed=3))
        bound = perturbed_bound_terms(kakade_example(), log)
        self.assertLessEqual(bound.eps.max(), 1e-8)
        self.assertTrue(bound.holds.all())

    def test_restricted_model_stays_below_the_bound(self):
        mdp = kakade_example()
        par = Parametrization.log_linear(kakade_optimal_feature(mdp))
        log = run_npg(mdp, par, NpgConfig(max_iters=500), theta0=np.array([0.0]))
        bound = perturbed_bound_terms(mdp, log)
        self.assertGreater(bound.eps.max(), 0.0)
        self.assertTrue(bound.holds.all())
        self.assertTrue(np.isinf(bound.rhs[0]))

    def test_tail_slope_of_an_exponential(self):
        values = 3.0 * np.exp(-0.8 * 0.01 * np.arange(1000))
        self.assertAlmostEqual(tail_slope(values, 0.01), -0.8, delta=1e-9)

import math

import numpy as np
from django.test import SimpleTestCase
from scipy.linalg import null_space

from frflow.exceptions import BoundNotApplicable, InfeasibleConstraints, InvalidTimeGrid
from lp_geometry.catalog import improvement_example, quadrilateral_example, simplex_lp
from lp_geometry.faces import optimal_face, rate_constants
from lp_geometry.models import SimplexLp
from lp_geometry.vertices import enumerate_vertices
from measures.divergences import kl_divergence, tv_distance
from measures.models import Distribution

from .bounds import (
    check_bound_chain,
    convergence_bounds,
    empirical_kappa_time,
    entropic_radius,
    implicit_bias_limit,
    linear_bound_factor,
    non_unique_bounds,
    sublinear_bound,
)
from .central_path import (
    central_path_point,
    closed_form_simplex_flow,
    default_time_grid,
    euler_dual_flow,
    fisher_rao_gradient,
    integrate_flow,
)
from .models import CentralPathConfig


def maximize_on_polygon(lp, objective, rounds=45, width=21):
    """Grid-refinement maximizer of a concave objective over a 2-dimensional ``P``."""
    basis = null_space(lp.equality_system[0])
    assert basis.shape[1] == 2
    anchor = lp.interior_point.weights
    center, radius = np.zeros(2), 1.5

    def value(u):
        mu = anchor + basis @ u
        return objective(mu) if mu.min() > 0 else -np.inf

    for _ in range(rounds):
        axis = np.linspace(-radius, radius, width)
        candidates = [center + np.array([a, b]) for a in axis for b in axis]
        center = max(candidates, key=value)
        radius *= 0.5
    return anchor + basis @ center


def regularized_objective(lp, mu0, t):
    def objective(mu):
        return float(lp.cost @ mu) - float(np.sum(mu * np.log(mu / mu0.weights))) / t
    return objective


def random_constrained_lp(rng, cost=None):
    lhs = rng.normal(size=(1, 4))
    interior = rng.dirichlet(np.ones(4))
    return SimplexLp(rng.normal(size=4) if cost is None else cost, lhs, lhs @ interior)


class CentralPathTests(SimpleTestCase):
    def test_time_zero_returns_start(self):
        lp = improvement_example(0.3)
        self.assertIs(central_path_point(lp, lp.interior_point, 0.0), lp.interior_point)

    def test_rejects_infeasible_start(self):
        with self.assertRaises(InfeasibleConstraints):
            central_path_point(improvement_example(0.3), Distribution.uniform(4), 1.0)

    def test_whole_simplex_matches_closed_form(self):
        rng = np.random.default_rng(1)
        cost = rng.normal(size=5)
        mu0 = Distribution(rng.dirichlet(np.ones(5)))
        lp = simplex_lp(cost)
        for t in (0.3, 2.0, 17.0):
            np.testing.assert_allclose(
                central_path_point(lp, mu0, t).weights, closed_form_simplex_flow(cost, mu0, t).weights, atol=1e-12
            )

    def test_improvement_example_matches_grid_oracle(self):
        lp = improvement_example(0.3)
        mu0 = Distribution([0.3, 0.7 / 3, 0.7 / 3, 0.7 / 3])
        expected = maximize_on_polygon(lp, regularized_objective(lp, mu0, 5.0))
        np.testing.assert_allclose(central_path_point(lp, mu0, 5.0).weights, expected, atol=1e-6)

    def test_constrained_instances_match_grid_oracle(self):
        rng = np.random.default_rng(21)
        for lp in (quadrilateral_example((1.0, 0.0, 0.4, 0.0)), random_constrained_lp(rng), random_constrained_lp(rng)):
            mu0 = lp.interior_point
            trajectory = integrate_flow(lp, mu0, [0.0, 0.5, 2.0])
            for t, mu in zip(trajectory.times[1:], trajectory.iterates[1:]):
                expected = maximize_on_polygon(lp, regularized_objective(lp, mu0, t))
                np.testing.assert_allclose(mu.weights, expected, atol=1e-6)

    def test_bisects_large_cold_steps(self):
        lp = quadrilateral_example((1.0, 0.0, 0.4, 0.0))
        cfg = CentralPathConfig(newton_max_iter=3)
        mu = central_path_point(lp, lp.interior_point, 40.0, cfg)
        self.assertTrue(lp.is_feasible(mu))


class ClosedFormTests(SimpleTestCase):
    def test_time_zero_and_constant_cost(self):
        mu0 = Distribution([0.2, 0.3, 0.5])
        np.testing.assert_allclose(closed_form_simplex_flow([1.0, 2.0, 3.0], mu0, 0.0).weights, mu0.weights)
        np.testing.assert_allclose(closed_form_simplex_flow([4.0, 4.0, 4.0], mu0, 9.0).weights, mu0.weights)

    def test_hand_value(self):
        mu = closed_form_simplex_flow([1.0, 0.0], Distribution.uniform(2), math.log(3))
        np.testing.assert_allclose(mu.weights, [0.75, 0.25], atol=1e-15)


class IntegrateFlowTests(SimpleTestCase):
    def test_simplex_trajectory_matches_closed_form(self):
        rng = np.random.default_rng(2)
        cost = rng.normal(size=5)
        mu0 = Distribution(rng.dirichlet(np.ones(5)))
        times = default_time_grid(points=50, t_min=1e-2, t_max=30.0)
        trajectory = integrate_flow(simplex_lp(cost), mu0, times)
        for t, mu in zip(times, trajectory.iterates):
            expected = closed_form_simplex_flow(cost, mu0, t).weights
            self.assertLess(np.max(np.abs(mu.weights - expected)), 1e-9)

    def test_two_atom_flow(self):
        trajectory = integrate_flow(simplex_lp([1.0, 0.0]), Distribution.uniform(2), [0.0, 1.0, 5.0])
        for t, mu in zip(trajectory.times, trajectory.iterates):
            np.testing.assert_allclose(mu.weights, [math.exp(t) / (math.exp(t) + 1), 1 / (math.exp(t) + 1)], atol=1e-12)

    def test_constant_objective_is_stationary(self):
        lp = quadrilateral_example((1.0, 1.0, 0.0, 0.0))
        trajectory = integrate_flow(lp, lp.interior_point, [0.0, 1.0, 10.0])
        for mu in trajectory.iterates:
            np.testing.assert_allclose(mu.weights, lp.interior_point.weights, atol=1e-10)
        np.testing.assert_allclose(trajectory.gap, 0.0, atol=1e-12)
        self.assertTrue(np.all(np.isnan(trajectory.kl)))
        self.assertIsNone(trajectory.rates)

    def test_rejects_bad_grids(self):
        lp = simplex_lp([1.0, 0.0])
        with self.assertRaises(InvalidTimeGrid):
            integrate_flow(lp, Distribution.uniform(2), [0.5, 1.0])
        with self.assertRaises(InvalidTimeGrid):
            integrate_flow(lp, Distribution.uniform(2), [0.0, 2.0, 1.0])

    def test_bound_chain_and_interiority(self):
        instances = [improvement_example(0.3), quadrilateral_example((1.0, 0.0, 0.4, 0.0)), simplex_lp([0.3, 1.0, 0.0])]
        for lp in instances:
            vertices = enumerate_vertices(lp)
            rates = rate_constants(lp, vertices, lp.interior_point)
            trajectory = integrate_flow(lp, lp.interior_point, default_time_grid(rates, points=80), vertices=vertices)
            self.assertEqual(check_bound_chain(trajectory), [], lp)
            for mu in trajectory.iterates:
                self.assertTrue(mu.is_strictly_positive())
                self.assertTrue(lp.is_feasible(mu))

    def test_derivative_matches_fisher_rao_gradient(self):
        lp = quadrilateral_example((1.0, 0.0, 0.4, 0.0))
        mu0 = lp.interior_point
        t, h = 1.3, 1e-4
        mu = central_path_point(lp, mu0, t)
        derivative = (central_path_point(lp, mu0, t + h).weights - central_path_point(lp, mu0, t - h).weights) / (2 * h)
        gradient = fisher_rao_gradient(lp, mu)
        np.testing.assert_allclose(derivative, gradient.components, atol=1e-6)
        for v in null_space(lp.equality_system[0]).T:
            self.assertAlmostEqual(float(np.sum(derivative * v / mu.weights)), float(lp.cost @ v), delta=1e-5)

    def test_euler_cross_check_converges(self):
        lp = quadrilateral_example((1.0, 0.0, 0.4, 0.0))
        mu0 = lp.interior_point
        exact = central_path_point(lp, mu0, 1.0)
        coarse = tv_distance(euler_dual_flow(lp, mu0, 1.0, 200)[1][-1], exact)
        fine = tv_distance(euler_dual_flow(lp, mu0, 1.0, 800)[1][-1], exact)
        self.assertLess(fine, 1e-3)
        self.assertLess(fine, coarse / 2)

    def test_default_grid(self):
        lp = improvement_example(0.5)
        rates = rate_constants(lp, enumerate_vertices(lp), lp.interior_point)
        grid = default_time_grid(rates)
        self.assertEqual(grid.size, 200)
        self.assertEqual(grid[0], 0.0)
        self.assertAlmostEqual(grid[1], 1e-2)
        self.assertAlmostEqual(grid[-1], 100.0 / rates.delta_rate)


class BoundTests(SimpleTestCase):
    def setUp(self):
        self.lp = improvement_example(0.3)
        self.vertices = enumerate_vertices(self.lp)
        self.mu0 = self.lp.interior_point
        self.rates = rate_constants(self.lp, self.vertices, self.mu0)

    def test_linear_bound_equals_kl_at_t0(self):
        bounds = convergence_bounds(self.lp, self.vertices, self.mu0, self.rates.mu_star, self.rates, self.rates.t0)
        self.assertAlmostEqual(bounds.linear_bound_kl, kl_divergence(self.rates.mu_star, self.mu0), places=14)
        self.assertAlmostEqual(bounds.linear_bound_value, self.rates.delta_rate * bounds.linear_bound_kl, places=14)
        self.assertTrue(bounds.certified)

    def test_sublinear_division(self):
        self.assertEqual(sublinear_bound(0.5, 10.0), 0.05)
        with self.assertRaises(BoundNotApplicable):
            sublinear_bound(0.5, 0.0)

    def test_before_t0(self):
        with self.assertRaises(BoundNotApplicable):
            convergence_bounds(self.lp, self.vertices, self.mu0, self.rates.mu_star, self.rates, 0.5 * self.rates.t0)
        with self.assertRaises(BoundNotApplicable):
            linear_bound_factor(1.0, 2.0, 1.0)

    def test_regularization_bound_holds(self):
        radius = entropic_radius(self.lp, self.vertices)
        start = Distribution([0.3, 0.7 / 3, 0.7 / 3, 0.7 / 3])
        for t in (5.0, 20.0, 60.0):
            bounds = convergence_bounds(self.lp, self.vertices, self.mu0, self.rates.mu_star, self.rates, max(t, self.rates.t0), radius=radius)
            if math.isnan(bounds.regularization_bound_kl):
                continue
            regularized = central_path_point(self.lp, start, max(t, self.rates.t0))
            self.assertLessEqual(kl_divergence(self.rates.mu_star, regularized), bounds.regularization_bound_kl)

    def test_entropic_radius_of_simplex(self):
        lp = simplex_lp([0.0, 1.0, 2.0])
        self.assertAlmostEqual(entropic_radius(lp, enumerate_vertices(lp)), math.log(3), places=12)


class NonUniqueOptimumTests(SimpleTestCase):
    def setUp(self):
        self.lp = simplex_lp([0.0, 1.0, 1.0])
        self.vertices = enumerate_vertices(self.lp)
        self.mu0 = Distribution([0.5, 0.3, 0.2])

    def test_implicit_bias_limit(self):
        limit = implicit_bias_limit(self.lp, self.vertices, Distribution.uniform(3))
        np.testing.assert_allclose(limit.weights, [0.0, 0.5, 0.5], atol=1e-12)
        flow = integrate_flow(self.lp, Distribution.uniform(3), [0.0, 10.0, 50.0], vertices=self.vertices)
        self.assertLess(tv_distance(flow.final, limit), 1e-3)

    def test_unique_limit_is_the_vertex(self):
        lp = improvement_example(0.3)
        vertices = enumerate_vertices(lp)
        limit = implicit_bias_limit(lp, vertices, lp.interior_point)
        np.testing.assert_allclose(limit.weights, [0.3, 0.7, 0.0, 0.0], atol=1e-12)

    def test_bounds_are_flagged_uncertified(self):
        rates = rate_constants(self.lp, self.vertices, self.mu0)
        with self.assertRaises(BoundNotApplicable):
            convergence_bounds(self.lp, self.vertices, self.mu0, rates.mu_star, rates, 1.0)
        bounds = convergence_bounds(self.lp, self.vertices, self.mu0, rates.mu_star, rates, 3.0, kappa=0.5, t_kappa=1.0)
        self.assertFalse(bounds.certified)
        self.assertAlmostEqual(bounds.linear_bound_kl, rates.kl_to_start * math.exp(-1.0), places=14)
        with self.assertRaises(BoundNotApplicable):
            non_unique_bounds(1.0, rates.delta_rate, rates.delta_rate, 0.0, 1.0)

    def test_empirical_kappa_time(self):
        face = optimal_face(self.lp, self.vertices)
        self.assertEqual(len(face), 2)
        trajectory = integrate_flow(self.lp, self.mu0, default_time_grid(points=60, t_max=30.0), vertices=self.vertices)
        t_kappa = empirical_kappa_time(trajectory, 0.5)
        self.assertIsNotNone(t_kappa)
        later = trajectory.times >= t_kappa
        envelope = trajectory.kl[0] * np.exp(-0.5 * (trajectory.times[later] - t_kappa))
        self.assertTrue(np.all(trajectory.kl[later] <= envelope * (1 + 1e-9)))

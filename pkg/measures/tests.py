import math

import numpy as np
from django.test import SimpleTestCase
from scipy.optimize import brentq

from frflow.exceptions import (
    AbsoluteContinuityViolation,
    DimensionMismatch,
    InfeasibleConstraints,
    InvalidDistribution,
    NonConvergence,
    SingularBase,
)

from .divergences import (
    chi2_divergence,
    entropy,
    fisher_rao_inner,
    kl_divergence,
    kl_tv_local_bound,
    min_positive,
    tv_distance,
)
from .models import AffineConstraints, Distribution, TangentVector
from .projection import dual_newton, feasible_support, information_projection, reduce_constraints


def random_distribution(rng, size, sparsity=0.0):
    w = rng.dirichlet(np.ones(size))
    if sparsity:
        w[rng.random(size) < sparsity] = 0.0
        if w.sum() == 0:
            w[0] = 1.0
    return Distribution(w / w.sum())


class DistributionTests(SimpleTestCase):
    def test_rejects_negative_weights(self):
        with self.assertRaises(InvalidDistribution):
            Distribution([1.2, -0.2])

    def test_rejects_unnormalized_weights(self):
        with self.assertRaises(InvalidDistribution):
            Distribution([0.5, 0.6])

    def test_weights_are_read_only(self):
        mu = Distribution([0.25, 0.75])
        with self.assertRaises(ValueError):
            mu.weights[0] = 1.0

    def test_from_unnormalized_drops_roundoff(self):
        mu = Distribution.from_unnormalized([2.0, -1e-17, 2.0])
        np.testing.assert_array_equal(mu.weights, [0.5, 0.0, 0.5])
        np.testing.assert_array_equal(mu.support, [0, 2])

    def test_tangent_vector_must_sum_to_zero(self):
        base = Distribution.uniform(3)
        with self.assertRaises(InvalidDistribution):
            TangentVector([1.0, 0.0, 0.0], base)
        with self.assertRaises(DimensionMismatch):
            TangentVector([1.0, -1.0], base)


class DivergenceTests(SimpleTestCase):
    def test_kl_identity(self):
        mu = Distribution([0.3, 0.7])
        self.assertEqual(kl_divergence(mu, mu), 0.0)

    def test_kl_dirac_against_uniform(self):
        self.assertAlmostEqual(kl_divergence(Distribution([1.0, 0.0]), Distribution([0.5, 0.5])), math.log(2), places=15)

    def test_kl_two_term_evaluation(self):
        expected = 0.2 * math.log(0.2 / 0.6) + 0.8 * math.log(0.8 / 0.4)
        self.assertAlmostEqual(kl_divergence(Distribution([0.2, 0.8]), Distribution([0.6, 0.4])), expected, places=14)

    def test_kl_requires_absolute_continuity(self):
        with self.assertRaises(AbsoluteContinuityViolation):
            kl_divergence(Distribution([0.5, 0.5]), Distribution([1.0, 0.0]))

    def test_kl_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            kl_divergence(Distribution.uniform(2), Distribution.uniform(3))

    def test_tv_values(self):
        mu = Distribution([0.2, 0.8])
        self.assertEqual(tv_distance(mu, mu), 0.0)
        self.assertEqual(tv_distance(Distribution([1.0, 0.0]), Distribution([0.0, 1.0])), 1.0)
        self.assertAlmostEqual(tv_distance(mu, Distribution([0.6, 0.4])), 0.4, places=15)

    def test_chi2_values(self):
        mu = Distribution([0.3, 0.7])
        self.assertEqual(chi2_divergence(mu, mu), 0.0)
        self.assertAlmostEqual(chi2_divergence(Distribution([1.0, 0.0]), Distribution([0.5, 0.5])), 1.0, places=15)

    def test_chi2_is_fisher_rao_norm_of_the_chord(self):
        rng = np.random.default_rng(7)
        mu, nu = random_distribution(rng, 5), random_distribution(rng, 5)
        chord = TangentVector.between(mu, nu)
        self.assertEqual(chi2_divergence(mu, nu), fisher_rao_inner(chord, chord, nu))

    def test_entropy_values(self):
        self.assertEqual(entropy(Distribution.dirac(4, 2)), 0.0)
        self.assertAlmostEqual(entropy(Distribution.uniform(6)), math.log(6), places=14)
        expected = -(0.2 * math.log(0.2) + 0.8 * math.log(0.8))
        self.assertAlmostEqual(entropy(Distribution([0.2, 0.8])), expected, places=15)

    def test_pinsker_and_local_bound_on_random_pairs(self):
        rng = np.random.default_rng(2024)
        local_checks = 0
        for _ in range(1000):
            size = int(rng.integers(2, 7))
            mu = random_distribution(rng, size, sparsity=0.2)
            eps = 10 ** rng.uniform(-3, -1)
            nu = Distribution.from_unnormalized((1 - eps) * mu.weights + eps * rng.dirichlet(np.ones(size)))
            kl, tv = kl_divergence(mu, nu), tv_distance(mu, nu)
            self.assertGreaterEqual(kl + 1e-15, 2 * tv**2)
            bound = kl_tv_local_bound(mu, nu)
            if bound is not None:
                local_checks += 1
                self.assertLessEqual(kl, bound + 1e-15)
        self.assertGreater(local_checks, 100)

    def test_local_bound_outside_neighbourhood(self):
        self.assertIsNone(kl_tv_local_bound(Distribution([0.1, 0.9]), Distribution([0.5, 0.5])))
        self.assertEqual(min_positive(Distribution([0.0, 0.1, 0.9])), 0.1)


class FisherRaoTests(SimpleTestCase):
    def test_zero_vector(self):
        base = Distribution([0.2, 0.3, 0.5])
        zero = TangentVector(np.zeros(3), base)
        self.assertEqual(fisher_rao_inner(zero, zero), 0.0)

    def test_uniform_base(self):
        base = Distribution.uniform(4)
        v = TangentVector([0.1, -0.3, 0.15, 0.05], base)
        self.assertAlmostEqual(fisher_rao_inner(v, v), 4 * np.sum(v.components**2), places=14)

    def test_singular_base(self):
        base = Distribution([0.0, 1.0])
        v = TangentVector([0.5, -0.5], base)
        with self.assertRaises(SingularBase):
            fisher_rao_inner(v, v)

    def test_matches_hessian_of_negative_entropy(self):
        rng = np.random.default_rng(11)
        base = random_distribution(rng, 4)
        raw = rng.normal(size=(2, 4))
        v = TangentVector(raw[0] - raw[0].mean(), base)
        w = TangentVector(raw[1] - raw[1].mean(), base)

        def phi(x):
            return float(np.sum(x * np.log(x)))

        h = 1e-4
        m = base.weights
        a, b = v.components, w.components
        second = (phi(m + h * (a + b)) - phi(m + h * (a - b)) - phi(m - h * (a - b)) + phi(m - h * (a + b))) / (4 * h * h)
        exact = fisher_rao_inner(v, w)
        self.assertAlmostEqual(exact, float(a @ np.diag(1 / m) @ b), places=12)
        self.assertLess(abs(second - exact), 1e-5 * max(1.0, abs(exact)))

    def test_symmetric(self):
        rng = np.random.default_rng(3)
        base = random_distribution(rng, 5)
        raw = rng.normal(size=(2, 5))
        v = TangentVector(raw[0] - raw[0].mean(), base)
        w = TangentVector(raw[1] - raw[1].mean(), base)
        self.assertAlmostEqual(fisher_rao_inner(v, w), fisher_rao_inner(w, v), places=14)


class ProjectionTests(SimpleTestCase):
    def test_whole_simplex_returns_reference(self):
        mu0 = Distribution([0.1, 0.2, 0.3, 0.4])
        result = information_projection(mu0, AffineConstraints.none(4))
        np.testing.assert_allclose(result.weights, mu0.weights, atol=1e-15)

    def test_single_coordinate_constraint(self):
        alpha = 0.3
        constraints = AffineConstraints([[1.0, 0.0, 0.0, 0.0]], [alpha])
        result = information_projection(Distribution.uniform(4), constraints)
        np.testing.assert_allclose(result.weights, [alpha] + [(1 - alpha) / 3] * 3, atol=1e-12)

    def test_matches_stationarity_oracle_on_three_atoms(self):
        mu0 = Distribution([0.5, 0.3, 0.2])
        constraints = AffineConstraints([[1.0, 2.0, 3.0]], [2.2])

        # feasible line: (z - 0.2, 1.2 - 2z, z) for z in [0.2, 0.6]
        def slope(z):
            x, y = z - 0.2, 1.2 - 2 * z
            return math.log(x / 0.5) - 2 * math.log(y / 0.3) + math.log(z / 0.2)

        z = brentq(slope, 0.2 + 1e-12, 0.6 - 1e-12, xtol=1e-15)
        result = information_projection(mu0, constraints)
        np.testing.assert_allclose(result.weights, [z - 0.2, 1.2 - 2 * z, z], atol=1e-10)
        self.assertLess(constraints.residual(result), 1e-10)

    def test_pythagorean_identity(self):
        rng = np.random.default_rng(5)
        lhs = rng.normal(size=(2, 6))
        interior = random_distribution(rng, 6)
        constraints = AffineConstraints(lhs, lhs @ interior.weights)
        mu0 = random_distribution(rng, 6)
        projection = information_projection(mu0, constraints)
        self.assertLess(constraints.residual(projection), 1e-10)
        for _ in range(20):
            # random feasible points along chords through the projection
            direction = interior.weights - projection.weights
            feasible = Distribution.from_unnormalized(projection.weights + rng.random() * direction)
            lhs_value = kl_divergence(feasible, mu0)
            rhs_value = kl_divergence(feasible, projection) + kl_divergence(projection, mu0)
            self.assertAlmostEqual(lhs_value, rhs_value, delta=1e-8)

    def test_projection_onto_a_face_has_maximal_support(self):
        constraints = AffineConstraints([[1.0, 0.0, 0.0]], [0.0])
        result = information_projection(Distribution.uniform(3), constraints)
        np.testing.assert_allclose(result.weights, [0.0, 0.5, 0.5], atol=1e-14)

    def test_support_detection_through_combined_rows(self):
        # the two rows only jointly force mu2 = 0
        lhs = [[1.0, 1.0, 0.0, 0.0], [1.0, 1.0, 1.0, 0.0]]
        support, point = feasible_support(np.array(lhs), np.array([0.5, 0.5]))
        np.testing.assert_array_equal(support, [0, 1, 3])
        np.testing.assert_allclose(np.array(lhs) @ point, [0.5, 0.5], atol=1e-12)

    def test_infeasible_constraints(self):
        with self.assertRaises(InfeasibleConstraints):
            information_projection(Distribution.uniform(3), AffineConstraints([[1.0, 0.0, 0.0]], [1.5]))

    def test_reduce_constraints_drops_duplicates(self):
        lhs = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
        reduced_lhs, reduced_rhs = reduce_constraints(lhs, np.array([0.3, 0.6, 1.0]))
        self.assertEqual(reduced_lhs.shape, (1, 3))
        np.testing.assert_allclose(reduced_lhs @ np.array([0.3, 0.35, 0.35]), reduced_rhs, atol=1e-14)

    def test_reduce_constraints_detects_contradiction(self):
        lhs = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        with self.assertRaises(InfeasibleConstraints):
            reduce_constraints(lhs, np.array([0.3, 0.5]))

    def test_failed_line_search_keeps_the_current_iterate(self):
        lhs = np.array([[1.0, 0.0, -1.0]])
        # an Armijo constant this large rejects every admissible step
        with self.assertLogs("measures.projection", level="WARNING"):
            with self.assertRaises(NonConvergence) as raised:
                dual_newton(np.zeros(3), lhs, np.array([0.3]), armijo=1e12)
        self.assertAlmostEqual(raised.exception.context["residual"], 0.3, delta=1e-15)
        np.testing.assert_array_equal(raised.exception.context["lam"], [0.0])
        self.assertEqual(raised.exception.context["iterations"], 0)

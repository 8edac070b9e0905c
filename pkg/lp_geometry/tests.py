import numpy as np
from django.test import SimpleTestCase, override_settings

from frflow.exceptions import InfeasibleConstraints, SizeLimitExceeded, TrivialProgram
from measures.divergences import tv_distance
from measures.models import Distribution

from .catalog import improvement_example, quadrilateral_example, simplex_lp
from .faces import (
    face_projection,
    in_outgoing_edge_cone,
    max_entropy_point,
    optimal_face,
    rate_constants,
    tv_to_face,
)
from .models import SimplexLp
from .serializers import SimplexLpSerializer
from .vertices import (
    are_neighbors,
    brute_force_vertices,
    enumerate_vertices,
    minimal_face_dimension,
    normal_cone_dimension,
)


def random_lp(rng, n, m):
    """An LP whose feasible region contains a random strictly positive point."""
    lhs = rng.normal(size=(m, n))
    interior = rng.dirichlet(np.ones(n))
    return SimplexLp(rng.normal(size=n), lhs, lhs @ interior)


def same_point_sets(first, second, atol=1e-8):
    if len(first) != len(second):
        return False
    return all(any(np.max(np.abs(a.weights - b.weights)) < atol for b in second) for a in first)


class SimplexLpTests(SimpleTestCase):
    def test_redundant_rows_are_dropped(self):
        lp = SimplexLp([1.0, 0.0, 0.0], [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [1.0, 1.0, 1.0]], [0.3, 0.6, 1.0])
        self.assertEqual(lp.constraint_lhs.shape, (1, 3))
        self.assertEqual(lp.dimension, 1)

    def test_requires_a_strictly_positive_point(self):
        with self.assertRaises(InfeasibleConstraints):
            SimplexLp([1.0, 0.0, 0.0], [[1.0, 0.0, 0.0]], [0.0])

    def test_interior_point_is_feasible(self):
        lp = improvement_example(0.3)
        self.assertTrue(lp.interior_point.is_strictly_positive())
        self.assertTrue(lp.is_feasible(lp.interior_point))

    def test_serializer_builds_the_program(self):
        payload = {"ground_set": 4, "cost": [0, 1, 0, 0], "constraints": [{"lhs": [1, 0, 0, 0], "rhs": 0.3}]}
        serializer = SimplexLpSerializer(data=payload)
        serializer.is_valid(raise_exception=True)
        lp = serializer.save()
        self.assertEqual(lp.ground_set_size, 4)
        self.assertEqual(lp.dimension, 2)

    def test_serializer_rejects_ragged_rows(self):
        payload = {"ground_set": 3, "cost": [0, 1, 0], "constraints": [{"lhs": [1, 0], "rhs": 0.3}]}
        serializer = SimplexLpSerializer(data=payload)
        self.assertFalse(serializer.is_valid())
        self.assertIn("constraints", serializer.errors)


class VertexEnumerationTests(SimpleTestCase):
    def test_simplex_vertices_are_diracs(self):
        vertices = enumerate_vertices(simplex_lp([1.0, 2.0, 3.0]))
        self.assertTrue(same_point_sets(vertices.vertices, [Distribution.dirac(3, i) for i in range(3)]))
        self.assertTrue(np.array_equal(vertices.adjacency, ~np.eye(3, dtype=bool)))

    def test_improvement_example_vertices(self):
        alpha = 0.3
        vertices = enumerate_vertices(improvement_example(alpha))
        expected = []
        for i in (1, 2, 3):
            w = np.zeros(4)
            w[0], w[i] = alpha, 1 - alpha
            expected.append(Distribution(w))
        self.assertTrue(same_point_sets(vertices.vertices, expected))
        self.assertTrue(np.array_equal(vertices.adjacency, ~np.eye(3, dtype=bool)))

    def test_square_diagonals_are_not_neighbors(self):
        lp = quadrilateral_example()
        vertices = enumerate_vertices(lp)
        self.assertEqual(len(vertices), 4)
        for i in range(4):
            self.assertFalse(are_neighbors(lp, vertices, i, i))
            self.assertEqual(int(vertices.adjacency[i].sum()), 2)
            for j in range(4):
                if i == j:
                    continue
                disjoint = not (vertices.support_sets[i] & vertices.support_sets[j])
                self.assertEqual(are_neighbors(lp, vertices, i, j), not disjoint)

    def test_adjacency_matches_normal_cone_definition(self):
        for lp in (quadrilateral_example(), improvement_example(0.4), simplex_lp([0.0, 1.0, 2.0])):
            vertices = enumerate_vertices(lp)
            n = lp.ground_set_size
            for i in range(len(vertices)):
                for j in range(i + 1, len(vertices)):
                    self.assertEqual(
                        vertices.adjacency[i, j], normal_cone_dimension(lp, vertices, i, j) == n - 1, (lp, i, j)
                    )

    def test_matches_support_set_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(15):
            n = int(rng.integers(3, 9))
            m = int(rng.integers(1, min(n - 1, 3) + 1))
            lp = random_lp(rng, n, m)
            vertices = enumerate_vertices(lp)
            self.assertTrue(same_point_sets(vertices.vertices, brute_force_vertices(lp)))
            for v in vertices:
                self.assertTrue(lp.is_feasible(v))
                self.assertLessEqual(v.support.size, lp.dimension + 1)
            self.assertTrue(np.array_equal(vertices.adjacency, vertices.adjacency.T))
            self.assertFalse(vertices.adjacency.diagonal().any())

    def test_edges_have_dimension_one(self):
        lp = quadrilateral_example()
        vertices = enumerate_vertices(lp)
        for i, j in zip(*np.nonzero(vertices.adjacency)):
            self.assertEqual(minimal_face_dimension(lp, vertices[i], vertices[j]), 1)

    def test_budget(self):
        with self.assertRaises(SizeLimitExceeded):
            enumerate_vertices(simplex_lp(np.arange(12.0)), budget=5)

    @override_settings(FRFLOW={"VERTEX_ENUMERATION_BUDGET": 3})
    def test_budget_from_settings(self):
        with self.assertRaises(SizeLimitExceeded):
            enumerate_vertices(simplex_lp(np.arange(4.0)))


class RateConstantTests(SimpleTestCase):
    def test_improvement_family(self):
        for alpha in (0.1, 0.3, 0.5, 0.9):
            lp = improvement_example(alpha)
            vertices = enumerate_vertices(lp)
            rates = rate_constants(lp, vertices, lp.interior_point)
            self.assertAlmostEqual(rates.delta_lower, 1 - alpha, delta=1e-9)
            self.assertAlmostEqual(rates.delta_rate, 1.0, delta=1e-9)
            self.assertTrue(rates.unique_optimum)

    def test_t0_formula(self):
        lp = simplex_lp([1.0, 0.0])
        rates = rate_constants(lp, enumerate_vertices(lp), Distribution.uniform(2))
        # KL(e_0, uniform) = log 2, min positive atom 1, delta 1
        self.assertAlmostEqual(rates.t0, 2 * np.log(2), places=12)

    def test_random_generic_cost_has_singleton_face(self):
        rng = np.random.default_rng(8)
        lp = random_lp(rng, 6, 2)
        face = optimal_face(lp, enumerate_vertices(lp))
        self.assertTrue(face.is_unique)

    def test_zero_cost_is_trivial(self):
        lp = quadrilateral_example(cost=(0.0, 0.0, 0.0, 0.0))
        vertices = enumerate_vertices(lp)
        face = optimal_face(lp, vertices)
        self.assertEqual(len(face), 4)
        with self.assertRaises(TrivialProgram):
            rate_constants(lp, vertices, lp.interior_point)

    def test_non_unique_optimum_reports_no_t0(self):
        lp = simplex_lp([0.0, 1.0, 1.0])
        vertices = enumerate_vertices(lp)
        rates = rate_constants(lp, vertices, Distribution.uniform(3))
        self.assertFalse(rates.unique_optimum)
        self.assertIsNone(rates.t0)
        np.testing.assert_allclose(rates.mu_star.weights, [0.0, 0.5, 0.5], atol=1e-12)

    def test_delta_lower_below_delta_on_random_programs(self):
        rng = np.random.default_rng(99)
        for _ in range(20):
            lp = random_lp(rng, int(rng.integers(3, 7)), 1)
            vertices = enumerate_vertices(lp)
            rates = rate_constants(lp, vertices, lp.interior_point)
            self.assertLessEqual(rates.delta_lower, rates.delta_rate + 1e-12)

    def test_gap_dominates_tv_to_face(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            lp = random_lp(rng, 5, 1).with_cost(np.array([1.0, 1.0, 0.0, -0.5, 0.2]))
            vertices = enumerate_vertices(lp)
            face = optimal_face(lp, vertices)
            if not face.is_proper:
                continue
            rates = rate_constants(lp, vertices, lp.interior_point, face=face)
            for _ in range(50):
                weights = rng.dirichlet(np.ones(len(vertices))) @ vertices.matrix
                mu = Distribution.from_unnormalized(weights)
                gap = face.optimal_value - lp.value(mu)
                self.assertGreaterEqual(gap + 1e-10, rates.delta_rate * tv_to_face(lp, vertices, face, mu))

    def test_vertices_lie_in_outgoing_edge_cone(self):
        rng = np.random.default_rng(12)
        for lp in (quadrilateral_example(), improvement_example(0.2), random_lp(rng, 6, 2)):
            vertices = enumerate_vertices(lp)
            face = optimal_face(lp, vertices)
            for v in vertices:
                self.assertTrue(in_outgoing_edge_cone(lp, vertices, face, v))

    def test_outside_the_cone(self):
        lp = quadrilateral_example()
        vertices = enumerate_vertices(lp)
        face = optimal_face(lp, vertices)
        self.assertFalse(in_outgoing_edge_cone(lp, vertices, face, np.array([-1.0, 0.0, 1.0, 1.0])))


class FaceProjectionTests(SimpleTestCase):
    def test_facet_projection_of_uniform(self):
        lp = simplex_lp([0.0, 1.0, 1.0])
        vertices = enumerate_vertices(lp)
        result = face_projection(lp, optimal_face(lp, vertices), Distribution.uniform(3))
        self.assertLess(tv_distance(result, Distribution([0.0, 0.5, 0.5])), 1e-12)

    def test_max_entropy_point(self):
        mu = max_entropy_point(improvement_example(0.4))
        np.testing.assert_allclose(mu.weights, [0.4, 0.2, 0.2, 0.2], atol=1e-12)

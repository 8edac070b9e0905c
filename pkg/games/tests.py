import numpy as np
from django.test import SimpleTestCase, override_settings

from flow.central_path import closed_form_simplex_flow
from frflow.exceptions import NotFactorizable, SizeLimitExceeded
from measures.divergences import tv_distance
from measures.models import Distribution

from .dynamics import (
    closed_form_factors,
    closed_form_product_flow,
    factor_flow_deviation,
    joint_exponential_flow,
    simulate_factor_flow,
)
from .factorization import factorize_cost, parameter_counts
from .models import FactorizedCost, IndependenceState
from .serializers import GameSerializer


def separable_cost(rng, num_players, num_actions):
    factors = rng.normal(size=(num_players, num_actions))
    return FactorizedCost(factors).assembled()


class FactorizationTests(SimpleTestCase):
    def test_zero_cost(self):
        fc = factorize_cost(np.zeros((3, 3)))
        np.testing.assert_array_equal(fc.factors, 0.0)

    def test_single_player_keeps_the_cost(self):
        fc = factorize_cost([0.5, -1.0, 2.0], num_players=1)
        np.testing.assert_allclose(fc.factors, [[0.5, -1.0, 2.0]])

    def test_two_player_sum(self):
        a, b = np.array([1.0, 0.0]), np.array([0.0, 2.0])
        fc = factorize_cost(a[:, None] + b[None, :])
        np.testing.assert_allclose(fc.factors, [[2.0, 1.0], [-1.0, 1.0]])
        np.testing.assert_array_equal(fc.assembled(), a[:, None] + b[None, :])

    def test_recovers_random_separable_costs(self):
        rng = np.random.default_rng(31)
        for n, k in ((2, 3), (3, 2), (4, 3)):
            cost = separable_cost(rng, n, k)
            with self.subTest(players=n, actions=k):
                fc = factorize_cost(cost.ravel(), num_players=n)
                np.testing.assert_allclose(fc.assembled(), cost, atol=1e-12)
                np.testing.assert_allclose(fc.factors[1:].mean(axis=1), 0.0, atol=1e-14)

    def test_coordination_payoff_is_not_factorizable(self):
        with self.assertRaises(NotFactorizable) as raised:
            factorize_cost(np.eye(2))
        self.assertAlmostEqual(raised.exception.residual, 0.5)

    @override_settings(FRFLOW={"JOINT_SIZE_BUDGET": 50})
    def test_joint_budget(self):
        with self.assertRaises(SizeLimitExceeded):
            factorize_cost(np.zeros(81), num_players=4, num_actions=3)

    def test_parameter_economy(self):
        self.assertEqual(parameter_counts(3, 4), (9, 63))
        for n, k in ((2, 3), (5, 2), (4, 10)):
            independent, joint = parameter_counts(n, k)
            self.assertLess(independent, joint)

    def test_serializer(self):
        serializer = GameSerializer(data={"num_players": 2, "num_actions": 2, "cost": [1, 3, 0, 2]})
        serializer.is_valid(raise_exception=True)
        np.testing.assert_allclose(serializer.save().factors, [[2.0, 1.0], [-1.0, 1.0]])

    def test_serializer_checks_the_cost_length(self):
        serializer = GameSerializer(data={"num_players": 2, "num_actions": 3, "cost": [1, 3, 0, 2]})
        self.assertFalse(serializer.is_valid())
        self.assertIn("cost", serializer.errors)


class ClosedFormTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(32)

    def test_starts_uniform(self):
        fc = FactorizedCost(self.rng.normal(size=(2, 3)))
        self.assertTrue(closed_form_product_flow(fc, 0.0).allclose(Distribution.uniform(9), atol=1e-15))

    def test_product_of_per_player_softmax(self):
        a, b = self.rng.normal(size=3), self.rng.normal(size=3)
        fc = FactorizedCost([a, b])
        t = 1.7
        first = np.exp(t * a) / np.exp(t * a).sum()
        second = np.exp(t * b) / np.exp(t * b).sum()
        np.testing.assert_allclose(closed_form_product_flow(fc, t).weights, np.outer(first, second).ravel(), atol=1e-15)

    def test_matches_the_joint_exponential(self):
        fc = FactorizedCost(self.rng.normal(size=(3, 3)))
        initial = IndependenceState(tuple(self.rng.dirichlet(np.ones(3), size=3)))
        for t in (0.5, 3.0, 20.0):
            with self.subTest(t=t):
                self.assertTrue(
                    closed_form_product_flow(fc, t, initial).allclose(joint_exponential_flow(fc, t, initial), atol=1e-12)
                )

    def test_concentrates_on_the_best_outcome(self):
        fc = FactorizedCost([[0.0, 1.0, 0.5], [2.0, 0.0, 1.0]])
        limit = closed_form_product_flow(fc, 200.0)
        self.assertTrue(limit.allclose(Distribution.dirac(9, 1 * 3 + 0), atol=1e-12))

    def test_marginals_are_the_factor_flows(self):
        fc = FactorizedCost(self.rng.normal(size=(3, 2)))
        joint = closed_form_product_flow(fc, 2.0).weights.reshape(2, 2, 2)
        factors = closed_form_factors(fc, 2.0).marginals()
        np.testing.assert_allclose(joint.sum(axis=(1, 2)), factors[0], atol=1e-15)
        np.testing.assert_allclose(joint.sum(axis=(0, 2)), factors[1], atol=1e-15)
        np.testing.assert_allclose(joint.sum(axis=(0, 1)), factors[2], atol=1e-15)


class FactorFlowTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(33)

    def test_zero_cost_is_stationary(self):
        theta0 = self.rng.normal(size=(2, 3))
        states = simulate_factor_flow(FactorizedCost(np.zeros((2, 3))), theta0, stepsize=0.1, iters=20)
        np.testing.assert_allclose(states[-1].marginals(), states[0].marginals(), atol=1e-15)

    def test_single_player_is_the_simplex_flow(self):
        c = self.rng.normal(size=4)
        states = simulate_factor_flow(FactorizedCost([c]), stepsize=1e-2, iters=100)
        expected = closed_form_simplex_flow(c, Distribution.uniform(4), 1.0)
        self.assertTrue(states[-1].joint().allclose(expected, atol=1e-12))

    def test_two_players_three_actions(self):
        fc = factorize_cost(separable_cost(self.rng, 2, 3))
        rows = factor_flow_deviation(fc, stepsize=1e-3, iters=1000)
        self.assertAlmostEqual(rows[-1][0], 1.0)
        self.assertLess(max(tv for _, tv in rows), 1e-3)

    def test_product_start_stays_a_product(self):
        fc = FactorizedCost(self.rng.normal(size=(2, 3)))
        theta0 = self.rng.normal(size=(2, 3))
        state = simulate_factor_flow(fc, theta0, stepsize=1e-3, iters=1000)[-1]
        start = IndependenceState(tuple(np.exp(theta0) / np.exp(theta0).sum(axis=1, keepdims=True)))
        self.assertLess(tv_distance(state.joint(), joint_exponential_flow(fc, 1.0, start)), 1e-3)

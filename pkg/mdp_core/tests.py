import numpy as np
from django.test import SimpleTestCase

from frflow.exceptions import ExplorationViolation, TrivialProgram
from flow.bounds import check_bound_chain
from flow.central_path import central_path_point, default_time_grid, integrate_flow
from lp_geometry.vertices import enumerate_vertices
from measures.divergences import kl_divergence, tv_distance
from measures.models import Distribution

from .catalog import degenerate_example, kakade_example, random_mdp
from .models import Mdp, Policy
from .occupancy import (
    check_exploration,
    deterministic_policies,
    deterministic_rewards,
    occupancy,
    policy_from_occupancy,
    reward_of,
    state_action_lp,
    state_occupancy,
    state_transition,
    uniform_policy,
)
from .rates import mdp_rate_constants, optimal_occupancy
from .serializers import MdpSerializer
from .values import optimal_values, performance_difference, policy_values, q_values


def random_policy(rng, mdp):
    return Policy(rng.dirichlet(np.ones(mdp.num_actions), size=mdp.num_states))


def bandit(reward):
    reward = np.atleast_2d(np.asarray(reward, dtype=float))
    return Mdp(np.ones(reward.shape + (1,)), reward, 0.9, Distribution([1.0]), name="bandit")


def policy_iteration(mdp):
    actions = (0,) * mdp.num_states
    while True:
        pi = Policy.deterministic(actions, mdp.num_actions)
        q = q_values(mdp, policy_values(mdp, pi))
        improved = tuple(
            int(np.argmax(row)) if row.max() > row[a] + 1e-12 else a for row, a in zip(q, actions)
        )
        if improved == actions:
            return actions
        actions = improved


class OccupancyTests(SimpleTestCase):
    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_no_discount_multiplies_start_and_policy(self):
        mdp = random_mdp(self.rng, 3, 2, discount=0.0)
        pi = random_policy(self.rng, mdp)
        d = occupancy(mdp, pi)
        np.testing.assert_allclose(d.table, mdp.initial.weights[:, None] * pi.table, atol=1e-15)

    def test_deterministic_rewards_of_the_two_state_example(self):
        rewards = deterministic_rewards(kakade_example())
        expected = {(0, 0): 1.2, (0, 1): 0.98, (1, 0): 1.84, (1, 1): 0.0}
        self.assertEqual(set(rewards), set(expected))
        for actions, value in expected.items():
            self.assertAlmostEqual(rewards[actions], value, delta=1e-9)

    def test_matches_the_truncated_series(self):
        mdp = random_mdp(self.rng, 3, 2)
        pi = random_policy(self.rng, mdp)
        kernel = state_transition(mdp, pi)
        marginal, total = mdp.initial.weights.copy(), np.zeros(3)
        for t in range(2001):
            total += (1.0 - mdp.discount) * mdp.discount**t * marginal
            marginal = marginal @ kernel
        np.testing.assert_allclose(state_occupancy(mdp, pi), total, atol=1e-8)

    def test_satisfies_the_flow_constraints(self):
        for _ in range(10):
            mdp = random_mdp(self.rng, 4, 3)
            d = occupancy(mdp, random_policy(self.rng, mdp))
            self.assertAlmostEqual(d.weights.sum(), 1.0, delta=1e-12)
            self.assertLessEqual(mdp.flow_residual(d), 1e-9)
            self.assertTrue(np.all(d.state_marginal >= (1 - mdp.discount) * mdp.initial.weights - 1e-15))

    def test_constant_reward_is_returned(self):
        mdp = random_mdp(self.rng, 3, 2).with_reward(np.ones((3, 2)))
        self.assertAlmostEqual(reward_of(mdp, random_policy(self.rng, mdp)), 1.0, delta=1e-12)

    def test_policy_round_trip(self):
        mdp = random_mdp(self.rng, 3, 3)
        d = occupancy(mdp, random_policy(self.rng, mdp))
        again = occupancy(mdp, policy_from_occupancy(d))
        self.assertTrue(again.allclose(d, atol=1e-9))

    def test_uniform_actions_give_the_uniform_policy(self):
        mdp = random_mdp(self.rng, 3, 2)
        pi = policy_from_occupancy(occupancy(mdp, uniform_policy(mdp)))
        np.testing.assert_allclose(pi.table, 0.5, atol=1e-12)

    def test_optimal_occupancy_conditions_to_the_optimal_policy(self):
        mdp = kakade_example()
        pi = policy_from_occupancy(optimal_occupancy(mdp))
        np.testing.assert_allclose(pi.table, [[0.0, 1.0], [1.0, 0.0]], atol=1e-9)
        self.assertEqual(pi.actions, (1, 0))

    def test_unvisited_state_cannot_be_conditioned(self):
        mdp = Mdp(np.tile([1.0, 0.0], (2, 2, 1)), np.zeros((2, 2)), 0.5, Distribution([1.0, 0.0]))
        with self.assertRaises(ExplorationViolation):
            policy_from_occupancy(occupancy(mdp, uniform_policy(mdp)))


class ExplorationTests(SimpleTestCase):
    def test_positive_start_explores(self):
        self.assertTrue(check_exploration(random_mdp(np.random.default_rng(0), 3, 2)))

    def test_two_state_example_explores(self):
        self.assertTrue(check_exploration(kakade_example()))

    def test_unreachable_state(self):
        mdp = Mdp(np.tile([1.0, 0.0], (2, 2, 1)), np.zeros((2, 2)), 0.5, Distribution([1.0, 0.0]))
        self.assertFalse(check_exploration(mdp))
        with self.assertRaises(ExplorationViolation):
            state_action_lp(mdp)

    def test_reachable_state_with_zero_start_mass(self):
        transition = np.zeros((2, 2, 2))
        transition[:, :, 1] = 1.0
        mdp = Mdp(transition, np.zeros((2, 2)), 0.5, Distribution([1.0, 0.0]))
        self.assertTrue(check_exploration(mdp))

    def test_thread_count_does_not_change_the_verdict(self):
        mdp = Mdp(np.tile([1.0, 0.0, 0.0], (3, 2, 1)), np.zeros((3, 2)), 0.5, Distribution([1.0, 0.0, 0.0]))
        for threads in (1, 4):
            with self.subTest(threads=threads):
                self.assertFalse(check_exploration(mdp, threads=threads))
                self.assertTrue(check_exploration(kakade_example(), threads=threads))

    def test_deterministic_rewards_in_enumeration_order(self):
        mdp = random_mdp(np.random.default_rng(8), 3, 3)
        serial = deterministic_rewards(mdp, threads=1)
        pooled = deterministic_rewards(mdp, threads=4)
        self.assertEqual(list(pooled), [pi.actions for pi in deterministic_policies(mdp)])
        self.assertEqual(serial, pooled)
        for pi in deterministic_policies(mdp):
            self.assertEqual(pooled[pi.actions], reward_of(mdp, pi))


class StateActionPolytopeTests(SimpleTestCase):
    def assert_vertices_are_deterministic_occupancies(self, mdp):
        vertices = enumerate_vertices(state_action_lp(mdp))
        policies = list(deterministic_policies(mdp))
        self.assertEqual(len(vertices), len(policies))
        index = {}
        for pi in policies:
            found = vertices.index_of(occupancy(mdp, pi), atol=1e-8)
            self.assertIsNotNone(found, pi)
            index[pi.actions] = found
        for first in policies:
            for second in policies:
                if first is second:
                    continue
                one_state = sum(a != b for a, b in zip(first.actions, second.actions)) == 1
                self.assertEqual(bool(vertices.adjacency[index[first.actions], index[second.actions]]), one_state)

    def test_single_state_is_the_action_simplex(self):
        lp = state_action_lp(bandit([0.3, 1.0, 0.2]))
        self.assertEqual(lp.dimension, 2)
        np.testing.assert_allclose(lp.cost, [0.3, 1.0, 0.2])

    def test_two_state_example(self):
        self.assert_vertices_are_deterministic_occupancies(kakade_example())

    def test_random_exploratory_mdps(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            with self.subTest(trial=trial):
                self.assert_vertices_are_deterministic_occupancies(random_mdp(rng, 2 + trial % 2, 2))


class ValueTests(SimpleTestCase):
    def test_no_discount_is_the_best_immediate_reward(self):
        mdp = random_mdp(np.random.default_rng(3), 4, 3, discount=0.0)
        np.testing.assert_allclose(optimal_values(mdp).v_star, mdp.reward.max(axis=1), atol=1e-12)

    def test_two_state_example(self):
        values = optimal_values(kakade_example())
        self.assertEqual(values.greedy_policy.actions, (1, 0))
        np.testing.assert_allclose(values.v_star, [1.8, 2.0], atol=1e-12)
        self.assertTrue(values.unique)

    def test_q_values_are_the_scaled_bellman_fixed_point(self):
        mdp = random_mdp(np.random.default_rng(7), 4, 3, discount=0.8)
        values = optimal_values(mdp)
        unnormalized_v = values.v_star / (1.0 - mdp.discount)
        unnormalized_q = mdp.reward + mdp.discount * mdp.transition @ unnormalized_v
        np.testing.assert_allclose(values.q_star, (1.0 - mdp.discount) * unnormalized_q, atol=1e-12)
        np.testing.assert_allclose(unnormalized_v, unnormalized_q.max(axis=1), atol=1e-10)

    def test_advantages_are_non_positive(self):
        values = optimal_values(random_mdp(np.random.default_rng(4), 4, 3))
        self.assertLessEqual(values.a_star.max(), 1e-12)
        for s, actions in enumerate(values.optimal_actions):
            self.assertIn(values.greedy_policy.actions[s], actions)

    def test_matches_policy_iteration(self):
        rng = np.random.default_rng(5)
        for trial in range(20):
            mdp = random_mdp(rng, 4, 3, discount=0.95)
            with self.subTest(trial=trial):
                self.assertEqual(optimal_values(mdp).greedy_policy.actions, policy_iteration(mdp))

    def test_performance_difference(self):
        rng = np.random.default_rng(6)
        mdp = random_mdp(rng, 3, 3)
        values = optimal_values(mdp)
        best = float(mdp.initial.weights @ values.v_star)
        for _ in range(10):
            pi = random_policy(rng, mdp)
            self.assertAlmostEqual(performance_difference(mdp, pi, values), best - reward_of(mdp, pi), delta=1e-9)


class RateConstantTests(SimpleTestCase):
    def test_two_state_example(self):
        rates = mdp_rate_constants(kakade_example())
        self.assertAlmostEqual(rates.delta_rate, 0.8, delta=1e-9)
        self.assertAlmostEqual(rates.delta_lower, 0.64, delta=1e-9)
        self.assertAlmostEqual(rates.delta_kakade, 0.8, delta=1e-9)
        self.assertAlmostEqual(rates.optimal_value, 1.84, delta=1e-9)
        self.assertTrue(rates.unique_optimum)

    def test_two_state_variant(self):
        rates = mdp_rate_constants(kakade_example(reward_s1_a2=3.0))
        self.assertAlmostEqual(rates.delta_rate, 0.5789, delta=1e-3)
        self.assertAlmostEqual(rates.delta_lower, 0.5326, delta=1e-3)
        self.assertAlmostEqual(rates.delta_kakade, 1.1, delta=1e-9)

    def test_bandit(self):
        rates = mdp_rate_constants(bandit([1.0, 0.0]))
        self.assertAlmostEqual(rates.delta_rate, 1.0, delta=1e-9)
        self.assertAlmostEqual(rates.delta_lower, 1.0, delta=1e-9)
        self.assertAlmostEqual(rates.delta_kakade, 1.0, delta=1e-9)

    def test_strict_improvement_on_random_mdps(self):
        rng = np.random.default_rng(8)
        for trial in range(10):
            mdp = random_mdp(rng, 2 + trial % 2, 2)
            with self.subTest(trial=trial):
                rates = mdp_rate_constants(mdp)
                self.assertTrue(rates.unique_optimum)
                self.assertLess(rates.delta_lower, rates.delta_rate)
                self.assertLessEqual(rates.delta_rate, rates.delta_kakade + 1e-9)

    def test_constant_reward_is_trivial(self):
        mdp = kakade_example().with_reward(np.ones((2, 2)))
        with self.assertRaises(TrivialProgram):
            mdp_rate_constants(mdp)

    def test_degenerate_optimum(self):
        rates = mdp_rate_constants(degenerate_example())
        self.assertFalse(rates.unique_optimum)
        self.assertIsNone(rates.t0)
        self.assertAlmostEqual(rates.delta_kakade, 11.0, delta=1e-9)
        self.assertLessEqual(rates.delta_lower, rates.delta_rate)


class StateActionFlowTests(SimpleTestCase):
    def test_bounds_hold_along_the_flow(self):
        mdp = kakade_example()
        lp = state_action_lp(mdp)
        start = occupancy(mdp, uniform_policy(mdp))
        trajectory = integrate_flow(lp, start, default_time_grid(points=80, t_max=60.0))
        self.assertEqual(check_bound_chain(trajectory), [])
        self.assertLess(trajectory.gap[-1], 1e-12 + 2 * np.exp(-0.8 * 50))

    def test_degenerate_flow_selects_the_information_projection(self):
        mdp = degenerate_example()
        lp = state_action_lp(mdp)
        start = occupancy(mdp, uniform_policy(mdp))
        limit = optimal_occupancy(mdp, start)
        self.assertLess(tv_distance(central_path_point(lp, start, 50.0), limit), 1e-6)
        # the face projection of the uniform policy keeps s1 uniform
        np.testing.assert_allclose(policy_from_occupancy(limit).table[0], [0.5, 0.5], atol=1e-9)
        self.assertGreater(kl_divergence(limit, start), 0.0)


class MdpSerializerTests(SimpleTestCase):
    payload = {
        "num_states": 2,
        "num_actions": 2,
        "gamma": 0.9,
        "mu": [0.8, 0.2],
        "reward": [[1, 0], [2, 0]],
        "transition": [[1, 0], [0, 1], [0, 1], [1, 0]],
    }

    def test_builds_the_two_state_example(self):
        serializer = MdpSerializer(data=self.payload)
        serializer.is_valid(raise_exception=True)
        mdp = serializer.save()
        np.testing.assert_array_equal(mdp.transition, kakade_example().transition)
        self.assertAlmostEqual(reward_of(mdp, Policy.deterministic((1, 0), 2)), 1.84, delta=1e-12)

    def test_rejects_a_discount_of_one(self):
        serializer = MdpSerializer(data={**self.payload, "gamma": 1.0})
        self.assertFalse(serializer.is_valid())
        self.assertIn("gamma", serializer.errors)

    def test_rejects_short_transition_tables(self):
        serializer = MdpSerializer(data={**self.payload, "transition": [[1, 0], [0, 1]]})
        self.assertFalse(serializer.is_valid())
        self.assertIn("transition", serializer.errors)

"""Bundled example MDPs."""
import numpy as np

from measures.models import Distribution

from .models import Mdp


def kakade_example(reward_s1_a2=0.0, discount=0.9, initial=(0.8, 0.2)):
    """Two states, two actions, deterministic moves.

    In either state ``a1`` stays and ``a2`` switches; staying pays 1 in
    ``s1`` and 2 in ``s2``. Switching from ``s1`` pays ``reward_s1_a2``.
    """
    transition = np.zeros((2, 2, 2))
    transition[0, 0, 0] = transition[0, 1, 1] = 1.0
    transition[1, 0, 1] = transition[1, 1, 0] = 1.0
    reward = np.array([[1.0, reward_s1_a2], [2.0, 0.0]])
    name = "kakade2x2" if reward_s1_a2 == 0 else "kakade2x2-variant"
    return Mdp(transition, reward, discount, Distribution(initial), name=name)


def degenerate_example(discount=0.9, initial=(0.8, 0.2)):
    """Both actions of ``s1`` are the same self-loop, so two deterministic policies are optimal."""
    transition = np.zeros((2, 2, 2))
    transition[0, 0, 0] = transition[0, 1, 0] = 1.0
    transition[1, 0, 1] = transition[1, 1, 0] = 1.0
    reward = np.array([[1.0, 1.0], [2.0, 0.0]])
    return Mdp(transition, reward, discount, Distribution(initial), name="degenerate2x2")


def random_mdp(rng, num_states, num_actions, discount=0.9, full_support=True):
    transition = rng.dirichlet(np.ones(num_states), size=(num_states, num_actions))
    initial = rng.dirichlet(np.ones(num_states)) if full_support else np.eye(num_states)[0]
    return Mdp(transition, rng.random((num_states, num_actions)), discount, Distribution(initial), name="random")

import numpy as np

from mdp_app.models import TabularMdp


def random_mdp(rng, n_states=4, n_actions=3, discount=0.8, reward_scale=1.0):
    """Dense random MDP: Dirichlet transitions and initial state, Gaussian rewards."""
    transition = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    reward = reward_scale * rng.normal(size=(n_states, n_actions))
    init_dist = rng.dirichlet(np.ones(n_states))
    return TabularMdp(transition=transition, reward=reward, init_dist=init_dist, discount=discount)


def single_state_mdp(n_actions=1, reward=0.0, discount=0.9):
    return TabularMdp(
        transition=np.ones((1, n_actions, 1)),
        reward=np.full((1, n_actions), reward),
        init_dist=np.ones(1),
        discount=discount,
    )


def discounted_visit_samples(states, actions, n_states, n_actions, discount):
    """Per-rollout discounted (s, a) visit counts, shape [batch, n_states * n_actions]."""
    batch, steps = actions.shape
    weights = np.broadcast_to(discount ** np.arange(steps), (batch, steps))
    rows = np.broadcast_to(np.arange(batch)[:, None], (batch, steps))
    samples = np.zeros((batch, n_states, n_actions))
    np.add.at(samples, (rows, states[:, :-1], actions), weights)
    return samples.reshape(batch, -1)

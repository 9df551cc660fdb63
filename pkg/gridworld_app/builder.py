import numpy as np

from gridworld_app.models import MOVES
from mdp_app.models import TabularMdp


def successor_cell(spec, cell, action):
    """Cell reached from ``cell`` by ``action``; wall-directed moves stay put."""
    dx, dy = MOVES[action]
    target = (cell[0] + dx, cell[1] + dy)
    return target if spec.contains(target) else cell


def build_gridworld(spec):
    """
    Deterministic TabularMdp of a gridworld.

    The reward is state-only, R(s, a) = log P~(s) with P~ the softmax of the
    target logits, and the episode starts at ``spec.start`` with probability 1.
    """
    transition = np.zeros((spec.n_states, spec.n_actions, spec.n_states))
    for state in range(spec.n_states):
        cell = spec.cell(state)
        for index, action in enumerate(spec.actions):
            transition[state, index, spec.state_index(successor_cell(spec, cell, action))] = 1.0

    reward = np.repeat(spec.target_log_probs()[:, None], spec.n_actions, axis=1)
    init_dist = np.zeros(spec.n_states)
    init_dist[spec.start_state] = 1.0
    return TabularMdp(transition=transition, reward=reward, init_dist=init_dist, discount=spec.discount)

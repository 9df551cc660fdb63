"""
Parameter, gradient and configuration types of the estimation app.
"""
import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.special import log_softmax, softmax

from estimation_app.exceptions import InvalidConfigError, InvalidParametersError
from mdp_app.models import TabularMdp

# Logit assigned to zero-probability entries so parameters stay finite and
# JSON-serializable; exp(-700) is far below any tolerance in use.
LOG_PROB_FLOOR = -700.0

VARIANTS = ('bm_irl', 'rm_irl', 'two_stage')
GRADIENT_BACKENDS = ('exact', 'sampled')


def logits_from_probs(probs):
    """Logits whose softmax reproduces ``probs`` along the last axis."""
    probs = np.asarray(probs, dtype=float)
    with np.errstate(divide='ignore'):
        logits = np.log(probs)
    return np.maximum(logits, LOG_PROB_FLOOR)


@dataclass(frozen=True, eq=False)
class ThetaParams:
    """
    Learnable reward and internal-dynamics parameters theta = {theta1, theta2}.

    ``reward_logits`` of shape [n_states] select the state-only mode where
    R(s, a) = log softmax(theta1)[s]; shape [n_states, n_actions] selects the
    table mode where R = theta1 directly. The internal dynamics are
    P^(s'|s, a) = softmax over s' of ``dynamics_logits[s, a]``.

    ``discount`` and ``init_dist`` are the known parts of the expert's MDP;
    ``lam`` is the prior precision of the dynamics-accuracy prior.
    """
    reward_logits: np.ndarray
    dynamics_logits: np.ndarray
    lam: float = 0.0
    discount: float = 0.9
    init_dist: np.ndarray = None
    max_reward: float = None

    def __post_init__(self):
        reward_logits = np.array(self.reward_logits, dtype=float)
        dynamics_logits = np.array(self.dynamics_logits, dtype=float)
        if dynamics_logits.ndim != 3 or dynamics_logits.shape[0] != dynamics_logits.shape[2]:
            raise InvalidParametersError('dynamics_logits', 'expected shape [n_states, n_actions, n_states]')
        n_states, n_actions = dynamics_logits.shape[:2]
        if reward_logits.shape not in ((n_states,), (n_states, n_actions)):
            raise InvalidParametersError('reward_logits', f'expected shape ({n_states},) or ({n_states}, {n_actions})')
        if np.any(np.isnan(reward_logits)) or np.any(np.isnan(dynamics_logits)):
            raise InvalidParametersError('logits', 'must not contain NaN')
        if not (math.isfinite(self.lam) and self.lam >= 0.0):
            raise InvalidParametersError('lam', 'prior precision must be finite and non-negative')
        if self.max_reward is not None and self.max_reward <= 0:
            raise InvalidParametersError('max_reward', 'must be positive')

        init_dist = self.init_dist
        if init_dist is None:
            init_dist = np.full(n_states, 1.0 / n_states)
        init_dist = np.array(init_dist, dtype=float)
        if init_dist.shape != (n_states,):
            raise InvalidParametersError('init_dist', f'expected shape ({n_states},)')
        if not 0.0 < float(self.discount) < 1.0:
            raise InvalidParametersError('discount', 'must lie strictly inside (0, 1)')
        object.__setattr__(self, 'reward_logits', reward_logits)
        object.__setattr__(self, 'dynamics_logits', dynamics_logits)
        object.__setattr__(self, 'init_dist', init_dist)
        object.__setattr__(self, 'lam', float(self.lam))
        object.__setattr__(self, 'discount', float(self.discount))

    @classmethod
    def from_mdp(cls, mdp, lam=0.0, reward_logits=None, max_reward=None):
        """
        Parameters reproducing ``mdp`` exactly: dynamics logits are the log of
        the true transitions, rewards are given logits (state mode) or the
        MDP's reward table (table mode).
        """
        if reward_logits is None:
            reward_logits = mdp.reward
        return cls(
            reward_logits=reward_logits,
            dynamics_logits=logits_from_probs(mdp.transition),
            lam=lam,
            discount=mdp.discount,
            init_dist=mdp.init_dist,
            max_reward=max_reward,
        )

    @property
    def n_states(self):
        return self.dynamics_logits.shape[0]

    @property
    def n_actions(self):
        return self.dynamics_logits.shape[1]

    @property
    def reward_mode(self):
        return 'state' if self.reward_logits.ndim == 1 else 'table'

    def raw_reward(self):
        if self.reward_mode == 'state':
            state_reward = log_softmax(self.reward_logits)
            return np.repeat(state_reward[:, None], self.n_actions, axis=1)
        return self.reward_logits.copy()

    def reward_table(self):
        reward = self.raw_reward()
        if self.max_reward is not None:
            reward = np.clip(reward, -self.max_reward, self.max_reward)
        return reward

    def dynamics(self):
        return softmax(self.dynamics_logits, axis=-1)

    def log_dynamics(self):
        return log_softmax(self.dynamics_logits, axis=-1)

    def as_mdp(self):
        return TabularMdp(self.dynamics(), self.reward_table(), self.init_dist, self.discount)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def reward_pullback(self, weights):
        """
        Gradient w.r.t. theta1 of sum_{s,a} weights(s, a) R(s, a).

        Clipped entries contribute nothing.
        """
        weights = np.asarray(weights, dtype=float)
        if self.max_reward is not None:
            raw = self.raw_reward()
            weights = np.where(np.abs(raw) < self.max_reward, weights, 0.0)
        if self.reward_mode == 'table':
            return weights
        state_weights = weights.sum(axis=-1)
        return state_weights - state_weights.sum(axis=-1, keepdims=True) * softmax(self.reward_logits)

    def expected_value_pullback(self, weights, v):
        """
        Gradient w.r.t. theta2 of sum_{s,a} weights(s, a) EV(s, a), where
        EV(s, a) = sum_s' P^(s'|s, a) v(s') and ``v`` is held fixed.
        """
        dynamics = self.dynamics()
        expected = dynamics @ v
        return np.asarray(weights, dtype=float)[:, :, None] * dynamics * (v[None, None, :] - expected[:, :, None])

    def log_dynamics_pullback(self, counts):
        """Gradient w.r.t. theta2 of sum counts(s, a, s') log P^(s'|s, a)."""
        counts = np.asarray(counts, dtype=float)
        return counts - counts.sum(axis=-1, keepdims=True) * self.dynamics()

    def as_dict(self):
        return {
            'reward_logits': self.reward_logits.tolist(),
            'dynamics_logits': self.dynamics_logits.tolist(),
            'lam': self.lam,
            'discount': self.discount,
            'init_dist': self.init_dist.tolist(),
            'max_reward': self.max_reward,
        }


@dataclass(frozen=True, eq=False)
class GradientVector:
    """
    Concatenation of reward and dynamics gradients, shaped like the logits.
    """
    d_reward: np.ndarray
    d_dynamics: np.ndarray

    @classmethod
    def zeros_like(cls, theta):
        return cls(np.zeros_like(theta.reward_logits), np.zeros_like(theta.dynamics_logits))

    def __add__(self, other):
        return GradientVector(self.d_reward + other.d_reward, self.d_dynamics + other.d_dynamics)

    def __sub__(self, other):
        return GradientVector(self.d_reward - other.d_reward, self.d_dynamics - other.d_dynamics)

    def __mul__(self, scale):
        return GradientVector(scale * self.d_reward, scale * self.d_dynamics)

    __rmul__ = __mul__

    def flat(self):
        return np.concatenate([self.d_reward.ravel(), self.d_dynamics.ravel()])

    def norm(self):
        return float(np.linalg.norm(self.flat()))

    @property
    def reward_norm(self):
        return float(np.linalg.norm(self.d_reward))

    @property
    def dynamics_norm(self):
        return float(np.linalg.norm(self.d_dynamics))

    def is_finite(self):
        return bool(np.all(np.isfinite(self.d_reward)) and np.all(np.isfinite(self.d_dynamics)))


@dataclass(frozen=True)
class TrainConfig:
    """
    Hyperparameters of the BM-IRL, RM-IRL and two-stage training loops.

    ``lambda1`` weighs the value (EV) terms of the dynamics objective and
    ``lambda2`` the data log-likelihood; their ratio is the effective prior
    precision unless ``prior_precision`` pins it explicitly.
    """
    lambda1: float = 1.0
    lambda2: float = 1.0
    reward_lr: float = 0.05
    dynamics_lr: float = 0.05
    dynamics_steps_per_outer: int = 5
    rollout_batch: int = 256
    rollout_steps: int = 40
    outer_iters: int = 2000
    seed: int = 0
    variant: str = 'bm_irl'
    gradient_backend: str = 'exact'
    prior_precision: float = None
    partial_inner_sweeps: int = 0
    snapshot_every: int = 100
    smoothing: float = 1.0
    max_reward: float = None
    reward_l2: float = 0.0
    normalize_advantages: bool = True
    solver_tol: float = 1e-10
    divergence_patience: int = 50
    divergence_drop: float = 0.0
    reward_mode: str = 'state'

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidConfigError('variant', f'must be one of {VARIANTS}')
        if self.gradient_backend not in GRADIENT_BACKENDS:
            raise InvalidConfigError('gradient_backend', f'must be one of {GRADIENT_BACKENDS}')
        for name in ('lambda1', 'lambda2', 'reward_lr', 'dynamics_lr', 'smoothing', 'reward_l2'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidConfigError(name, 'must be finite and non-negative')
        for name in ('dynamics_steps_per_outer', 'outer_iters', 'seed', 'partial_inner_sweeps'):
            if getattr(self, name) < 0:
                raise InvalidConfigError(name, 'must be non-negative')
        for name in ('rollout_batch', 'rollout_steps', 'snapshot_every', 'divergence_patience'):
            if getattr(self, name) < 1:
                raise InvalidConfigError(name, 'must be at least 1')
        if self.reward_mode not in ('state', 'table'):
            raise InvalidConfigError('reward_mode', "must be 'state' or 'table'")
        if self.prior_precision is not None and self.prior_precision < 0:
            raise InvalidConfigError('prior_precision', 'must be non-negative')
        if self.variant == 'rm_irl' and not self.lambda2 > self.lambda1:
            raise InvalidConfigError('lambda2', 'RM-IRL requires lambda2 > lambda1')

    @property
    def lambda_effective(self):
        """Prior precision lambda of the posterior being maximized."""
        if self.prior_precision is not None:
            return float(self.prior_precision)
        if self.lambda1 > 0:
            return self.lambda2 / self.lambda1
        return float(self.lambda2)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


@dataclass
class TrainingRecord:
    """
    Per-iteration history of a training run plus parameter snapshots.
    """
    variant: str
    lambda_effective: float
    theta: ThetaParams = None
    rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    mle_summary: dict = None

    COLUMNS = (
        'iter', 'log_posterior', 'surrogate', 'reward_grad_norm', 'dyn_grad_norm',
        'data_dyn_loglik', 'illegal_rate', 'expert_gap',
    )

    def to_frame(self):
        frame = pd.DataFrame(self.rows, columns=list(self.COLUMNS))
        if frame['illegal_rate'].isna().all():
            frame = frame.drop(columns=['illegal_rate'])
        return frame

    @property
    def final_row(self):
        return self.rows[-1] if self.rows else None

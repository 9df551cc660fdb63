"""
Report types produced by the certification routines.
"""
import math
from dataclasses import asdict, dataclass

IDENTITY_TOL = 1e-8
BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class DecompositionReport:
    """
    Split of the discounted expert log-likelihood into the reward term and
    the value difference between estimated and true dynamics.

    Fields:
        discounted_loglik (float): sum rho_D(s, a) log pi^(a|s).
        ell_theta (float): sum rho_D(s, a) R(s, a) - sum mu(s) V(s).
        t1 (float): gamma * sum rho_D(s, a) (P^ V - P V)(s, a).
        residual (float): |discounted_loglik - (ell_theta + t1)|.
        epsilon_kl (float): E_{d_D}[KL(P(.|s, a) || P^(.|s, a))].
    """
    discounted_loglik: float
    ell_theta: float
    t1: float
    residual: float
    epsilon_kl: float

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class BoundReport:
    """
    Expert-learner performance gap against its certified upper bound.

    ``vacuous`` is set when the density ratio ``density_ratio_c`` is infinite
    while the dynamics error is positive; ``holds`` is then True trivially.
    """
    eps_policy: float
    eps_dynamics: float
    density_ratio_c: float
    r_max: float
    gamma: float
    bound: float
    observed_gap: float
    holds: bool
    vacuous: bool = False

    def as_dict(self):
        return asdict(self)

    @property
    def slack(self):
        return self.bound - self.observed_gap if math.isfinite(self.bound) else math.inf


@dataclass(frozen=True)
class ModelAdvantageReport:
    """
    Expert log-likelihood of the learner policy written as the real
    performance difference plus the two model-advantage terms.

    Fields:
        policy_loglik (float): sum rho^pi_P log pi^.
        performance_difference (float): sum rho^pi_P R - sum rho^pi^_P (R + H(pi^)).
        learner_model_term (float): gamma * sum rho^pi^_P (P - P^) V^.
        expert_model_term (float): gamma * sum rho^pi_P (P^ - P) V^.
        residual (float): Deviation of the identity.
    """
    policy_loglik: float
    performance_difference: float
    learner_model_term: float
    expert_model_term: float
    residual: float

    def as_dict(self):
        return asdict(self)

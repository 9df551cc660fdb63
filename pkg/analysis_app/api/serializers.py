import math

from rest_framework import serializers


class FiniteFloatField(serializers.FloatField):
    """FloatField that renders infinities and NaN as ``null`` so output stays strict JSON."""

    def to_representation(self, value):
        value = float(value)
        return value if math.isfinite(value) else None


class DecompositionReportSerializer(serializers.Serializer):
    """
    Serializer for DecompositionReport.

    Fields:
        discounted_loglik (float): Expert-occupancy weighted log-likelihood.
        ell_theta (float): Reward term of the decomposition.
        t1 (float): Value-difference term.
        residual (float): Deviation of the identity.
        epsilon_kl (float): Expert-weighted KL of the dynamics.
    """
    discounted_loglik = FiniteFloatField()
    ell_theta = FiniteFloatField()
    t1 = FiniteFloatField()
    residual = FiniteFloatField()
    epsilon_kl = FiniteFloatField()


class BoundReportSerializer(serializers.Serializer):
    """
    Serializer for BoundReport; an unbounded density ratio is written as null.
    """
    eps_policy = FiniteFloatField()
    eps_dynamics = FiniteFloatField()
    density_ratio_c = FiniteFloatField(allow_null=True)
    r_max = FiniteFloatField()
    gamma = FiniteFloatField()
    bound = FiniteFloatField(allow_null=True)
    observed_gap = FiniteFloatField()
    holds = serializers.BooleanField()
    vacuous = serializers.BooleanField()


class ModelAdvantageReportSerializer(serializers.Serializer):
    policy_loglik = FiniteFloatField()
    performance_difference = FiniteFloatField()
    learner_model_term = FiniteFloatField()
    expert_model_term = FiniteFloatField()
    residual = FiniteFloatField()


class T1CheckSerializer(serializers.Serializer):
    t1 = FiniteFloatField()
    bound = FiniteFloatField()
    within_bound = serializers.BooleanField()


class WitnessSerializer(serializers.Serializer):
    """
    Serializer for the unidentifiability demonstration of a checkpoint.
    """
    state = serializers.IntegerField()
    action = serializers.IntegerField()
    fraction = FiniteFloatField()
    lam = FiniteFloatField()
    policy_distance = FiniteFloatField()
    log_posterior = FiniteFloatField()
    witness_log_posterior = FiniteFloatField()
    posterior_decreased = serializers.BooleanField()


class DataErrorsSerializer(serializers.Serializer):
    """Finite-data error estimates; an infinite KL is written as null."""
    eps_policy = FiniteFloatField(allow_null=True)
    eps_dynamics = FiniteFloatField(allow_null=True)
